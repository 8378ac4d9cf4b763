/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <map>
#include <sstream>

#include "json.hpp"

#include "esmdaloc/harness.hpp"
#include "esmdaloc/matrix_io.hpp"

namespace esmdaloc::harness {

using json = nlohmann::ordered_json;

namespace {

constexpr std::uint64_t kReferenceTag = 0x72656665ULL;

json load_json(const fs::path & path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception & e) {
    throw std::runtime_error("cannot parse '" + path.string() + "': " + e.what());
  }
}

Matrix load_block(const fs::path & path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("missing file '" + path.string() + "'");
  return read_matrix(path.string());
}

/// Observation kinds in data order, read back from observations.csv.
std::vector<std::string> observation_kinds(const fs::path & run_dir) {
  std::istringstream in(read_text(run_dir / "observations.csv"));
  std::string line;
  std::getline(in, line);
  std::vector<std::string> kinds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto a = line.find(',');
    const auto b = line.find(',', a + 1);
    if (a == std::string::npos || b == std::string::npos) throw std::runtime_error("malformed observations.csv");
    kinds.push_back(line.substr(a + 1, b - a - 1));
  }
  return kinds;
}

}  // namespace

ReferenceOutcome run_reference(const ExperimentConfig & config, const fs::path & out_dir, std::size_t workers) {
  config.validate();
  const CaseSetup setup = build_case(config);
  GoldStandard gold = gold_standard(setup.space, *setup.model, config.reference_size,
                                    derive_seed(config.base_seed, kReferenceTag), workers);
  const LocalizationConfig defaults;
  LocalizationMatrix r_ref =
      po_localization(gold.cross_cov, gold.var_m, gold.var_d, config.ensemble_sizes.front(), defaults.eta);
  Matrix localized = r_ref.matrix().cwiseProduct(gold.correlation);
  fs::create_directories(out_dir);
  const std::string config_text = dump_config(config);
  write_text(out_dir / "config.yaml", config_text);
  write_matrix((out_dir / "correlation.bin").string(), gold.correlation, "reference correlation");
  write_matrix((out_dir / "cross_cov.bin").string(), gold.cross_cov, "reference cross-covariance");
  write_matrix((out_dir / "var_m.bin").string(), Matrix(gold.var_m), "reference parameter variances");
  write_matrix((out_dir / "var_d.bin").string(), Matrix(gold.var_d), "reference data variances");
  write_matrix((out_dir / "localization.bin").string(), r_ref.matrix(), "reference po localization");
  write_matrix((out_dir / "localized_correlation.bin").string(), localized, "reference localized correlation");
  write_manifest(out_dir, config_text, "reference", {});
  return ReferenceOutcome{out_dir, std::move(gold), std::move(r_ref), std::move(localized)};
}

CompareOutcome compare_run(const fs::path & run_dir, const fs::path & reference_dir) {
  const json manifest = load_json(run_dir / "manifest.json");
  const Matrix ref = load_block(reference_dir / "correlation.bin");
  const std::vector<std::string> kinds = observation_kinds(run_dir);
  const json space = load_json(run_dir / "space.json");
  const auto names = space["names"].get<std::vector<std::string>>();
  if (ref.rows() != static_cast<Eigen::Index>(names.size()) || ref.cols() != static_cast<Eigen::Index>(kinds.size()))
    throw InvalidArgument("compare: reference is " + std::to_string(ref.rows()) + " x " + std::to_string(ref.cols()) +
                          " but the run has " + std::to_string(names.size()) + " parameters and " +
                          std::to_string(kinds.size()) + " data");
  std::vector<std::string> kind_order;
  for (const auto & k : kinds)
    if (std::find(kind_order.begin(), kind_order.end(), k) == kind_order.end()) kind_order.push_back(k);

  struct Acc {
    double fro = 0.0;
    double spec = 0.0;
    int count = 0;
    Matrix breakdown;  // parameter x kind
  };
  std::vector<std::string> labels;
  std::vector<Eigen::Index> sizes;
  std::map<std::pair<std::string, Eigen::Index>, Acc> acc;
  for (const auto & cell : manifest.at("cells")) {
    const auto label = cell.at("label").get<std::string>();
    const auto n_e = cell.at("n_e").get<Eigen::Index>();
    if (std::find(labels.begin(), labels.end(), label) == labels.end()) labels.push_back(label);
    if (std::find(sizes.begin(), sizes.end(), n_e) == sizes.end()) sizes.push_back(n_e);
    if (cell.at("status").get<std::string>() != "ok") continue;
    const fs::path dir = run_dir / cell.at("directory").get<std::string>();
    const Matrix m = load_block(dir / "prior.bin");
    const Matrix d = load_block(dir / "prior_data.bin");
    const Matrix r = load_block(dir / "localization.bin");
    const Matrix rho = correlation_from_cov(estimate_cross_cov(m, d), estimate_variances(m), estimate_variances(d));
    if (r.rows() != rho.rows() || r.cols() != rho.cols()) throw InvalidArgument("compare: localization shape mismatch");
    const Matrix localized = r.cwiseProduct(rho);
    const CorrelationError err = correlation_error(localized, ref);
    Acc & a = acc[{label, n_e}];
    if (a.count == 0) a.breakdown = Matrix::Zero(ref.rows(), static_cast<Eigen::Index>(kind_order.size()));
    a.fro += err.frobenius_rmse;
    a.spec += err.spectral;
    ++a.count;
    const Matrix delta2 = (localized - ref).cwiseAbs2();
    for (std::size_t q = 0; q < kind_order.size(); ++q) {
      Vector sum = Vector::Zero(ref.rows());
      int n = 0;
      for (std::size_t k = 0; k < kinds.size(); ++k)
        if (kinds[k] == kind_order[q]) {
          sum += delta2.col(static_cast<Eigen::Index>(k));
          ++n;
        }
      a.breakdown.col(static_cast<Eigen::Index>(q)) += (sum / n).cwiseSqrt();
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream table;
  table << "n_e";
  for (const auto & l : labels) table << ',' << l << "_frobenius," << l << "_spectral";
  table << '\n';
  std::ostringstream breakdown;
  breakdown << "scheme,n_e,parameter,kind,rmse\n";
  for (auto n : sizes) {
    table << n;
    for (const auto & l : labels) {
      const auto it = acc.find({l, n});
      const bool have = it != acc.end() && it->second.count > 0;
      table << ',' << format_double(have ? it->second.fro / it->second.count : nan) << ','
            << format_double(have ? it->second.spec / it->second.count : nan);
    }
    table << '\n';
  }
  for (const auto & l : labels)
    for (auto n : sizes) {
      const auto it = acc.find({l, n});
      if (it == acc.end() || it->second.count == 0) continue;
      const Matrix mean = it->second.breakdown / it->second.count;
      for (Eigen::Index p = 0; p < mean.rows(); ++p)
        for (std::size_t q = 0; q < kind_order.size(); ++q)
          breakdown << l << ',' << n << ',' << names[static_cast<std::size_t>(p)] << ',' << kind_order[q] << ','
                    << format_double(mean(p, static_cast<Eigen::Index>(q))) << '\n';
    }
  return {table.str(), breakdown.str()};
}

std::string export_histograms(const fs::path & run_dir, int bins) {
  require(bins >= 1, "export_histograms: bins must be positive");
  const json manifest = load_json(run_dir / "manifest.json");
  const json space = load_json(run_dir / "space.json");
  const auto names = space["names"].get<std::vector<std::string>>();
  const auto mean = space["prior_mean"].get<std::vector<double>>();
  const auto sd = space["prior_std"].get<std::vector<double>>();
  std::ostringstream os;
  os << "scheme,n_e,repeat,stage,parameter,bin,lower,upper,count\n";
  for (const auto & cell : manifest.at("cells")) {
    if (cell.at("status").get<std::string>() != "ok") continue;
    const fs::path dir = run_dir / cell.at("directory").get<std::string>();
    for (const char * stage : {"prior", "posterior"}) {
      const Matrix m = load_block(dir / (std::string(stage) + ".bin"));
      if (m.rows() != static_cast<Eigen::Index>(names.size()))
        throw InvalidArgument("export_histograms: ensemble does not match space.json");
      for (Eigen::Index p = 0; p < m.rows(); ++p) {
        const auto pi = static_cast<std::size_t>(p);
        const double half = 4.0 * (sd[pi] > 0.0 ? sd[pi] : 1.0);
        const double lo = mean[pi] - half;
        const double width = 2.0 * half / bins;
        std::vector<long> count(static_cast<std::size_t>(bins), 0);
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          const double x = (m(p, j) - lo) / width;
          const int b = x < 0.0 ? 0 : x >= bins ? bins - 1 : static_cast<int>(x);
          ++count[static_cast<std::size_t>(b)];
        }
        for (int b = 0; b < bins; ++b)
          os << cell.at("label").get<std::string>() << ',' << cell.at("n_e").get<long>() << ','
             << cell.at("repeat").get<int>() << ',' << stage << ',' << names[pi] << ',' << b << ','
             << format_double(lo + b * width) << ',' << format_double(lo + (b + 1) * width) << ','
             << count[static_cast<std::size_t>(b)] << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace esmdaloc::harness
