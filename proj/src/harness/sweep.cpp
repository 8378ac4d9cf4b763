/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <limits>
#include <sstream>

#include "json.hpp"

#include "esmdaloc/harness.hpp"
#include "esmdaloc/matrix_io.hpp"

namespace esmdaloc::harness {

using json = nlohmann::ordered_json;

std::string cell_directory(const std::string & label, Eigen::Index n_e, int repeat) {
  return "cells/" + label + "_ne" + std::to_string(n_e) + "_r" + std::to_string(repeat);
}

std::size_t expected_forward_calls(const ExperimentConfig & config) {
  std::size_t total = 0;
  for (auto n : config.ensemble_sizes) total += static_cast<std::size_t>(n) * (config.n_assimilations + 1);
  return total * config.schemes.size() * static_cast<std::size_t>(config.repeats);
}

std::string metrics_csv(const std::vector<CellOutcome> & cells) {
  std::ostringstream os;
  os << "scheme,n_e,repeat,seed,objective_mean,objective_std,nv_all,nv_dummy,nv_normal,mean_offset,bc,js,"
        "forward_calls,status\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto & c : cells) {
    const MetricsReport m = c.metrics.value_or(MetricsReport{nan, nan, nan, nan, nan, nan, nan, nan});
    os << c.label << ',' << c.n_e << ',' << c.repeat << ',' << c.seed << ',' << format_double(m.objective_mean) << ','
       << format_double(m.objective_std) << ',' << format_double(m.nv_all) << ',' << format_double(m.nv_dummy) << ','
       << format_double(m.nv_normal) << ',' << format_double(m.mean_offset) << ',' << format_double(m.bc) << ','
       << format_double(m.js) << ',' << c.forward_calls << ',' << (c.ok() ? "ok" : "failed") << '\n';
  }
  return os.str();
}

namespace {

std::string space_json(const ParameterSpace & space) {
  json j;
  j["names"] = space.names();
  const Vector sd = space.prior_std();
  j["prior_mean"] = std::vector<double>(space.prior_mean().data(), space.prior_mean().data() + space.size());
  j["prior_std"] = std::vector<double>(sd.data(), sd.data() + sd.size());
  std::vector<std::string> tr;
  for (auto t : space.transforms()) tr.push_back(t == Transform::log ? "log" : "identity");
  j["transforms"] = tr;
  std::vector<bool> dummy = space.dummy_mask();
  j["dummy"] = dummy;
  return j.dump(2) + "\n";
}

std::string observations_csv(const TruthAndObservations & t) {
  std::ostringstream os;
  os << "index,kind,time,i,j,d_obs,error_variance,truth_data\n";
  const auto & o = t.obs;
  for (std::size_t k = 0; k < o.size(); ++k) {
    const auto & loc = o.location[k];
    os << k << ',' << o.kind[k] << ',' << o.time_index[k] << ',' << (loc ? std::to_string(loc->i) : "") << ','
       << (loc ? std::to_string(loc->j) : "") << ',' << format_double(o.d_obs[static_cast<Eigen::Index>(k)]) << ','
       << format_double(o.error_variance[static_cast<Eigen::Index>(k)]) << ','
       << format_double(t.truth_data[static_cast<Eigen::Index>(k)]) << '\n';
  }
  return os.str();
}

std::string objectives_csv(const RunResult & r) {
  std::ostringstream os;
  os << "iteration,member,objective\n";
  for (std::size_t k = 0; k < r.objectives.size(); ++k)
    for (Eigen::Index j = 0; j < r.objectives[k].size(); ++j)
      os << k << ',' << j << ',' << format_double(r.objectives[k][j]) << '\n';
  return os.str();
}

/// Mean taper per (cell, monitor) over the monitor's report times.
std::string localization_map_csv(const ParameterSpace & space, const ObservationSet & obs, const Matrix & r) {
  std::vector<GridCoord> monitors;
  std::vector<int> owner(obs.size());
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const GridCoord c = obs.location[k].value_or(GridCoord{-1, -1, 0});
    auto it = std::find(monitors.begin(), monitors.end(), c);
    if (it == monitors.end()) it = monitors.insert(monitors.end(), c);
    owner[k] = static_cast<int>(it - monitors.begin());
  }
  std::ostringstream os;
  os << "i,j,monitor,monitor_i,monitor_j,r_mean\n";
  const auto & geom = *space.geometry();
  for (std::size_t w = 0; w < monitors.size(); ++w) {
    for (std::size_t p = 0; p < geom.size(); ++p) {
      double sum = 0.0;
      int count = 0;
      for (std::size_t k = 0; k < obs.size(); ++k)
        if (owner[k] == static_cast<int>(w)) {
          sum += r(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
          ++count;
        }
      os << geom[p].i << ',' << geom[p].j << ',' << w << ',' << monitors[w].i << ',' << monitors[w].j << ','
         << format_double(sum / count) << '\n';
    }
  }
  return os.str();
}

void run_cell(const ExperimentConfig & config, const CaseSetup & setup, const fs::path & run_dir, CellOutcome & cell,
              std::size_t inner_workers) {
  const EsmdaConfig ec = esmda_config(config, cell.scheme, cell.n_e, cell.repeat, inner_workers);
  const fs::path dir = run_dir / cell.directory;
  fs::create_directories(dir);
  const RunResult res = run(ec, setup.space, *setup.model, setup.truth.obs, cell.n_e);
  cell.forward_calls = res.forward_calls;
  cell.warnings = res.warnings;
  write_matrix((dir / "prior.bin").string(), res.prior.matrix(), "prior ensemble");
  write_matrix((dir / "prior_data.bin").string(), res.prior_predicted.matrix(), "prior predicted data");
  const std::size_t na = res.posteriors.size();
  for (std::size_t k = 0; k < na; ++k) {
    const bool last = k + 1 == na;
    if (!last && !config.save_iterations) continue;
    const std::string stem = last ? "posterior" : "iter_" + std::to_string(k + 1);
    write_matrix((dir / (stem + ".bin")).string(), res.posteriors[k].matrix(), stem + " ensemble");
    write_matrix((dir / (stem + "_data.bin")).string(), res.predictions[k].matrix(), stem + " predicted data");
  }
  write_matrix((dir / "localization.bin").string(), res.localizations.front().matrix(), "localization at assimilation 1");
  if (ec.localization.schedule != Schedule::prior)
    for (std::size_t k = 1; k < na; ++k)
      write_matrix((dir / ("localization_" + std::to_string(k + 1) + ".bin")).string(),
                   res.localizations[k].matrix(), "localization at assimilation " + std::to_string(k + 1));
  write_text(dir / "objectives.csv", objectives_csv(res));
  if (config.case_kind == CaseKind::grid_flow && cell.repeat == 0)
    write_text(dir / "localization_map.csv",
               localization_map_csv(setup.space, setup.truth.obs, res.localizations.front().matrix()));
  cell.metrics = make_report(setup.space, setup.truth.obs, res.prior, res.final_ensemble(), res.final_predicted());
}

}  // namespace

SweepSummary run_sweep(const ExperimentConfig & config, const fs::path & run_dir, std::size_t workers) {
  config.validate();
  require(workers >= 1, "run_sweep: workers must be at least 1");
  const CaseSetup setup = build_case(config);
  // Cell directories from an earlier run here would otherwise leak into the manifest.
  if (fs::exists(run_dir / "manifest.json")) fs::remove_all(run_dir / "cells");
  fs::create_directories(run_dir);
  const std::string config_text = dump_config(config);
  write_text(run_dir / "config.yaml", config_text);
  write_text(run_dir / "space.json", space_json(setup.space));
  write_matrix((run_dir / "truth.bin").string(), Matrix(setup.truth.truth), "truth parameters");
  write_text(run_dir / "observations.csv", observations_csv(setup.truth));

  SweepSummary summary;
  summary.run_dir = run_dir;
  for (std::size_t s = 0; s < config.schemes.size(); ++s)
    for (auto n : config.ensemble_sizes)
      for (int r = 0; r < config.repeats; ++r) {
        CellOutcome c;
        c.scheme = s;
        c.label = config.schemes[s].label;
        c.n_e = n;
        c.repeat = r;
        c.seed = cell_seed(config.base_seed, s, n, r);
        c.ensemble_seed = ensemble_seed(config.base_seed, n, r);
        c.directory = cell_directory(c.label, n, r);
        summary.cells.push_back(std::move(c));
      }
  const std::size_t n_cells = summary.cells.size();
  const std::size_t inner = n_cells >= workers ? 1 : workers / n_cells;
  parallel_for(n_cells, workers, [&](std::size_t i) {
    CellOutcome & cell = summary.cells[i];
    try {
      run_cell(config, setup, run_dir, cell, inner);
    } catch (const std::exception & e) {
      cell.error = e.what();
      cell.metrics.reset();
    }
  });
  for (const auto & c : summary.cells) {
    summary.failures += c.ok() ? 0 : 1;
    summary.forward_calls += c.forward_calls;
  }
  write_text(run_dir / "metrics.csv", metrics_csv(summary.cells));
  write_manifest(run_dir, config_text, "run", summary.cells);
  return summary;
}

}  // namespace esmdaloc::harness
