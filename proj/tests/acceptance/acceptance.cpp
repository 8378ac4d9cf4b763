/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

// Acceptance runner: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1).

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <thread>

#include "esmdaloc/harness.hpp"

using namespace esmdaloc;
namespace h = esmdaloc::harness;

namespace {

// Tolerances and sizes.
constexpr double kRegressionIdentityTol = 1e-8;
constexpr double kCmIdentityTol = 1e-10;
constexpr double kLinearMeanTol = 0.05;
constexpr double kLinearCovRelTol = 0.10;
constexpr Eigen::Index kLinearMembers = 2000;
constexpr double kMinDummyRetention = 0.8;
constexpr double kObjectiveRatio = 1.5;
constexpr Eigen::Index kRetentionMembers = 100;
constexpr int kRetentionRepeats = 10;
constexpr Eigen::Index kCorrelationMembers = 200;
constexpr int kCorrelationSeeds = 5;
constexpr Eigen::Index kReferenceMembers = 5000;
constexpr double kMonotoneSlack = 0.02;
constexpr int kMonotoneRepeats = 5;
constexpr double kGcTol = 1e-6;
constexpr double kGcContinuityTol = 1e-9;
constexpr double kSymmetryTol = 1e-9;
constexpr int kOracleInstances = 100;
constexpr double kOracleTol = 1e-10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

Matrix random_matrix(Rng & rng, Eigen::Index r, Eigen::Index c) {
  Matrix m(r, c);
  fill_standard_normal(rng, m);
  return m;
}

int uniform_int(Rng & rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

ParameterSpace unit_space(Eigen::Index n) {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < n; ++i) names.push_back("p" + std::to_string(i));
  return ParameterSpace(names, Vector::Zero(n), Matrix::Identity(n, n));
}

ObservationSet make_obs(const Vector & d, const Vector & var) {
  ObservationSet o;
  o.d_obs = d;
  o.error_variance = var;
  o.kind.assign(static_cast<std::size_t>(d.size()), "d");
  o.location.assign(static_cast<std::size_t>(d.size()), std::nullopt);
  o.time_index.assign(static_cast<std::size_t>(d.size()), 0);
  return o;
}

class LinearModel final : public ForwardModel {
 public:
  explicit LinearModel(Matrix g) : g_(std::move(g)) {
    for (Eigen::Index k = 0; k < g_.rows(); ++k) layout_.push_back({"d", 0, std::nullopt});
  }
  std::size_t n_params() const override { return static_cast<std::size_t>(g_.cols()); }
  const std::vector<DatumInfo> & layout() const override { return layout_; }
  Vector evaluate(const Vector & m) const override { return g_ * m; }

 private:
  Matrix g_;
  std::vector<DatumInfo> layout_;
};

/// Scalar-benchmark experiment with the given schemes on the default case.
h::ExperimentConfig scalar_experiment(const std::vector<std::string> & schemes) {
  std::string yaml = "case: scalar_benchmark\nschemes: [";
  for (std::size_t i = 0; i < schemes.size(); ++i) yaml += (i ? ", " : "") + schemes[i];
  yaml += "]\n";
  return h::parse_config(yaml);
}

// -----------------------------------------------------------------------------

Outcome regression_identity() {
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const int nm = uniform_int(rng, 1, 10), nd = uniform_int(rng, 1, 6), ne = uniform_int(rng, nm + 2, 50);
    const Matrix a = random_matrix(rng, nm, nm);
    const Matrix prior_cov = a * a.transpose() + 0.1 * Matrix::Identity(nm, nm);
    std::vector<std::string> names(static_cast<std::size_t>(nm), "");
    for (int i = 0; i < nm; ++i) names[static_cast<std::size_t>(i)] = "x" + std::to_string(i);
    const ParameterSpace space(names, random_matrix(rng, nm, 1).col(0), prior_cov);
    const Matrix x = random_matrix(rng, nm, ne);
    const Matrix y = random_matrix(rng, nd, nm) * x + 0.5 * random_matrix(rng, nd, ne);
    const auto model = fit(Ensemble(x), DataBatch(y), RegressorSpec::defaults(RegressorKind::linear));
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(t);
    const Eigen::Index n_super = 2000;
    const Matrix super = ml_covariance(model, space, n_super, seed);
    const Matrix c_lr = estimate_auto_cov(sample_prior(space, n_super, seed).matrix());
    const Matrix factored = c_lr * estimate_auto_cov(x).ldlt().solve(estimate_cross_cov(x, y));
    worst = std::max(worst, (super - factored).cwiseAbs().maxCoeff());
  }
  return {worst <= kRegressionIdentityTol, "max abs deviation " + fmt(worst) + " over 20 instances"};
}

Outcome cm_identity() {
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int nm = uniform_int(rng, 1, 12), nd = uniform_int(rng, 1, 8);
    const Matrix x = random_matrix(rng, nm, nm + uniform_int(rng, 2, 30));
    const Matrix cmm = estimate_auto_cov(x);
    const Matrix cmd = random_matrix(rng, nm, nd);
    worst = std::max(worst, (cm_correct_covariance(cmm, cmm, cmd).covariance - cmd).cwiseAbs().maxCoeff());
  }
  return {worst <= kCmIdentityTol, "max abs deviation " + fmt(worst) + " over 50 instances"};
}

Outcome linear_gaussian() {
  Rng rng(303);
  const Matrix g = random_matrix(rng, 6, 5);
  const LinearModel model(g);
  const ParameterSpace space = unit_space(5);
  const Vector truth = random_matrix(rng, 5, 1).col(0);
  const Vector var = Vector::Constant(6, 0.25);
  const ObservationSet obs = make_obs(g * truth, var);
  const Matrix s = g * g.transpose() + Matrix(var.asDiagonal());
  const Matrix k = g.transpose() * s.inverse();
  const Vector exact_mean = k * obs.d_obs;
  const Matrix exact_cov = Matrix::Identity(5, 5) - k * g;

  std::vector<Vector> means;
  std::vector<Matrix> covs;
  bool ok = true;
  std::ostringstream detail;
  for (int na : {1, 4}) {
    EsmdaConfig c;
    c.n_assimilations = na;
    c.seed = 404;
    c.workers = worker_count();
    const Matrix post = run(c, space, model, obs, kLinearMembers).final_ensemble().matrix();
    means.push_back(post.rowwise().mean());
    covs.push_back(estimate_auto_cov(post));
    const double dm = (means.back() - exact_mean).cwiseAbs().maxCoeff();
    const double dc = (covs.back() - exact_cov).norm() / exact_cov.norm();
    ok = ok && dm <= kLinearMeanTol && dc <= kLinearCovRelTol;
    detail << "N_a=" << na << ": mean " << fmt(dm) << ", cov " << fmt(dc) << "; ";
  }
  const double dm = (means[0] - means[1]).cwiseAbs().maxCoeff();
  const double dc = (covs[0] - covs[1]).norm() / covs[1].norm();
  ok = ok && dm <= kLinearMeanTol && dc <= kLinearCovRelTol;
  detail << "between: mean " << fmt(dm) << ", cov " << fmt(dc);
  return {ok, detail.str()};
}

Outcome dummy_retention() {
  h::ExperimentConfig cfg = scalar_experiment({"none", "po", "cm", "ml"});
  cfg.ensemble_sizes = {kRetentionMembers};
  cfg.repeats = kRetentionRepeats;
  const h::CaseSetup setup = h::build_case(cfg);
  const std::size_t ns = cfg.schemes.size();
  std::vector<double> nv(ns, 0.0), obj(ns, 0.0);
  for (std::size_t s = 0; s < ns; ++s)
    for (int r = 0; r < cfg.repeats; ++r) {
      const EsmdaConfig ec = h::esmda_config(cfg, s, kRetentionMembers, r, worker_count());
      const RunResult res = run(ec, setup.space, *setup.model, setup.truth.obs, kRetentionMembers);
      const MetricsReport m =
          make_report(setup.space, setup.truth.obs, res.prior, res.final_ensemble(), res.final_predicted());
      nv[s] += m.nv_dummy / cfg.repeats;
      obj[s] += m.objective_mean / cfg.repeats;
    }
  const bool order = nv[3] > nv[1] && nv[1] > nv[0];
  const bool retain = nv[2] >= kMinDummyRetention && nv[3] >= kMinDummyRetention;
  bool match = true;
  for (std::size_t s = 1; s < ns; ++s) match = match && obj[s] <= kObjectiveRatio * obj[0];
  std::ostringstream d;
  d << "NV_dummy none " << fmt(nv[0]) << ", po " << fmt(nv[1]) << ", cm " << fmt(nv[2]) << ", ml " << fmt(nv[3])
    << "; objective none " << fmt(obj[0]) << ", po " << fmt(obj[1]) << ", cm " << fmt(obj[2]) << ", ml "
    << fmt(obj[3]);
  return {order && retain && match, d.str()};
}

Outcome correlation_ordering() {
  h::ExperimentConfig cfg = scalar_experiment({"none", "po", "cm", "ml"});
  cfg.ensemble_sizes = {kCorrelationMembers};
  const h::CaseSetup setup = h::build_case(cfg);
  const Matrix ref = gold_standard_correlation(setup.space, *setup.model, kReferenceMembers,
                                               derive_seed(cfg.base_seed, 0x72656665ULL), worker_count());
  const std::size_t ns = cfg.schemes.size();
  std::vector<double> err(ns, 0.0);
  for (int r = 0; r < kCorrelationSeeds; ++r) {
    const EsmdaConfig base = h::esmda_config(cfg, 0, kCorrelationMembers, r, worker_count());
    const Ensemble prior = sample_prior(setup.space, kCorrelationMembers, base.seed);
    const DataBatch d = simulate_ensemble(*setup.model, setup.space, prior.matrix(), worker_count());
    const Matrix rho = correlation_from_cov(estimate_cross_cov(prior, d), estimate_variances(prior.matrix()),
                                            estimate_variances(d.matrix()));
    for (std::size_t s = 0; s < ns; ++s) {
      const EsmdaConfig ec = h::esmda_config(cfg, s, kCorrelationMembers, r, worker_count());
      const LocalizationResult lr =
          compute_localization(ec, setup.space, setup.truth.obs, prior.matrix(), d.matrix(), kCorrelationMembers, 0);
      err[s] += correlation_error(lr.r.matrix().cwiseProduct(rho), ref).frobenius_rmse / kCorrelationSeeds;
    }
  }
  const bool ok = err[3] < err[1] && err[1] < err[0] && err[2] < err[1];
  return {ok, "frobenius none " + fmt(err[0]) + ", po " + fmt(err[1]) + ", cm " + fmt(err[2]) + ", ml " + fmt(err[3])};
}

Outcome size_monotonicity() {
  h::ExperimentConfig cfg = scalar_experiment({"none"});
  const h::CaseSetup setup = h::build_case(cfg);
  const std::vector<Eigen::Index> sizes{50, 100, 200, 500};
  std::vector<double> nv;
  for (auto n : sizes) {
    double acc = 0.0;
    for (int r = 0; r < kMonotoneRepeats; ++r) {
      const EsmdaConfig ec = h::esmda_config(cfg, 0, n, r, worker_count());
      const RunResult res = run(ec, setup.space, *setup.model, setup.truth.obs, n);
      acc += normalized_variance(res.prior, res.final_ensemble()) / kMonotoneRepeats;
    }
    nv.push_back(acc);
  }
  bool ok = true;
  std::ostringstream d;
  d << "NV_all";
  for (std::size_t i = 0; i < nv.size(); ++i) {
    d << " " << sizes[i] << ":" << fmt(nv[i]);
    if (i > 0) ok = ok && nv[i] >= nv[i - 1] - kMonotoneSlack;
  }
  return {ok, d.str()};
}

Outcome defaults() {
  const h::ExperimentConfig c = h::default_config();
  const LocalizationConfig lc;
  const EsmdaConfig ec;
  const h::ExperimentConfig grid = h::parse_config("case: grid_flow\nschemes: [distance]\n");
  bool ok = lc.eta == 1e-3 && c.schemes.front().localization.eta == 1e-3;
  ok = ok && c.super_ensemble_size == 5000 && ec.super_ensemble_size == 5000;
  ok = ok && c.n_assimilations == 4 && ec.alphas() == std::vector<double>(4, 4.0);
  ok = ok && h::esmda_config(c, 0, 100, 0, 1).alphas() == std::vector<double>(4, 4.0);
  ok = ok && c.repeats == 10 && c.reference_size == 5000;
  ok = ok && grid.schemes.front().localization.correlation_length == 10.0;
  return {ok, "eta 1e-3, N_s 5000, alpha 4x4, repeats 10, reference 5000, GC length 10"};
}

Outcome gaspari_cohn_values() {
  const double g1 = gaspari_cohn(1.0);
  bool ok = gaspari_cohn(0.0) == 1.0 && std::abs(g1 - 0.208333) <= kGcTol && gaspari_cohn(2.0) == 0.0;
  double jump = 0.0;
  for (double z : {1.0, 2.0}) jump = std::max(jump, std::abs(gaspari_cohn(z - 1e-12) - gaspari_cohn(z + 1e-12)));
  ok = ok && jump <= kGcContinuityTol;
  return {ok, "GC(1) = " + fmt(g1) + ", branch jump " + fmt(jump)};
}

Outcome grid_shape() {
  const GridFlowSpec spec;
  const GridFlowModel model(spec);
  const Vector d = grid_flow_simulate(spec, Vector::Constant(spec.nx * spec.ny, std::log(100.0)));
  const int t = spec.n_report_times;
  double asym = 0.0;
  for (int w = 1; w < 4; ++w) asym = std::max(asym, (d.segment(w * t, t) - d.segment(0, t)).cwiseAbs().maxCoeff());
  const bool ok = model.n_data() == 96 && model.n_params() == 1024 && d.size() == 96 && asym <= kSymmetryTol;
  return {ok, std::to_string(model.n_data()) + " data, " + std::to_string(model.n_params()) +
                  " parameters, monitor asymmetry " + fmt(asym)};
}

Matrix loop_cov(const Matrix & a, const Matrix & b) {
  const Eigen::Index n = a.cols();
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index k = 0; k < b.rows(); ++k) {
      double ma = 0.0, mb = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        ma += a(i, j);
        mb += b(k, j);
      }
      ma /= static_cast<double>(n);
      mb /= static_cast<double>(n);
      double s = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) s += (a(i, j) - ma) * (b(k, j) - mb);
      out(i, k) = s / static_cast<double>(n - 1);
    }
  return out;
}

Outcome oracle_suites() {
  Rng rng(1111);
  double worst[7] = {0, 0, 0, 0, 0, 0, 0};
  for (int t = 0; t < kOracleInstances; ++t) {
    const int nm = uniform_int(rng, 1, 8), nd = uniform_int(rng, 1, 8), n = uniform_int(rng, 2, 12);
    const Matrix m = random_matrix(rng, nm, n), d = random_matrix(rng, nd, n), m2 = random_matrix(rng, nm, n + 2);
    const Matrix cmd = loop_cov(m, d), cmm = loop_cov(m, m), cdd = loop_cov(d, d), c22 = loop_cov(m2, m2);
    worst[0] = std::max(worst[0], (estimate_cross_cov(m, d) - cmd).cwiseAbs().maxCoeff());
    worst[1] = std::max(worst[1], (estimate_auto_cov(m) - cmm).cwiseAbs().maxCoeff());
    const Matrix rho = correlation_from_cov(estimate_cross_cov(m, d), estimate_variances(m), estimate_variances(d));
    for (int i = 0; i < nm; ++i)
      for (int k = 0; k < nd; ++k)
        worst[2] = std::max(worst[2], std::abs(rho(i, k) - cmd(i, k) / std::sqrt(cmm(i, i) * cdd(k, k))));

    const Vector var = (random_matrix(rng, nd, 1).col(0).array().abs() + 0.1).matrix();
    const ObservationSet obs = make_obs(random_matrix(rng, nd, 1).col(0), var);
    const Vector o = objective(obs, DataBatch(d));
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < nd; ++k) s += (obs.d_obs[k] - d(k, j)) * (obs.d_obs[k] - d(k, j)) / var[k];
      worst[3] = std::max(worst[3], std::abs(o[j] - s / (2.0 * nd)));
    }
    double nv = 0.0, off = 0.0;
    for (int i = 0; i < nm; ++i) {
      nv += c22(i, i) / cmm(i, i);
      double a = 0.0, b = 0.0;
      for (int j = 0; j < n; ++j) a += m(i, j);
      for (int j = 0; j < n + 2; ++j) b += m2(i, j);
      off += std::abs(b / (n + 2) - a / n);
    }
    worst[4] = std::max(worst[4], std::abs(normalized_variance(Ensemble(m), Ensemble(m2)) - nv / nm));
    worst[5] = std::max(worst[5], std::abs(mean_offset(Ensemble(m), Ensemble(m2)) - off / nm));
    const Matrix x = random_matrix(rng, nm, nd), y = random_matrix(rng, nm, nd);
    double s = 0.0;
    for (int i = 0; i < nm; ++i)
      for (int k = 0; k < nd; ++k) s += (x(i, k) - y(i, k)) * (x(i, k) - y(i, k));
    worst[6] = std::max(worst[6], std::abs(correlation_error(x, y).frobenius_rmse - std::sqrt(s / (nm * nd))));
  }
  const char * names[7] = {"cross_cov", "auto_cov", "correlation", "objective", "nv", "mean_offset", "frobenius"};
  bool ok = true;
  std::ostringstream d;
  d << kOracleInstances << " instances;";
  for (int i = 0; i < 7; ++i) {
    ok = ok && worst[i] <= kOracleTol;
    d << " " << names[i] << " " << fmt(worst[i]);
  }
  return {ok, d.str()};
}

Outcome determinism() {
  h::ExperimentConfig cfg = h::parse_config(R"(
case: scalar_benchmark
seed: 17
repeats: 2
ensemble_sizes: [25, 40]
save_iterations: false
esmda: {n_assimilations: 3, super_ensemble_size: 500}
schemes:
  - none
  - po
  - {name: cb_soft, eta: 0.1}
  - cm
  - {name: ml, schedule: all, regressor: {kind: gbdt, n_estimators: 20}}
  - {name: combined_ml_cm, regressor: {kind: random_forest, n_estimators: 10}}
)");
  const h::fs::path root = h::fs::temp_directory_path() / "esmdaloc_acceptance_determinism";
  h::fs::remove_all(root);
  std::vector<std::string> texts;
  for (std::size_t w : {std::size_t{1}, std::size_t{3}, std::size_t{8}}) {
    const auto dir = root / ("w" + std::to_string(w));
    const auto s = h::run_sweep(cfg, dir, w);
    if (s.failures != 0) return {false, "sweep reported failed cells"};
    texts.push_back(h::read_text(dir / "metrics.csv"));
  }
  const auto again = h::run_sweep(cfg, root / "w1", 2);
  texts.push_back(h::read_text(root / "w1" / "metrics.csv"));
  h::fs::remove_all(root);
  bool ok = true;
  for (const auto & t : texts) ok = ok && t == texts.front();
  return {ok, "workers 1, 3, 8 and a rerun with 2: " + std::to_string(again.cells.size()) + " cells, " +
                  (ok ? "identical" : "different") + " metrics.csv"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria{
      {"AC1", regression_identity}, {"AC2", cm_identity},        {"AC3", linear_gaussian},
      {"AC4", dummy_retention},     {"AC5", correlation_ordering}, {"AC6", size_monotonicity},
      {"AC7", defaults},            {"AC8", gaspari_cohn_values}, {"AC9", grid_shape},
      {"AC10", oracle_suites},      {"AC11", determinism}};
  int failed = 0;
  for (const auto & [name, fn] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception & e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s (%.1f s) %s\n", name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
