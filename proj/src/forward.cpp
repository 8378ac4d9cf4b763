/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/forward.hpp"

#include <cmath>
#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace esmdaloc {

DataBatch simulate_ensemble(const ForwardModel & model, const ParameterSpace & space, const Matrix & members,
                            std::size_t workers) {
  require(static_cast<std::size_t>(members.rows()) == model.n_params(), "simulate_ensemble: parameter count mismatch");
  require(space.size() == model.n_params(), "simulate_ensemble: parameter space does not match the model");
  const Eigen::Index n = members.cols();
  Matrix out(static_cast<Eigen::Index>(model.n_data()), n);
  parallel_for(static_cast<std::size_t>(n), workers, [&](std::size_t j) {
    const auto col = static_cast<Eigen::Index>(j);
    const Vector d = model.evaluate(space.to_physical(members.col(col)));
    if (static_cast<std::size_t>(d.size()) != model.n_data())
      throw NumericalError("simulate_ensemble: model returned the wrong number of data");
    if (!d.allFinite()) throw NumericalError("simulate_ensemble: non-finite prediction for member " + std::to_string(j));
    out.col(col) = d;
  });
  return DataBatch(std::move(out));
}

// -----------------------------------------------------------------------------

void ScalarBenchmarkSpec::validate() const {
  require(n_params >= 1, "scalar benchmark: n_params must be positive");
  require(n_dummy >= 0 && n_dummy < n_params, "scalar benchmark: n_dummy must be in [0, n_params)");
  require(n_series >= 1 && n_times >= 1, "scalar benchmark: n_series and n_times must be positive");
  require(activity > 0.0 && activity <= 1.0, "scalar benchmark: activity must be in (0, 1]");
  require(quadratic_scale >= 0.0, "scalar benchmark: quadratic_scale must be non-negative");
  require(prior_std > 0.0 && dummy_std > 0.0, "scalar benchmark: prior standard deviations must be positive");
}

namespace {
// Rate-type kinds only: oil rate, water cut, gas-oil ratio.
const char * const kSeriesKinds[] = {"wopr", "wwct", "wgor"};
constexpr double kKindScale[] = {100.0, 1.0, 100.0};
}  // namespace

ScalarBenchmark::ScalarBenchmark(const ScalarBenchmarkSpec & spec) : spec_(spec) {
  spec_.validate();
  const int n_inf = spec_.n_params - spec_.n_dummy;
  const int nt = spec_.n_times;
  const Eigen::Index nd = static_cast<Eigen::Index>(spec_.n_series) * nt;
  a_ = Matrix::Zero(nd, spec_.n_params);
  b_ = Matrix::Zero(nd, spec_.n_params);
  Rng rng(derive_seed(spec_.coefficient_seed, 0x5ca1a7ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < spec_.n_series; ++s) {
    const double scale = kKindScale[s % 3];
    std::vector<bool> active(static_cast<std::size_t>(n_inf));
    bool any = false;
    for (int i = 0; i < n_inf; ++i) {
      active[static_cast<std::size_t>(i)] = unit(rng) < spec_.activity;
      any = any || active[static_cast<std::size_t>(i)];
    }
    if (!any) active[static_cast<std::size_t>(std::uniform_int_distribution<int>(0, n_inf - 1)(rng))] = true;
    for (int i = 0; i < n_inf; ++i) {
      // Draw all coefficients so the stream layout does not depend on activity.
      const double a = 0.2 + 0.8 * unit(rng);
      const double tau_a = (0.2 + 0.8 * unit(rng)) * nt;
      const double b = unit(rng);
      const double tau_b = (0.2 + 0.8 * unit(rng)) * nt;
      if (!active[static_cast<std::size_t>(i)]) continue;
      for (int t = 0; t < nt; ++t) {
        const Eigen::Index row = static_cast<Eigen::Index>(s) * nt + t;
        a_(row, i) = scale * a * (1.0 - std::exp(-(t + 1.0) / tau_a));
        b_(row, i) = scale * spec_.quadratic_scale * b * (1.0 - std::exp(-(t + 1.0) / tau_b));
      }
    }
    for (int t = 0; t < nt; ++t)
      layout_.push_back(DatumInfo{kSeriesKinds[s % 3], t, std::nullopt});
  }
}

Vector ScalarBenchmark::evaluate(const Vector & m) const {
  require(m.size() == spec_.n_params, "scalar benchmark: parameter length mismatch");
  return a_ * m + b_ * m.cwiseAbs2();
}

std::vector<bool> ScalarBenchmark::dummy_mask() const {
  std::vector<bool> mask(static_cast<std::size_t>(spec_.n_params), false);
  for (int i = spec_.n_params - spec_.n_dummy; i < spec_.n_params; ++i) mask[static_cast<std::size_t>(i)] = true;
  return mask;
}

ParameterSpace ScalarBenchmark::parameter_space() const {
  const auto n = static_cast<Eigen::Index>(spec_.n_params);
  const int n_inf = spec_.n_params - spec_.n_dummy;
  std::vector<std::string> names;
  Vector mean(n);
  Vector var(n);
  for (int i = 0; i < spec_.n_params; ++i) {
    const bool dummy = i >= n_inf;
    names.push_back(dummy ? "dummy_" + std::to_string(i - n_inf) : "m_" + std::to_string(i));
    mean[i] = dummy ? spec_.dummy_mean : spec_.prior_mean;
    const double sd = dummy ? spec_.dummy_std : spec_.prior_std;
    var[i] = sd * sd;
  }
  Matrix cov = var.asDiagonal();
  return ParameterSpace(std::move(names), std::move(mean), std::move(cov), {}, dummy_mask());
}

Vector scalar_benchmark(const ScalarBenchmarkSpec & spec, const Vector & m) { return ScalarBenchmark(spec).evaluate(m); }

// -----------------------------------------------------------------------------

void GridFlowSpec::validate() const {
  require(nx >= 1 && ny >= 1, "grid flow: grid dimensions must be positive");
  require(cell_size > 0.0 && thickness > 0.0, "grid flow: cell size and thickness must be positive");
  require(porosity > 0.0 && porosity <= 1.0, "grid flow: porosity must be in (0, 1]");
  require(viscosity > 0.0 && total_compressibility > 0.0, "grid flow: viscosity and compressibility must be positive");
  require(n_report_times >= 1 && steps_per_report >= 1, "grid flow: need at least one report time and step");
  require(report_interval > 0.0, "grid flow: report interval must be positive");
  require(monitor_offset >= 1, "grid flow: monitor offset must be positive");
  const GridWells w = grid_wells(*this);
  for (const auto & c : w.monitors)
    require(c.i >= 0 && c.i < nx && c.j >= 0 && c.j < ny, "grid flow: monitor outside the grid");
}

GridWells grid_wells(const GridFlowSpec & spec) {
  GridWells w;
  auto centre_cells = [](int n) {
    return n % 2 == 0 ? std::vector<int>{n / 2 - 1, n / 2} : std::vector<int>{(n - 1) / 2};
  };
  for (int j : centre_cells(spec.ny))
    for (int i : centre_cells(spec.nx)) w.injector.push_back(GridCoord{i, j, 0});
  const int off = spec.monitor_offset;
  if (spec.nx == spec.ny) {
    // Rotate the north monitor about the centre node; exact on the integer lattice.
    const int n = spec.nx;
    GridCoord c{(n - 1) / 2, (n - 1) / 2 - off, 0};
    for (int r = 0; r < 4; ++r) {
      w.monitors.push_back(c);
      c = GridCoord{n - 1 - c.j, c.i, 0};
    }
  } else {
    const int ci = (spec.nx - 1) / 2;
    const int cj = (spec.ny - 1) / 2;
    w.monitors = {{ci, cj - off, 0}, {ci + off, cj, 0}, {ci, cj + off, 0}, {ci - off, cj, 0}};
  }
  return w;
}

std::vector<GridCoord> grid_geometry(const GridFlowSpec & spec) {
  std::vector<GridCoord> cells;
  cells.reserve(static_cast<std::size_t>(spec.nx * spec.ny));
  for (int j = 0; j < spec.ny; ++j)
    for (int i = 0; i < spec.nx; ++i) cells.push_back(GridCoord{i, j, 0});
  return cells;
}

Vector grid_flow_simulate(const GridFlowSpec & spec, const Vector & log_perm_field) {
  spec.validate();
  const int nx = spec.nx;
  const int ny = spec.ny;
  const Eigen::Index nc = static_cast<Eigen::Index>(nx) * ny;
  require(log_perm_field.size() == nc, "grid flow: field length must be nx * ny");
  require(log_perm_field.allFinite(), "grid flow: non-finite log-permeability");

  constexpr double kMilliDarcy = 9.869233e-16;  // m2
  constexpr double kDay = 86400.0;              // s
  constexpr double kBar = 1e5;                  // Pa
  const Vector k = log_perm_field.array().exp() * kMilliDarcy;
  const double volume = spec.cell_size * spec.cell_size * spec.thickness;
  const double dt = spec.report_interval * kDay / spec.steps_per_report;
  const double acc = volume * spec.porosity * spec.total_compressibility / dt;
  auto idx = [nx](int i, int j) { return static_cast<Eigen::Index>(i) + static_cast<Eigen::Index>(nx) * j; };

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(5 * nc));
  Vector diag = Vector::Constant(nc, acc);
  auto connect = [&](Eigen::Index a, Eigen::Index b) {
    // Square cells: transmissibility = harmonic k * h * dy / dx = harmonic k * h.
    const double kh = 2.0 * k[a] * k[b] / (k[a] + k[b]);
    const double t = kh * spec.thickness / spec.viscosity;
    trip.emplace_back(a, b, -t);
    trip.emplace_back(b, a, -t);
    diag[a] += t;
    diag[b] += t;
  };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx) connect(idx(i, j), idx(i + 1, j));
      if (j + 1 < ny) connect(idx(i, j), idx(i, j + 1));
    }
  for (Eigen::Index c = 0; c < nc; ++c) trip.emplace_back(c, c, diag[c]);
  Eigen::SparseMatrix<double> a(nc, nc);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) throw NumericalError("grid flow: factorization failed");

  const GridWells wells = grid_wells(spec);
  Vector source = Vector::Zero(nc);
  const double rate = spec.injection_rate / kDay / static_cast<double>(wells.injector.size());
  for (const auto & c : wells.injector) source[idx(c.i, c.j)] += rate;

  const int nt = spec.n_report_times;
  Vector out(static_cast<Eigen::Index>(wells.monitors.size()) * nt);
  Vector dp = Vector::Zero(nc);  // deviation from the initial pressure, Pa
  for (int t = 0; t < nt; ++t) {
    for (int s = 0; s < spec.steps_per_report; ++s) {
      const Vector rhs = acc * dp + source;
      dp = solver.solve(rhs);
      if (solver.info() != Eigen::Success)
        throw NumericalError("grid flow: linear solve failed at step " + std::to_string(t * spec.steps_per_report + s));
    }
    for (std::size_t w = 0; w < wells.monitors.size(); ++w) {
      const auto & c = wells.monitors[w];
      out[static_cast<Eigen::Index>(w) * nt + t] = spec.initial_pressure + dp[idx(c.i, c.j)] / kBar;
    }
  }
  return out;
}

GridFlowModel::GridFlowModel(const GridFlowSpec & spec) : spec_(spec) {
  spec_.validate();
  const GridWells wells = grid_wells(spec_);
  for (const auto & c : wells.monitors)
    for (int t = 0; t < spec_.n_report_times; ++t) layout_.push_back(DatumInfo{"pressure", t, c});
}

Vector GridFlowModel::evaluate(const Vector & permeability) const {
  require((permeability.array() > 0.0).all(), "grid flow: permeability must be positive");
  return grid_flow_simulate(spec_, permeability.array().log().matrix());
}

// -----------------------------------------------------------------------------

std::string to_string(GrfKernel k) { return k == GrfKernel::exponential ? "exponential" : "gaussian"; }

GrfKernel parse_grf_kernel(const std::string & s) {
  if (s == "exponential") return GrfKernel::exponential;
  if (s == "gaussian") return GrfKernel::gaussian;
  throw InvalidArgument("unknown GRF kernel '" + s + "'");
}

void GrfSpec::validate() const {
  require(correlation_length > 0.0, "GRF: correlation length must be positive");
  require(log_std > 0.0, "GRF: log_std must be positive");
  require(std::isfinite(log_mean), "GRF: log_mean must be finite");
}

Matrix grf_kernel_matrix(const GrfSpec & spec, const std::vector<GridCoord> & cells) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(cells.size());
  require(n >= 1, "GRF: at least one cell required");
  const double var = spec.log_std * spec.log_std;
  Matrix c(n, n);
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = b; a < n; ++a) {
      const double h = grid_distance(cells[static_cast<std::size_t>(a)], cells[static_cast<std::size_t>(b)]) /
                       spec.correlation_length;
      const double rho = spec.kernel == GrfKernel::exponential ? std::exp(-h) : std::exp(-h * h);
      c(a, b) = c(b, a) = var * rho;
    }
  return c;
}

ParameterSpace grf_parameter_space(const GrfSpec & spec, const std::vector<GridCoord> & cells) {
  Matrix cov = grf_kernel_matrix(spec, cells);
  const auto n = static_cast<Eigen::Index>(cells.size());
  std::vector<std::string> names;
  names.reserve(cells.size());
  for (const auto & c : cells) names.push_back("logk_" + std::to_string(c.i) + "_" + std::to_string(c.j));
  return ParameterSpace(std::move(names), Vector::Constant(n, spec.log_mean), std::move(cov),
                        std::vector<Transform>(cells.size(), Transform::log), {}, cells);
}

GrfSample sample_grf(const GrfSpec & spec, const std::vector<GridCoord> & cells, Eigen::Index n,
                     std::uint64_t seed) {
  const ParameterSpace space = grf_parameter_space(spec, cells);
  return GrfSample{sample_gaussian_members(space, n, seed), space.prior_cov()};
}

// -----------------------------------------------------------------------------

double NoiseSpec::fraction_for(const std::string & kind) const {
  const auto it = kind_fraction.find(kind);
  return it == kind_fraction.end() ? default_fraction : it->second;
}

void NoiseSpec::validate() const {
  require(default_fraction > 0.0, "noise: fractions must be positive");
  for (const auto & [kind, f] : kind_fraction) require(f > 0.0, "noise: fraction for '" + kind + "' must be positive");
  require(floor > 0.0, "noise: floor must be positive");
}

TruthAndObservations make_truth_and_observations(const ForwardModel & model, const ParameterSpace & space,
                                                 const NoiseSpec & noise, std::uint64_t seed) {
  noise.validate();
  require(space.size() == model.n_params(), "truth: parameter space does not match the model");
  TruthAndObservations out;
  out.truth = sample_gaussian_members(space, 1, derive_seed(seed, 0x7275746eULL)).matrix().col(0);
  out.truth_data = model.evaluate(space.to_physical(out.truth));
  if (!out.truth_data.allFinite()) throw NumericalError("truth: non-finite model output");
  const auto nd = static_cast<Eigen::Index>(model.n_data());
  const auto & layout = model.layout();
  out.obs.error_variance.resize(nd);
  out.obs.d_obs.resize(nd);
  Rng rng(derive_seed(seed, 0x6e6f6973ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < nd; ++i) {
    const auto & info = layout[static_cast<std::size_t>(i)];
    const double sd = std::max(noise.fraction_for(info.kind) * std::abs(out.truth_data[i]), noise.floor);
    out.obs.error_variance[i] = sd * sd;
    out.obs.d_obs[i] = out.truth_data[i] + sd * gauss(rng);
    out.obs.kind.push_back(info.kind);
    out.obs.location.push_back(info.location);
    out.obs.time_index.push_back(info.time_index);
  }
  out.obs.validate();
  return out;
}

}  // namespace esmdaloc
