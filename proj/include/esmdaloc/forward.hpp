/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "esmdaloc/ensemble.hpp"

namespace esmdaloc {

struct DatumInfo {
  std::string kind;
  int time_index = 0;
  std::optional<GridCoord> location;
};

/// A deterministic simulator mapping physical parameter values to data.
/// Implementations must be safe to call concurrently.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual std::size_t n_params() const = 0;
  virtual const std::vector<DatumInfo> & layout() const = 0;
  std::size_t n_data() const { return layout().size(); }
  virtual Vector evaluate(const Vector & physical) const = 0;
};

/// Back-transforms every member and evaluates the model on up to `workers`
/// threads. Returns an N_d x N batch.
DataBatch simulate_ensemble(const ForwardModel & model, const ParameterSpace & space, const Matrix & members,
                            std::size_t workers = 1);

// -----------------------------------------------------------------------------
// Scalar benchmark: d = A m + B (m o m) where the rows of A and B carry a
// smooth time profile per (series, parameter) pair, each series is driven by
// a random subset of the informative parameters and dummy columns are zero.

struct ScalarBenchmarkSpec {
  int n_params = 20;
  int n_dummy = 5;
  int n_series = 18;
  int n_times = 5;
  std::uint64_t coefficient_seed = 7;
  double activity = 0.5;         ///< chance that an informative parameter drives a series
  double quadratic_scale = 0.3;  ///< size of B relative to A
  // Prior of the informative parameters (multiplier-like) and of the dummies.
  double prior_mean = 1.0;
  double prior_std = 0.2;
  double dummy_mean = 0.0;
  double dummy_std = 1.0;

  void validate() const;
};

class ScalarBenchmark final : public ForwardModel {
 public:
  explicit ScalarBenchmark(const ScalarBenchmarkSpec & spec);

  std::size_t n_params() const override { return static_cast<std::size_t>(spec_.n_params); }
  const std::vector<DatumInfo> & layout() const override { return layout_; }
  Vector evaluate(const Vector & m) const override;

  const ScalarBenchmarkSpec & spec() const { return spec_; }
  const Matrix & linear() const { return a_; }
  const Matrix & quadratic() const { return b_; }
  /// The last n_dummy parameters are dummies.
  std::vector<bool> dummy_mask() const;
  ParameterSpace parameter_space() const;

 private:
  ScalarBenchmarkSpec spec_;
  Matrix a_;
  Matrix b_;
  std::vector<DatumInfo> layout_;
};

Vector scalar_benchmark(const ScalarBenchmarkSpec & spec, const Vector & m);

// -----------------------------------------------------------------------------
// Single-phase slightly compressible pressure diffusion on a 2D grid with a
// central injector and four monitors, solved with implicit Euler.

struct GridFlowSpec {
  int nx = 32;
  int ny = 32;
  double cell_size = 192.0;              ///< m
  double thickness = 10.0;               ///< m
  double porosity = 0.25;
  double viscosity = 1e-3;               ///< Pa s
  double total_compressibility = 1e-9;   ///< 1/Pa
  double initial_pressure = 200.0;       ///< bar
  double injection_rate = 1000.0;        ///< m3/day
  int monitor_offset = 10;               ///< cells from the injector
  int n_report_times = 24;
  double report_interval = 730.0 / 24.0; ///< days
  int steps_per_report = 4;

  void validate() const;
};

struct GridWells {
  std::vector<GridCoord> injector;  ///< cells sharing the rate equally
  std::vector<GridCoord> monitors;  ///< north, east, south, west
};

/// The injector sits at the grid centre: one cell for odd sizes, the four
/// cells around the centre node for even sizes. On square grids the monitors
/// form one orbit of the 90-degree rotation about the centre.
GridWells grid_wells(const GridFlowSpec & spec);
std::vector<GridCoord> grid_geometry(const GridFlowSpec & spec);

/// Monitor pressures in bar, ordered monitor-major (monitor * n_report_times + t).
/// `log_perm_field` is the natural log of permeability in mD, cell index i + nx j.
Vector grid_flow_simulate(const GridFlowSpec & spec, const Vector & log_perm_field);

class GridFlowModel final : public ForwardModel {
 public:
  explicit GridFlowModel(const GridFlowSpec & spec);

  std::size_t n_params() const override { return static_cast<std::size_t>(spec_.nx * spec_.ny); }
  const std::vector<DatumInfo> & layout() const override { return layout_; }
  /// `permeability` in mD (physical space).
  Vector evaluate(const Vector & permeability) const override;
  const GridFlowSpec & spec() const { return spec_; }

 private:
  GridFlowSpec spec_;
  std::vector<DatumInfo> layout_;
};

// -----------------------------------------------------------------------------

enum class GrfKernel { exponential, gaussian };
std::string to_string(GrfKernel k);
GrfKernel parse_grf_kernel(const std::string & s);

struct GrfSpec {
  GrfKernel kernel = GrfKernel::exponential;
  double correlation_length = 8.0;  ///< cells
  double log_mean = 4.605170185988092;  ///< ln(100 mD)
  double log_std = 1.0;

  void validate() const;
};

/// log_std^2 * rho(distance / correlation_length) over all cell pairs.
Matrix grf_kernel_matrix(const GrfSpec & spec, const std::vector<GridCoord> & cells);

/// Log-permeability prior on the grid (log transform, with geometry).
ParameterSpace grf_parameter_space(const GrfSpec & spec, const std::vector<GridCoord> & cells);

struct GrfSample {
  Ensemble fields;
  Matrix kernel;
};

GrfSample sample_grf(const GrfSpec & spec, const std::vector<GridCoord> & cells, Eigen::Index n,
                     std::uint64_t seed);

// -----------------------------------------------------------------------------

/// Relative observation noise per data kind, floored at an absolute minimum.
struct NoiseSpec {
  double default_fraction = 0.1;
  std::map<std::string, double> kind_fraction{{"bhp", 0.01}, {"pressure", 0.01}};
  double floor = 1e-6;

  double fraction_for(const std::string & kind) const;
  void validate() const;
};

struct TruthAndObservations {
  Vector truth;       ///< assimilation space
  Vector truth_data;  ///< noiseless
  ObservationSet obs;
};

TruthAndObservations make_truth_and_observations(const ForwardModel & model, const ParameterSpace & space,
                                                 const NoiseSpec & noise, std::uint64_t seed);

}  // namespace esmdaloc
