/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/harness.hpp"

namespace esmdaloc::harness {

namespace {
constexpr std::uint64_t kTruthTag = 0x74727574ULL;
constexpr std::uint64_t kEnsembleTag = 0x656e7365ULL;
}  // namespace

CaseSetup build_case(const ExperimentConfig & config) {
  std::shared_ptr<const ForwardModel> model;
  std::optional<ParameterSpace> space;
  if (config.case_kind == CaseKind::scalar_benchmark) {
    auto m = std::make_shared<const ScalarBenchmark>(config.scalar);
    space.emplace(m->parameter_space());
    model = m;
  } else {
    model = std::make_shared<const GridFlowModel>(config.grid);
    space.emplace(grf_parameter_space(config.grf, grid_geometry(config.grid)));
  }
  TruthAndObservations truth =
      make_truth_and_observations(*model, *space, config.noise, derive_seed(config.base_seed, kTruthTag));
  return CaseSetup{std::move(model), std::move(*space), std::move(truth)};
}

std::uint64_t ensemble_seed(std::uint64_t base, Eigen::Index n_e, int repeat) {
  return derive_seed(base, kEnsembleTag, static_cast<std::uint64_t>(n_e), static_cast<std::uint64_t>(repeat));
}

std::uint64_t cell_seed(std::uint64_t base, std::size_t scheme, Eigen::Index n_e, int repeat) {
  return derive_seed(base, static_cast<std::uint64_t>(scheme), static_cast<std::uint64_t>(n_e),
                     static_cast<std::uint64_t>(repeat));
}

EsmdaConfig esmda_config(const ExperimentConfig & config, std::size_t scheme, Eigen::Index n_e, int repeat,
                         std::size_t workers) {
  require(scheme < config.schemes.size(), "esmda_config: scheme index out of range");
  EsmdaConfig e;
  e.n_assimilations = config.n_assimilations;
  e.inflation = config.inflation;
  e.seed = ensemble_seed(config.base_seed, n_e, repeat);
  e.localization_seed = cell_seed(config.base_seed, scheme, n_e, repeat);
  e.localization = config.schemes[scheme].localization;
  e.regressor = config.schemes[scheme].regressor;
  e.super_ensemble_size = config.super_ensemble_size;
  e.workers = workers;
  return e;
}

}  // namespace esmdaloc::harness
