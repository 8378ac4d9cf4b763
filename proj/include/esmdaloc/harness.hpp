/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "esmdaloc/esmda.hpp"
#include "esmdaloc/forward.hpp"
#include "esmdaloc/localization.hpp"
#include "esmdaloc/metrics.hpp"
#include "esmdaloc/surrogate.hpp"

namespace esmdaloc::harness {

namespace fs = std::filesystem;

/// Malformed or inconsistent experiment configuration.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

enum class CaseKind { scalar_benchmark, grid_flow };
std::string to_string(CaseKind k);
CaseKind parse_case_kind(const std::string & s);

struct SchemeEntry {
  std::string label;
  LocalizationConfig localization;
  RegressorSpec regressor = RegressorSpec::defaults(RegressorKind::gbdt);
};

struct ExperimentConfig {
  CaseKind case_kind = CaseKind::scalar_benchmark;
  ScalarBenchmarkSpec scalar;
  GridFlowSpec grid;
  GrfSpec grf;
  NoiseSpec noise;
  std::vector<SchemeEntry> schemes;
  std::vector<Eigen::Index> ensemble_sizes{100};
  int repeats = 10;
  std::uint64_t base_seed = 1;
  int n_assimilations = 4;
  std::vector<double> inflation;  ///< empty: alpha_k = N_a
  Eigen::Index reference_size = 5000;
  Eigen::Index super_ensemble_size = 5000;
  std::string output_dir = "runs/experiment";
  std::size_t workers = 1;
  bool save_iterations = true;  ///< write every intermediate ensemble, not only prior and final

  /// Throws ConfigError.
  void validate() const;
};

/// Configuration with every default filled in and a single `none` scheme.
ExperimentConfig default_config();
ExperimentConfig parse_config(const std::string & yaml_text);
ExperimentConfig load_config(const fs::path & path);
/// Canonical YAML with every field resolved; parse_config(dump_config(c)) == c.
std::string dump_config(const ExperimentConfig & config);

// -----------------------------------------------------------------------------

struct CaseSetup {
  std::shared_ptr<const ForwardModel> model;
  ParameterSpace space;
  TruthAndObservations truth;
};

/// Builds the forward model, the prior and one truth with its observations,
/// all determined by the base seed.
CaseSetup build_case(const ExperimentConfig & config);

/// Seed shared by every scheme at (N_e, repeat): prior ensemble and
/// observation perturbations, so schemes are compared on paired draws.
std::uint64_t ensemble_seed(std::uint64_t base, Eigen::Index n_e, int repeat);
/// Seed unique to a sweep cell: surrogate training and super-ensemble.
std::uint64_t cell_seed(std::uint64_t base, std::size_t scheme, Eigen::Index n_e, int repeat);

EsmdaConfig esmda_config(const ExperimentConfig & config, std::size_t scheme, Eigen::Index n_e, int repeat,
                         std::size_t workers);

// -----------------------------------------------------------------------------

struct CellOutcome {
  std::size_t scheme = 0;
  std::string label;
  Eigen::Index n_e = 0;
  int repeat = 0;
  std::uint64_t seed = 0;
  std::uint64_t ensemble_seed = 0;
  std::string directory;  ///< relative to the run directory
  std::optional<MetricsReport> metrics;
  std::size_t forward_calls = 0;
  std::string error;  ///< empty on success
  std::vector<std::string> warnings;

  bool ok() const { return error.empty(); }
};

struct SweepSummary {
  fs::path run_dir;
  std::vector<CellOutcome> cells;  ///< canonical (scheme, N_e, repeat) order
  std::size_t failures = 0;
  std::size_t forward_calls = 0;
};

std::string cell_directory(const std::string & label, Eigen::Index n_e, int repeat);

/// Runs every (scheme, N_e, repeat) cell and writes the run directory.
SweepSummary run_sweep(const ExperimentConfig & config, const fs::path & run_dir, std::size_t workers);

/// Closed-form forward-call count: cells * N_e * (N_a + 1) summed over sizes.
std::size_t expected_forward_calls(const ExperimentConfig & config);

std::string metrics_csv(const std::vector<CellOutcome> & cells);

// -----------------------------------------------------------------------------

/// 64-bit FNV-1a over a byte range or a whole file.
std::uint64_t fnv1a64(const void * data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64_file(const fs::path & path);
std::string hex64(std::uint64_t v);

/// Records every regular file below `dir` (except manifest.json) with its
/// size and hash, together with the supplied metadata.
void write_manifest(const fs::path & dir, const std::string & config_text, const std::string & kind,
                    const std::vector<CellOutcome> & cells);

/// Problems found when re-hashing the files listed in `dir`/manifest.json.
std::vector<std::string> verify_manifest(const fs::path & dir);

// -----------------------------------------------------------------------------

struct ReferenceOutcome {
  fs::path dir;
  GoldStandard gold;
  LocalizationMatrix r_ref;
  Matrix localized;
};

/// Gold-standard correlation, the PO taper built from the reference moments
/// with N_e set to the first configured ensemble size, and their product.
ReferenceOutcome run_reference(const ExperimentConfig & config, const fs::path & out_dir, std::size_t workers);

struct CompareOutcome {
  std::string table_csv;
  std::string breakdown_csv;
};

/// Correlation errors of R o rho (prior ensemble of every cell) against the
/// reference correlation, averaged over repeats.
CompareOutcome compare_run(const fs::path & run_dir, const fs::path & reference_dir);

/// Prior and final-posterior histograms per parameter, on 32 bins spanning
/// prior mean +- 4 prior std; values outside land in the end bins.
std::string export_histograms(const fs::path & run_dir, int bins = 32);

// -----------------------------------------------------------------------------

void write_text(const fs::path & path, const std::string & text);
std::string read_text(const fs::path & path);

}  // namespace esmdaloc::harness
