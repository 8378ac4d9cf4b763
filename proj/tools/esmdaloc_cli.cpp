/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "esmdaloc/harness.hpp"

namespace h = esmdaloc::harness;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kConfigError = 2;

struct Common {
  std::string config;
  std::string output;
  std::size_t workers = 0;
  std::optional<std::uint64_t> seed;
};

h::ExperimentConfig load(const Common & c) {
  h::ExperimentConfig cfg = h::load_config(c.config);
  if (c.seed) cfg.base_seed = *c.seed;
  if (c.workers > 0) cfg.workers = c.workers;
  if (!c.output.empty()) cfg.output_dir = c.output;
  return cfg;
}

void add_common(CLI::App * app, Common & c, bool config_required) {
  auto * opt = app->add_option("-c,--config", c.config, "experiment config (YAML)");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  app->add_option("-o,--output", c.output, "output directory (overrides output_dir)");
  app->add_option("-w,--workers", c.workers, "worker threads (overrides workers)")->check(CLI::PositiveNumber);
  app->add_option("-s,--seed", c.seed, "base seed (overrides seed)");
}

int cmd_run(const Common & c) {
  const h::ExperimentConfig cfg = load(c);
  const auto summary = h::run_sweep(cfg, cfg.output_dir, cfg.workers);
  std::cout << "run directory: " << summary.run_dir.string() << "\n"
            << "cells: " << summary.cells.size() << ", failed: " << summary.failures
            << ", forward calls: " << summary.forward_calls << "\n";
  for (const auto & cell : summary.cells)
    if (!cell.ok()) std::cerr << "failed " << cell.directory << ": " << cell.error << "\n";
  return summary.failures == 0 ? kOk : kFailure;
}

int cmd_reference(const Common & c) {
  const h::ExperimentConfig cfg = load(c);
  const h::fs::path dir = c.output.empty() ? h::fs::path(cfg.output_dir) / "reference" : h::fs::path(c.output);
  const auto ref = h::run_reference(cfg, dir, cfg.workers);
  std::cout << "reference: " << ref.dir.string() << " (" << ref.gold.correlation.rows() << " x "
            << ref.gold.correlation.cols() << ", n = " << cfg.reference_size << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char ** argv) {
  CLI::App app{"ES-MDA localization experiments"};
  app.require_subcommand(1);

  Common run_opts;
  auto * run = app.add_subcommand("run", "run every (scheme, ensemble size, repeat) cell of a config");
  add_common(run, run_opts, true);

  Common ref_opts;
  auto * reference = app.add_subcommand("reference", "compute the gold-standard correlation for a config");
  add_common(reference, ref_opts, true);

  std::string cmp_run, cmp_ref, cmp_out;
  auto * compare = app.add_subcommand("compare", "correlation errors of a run against a reference");
  compare->add_option("-r,--run", cmp_run, "run directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("--reference", cmp_ref, "reference directory")->required()->check(CLI::ExistingDirectory);
  compare->add_option("-o,--output", cmp_out, "output directory (default: the run directory)");

  std::string hist_run, hist_out;
  int hist_bins = 32;
  auto * hist = app.add_subcommand("export-histograms", "prior and posterior histograms per parameter");
  hist->add_option("-r,--run", hist_run, "run directory")->required()->check(CLI::ExistingDirectory);
  hist->add_option("-o,--output", hist_out, "output file (default: <run>/histograms.csv)");
  hist->add_option("--bins", hist_bins, "bins per parameter")->check(CLI::PositiveNumber);

  std::string verify_dir;
  auto * verify = app.add_subcommand("verify", "re-hash every file listed in a manifest");
  verify->add_option("-r,--run", verify_dir, "run or reference directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*reference) return cmd_reference(ref_opts);
    if (*compare) {
      const auto out = h::compare_run(cmp_run, cmp_ref);
      const h::fs::path dir = cmp_out.empty() ? h::fs::path(cmp_run) : h::fs::path(cmp_out);
      h::write_text(dir / "compare_table.csv", out.table_csv);
      h::write_text(dir / "compare_breakdown.csv", out.breakdown_csv);
      std::cout << out.table_csv;
      return kOk;
    }
    if (*hist) {
      const h::fs::path out = hist_out.empty() ? h::fs::path(hist_run) / "histograms.csv" : h::fs::path(hist_out);
      h::write_text(out, h::export_histograms(hist_run, hist_bins));
      std::cout << "histograms: " << out.string() << "\n";
      return kOk;
    }
    if (*verify) {
      const auto problems = h::verify_manifest(verify_dir);
      for (const auto & p : problems) std::cerr << p << "\n";
      std::cout << (problems.empty() ? "manifest verified\n" : "manifest verification failed\n");
      return problems.empty() ? kOk : kFailure;
    }
  } catch (const h::ConfigError & e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
