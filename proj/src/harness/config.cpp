/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cctype>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "esmdaloc/harness.hpp"
#include "esmdaloc/matrix_io.hpp"

namespace esmdaloc::harness {

std::string to_string(CaseKind k) { return k == CaseKind::scalar_benchmark ? "scalar_benchmark" : "grid_flow"; }

CaseKind parse_case_kind(const std::string & s) {
  if (s == "scalar_benchmark") return CaseKind::scalar_benchmark;
  if (s == "grid_flow") return CaseKind::grid_flow;
  throw ConfigError("unknown case '" + s + "' (expected scalar_benchmark or grid_flow)");
}

void ExperimentConfig::validate() const {
  auto check = [](bool cond, const std::string & msg) {
    if (!cond) throw ConfigError(msg);
  };
  check(repeats >= 1, "repeats must be at least 1");
  check(!ensemble_sizes.empty(), "ensemble_sizes must not be empty");
  for (auto n : ensemble_sizes) check(n >= 2, "every ensemble size must be at least 2");
  check(!schemes.empty(), "at least one scheme is required");
  check(reference_size >= 2, "reference_size must be at least 2");
  check(super_ensemble_size >= 2, "esmda.super_ensemble_size must be at least 2");
  check(workers >= 1, "workers must be at least 1");
  std::set<std::string> labels;
  for (const auto & s : schemes) {
    check(!s.label.empty(), "scheme labels must not be empty");
    for (char c : s.label)
      check(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.',
            "scheme label '" + s.label + "' may only contain letters, digits, '_', '-' and '.'");
    check(labels.insert(s.label).second, "duplicate scheme label '" + s.label + "'");
  }
  try {
    EsmdaConfig e;
    e.n_assimilations = n_assimilations;
    e.inflation = inflation;
    e.super_ensemble_size = super_ensemble_size;
    for (const auto & s : schemes) {
      e.localization = s.localization;
      e.regressor = s.regressor;
      e.validate();
    }
    noise.validate();
    grf.validate();
    if (case_kind == CaseKind::scalar_benchmark) scalar.validate();
    else grid.validate();
  } catch (const ConfigError &) {
    throw;
  } catch (const InvalidArgument & e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.schemes.push_back(SchemeEntry{"none", LocalizationConfig{}, RegressorSpec::defaults(RegressorKind::gbdt)});
  return c;
}

// -----------------------------------------------------------------------------

namespace {

void check_keys(const YAML::Node & node, const std::set<std::string> & allowed, const std::string & where) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  for (const auto & kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void get(const YAML::Node & node, const char * key, T & out) {
  if (node && node[key]) out = node[key].as<T>();
}

LocalizationConfig parse_localization(const YAML::Node & n, const std::string & name) {
  LocalizationConfig lc;
  lc.scheme = parse_scheme(name);
  if (n["eta"]) lc.eta = n["eta"].as<double>();
  if (n["correlation_length"]) lc.correlation_length = n["correlation_length"].as<double>();
  if (n["schedule"]) lc.schedule = parse_schedule(n["schedule"].as<std::string>());
  if (n["taper"]) lc.taper = parse_taper(n["taper"].as<std::string>());
  return lc;
}

RegressorSpec parse_regressor(const YAML::Node & n) {
  RegressorKind kind = RegressorKind::gbdt;
  if (n && n["kind"]) kind = parse_regressor_kind(n["kind"].as<std::string>());
  RegressorSpec r = RegressorSpec::defaults(kind);
  if (!n) return r;
  check_keys(n, {"kind", "n_estimators", "max_depth", "min_samples_leaf", "learning_rate", "max_features", "bootstrap"},
             "scheme regressor");
  get(n, "n_estimators", r.n_estimators);
  get(n, "max_depth", r.max_depth);
  get(n, "min_samples_leaf", r.min_samples_leaf);
  get(n, "learning_rate", r.learning_rate);
  if (n["max_features"]) {
    const auto v = n["max_features"].as<std::string>();
    r.max_features = v == "sqrt" ? RegressorSpec::kSqrtFeatures : v == "all" ? 0 : n["max_features"].as<int>();
  }
  get(n, "bootstrap", r.bootstrap);
  return r;
}

ExperimentConfig parse_node(const YAML::Node & root) {
  ExperimentConfig c;
  if (!root || root.IsNull()) {
    c = default_config();
    return c;
  }
  check_keys(root,
             {"case", "seed", "repeats", "ensemble_sizes", "workers", "output_dir", "reference_size", "save_iterations",
              "esmda", "schemes", "scalar_benchmark", "grid_flow", "grf", "noise"},
             "the top level");
  if (root["case"]) c.case_kind = parse_case_kind(root["case"].as<std::string>());
  get(root, "seed", c.base_seed);
  get(root, "repeats", c.repeats);
  if (root["ensemble_sizes"]) {
    c.ensemble_sizes.clear();
    for (const auto & v : root["ensemble_sizes"]) c.ensemble_sizes.push_back(v.as<Eigen::Index>());
  }
  if (root["workers"]) c.workers = root["workers"].as<std::size_t>();
  get(root, "output_dir", c.output_dir);
  get(root, "reference_size", c.reference_size);
  get(root, "save_iterations", c.save_iterations);

  const YAML::Node e = root["esmda"];
  check_keys(e, {"n_assimilations", "inflation", "super_ensemble_size"}, "esmda");
  get(e, "n_assimilations", c.n_assimilations);
  if (e && e["inflation"])
    for (const auto & v : e["inflation"]) c.inflation.push_back(v.as<double>());
  get(e, "super_ensemble_size", c.super_ensemble_size);

  if (root["schemes"]) {
    if (!root["schemes"].IsSequence()) throw ConfigError("schemes must be a list");
    for (const auto & s : root["schemes"]) {
      SchemeEntry entry;
      if (s.IsScalar()) {
        const auto name = s.as<std::string>();
        entry.localization.scheme = parse_scheme(name);
        entry.label = name;
      } else {
        check_keys(s, {"name", "label", "eta", "correlation_length", "schedule", "taper", "regressor"}, "a scheme entry");
        if (!s["name"]) throw ConfigError("every scheme entry needs a name");
        const auto name = s["name"].as<std::string>();
        entry.localization = parse_localization(s, name);
        entry.regressor = parse_regressor(s["regressor"]);
        entry.label = s["label"] ? s["label"].as<std::string>() : name;
      }
      c.schemes.push_back(std::move(entry));
    }
  } else {
    c.schemes = default_config().schemes;
  }

  const YAML::Node sb = root["scalar_benchmark"];
  check_keys(sb,
             {"n_params", "n_dummy", "n_series", "n_times", "coefficient_seed", "activity", "quadratic_scale",
              "prior_mean", "prior_std", "dummy_mean", "dummy_std"},
             "scalar_benchmark");
  get(sb, "n_params", c.scalar.n_params);
  get(sb, "n_dummy", c.scalar.n_dummy);
  get(sb, "n_series", c.scalar.n_series);
  get(sb, "n_times", c.scalar.n_times);
  get(sb, "coefficient_seed", c.scalar.coefficient_seed);
  get(sb, "activity", c.scalar.activity);
  get(sb, "quadratic_scale", c.scalar.quadratic_scale);
  get(sb, "prior_mean", c.scalar.prior_mean);
  get(sb, "prior_std", c.scalar.prior_std);
  get(sb, "dummy_mean", c.scalar.dummy_mean);
  get(sb, "dummy_std", c.scalar.dummy_std);

  const YAML::Node g = root["grid_flow"];
  check_keys(g,
             {"nx", "ny", "cell_size", "thickness", "porosity", "viscosity", "total_compressibility",
              "initial_pressure", "injection_rate", "monitor_offset", "n_report_times", "report_interval",
              "steps_per_report"},
             "grid_flow");
  get(g, "nx", c.grid.nx);
  get(g, "ny", c.grid.ny);
  get(g, "cell_size", c.grid.cell_size);
  get(g, "thickness", c.grid.thickness);
  get(g, "porosity", c.grid.porosity);
  get(g, "viscosity", c.grid.viscosity);
  get(g, "total_compressibility", c.grid.total_compressibility);
  get(g, "initial_pressure", c.grid.initial_pressure);
  get(g, "injection_rate", c.grid.injection_rate);
  get(g, "monitor_offset", c.grid.monitor_offset);
  get(g, "n_report_times", c.grid.n_report_times);
  get(g, "report_interval", c.grid.report_interval);
  get(g, "steps_per_report", c.grid.steps_per_report);

  const YAML::Node f = root["grf"];
  check_keys(f, {"kernel", "correlation_length", "log_mean", "log_std"}, "grf");
  if (f && f["kernel"]) c.grf.kernel = parse_grf_kernel(f["kernel"].as<std::string>());
  get(f, "correlation_length", c.grf.correlation_length);
  get(f, "log_mean", c.grf.log_mean);
  get(f, "log_std", c.grf.log_std);

  const YAML::Node nz = root["noise"];
  check_keys(nz, {"default_fraction", "floor", "kinds"}, "noise");
  get(nz, "default_fraction", c.noise.default_fraction);
  get(nz, "floor", c.noise.floor);
  if (nz && nz["kinds"]) {
    c.noise.kind_fraction.clear();
    for (const auto & kv : nz["kinds"]) c.noise.kind_fraction[kv.first.as<std::string>()] = kv.second.as<double>();
  }
  return c;
}

}  // namespace

ExperimentConfig parse_config(const std::string & yaml_text) {
  ExperimentConfig c;
  try {
    c = parse_node(YAML::Load(yaml_text));
  } catch (const YAML::Exception & e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError &) {
    throw;
  } catch (const InvalidArgument & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path & path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const std::exception & e) {
    throw ConfigError(e.what());
  }
  return parse_config(text);
}

std::string dump_config(const ExperimentConfig & c) {
  auto num = [](double v) { return format_double(v); };
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "case" << YAML::Value << to_string(c.case_kind);
  out << YAML::Key << "seed" << YAML::Value << c.base_seed;
  out << YAML::Key << "repeats" << YAML::Value << c.repeats;
  out << YAML::Key << "ensemble_sizes" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto n : c.ensemble_sizes) out << static_cast<long long>(n);
  out << YAML::EndSeq;
  out << YAML::Key << "workers" << YAML::Value << c.workers;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
  out << YAML::Key << "reference_size" << YAML::Value << static_cast<long long>(c.reference_size);
  out << YAML::Key << "save_iterations" << YAML::Value << c.save_iterations;

  out << YAML::Key << "esmda" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_assimilations" << YAML::Value << c.n_assimilations;
  out << YAML::Key << "inflation" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double a : c.inflation) out << num(a);
  out << YAML::EndSeq;
  out << YAML::Key << "super_ensemble_size" << YAML::Value << static_cast<long long>(c.super_ensemble_size);
  out << YAML::EndMap;

  out << YAML::Key << "schemes" << YAML::Value << YAML::BeginSeq;
  for (const auto & s : c.schemes) {
    const auto & l = s.localization;
    const auto & r = s.regressor;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << to_string(l.scheme);
    out << YAML::Key << "label" << YAML::Value << s.label;
    out << YAML::Key << "eta" << YAML::Value << num(l.eta);
    out << YAML::Key << "correlation_length" << YAML::Value << num(l.correlation_length);
    out << YAML::Key << "schedule" << YAML::Value << to_string(l.schedule);
    out << YAML::Key << "taper" << YAML::Value << to_string(l.taper);
    out << YAML::Key << "regressor" << YAML::Value << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(r.kind);
    out << YAML::Key << "n_estimators" << YAML::Value << r.n_estimators;
    out << YAML::Key << "max_depth" << YAML::Value << r.max_depth;
    out << YAML::Key << "min_samples_leaf" << YAML::Value << r.min_samples_leaf;
    out << YAML::Key << "learning_rate" << YAML::Value << num(r.learning_rate);
    out << YAML::Key << "max_features" << YAML::Value << r.max_features;
    out << YAML::Key << "bootstrap" << YAML::Value << r.bootstrap;
    out << YAML::EndMap;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;

  const auto & sb = c.scalar;
  out << YAML::Key << "scalar_benchmark" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_params" << YAML::Value << sb.n_params;
  out << YAML::Key << "n_dummy" << YAML::Value << sb.n_dummy;
  out << YAML::Key << "n_series" << YAML::Value << sb.n_series;
  out << YAML::Key << "n_times" << YAML::Value << sb.n_times;
  out << YAML::Key << "coefficient_seed" << YAML::Value << sb.coefficient_seed;
  out << YAML::Key << "activity" << YAML::Value << num(sb.activity);
  out << YAML::Key << "quadratic_scale" << YAML::Value << num(sb.quadratic_scale);
  out << YAML::Key << "prior_mean" << YAML::Value << num(sb.prior_mean);
  out << YAML::Key << "prior_std" << YAML::Value << num(sb.prior_std);
  out << YAML::Key << "dummy_mean" << YAML::Value << num(sb.dummy_mean);
  out << YAML::Key << "dummy_std" << YAML::Value << num(sb.dummy_std);
  out << YAML::EndMap;

  const auto & g = c.grid;
  out << YAML::Key << "grid_flow" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "nx" << YAML::Value << g.nx;
  out << YAML::Key << "ny" << YAML::Value << g.ny;
  out << YAML::Key << "cell_size" << YAML::Value << num(g.cell_size);
  out << YAML::Key << "thickness" << YAML::Value << num(g.thickness);
  out << YAML::Key << "porosity" << YAML::Value << num(g.porosity);
  out << YAML::Key << "viscosity" << YAML::Value << num(g.viscosity);
  out << YAML::Key << "total_compressibility" << YAML::Value << num(g.total_compressibility);
  out << YAML::Key << "initial_pressure" << YAML::Value << num(g.initial_pressure);
  out << YAML::Key << "injection_rate" << YAML::Value << num(g.injection_rate);
  out << YAML::Key << "monitor_offset" << YAML::Value << g.monitor_offset;
  out << YAML::Key << "n_report_times" << YAML::Value << g.n_report_times;
  out << YAML::Key << "report_interval" << YAML::Value << num(g.report_interval);
  out << YAML::Key << "steps_per_report" << YAML::Value << g.steps_per_report;
  out << YAML::EndMap;

  out << YAML::Key << "grf" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "kernel" << YAML::Value << to_string(c.grf.kernel);
  out << YAML::Key << "correlation_length" << YAML::Value << num(c.grf.correlation_length);
  out << YAML::Key << "log_mean" << YAML::Value << num(c.grf.log_mean);
  out << YAML::Key << "log_std" << YAML::Value << num(c.grf.log_std);
  out << YAML::EndMap;

  out << YAML::Key << "noise" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "default_fraction" << YAML::Value << num(c.noise.default_fraction);
  out << YAML::Key << "floor" << YAML::Value << num(c.noise.floor);
  out << YAML::Key << "kinds" << YAML::Value << YAML::BeginMap;
  for (const auto & [k, v] : c.noise.kind_fraction) out << YAML::Key << k << YAML::Value << num(v);
  out << YAML::EndMap;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace esmdaloc::harness
