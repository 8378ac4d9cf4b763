/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "esmdaloc/harness.hpp"

#ifndef ESMDALOC_VERSION
#define ESMDALOC_VERSION "0.0.0"
#endif

namespace esmdaloc::harness {

using json = nlohmann::ordered_json;

void write_text(const fs::path & path, const std::string & text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string read_text(const fs::path & path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a64(const void * data, std::size_t size, std::uint64_t h) {
  const auto * p = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64_file(const fs::path & path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {
std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}
}  // namespace

void write_manifest(const fs::path & dir, const std::string & config_text, const std::string & kind,
                    const std::vector<CellOutcome> & cells) {
  json m;
  m["format"] = "esmdaloc-manifest";
  m["version"] = ESMDALOC_VERSION;
  m["kind"] = kind;
  m["created"] = utc_now();
  m["config_hash"] = hex64(fnv1a64(config_text.data(), config_text.size()));
  json jc = json::array();
  for (const auto & c : cells) {
    json e;
    e["label"] = c.label;
    e["scheme_index"] = c.scheme;
    e["n_e"] = c.n_e;
    e["repeat"] = c.repeat;
    e["seed"] = c.seed;
    e["ensemble_seed"] = c.ensemble_seed;
    e["directory"] = c.directory;
    e["status"] = c.ok() ? "ok" : "failed";
    if (!c.ok()) e["error"] = c.error;
    if (!c.warnings.empty()) e["warnings"] = c.warnings;
    jc.push_back(std::move(e));
  }
  m["cells"] = std::move(jc);
  std::vector<fs::path> files;
  for (const auto & entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() != "manifest.json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  json jf = json::array();
  for (const auto & f : files) {
    json e;
    e["path"] = fs::relative(f, dir).generic_string();
    e["bytes"] = fs::file_size(f);
    e["fnv1a64"] = hex64(fnv1a64_file(f));
    jf.push_back(std::move(e));
  }
  m["files"] = std::move(jf);
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const fs::path & dir) {
  std::vector<std::string> problems;
  json m;
  try {
    m = json::parse(read_text(dir / "manifest.json"));
  } catch (const std::exception & e) {
    return {std::string("manifest unreadable: ") + e.what()};
  }
  if (!m.contains("files") || !m["files"].is_array()) return {"manifest has no file inventory"};
  for (const auto & f : m["files"]) {
    const std::string rel = f.value("path", "");
    const fs::path p = dir / rel;
    if (!fs::is_regular_file(p)) {
      problems.push_back("missing: " + rel);
      continue;
    }
    if (fs::file_size(p) != f.value("bytes", std::uintmax_t{0})) {
      problems.push_back("size changed: " + rel);
      continue;
    }
    if (hex64(fnv1a64_file(p)) != f.value("fnv1a64", "")) problems.push_back("content changed: " + rel);
  }
  return problems;
}

}  // namespace esmdaloc::harness
