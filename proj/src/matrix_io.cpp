/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "esmdaloc/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "json.hpp"

#include "binary_io.hpp"

namespace esmdaloc {

namespace {
constexpr char kMatrixMagic[8] = {'E', 'S', 'M', 'D', 'A', 'M', 'A', 'T'};
constexpr std::uint32_t kMatrixVersion = 1;
constexpr std::uint32_t kFloat64 = 1;
}  // namespace

void write_matrix(const std::string & path, const Matrix & m, const std::string & label) {
  {
    detail::BinaryWriter w(path);
    w.bytes(kMatrixMagic, sizeof(kMatrixMagic));
    w.pod(kMatrixVersion);
    w.pod(kFloat64);
    w.pod(static_cast<std::uint64_t>(m.rows()));
    w.pod(static_cast<std::uint64_t>(m.cols()));
    w.array(m.data(), static_cast<std::size_t>(m.size()));
    w.finish();
  }
  nlohmann::ordered_json meta;
  meta["format"] = "esmdaloc-matrix";
  meta["version"] = kMatrixVersion;
  meta["dtype"] = "float64";
  meta["layout"] = "column-major";
  meta["endianness"] = "little";
  meta["header_bytes"] = 32;
  meta["rows"] = m.rows();
  meta["cols"] = m.cols();
  if (!label.empty()) meta["label"] = label;
  std::ofstream side(path + ".json", std::ios::trunc);
  if (!side) throw std::runtime_error("cannot write sidecar for '" + path + "'");
  side << meta.dump(2) << '\n';
}

Matrix read_matrix(const std::string & path) {
  detail::BinaryReader r(path);
  char magic[8];
  r.read(magic, sizeof(magic));
  if (std::memcmp(magic, kMatrixMagic, sizeof(magic)) != 0)
    throw std::runtime_error("'" + path + "' is not a matrix block");
  if (r.pod<std::uint32_t>() != kMatrixVersion) throw std::runtime_error("unsupported matrix block version");
  if (r.pod<std::uint32_t>() != kFloat64) throw std::runtime_error("unsupported matrix dtype");
  const auto rows = r.pod<std::uint64_t>();
  const auto cols = r.pod<std::uint64_t>();
  if (rows > (1ULL << 31) || cols > (1ULL << 31)) throw std::runtime_error("implausible matrix dimensions");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  r.array(m.data(), static_cast<std::size_t>(m.size()));
  return m;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace esmdaloc
