/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "esmdaloc/core.hpp"

namespace esmdaloc::detail {

static_assert(std::endian::native == std::endian::little, "binary formats are little-endian");

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string & path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
  }

  template <typename T>
  void pod(const T & v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out_.write(reinterpret_cast<const char *>(&v), sizeof(T));
  }
  template <typename T>
  void array(const T * data, std::size_t n) {
    if (n > 0) out_.write(reinterpret_cast<const char *>(data), static_cast<std::streamsize>(n * sizeof(T)));
  }
  template <typename T>
  void vec(const std::vector<T> & v) {
    pod<std::uint64_t>(v.size());
    array(v.data(), v.size());
  }
  void bytes(const char * s, std::size_t n) { out_.write(s, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write to '" + path_ + "' failed");
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string & path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open '" + path + "' for reading");
  }

  template <typename T>
  T pod() {
    T v;
    read(reinterpret_cast<char *>(&v), sizeof(T));
    return v;
  }
  template <typename T>
  void array(T * data, std::size_t n) {
    if (n > 0) read(reinterpret_cast<char *>(data), n * sizeof(T));
  }
  template <typename T>
  std::vector<T> vec(std::size_t limit = std::size_t(1) << 34) {
    const auto n = pod<std::uint64_t>();
    if (n > limit) throw std::runtime_error("corrupt file '" + path_ + "': implausible array length");
    std::vector<T> v(static_cast<std::size_t>(n));
    array(v.data(), v.size());
    return v;
  }
  void read(char * dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (!in_) throw std::runtime_error("unexpected end of file in '" + path_ + "'");
  }

 private:
  std::string path_;
  std::ifstream in_;
};

}  // namespace esmdaloc::detail
