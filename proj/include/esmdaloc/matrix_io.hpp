/*
 * (C) Copyright 2026 The esmdaloc Authors
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string>

#include "esmdaloc/core.hpp"

namespace esmdaloc {

/// Matrix block file: a 32-byte header
///   char[8] "ESMDAMAT", u32 version (1), u32 dtype (1 = float64), u64 rows, u64 cols
/// followed by rows*cols little-endian doubles in column-major order.
/// `write_matrix` also writes `<path>.json` describing the block; `label`
/// is stored there verbatim.
void write_matrix(const std::string & path, const Matrix & m, const std::string & label = "");
Matrix read_matrix(const std::string & path);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace esmdaloc
