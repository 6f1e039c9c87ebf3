/*
 * Copyright 2026 The genimg-eval Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Minimal NPY 1.0 codec for 2-D little-endian float arrays in C order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "genimg_eval/error.hpp"

namespace genimg_eval::npy {

static_assert(std::endian::native == std::endian::little, "NPY codec assumes a little-endian host");

enum class Dtype { kFloat32, kFloat64 };

struct Header {
  Dtype dtype = Dtype::kFloat64;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

inline constexpr char kMagic[] = "\x93NUMPY";

inline std::size_t dtype_size(Dtype t) { return t == Dtype::kFloat32 ? 4 : 8; }

inline Header parse_header_dict(const std::string& dict, const std::string& where) {
  static const std::regex descr_re(R"('descr'\s*:\s*'([^']*)')");
  static const std::regex order_re(R"('fortran_order'\s*:\s*(True|False))");
  static const std::regex shape_re(R"('shape'\s*:\s*\(([^)]*)\))");
  std::smatch m;
  Header h;
  if (!std::regex_search(dict, m, descr_re)) throw ValidationError(where + ": malformed NPY header (no descr)");
  const std::string descr = m[1];
  if (descr == "<f8") {
    h.dtype = Dtype::kFloat64;
  } else if (descr == "<f4") {
    h.dtype = Dtype::kFloat32;
  } else {
    throw ValidationError(where + ": unsupported NPY dtype '" + descr + "' (expected <f4 or <f8)");
  }
  if (!std::regex_search(dict, m, order_re)) throw ValidationError(where + ": malformed NPY header (no fortran_order)");
  if (m[1] == "True") throw ValidationError(where + ": Fortran-ordered NPY arrays are not supported");
  if (!std::regex_search(dict, m, shape_re)) throw ValidationError(where + ": malformed NPY header (no shape)");

  std::vector<std::size_t> dims;
  static const std::regex dim_re(R"(\d+)");
  const std::string shape = m[1];
  for (auto it = std::sregex_iterator(shape.begin(), shape.end(), dim_re); it != std::sregex_iterator(); ++it) {
    dims.push_back(std::stoull(it->str()));
  }
  if (dims.size() != 2) {
    throw ValidationError(where + ": NPY array must be 2-D, header declares " + std::to_string(dims.size()) +
                          " dimensions");
  }
  h.rows = dims[0];
  h.cols = dims[1];
  return h;
}

// Reads the whole array, widening to double.
inline std::vector<double> read(const std::string& path, Header& header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0) throw ValidationError(path + ": not an NPY file (bad magic)");
  unsigned char version[2];
  in.read(reinterpret_cast<char*>(version), 2);
  std::uint32_t header_len = 0;
  if (version[0] == 1) {
    unsigned char len[2];
    in.read(reinterpret_cast<char*>(len), 2);
    header_len = static_cast<std::uint32_t>(len[0]) | (static_cast<std::uint32_t>(len[1]) << 8);
  } else if (version[0] == 2 || version[0] == 3) {
    unsigned char len[4];
    in.read(reinterpret_cast<char*>(len), 4);
    header_len = static_cast<std::uint32_t>(len[0]) | (static_cast<std::uint32_t>(len[1]) << 8) |
                 (static_cast<std::uint32_t>(len[2]) << 16) | (static_cast<std::uint32_t>(len[3]) << 24);
  } else {
    throw ValidationError(path + ": unsupported NPY version " + std::to_string(version[0]));
  }
  if (!in) throw ValidationError(path + ": truncated NPY preamble");
  std::string dict(header_len, '\0');
  in.read(dict.data(), header_len);
  if (!in) throw ValidationError(path + ": truncated NPY header");
  header = parse_header_dict(dict, path);

  const std::size_t count = header.rows * header.cols;
  const std::size_t elem = dtype_size(header.dtype);
  std::vector<char> raw(count * elem);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != raw.size()) {
    const std::size_t row_bytes = header.cols * elem;
    const std::size_t full_rows = row_bytes == 0 ? 0 : got / row_bytes;
    throw ValidationError(path + ": shape mismatch, header declares " + std::to_string(header.rows) + "x" +
                          std::to_string(header.cols) + " but file holds " + std::to_string(full_rows) +
                          " complete rows");
  }
  in.peek();
  if (!in.eof()) {
    throw ValidationError(path + ": shape mismatch, trailing data after the declared " +
                          std::to_string(header.rows) + "x" + std::to_string(header.cols) + " array");
  }

  std::vector<double> out(count);
  if (header.dtype == Dtype::kFloat64) {
    std::memcpy(out.data(), raw.data(), raw.size());
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, raw.data() + i * 4, 4);
      out[i] = f;
    }
  }
  return out;
}

// Writes a version 1.0 file; values are narrowed when dtype is float32.
inline void write(const std::string& path, const double* data, std::size_t rows, std::size_t cols, Dtype dtype) {
  std::string dict = "{'descr': '";
  dict += dtype == Dtype::kFloat64 ? "<f8" : "<f4";
  dict += "', 'fortran_order': False, 'shape': (" + std::to_string(rows) + ", " + std::to_string(cols) + "), }";
  // Preamble is 10 bytes; pad so the data starts on a 64-byte boundary.
  const std::size_t unpadded = 10 + dict.size() + 1;
  dict.append((64 - unpadded % 64) % 64, ' ');
  dict.push_back('\n');

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, 6);
  const unsigned char version[2] = {1, 0};
  out.write(reinterpret_cast<const char*>(version), 2);
  const auto len = static_cast<std::uint16_t>(dict.size());
  const unsigned char len_bytes[2] = {static_cast<unsigned char>(len & 0xff), static_cast<unsigned char>(len >> 8)};
  out.write(reinterpret_cast<const char*>(len_bytes), 2);
  out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
  const std::size_t count = rows * cols;
  if (dtype == Dtype::kFloat64) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    std::vector<float> narrow(count);
    for (std::size_t i = 0; i < count; ++i) narrow[i] = static_cast<float>(data[i]);
    out.write(reinterpret_cast<const char*>(narrow.data()), static_cast<std::streamsize>(count * 4));
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace genimg_eval::npy
