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

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "genimg_eval/error.hpp"
#include "genimg_eval/npy.hpp"
#include "genimg_eval/rng.hpp"

namespace genimg_eval {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using npy::Dtype;

struct EmbeddingMetadata {
  std::string extractor;
  std::string dataset;
  std::string model_tag;

  friend bool operator==(const EmbeddingMetadata&, const EmbeddingMetadata&) = default;
};

// An n x d matrix of features, one row per image. Entries are finite and
// held in double precision regardless of the on-disk dtype. Immutable.
class EmbeddingSet {
 public:
  EmbeddingSet(RowMatrix data, EmbeddingMetadata meta = {}, Dtype dtype = Dtype::kFloat64)
      : data_(std::move(data)), meta_(std::move(meta)), dtype_(dtype) {
    if (data_.rows() < 1 || data_.cols() < 1) {
      throw ValidationError("embedding set must have at least one row and one column");
    }
    for (Eigen::Index i = 0; i < data_.rows(); ++i) {
      if (!data_.row(i).allFinite()) {
        throw ValidationError("non-finite entry in embedding row " + std::to_string(i));
      }
    }
  }

  const RowMatrix& data() const { return data_; }
  const EmbeddingMetadata& metadata() const { return meta_; }
  Dtype dtype() const { return dtype_; }
  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index dims() const { return data_.cols(); }

 private:
  RowMatrix data_;
  EmbeddingMetadata meta_;
  Dtype dtype_;
};

struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
};

namespace detail {

inline bool has_suffix(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline bool is_csv_path(const std::string& path) {
  std::string lower = path;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return has_suffix(lower, ".csv");
}

inline RowMatrix read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      if (b == std::string::npos) throw ValidationError(path + ":" + std::to_string(line_no) + ": empty field");
      const std::string token = field.substr(b, e - b + 1);
      double v = 0.0;
      try {
        std::size_t used = 0;
        v = std::stod(token, &used);
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw ValidationError(path + ":" + std::to_string(line_no) + ": not a number: '" + token + "'");
      }
      values.push_back(v);
      ++count;
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                            " columns, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) throw ValidationError(path + ": empty CSV");
  RowMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

inline void write_csv_matrix(const std::string& path, const RowMatrix& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  char buf[64];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), m(i, j));
      out.write(buf, end - buf);
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path);
}

}  // namespace detail

inline std::string sidecar_path(const std::string& path) { return path + ".meta.json"; }

inline std::optional<EmbeddingMetadata> read_sidecar(const std::string& path) {
  const std::string side = sidecar_path(path);
  if (!std::filesystem::exists(side)) return std::nullopt;
  std::ifstream in(side);
  if (!in) throw IoError("cannot open " + side);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(side + ": " + e.what());
  }
  EmbeddingMetadata meta;
  meta.extractor = j.value("extractor", "");
  meta.dataset = j.value("dataset", "");
  meta.model_tag = j.value("model_tag", "");
  return meta;
}

// Loads an NPY (float32/float64, 2-D, C order) or headerless CSV file.
// Metadata comes from `<path>.meta.json` when present; non-empty fields of
// `overrides` win over the sidecar.
inline EmbeddingSet load_embeddings(const std::string& path, std::optional<Shape> expected = std::nullopt,
                                    const EmbeddingMetadata& overrides = {}) {
  RowMatrix data;
  Dtype dtype = Dtype::kFloat64;
  if (detail::is_csv_path(path)) {
    data = detail::read_csv_matrix(path);
  } else {
    npy::Header header;
    std::vector<double> flat = npy::read(path, header);
    dtype = header.dtype;
    data.resize(static_cast<Eigen::Index>(header.rows), static_cast<Eigen::Index>(header.cols));
    std::copy(flat.begin(), flat.end(), data.data());
  }
  if (expected && (data.rows() != expected->rows || data.cols() != expected->cols)) {
    throw ValidationError(path + ": shape mismatch, expected " + std::to_string(expected->rows) + "x" +
                          std::to_string(expected->cols) + ", found " + std::to_string(data.rows()) + "x" +
                          std::to_string(data.cols()));
  }
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    if (!data.row(i).allFinite()) throw ValidationError(path + ": non-finite value in row " + std::to_string(i));
  }

  EmbeddingMetadata meta = read_sidecar(path).value_or(EmbeddingMetadata{});
  if (!overrides.extractor.empty()) meta.extractor = overrides.extractor;
  if (!overrides.dataset.empty()) meta.dataset = overrides.dataset;
  if (!overrides.model_tag.empty()) meta.model_tag = overrides.model_tag;
  return EmbeddingSet(std::move(data), std::move(meta), dtype);
}

// Writes the array (NPY unless the path ends in .csv) and its sidecar.
inline void save_embeddings(const EmbeddingSet& set, const std::string& path) {
  if (detail::is_csv_path(path)) {
    detail::write_csv_matrix(path, set.data());
  } else {
    npy::write(path, set.data().data(), static_cast<std::size_t>(set.rows()), static_cast<std::size_t>(set.dims()),
               set.dtype());
  }
  nlohmann::ordered_json side;
  side["extractor"] = set.metadata().extractor;
  side["dataset"] = set.metadata().dataset;
  side["model_tag"] = set.metadata().model_tag;
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  if (!out) throw IoError("cannot write " + sidecar_path(path));
  out << side.dump(2) << '\n';
}

// Seeded row partition into halves of size ceil(n/2) and floor(n/2). Rows
// keep their original relative order within each half.
inline std::pair<EmbeddingSet, EmbeddingSet> split_real(const EmbeddingSet& set, std::uint64_t seed) {
  const Eigen::Index n = set.rows();
  if (n < 4) throw ValidationError("split_real needs at least 4 rows, got " + std::to_string(n));
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  Rng rng(mix_seed(seed, "split_real"));
  shuffle(std::span<Eigen::Index>(idx), rng);

  const auto first = static_cast<std::size_t>((n + 1) / 2);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(first));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(first), idx.end());

  auto take = [&](std::size_t from, std::size_t to) {
    RowMatrix m(static_cast<Eigen::Index>(to - from), set.dims());
    for (std::size_t i = from; i < to; ++i) m.row(static_cast<Eigen::Index>(i - from)) = set.data().row(idx[i]);
    return EmbeddingSet(std::move(m), set.metadata(), set.dtype());
  };
  return {take(0, first), take(first, idx.size())};
}

struct ManifestEntry {
  std::string path;  // as written in the manifest
  std::string extractor;
  std::string dataset;
  std::string model_tag;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
};

struct EmbeddingManifest {
  int format_version = 1;
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // relative entry paths resolve against this

  std::string resolve(const ManifestEntry& e) const {
    const std::filesystem::path p(e.path);
    return (p.is_absolute() ? p : base_dir / p).string();
  }
};

inline EmbeddingManifest parse_manifest(const nlohmann::json& j, const std::filesystem::path& base_dir,
                                        const std::string& where = "manifest") {
  EmbeddingManifest m;
  m.base_dir = base_dir;
  if (!j.is_object()) throw ValidationError(where + ": top level must be an object");
  m.format_version = j.value("format_version", 1);
  if (m.format_version != 1) {
    throw ValidationError(where + ": unsupported format_version " + std::to_string(m.format_version));
  }
  if (!j.contains("entries") || !j["entries"].is_array()) throw ValidationError(where + ": missing entries array");
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  std::size_t i = 0;
  for (const auto& ej : j["entries"]) {
    const std::string at = where + ": entries[" + std::to_string(i++) + "]";
    ManifestEntry e;
    try {
      e.path = ej.at("path").get<std::string>();
      e.extractor = ej.at("extractor").get<std::string>();
      e.dataset = ej.at("dataset").get<std::string>();
      e.model_tag = ej.at("model_tag").get<std::string>();
      e.n = ej.at("n").get<Eigen::Index>();
      e.d = ej.at("d").get<Eigen::Index>();
    } catch (const nlohmann::json::exception& ex) {
      throw ValidationError(at + ": " + ex.what());
    }
    if (!seen.emplace(e.extractor, e.dataset, e.model_tag).second) {
      throw ValidationError(at + ": duplicate (extractor, dataset, model_tag) = (" + e.extractor + ", " + e.dataset +
                            ", " + e.model_tag + ")");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

inline EmbeddingManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
  return parse_manifest(j, std::filesystem::path(path).parent_path(), path);
}

// Loads a manifest entry, checking the listed shape; manifest labels take
// precedence over any sidecar.
inline EmbeddingSet load_entry(const EmbeddingManifest& manifest, const ManifestEntry& e) {
  return load_embeddings(manifest.resolve(e), Shape{e.n, e.d}, EmbeddingMetadata{e.extractor, e.dataset, e.model_tag});
}

}  // namespace genimg_eval
