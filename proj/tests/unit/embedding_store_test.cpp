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


#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <set>

#include "genimg_eval/embedding_store.hpp"
#include "test_util.hpp"

namespace ge = genimg_eval;
using test_util::TempDir;

namespace {

const std::string kNpyDir = std::string(FIXTURE_DIR) + "/npy/";

std::uint64_t fnv1a(const void* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

ge::RowMatrix random_rows(std::uint64_t seed, Eigen::Index n, Eigen::Index d) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ge::RowMatrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = nd(rng);
  return m;
}

}  // namespace

TEST(Npy, ReadsNumpyArangeRowMajor) {
  auto set = ge::load_embeddings(kNpyDir + "arange_4x3_f8.npy");
  ASSERT_EQ(set.rows(), 4);
  ASSERT_EQ(set.dims(), 3);
  EXPECT_EQ(set.data()(2, 1), 7.0);
  EXPECT_EQ(set.dtype(), ge::Dtype::kFloat64);
}

TEST(Npy, ReadsFloat32AndVersion2) {
  auto f4 = ge::load_embeddings(kNpyDir + "arange_4x3_f4.npy");
  EXPECT_EQ(f4.dtype(), ge::Dtype::kFloat32);
  EXPECT_EQ(f4.data()(3, 2), 11.0);
  auto v2 = ge::load_embeddings(kNpyDir + "arange_4x3_v2.npy");
  EXPECT_EQ(v2.data()(2, 1), 7.0);
}

TEST(Npy, MatchesNumpyValues) {
  auto set = ge::load_embeddings(kNpyDir + "random_5x3_f8.npy");
  auto j = nlohmann::json::parse(test_util::read_file(kNpyDir + "values.json"));
  const auto& rows = j["random_5x3_f8"];
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index k = 0; k < 3; ++k) EXPECT_EQ(set.data()(i, k), rows[i][k].get<double>());
}

TEST(Npy, TruncatedFileIsShapeMismatch) {
  try {
    ge::load_embeddings(kNpyDir + "truncated_10x8_9rows.npy");
    FAIL() << "expected an error";
  } catch (const ge::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("shape mismatch"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("10x8"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("9 complete rows"), std::string::npos) << e.what();
  }
}

TEST(Npy, RejectsUnsupportedLayouts) {
  EXPECT_THROW(ge::load_embeddings(kNpyDir + "arange_4x3_fortran.npy"), ge::ValidationError);
  EXPECT_THROW(ge::load_embeddings(kNpyDir + "arange_12_1d.npy"), ge::ValidationError);
  EXPECT_THROW(ge::load_embeddings(kNpyDir + "arange_4x3_i8.npy"), ge::ValidationError);
  EXPECT_THROW(ge::load_embeddings(kNpyDir + "does_not_exist.npy"), ge::IoError);
}

TEST(Npy, RejectsTrailingBytes) {
  TempDir tmp;
  auto bytes = test_util::read_file(kNpyDir + "arange_4x3_f8.npy") + std::string(8, '\0');
  test_util::write_file(tmp.path() / "long.npy", bytes);
  EXPECT_THROW(ge::load_embeddings(tmp.str("long.npy")), ge::ValidationError);
}

TEST(Npy, WriterIsByteIdenticalToNumpy) {
  TempDir tmp;
  ge::RowMatrix m(4, 3);
  for (int i = 0; i < 12; ++i) m.data()[i] = i;
  ge::save_embeddings(ge::EmbeddingSet(m), tmp.str("mine.npy"));
  EXPECT_EQ(test_util::read_file(tmp.path() / "mine.npy"), test_util::read_file(kNpyDir + "arange_4x3_f8.npy"));
  ge::save_embeddings(ge::EmbeddingSet(m, {}, ge::Dtype::kFloat32), tmp.str("mine4.npy"));
  EXPECT_EQ(test_util::read_file(tmp.path() / "mine4.npy"), test_util::read_file(kNpyDir + "arange_4x3_f4.npy"));
}

TEST(EmbeddingStore, OneByOneRoundTrip) {
  TempDir tmp;
  ge::RowMatrix m(1, 1);
  m(0, 0) = 3.5;
  ge::save_embeddings(ge::EmbeddingSet(m, {"x", "y", "z"}), tmp.str("one.npy"));
  auto back = ge::load_embeddings(tmp.str("one.npy"));
  EXPECT_EQ(back.data()(0, 0), 3.5);
  EXPECT_EQ(back.metadata(), (ge::EmbeddingMetadata{"x", "y", "z"}));
}

TEST(EmbeddingStore, Float32RoundTripIsExactFloat) {
  TempDir tmp;
  const auto m = random_rows(3, 7, 5);
  ge::save_embeddings(ge::EmbeddingSet(m, {}, ge::Dtype::kFloat32), tmp.str("f.npy"));
  auto back = ge::load_embeddings(tmp.str("f.npy"));
  for (Eigen::Index i = 0; i < m.size(); ++i)
    EXPECT_EQ(back.data().data()[i], static_cast<double>(static_cast<float>(m.data()[i])));
}

TEST(EmbeddingStore, RandomRoundTripsAreBitExact) {
  TempDir tmp;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 shape_rng(seed);
    const auto n = static_cast<Eigen::Index>(1 + shape_rng() % 40);
    const auto d = static_cast<Eigen::Index>(1 + shape_rng() % 16);
    const auto m = random_rows(seed, n, d);
    for (const char* name : {"r.npy", "r.csv"}) {
      ge::save_embeddings(ge::EmbeddingSet(m), tmp.str(name));
      auto back = ge::load_embeddings(tmp.str(name), ge::Shape{n, d});
      ASSERT_EQ(std::memcmp(back.data().data(), m.data(), sizeof(double) * m.size()), 0) << name << " seed " << seed;
    }
  }
}

TEST(EmbeddingStore, LargeRoundTripChecksum) {
  TempDir tmp;
  const auto m = random_rows(11, 1000, 512);
  const auto before = fnv1a(m.data(), sizeof(double) * m.size());
  ge::save_embeddings(ge::EmbeddingSet(m), tmp.str("big.npy"));
  auto back = ge::load_embeddings(tmp.str("big.npy"));
  EXPECT_EQ(fnv1a(back.data().data(), sizeof(double) * back.data().size()), before);
}

TEST(EmbeddingStore, ShapeAndFinitenessChecks) {
  TempDir tmp;
  ge::save_embeddings(ge::EmbeddingSet(random_rows(1, 4, 3)), tmp.str("a.npy"));
  EXPECT_THROW(ge::load_embeddings(tmp.str("a.npy"), ge::Shape{4, 2}), ge::ValidationError);
  ge::RowMatrix bad = random_rows(1, 3, 2);
  bad(1, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    ge::EmbeddingSet s(bad);
    FAIL();
  } catch (const ge::ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
  test_util::write_file(tmp.path() / "ragged.csv", "1,2\n3\n");
  EXPECT_THROW(ge::load_embeddings(tmp.str("ragged.csv")), ge::ValidationError);
}

TEST(EmbeddingStore, OverridesWinOverSidecar) {
  TempDir tmp;
  ge::save_embeddings(ge::EmbeddingSet(random_rows(1, 4, 3), {"ext", "ds", "tag"}), tmp.str("a.npy"));
  auto s = ge::load_embeddings(tmp.str("a.npy"), std::nullopt, {"", "other", ""});
  EXPECT_EQ(s.metadata(), (ge::EmbeddingMetadata{"ext", "other", "tag"}));
}

TEST(SplitReal, EvenAndOddSizesPartitionRows) {
  for (Eigen::Index n : {6, 7}) {
    ge::RowMatrix m(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) m(i, 0) = static_cast<double>(i);
    for (std::uint64_t seed : {0ULL, 1ULL, 99ULL}) {
      auto [a, b] = ge::split_real(ge::EmbeddingSet(m), seed);
      EXPECT_EQ(a.rows(), (n + 1) / 2);
      EXPECT_EQ(b.rows(), n / 2);
      std::multiset<double> all;
      for (Eigen::Index i = 0; i < a.rows(); ++i) all.insert(a.data()(i, 0));
      for (Eigen::Index i = 0; i < b.rows(); ++i) all.insert(b.data()(i, 0));
      std::multiset<double> expected;
      for (Eigen::Index i = 0; i < n; ++i) expected.insert(static_cast<double>(i));
      EXPECT_EQ(all, expected);
      std::set<double> distinct(all.begin(), all.end());
      EXPECT_EQ(distinct.size(), static_cast<std::size_t>(n));
    }
  }
}

TEST(SplitReal, DeterministicPerSeedAndSeedSensitive) {
  ge::RowMatrix m(100, 1);
  for (int i = 0; i < 100; ++i) m(i, 0) = i;
  const ge::EmbeddingSet set(m);
  auto first_half = [&](std::uint64_t seed) {
    auto [a, b] = ge::split_real(set, seed);
    return std::vector<double>(a.data().data(), a.data().data() + a.rows());
  };
  std::set<std::vector<double>> seen;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    EXPECT_EQ(first_half(seed), first_half(seed));
    seen.insert(first_half(seed));
  }
  EXPECT_EQ(seen.size(), 20u);
}

TEST(SplitReal, NeedsFourRows) {
  EXPECT_THROW(ge::split_real(ge::EmbeddingSet(random_rows(1, 3, 2)), 0), ge::ValidationError);
}

TEST(Manifest, ParsesAndRejectsDuplicates) {
  auto j = nlohmann::json::parse(R"({"format_version":1,"entries":[
    {"path":"a.npy","extractor":"e","dataset":"d","model_tag":"real","n":4,"d":2},
    {"path":"b.npy","extractor":"e","dataset":"d","model_tag":"ADA","n":4,"d":2}]})");
  auto m = ge::parse_manifest(j, "/base");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.resolve(m.entries[0]), "/base/a.npy");
  j["entries"][1]["model_tag"] = "real";
  EXPECT_THROW(ge::parse_manifest(j, "/base"), ge::ValidationError);
  j["format_version"] = 2;
  EXPECT_THROW(ge::parse_manifest(j, "/base"), ge::ValidationError);
}
