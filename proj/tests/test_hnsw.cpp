// Copyright 2026-present the trimodal authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include <doctest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "trimodal/error.hpp"
#include "trimodal/file_util.hpp"
#include "trimodal/hnsw.hpp"

using namespace trimodal;

namespace {

std::vector<IndexedVector> random_vectors(std::size_t n, int dim, std::uint64_t seed,
                                          const std::string& prefix = "v") {
  Rng rng(seed);
  std::vector<IndexedVector> out;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::VectorXf v(dim);
    for (int j = 0; j < dim; ++j) v(j) = static_cast<float>(rng.uniform(-1, 1));
    out.push_back({prefix + std::to_string(i), v.normalized()});
  }
  return out;
}

IndexParams params_for(int dim) {
  IndexParams p;
  p.dim = dim;
  return p;
}

// Naive scan: every similarity in double, full sort, ties by id.
std::vector<std::string> naive_top(const std::vector<IndexedVector>& vs, const Eigen::VectorXf& q,
                                   std::size_t k) {
  std::vector<std::pair<double, std::string>> all;
  const Eigen::VectorXd qd = q.cast<double>().normalized();
  for (const auto& v : vs) all.emplace_back(v.vector.cast<double>().normalized().dot(qd), v.id);
  std::sort(all.begin(), all.end(), [](auto& a, auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) ids.push_back(all[i].second);
  return ids;
}

double recall_vs_exact(const HnswIndex& index, const std::vector<IndexedVector>& data,
                       const std::vector<IndexedVector>& queries, std::size_t k) {
  std::size_t hit = 0;
  for (const auto& q : queries) {
    const auto approx = index.search(q.vector, k);
    const auto exact = exact_search(data, q.vector, k);
    std::set<std::string> truth;
    for (const auto& h : exact) truth.insert(h.id);
    for (const auto& h : approx) hit += truth.count(h.id);
  }
  return static_cast<double>(hit) / static_cast<double>(queries.size() * k);
}

}  // namespace

TEST_CASE("empty and singleton indices") {
  HnswIndex empty(params_for(4));
  CHECK(empty.size() == 0);
  CHECK(empty.search(Eigen::Vector4f(1, 0, 0, 0), 3).empty());

  const std::vector<IndexedVector> one{{"only", Eigen::Vector4f(0.5, 0.5, 0.5, 0.5)}};
  const auto idx = HnswIndex::build(one, params_for(4));
  const auto hits = idx.search(one[0].vector, 1);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].id == "only");
  CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(exact_search(one, one[0].vector, 5).size() == 1);
}

TEST_CASE("insert is searchable immediately and rejects bad input without changing the index") {
  const auto vs = random_vectors(300, 16, 1);
  HnswIndex idx(params_for(16));
  for (const auto& v : vs) {
    idx.insert(v.id, v.vector);
    const auto hits = idx.search(v.vector, 1);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].id == v.id);
  }
  const auto before = idx.serialize();
  CHECK_THROWS_AS(idx.insert("v3", vs[7].vector), DataError);
  CHECK_THROWS_AS(idx.insert("new", Eigen::VectorXf::Ones(8)), DataError);
  CHECK_THROWS_AS(idx.insert("zero", Eigen::VectorXf::Zero(16)), DataError);
  CHECK(idx.serialize() == before);
  CHECK_THROWS_AS(idx.search(Eigen::VectorXf::Ones(3), 1), DataError);
}

TEST_CASE("vectors are normalized at insert") {
  HnswIndex idx(params_for(2));
  idx.insert("a", Eigen::Vector2f(3, 4));
  CHECK(idx.vector(0).norm() == doctest::Approx(1.0f).epsilon(1e-6));
  const auto hits = idx.search(Eigen::Vector2f(6, 8), 1);
  CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("search output contract") {
  const auto vs = random_vectors(500, 12, 2);
  const auto idx = HnswIndex::build(vs, params_for(12));
  const auto queries = random_vectors(50, 12, 3, "q");
  for (const auto& q : queries) {
    const auto hits = idx.search(q.vector, 10);
    CHECK(hits.size() == 10);
    for (std::size_t i = 0; i < hits.size(); ++i) {
      CHECK(hits[i].similarity <= 1.0 + 1e-6);
      CHECK(hits[i].similarity >= -1.0 - 1e-6);
      if (i) CHECK(hits[i - 1].similarity >= hits[i].similarity);
    }
    CHECK(idx.search(q.vector, 10) == hits);
  }
  CHECK(idx.search(queries[0].vector, 1000).size() == 500);
}

TEST_CASE("exact search matches a naive second implementation") {
  const auto vs = random_vectors(100, 8, 4);
  const auto queries = random_vectors(30, 8, 5, "q");
  for (const auto& q : queries) {
    const auto exact = exact_search(vs, q.vector, 7);
    std::vector<std::string> ids;
    for (const auto& h : exact) ids.push_back(h.id);
    CHECK(ids == naive_top(vs, q.vector, 7));
  }
  std::vector<IndexedVector> tied{{"b", Eigen::Vector2f(1, 0)}, {"a", Eigen::Vector2f(1, 0)},
                                  {"c", Eigen::Vector2f(0, 1)}};
  const auto t = exact_search(tied, Eigen::Vector2f(1, 0), 2);
  CHECK(t[0].id == "a");
  CHECK(t[1].id == "b");
  CHECK_THROWS_AS(exact_search(tied, Eigen::Vector3f(1, 0, 0), 1), DataError);
}

TEST_CASE("recall against exact search and degree bounds") {
  const auto vs = random_vectors(3000, 32, 6);
  const auto idx = HnswIndex::build(vs, params_for(32));
  const auto queries = random_vectors(200, 32, 7, "q");
  CHECK(recall_vs_exact(idx, vs, queries, 10) >= 0.95);
  for (std::size_t n = 0; n < idx.size(); ++n) {
    for (int l = 0; l <= idx.level(n); ++l) CHECK(idx.neighbors(n, l).size() <= idx.degree_bound(l));
  }
  CHECK(idx.degree_bound(0) == 32);
  CHECK(idx.degree_bound(1) == 16);
}

TEST_CASE("interleaved inserts and searches agree with a batch build") {
  const auto vs = random_vectors(1500, 16, 8);
  const auto queries = random_vectors(100, 16, 9, "q");
  HnswIndex incremental(params_for(16));
  std::vector<IndexedVector> so_far;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    incremental.insert(vs[i].id, vs[i].vector);
    so_far.push_back(vs[i]);
    if (i % 300 == 299) CHECK(recall_vs_exact(incremental, so_far, queries, 5) >= 0.95);
  }
  const auto batch = HnswIndex::build(vs, params_for(16));
  CHECK(recall_vs_exact(batch, vs, queries, 5) >= 0.95);
}

TEST_CASE("persistence round trip and corruption detection") {
  testing::TempDir dir;
  const auto vs = random_vectors(400, 8, 10);
  const auto idx = HnswIndex::build(vs, params_for(8));
  idx.save(dir / "index.bin");
  const auto back = HnswIndex::load(dir / "index.bin");
  CHECK(back.params() == idx.params());
  CHECK(back.serialize() == idx.serialize());
  for (const auto& q : random_vectors(40, 8, 11, "q")) CHECK(back.search(q.vector, 5) == idx.search(q.vector, 5));

  HnswIndex empty(params_for(8));
  const auto e = HnswIndex::deserialize(empty.serialize());
  CHECK(e.size() == 0);
  CHECK(e.search(vs[0].vector, 3).empty());

  const auto bytes = idx.serialize();
  CHECK_THROWS_AS(HnswIndex::deserialize(bytes.substr(0, bytes.size() / 2)), DataError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x20;
  CHECK_THROWS_AS(HnswIndex::deserialize(flipped), DataError);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(HnswIndex::deserialize(version), DataError);
  write_file(dir / "trunc.bin", bytes.substr(0, 40));
  CHECK_THROWS_AS(HnswIndex::load(dir / "trunc.bin"), DataError);
  CHECK_THROWS_AS(HnswIndex::load(dir / "absent.bin"), DataError);
}

TEST_CASE("construction is deterministic for a seed") {
  const auto vs = random_vectors(600, 8, 12);
  CHECK(HnswIndex::build(vs, params_for(8)).serialize() == HnswIndex::build(vs, params_for(8)).serialize());
  auto other = params_for(8);
  other.seed = 101;
  CHECK(HnswIndex::build(vs, other).serialize() != HnswIndex::build(vs, params_for(8)).serialize());
}

TEST_CASE("index parameter validation") {
  IndexParams p = params_for(4);
  p.max_neighbors = 1;
  CHECK_THROWS_AS(HnswIndex{p}, UsageError);
  p = params_for(0);
  CHECK_THROWS_AS(HnswIndex{p}, UsageError);
}
