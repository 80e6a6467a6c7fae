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
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace trimodal {

struct IndexParams {
  int max_neighbors = 16;  // M; layer 0 keeps up to 2M
  int ef_construction = 200;
  int ef_search = 160;
  int dim = 0;
  std::uint64_t seed = 100;  // level assignment

  void validate() const;
  bool operator==(const IndexParams&) const = default;
};

struct IndexedVector {
  std::string id;
  Eigen::VectorXf vector;
};

struct SearchHit {
  std::string id;
  double similarity = 0.0;

  bool operator==(const SearchHit&) const = default;
};

/// Cosine-similarity HNSW graph. Vectors are normalized on insert, so the
/// similarity is a plain inner product afterwards. Searches are const and
/// may run concurrently; insert needs exclusive access.
class HnswIndex {
 public:
  explicit HnswIndex(IndexParams params);

  static HnswIndex build(std::span<const IndexedVector> vectors, IndexParams params);

  /// Throws DataError for a duplicate id, a dimension mismatch or a zero
  /// vector; the index is unchanged in that case.
  void insert(const std::string& id, const Eigen::VectorXf& vector);

  /// Up to k hits, highest similarity first (ties by id). `ef_search` <= 0
  /// uses the configured beam; the beam is raised to k when smaller.
  std::vector<SearchHit> search(const Eigen::VectorXf& query, std::size_t k,
                                int ef_search = 0) const;

  std::size_t size() const { return ids_.size(); }
  const IndexParams& params() const { return params_; }
  int max_level() const { return max_level_; }
  int level(std::size_t node) const { return levels_[node]; }
  const std::string& id(std::size_t node) const { return ids_[node]; }
  std::span<const std::uint32_t> neighbors(std::size_t node, int level) const;
  Eigen::Map<const Eigen::VectorXf> vector(std::size_t node) const;

  /// Largest neighbor count allowed on `level`.
  std::size_t degree_bound(int level) const;

  /// Versioned binary layout with a trailing CRC-32:
  ///   magic "TRIMHNSW", u32 version, i32 M, ef_construction, ef_search,
  ///   dim, u64 seed, u64 count, i32 entry, i32 max level, then per node:
  ///   id (u32 length + bytes), i32 level, dim f32, and for each level
  ///   0..level a u32 count followed by u32 neighbor indices.
  std::string serialize() const;
  static HnswIndex deserialize(std::string_view bytes, const std::string& context = "index");
  void save(const std::filesystem::path& path) const;
  static HnswIndex load(const std::filesystem::path& path);

 private:
  using Candidate = std::pair<float, std::uint32_t>;

  float similarity(const float* a, const float* b) const;
  const float* data(std::uint32_t node) const { return data_.data() + static_cast<std::size_t>(node) * dim_; }
  int draw_level(std::size_t node) const;
  std::uint32_t greedy_descend(const float* q, std::uint32_t entry, int from_level, int to_level) const;
  std::vector<Candidate> search_layer(const float* q, std::vector<std::uint32_t> entries, std::size_t ef,
                                      int level) const;
  std::vector<std::uint32_t> select_neighbors(std::vector<Candidate> candidates, std::size_t m) const;

  IndexParams params_;
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, std::uint32_t> by_id_;
  std::vector<float> data_;
  std::vector<int> levels_;
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;  // node -> level -> neighbors
  std::int64_t entry_ = -1;
  int max_level_ = -1;
};

/// Exhaustive cosine top-k with the same ordering contract as search.
std::vector<SearchHit> exact_search(std::span<const IndexedVector> vectors,
                                    const Eigen::VectorXf& query, std::size_t k);

}  // namespace trimodal
