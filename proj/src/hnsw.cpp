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
#include "trimodal/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <zlib.h>

#include "trimodal/binary_io.hpp"
#include "trimodal/error.hpp"
#include "trimodal/file_util.hpp"
#include "trimodal/random.hpp"

namespace trimodal {
namespace {

constexpr std::string_view kMagic = "TRIMHNSW";
constexpr std::uint32_t kVersion = 1;

bool hit_order(const SearchHit& a, const SearchHit& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

Eigen::VectorXf normalized(const Eigen::VectorXf& v, const char* what) {
  const float n = v.norm();
  if (!(n > 0.0f) || !std::isfinite(n)) throw DataError(std::string(what) + ": zero or non-finite vector");
  return v / n;
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded slices.
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + pos), static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

void IndexParams::validate() const {
  if (max_neighbors < 2) throw UsageError("max_neighbors must be >= 2");
  if (ef_construction < 1 || ef_search < 1) throw UsageError("ef_construction and ef_search must be >= 1");
  if (dim < 1) throw UsageError("index dim must be >= 1");
}

HnswIndex::HnswIndex(IndexParams params) : params_(params), dim_(static_cast<std::size_t>(params.dim)) {
  params_.validate();
}

HnswIndex HnswIndex::build(std::span<const IndexedVector> vectors, IndexParams params) {
  HnswIndex index(params);
  for (const auto& v : vectors) index.insert(v.id, v.vector);
  return index;
}

std::size_t HnswIndex::degree_bound(int level) const {
  return static_cast<std::size_t>(level == 0 ? 2 * params_.max_neighbors : params_.max_neighbors);
}

std::span<const std::uint32_t> HnswIndex::neighbors(std::size_t node, int level) const {
  return links_[node][static_cast<std::size_t>(level)];
}

Eigen::Map<const Eigen::VectorXf> HnswIndex::vector(std::size_t node) const {
  return {data(static_cast<std::uint32_t>(node)), static_cast<Eigen::Index>(dim_)};
}

float HnswIndex::similarity(const float* a, const float* b) const {
  return Eigen::Map<const Eigen::VectorXf>(a, static_cast<Eigen::Index>(dim_))
      .dot(Eigen::Map<const Eigen::VectorXf>(b, static_cast<Eigen::Index>(dim_)));
}

int HnswIndex::draw_level(std::size_t node) const {
  // Geometric levels with multiplier 1/ln(M); one derived stream per node so
  // the graph does not depend on how inserts were batched.
  Rng rng(derive_seed(params_.seed, node));
  const double u = 1.0 - rng.uniform();  // (0, 1]
  const double ml = 1.0 / std::log(static_cast<double>(params_.max_neighbors));
  return static_cast<int>(std::floor(-std::log(u) * ml));
}

std::uint32_t HnswIndex::greedy_descend(const float* q, std::uint32_t entry, int from_level,
                                        int to_level) const {
  std::uint32_t cur = entry;
  float best = similarity(q, data(cur));
  for (int lc = from_level; lc > to_level; --lc) {
    bool moved = true;
    while (moved) {
      moved = false;
      for (std::uint32_t n : links_[cur][static_cast<std::size_t>(lc)]) {
        const float s = similarity(q, data(n));
        if (s > best || (s == best && n < cur)) {
          best = s;
          cur = n;
          moved = true;
        }
      }
    }
  }
  return cur;
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(const float* q,
                                                          std::vector<std::uint32_t> entries,
                                                          std::size_t ef, int level) const {
  // Candidates: best first. Results: worst on top so it can be evicted.
  auto worse = [](const Candidate& a, const Candidate& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  };
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(better)> candidates(better);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> results(worse);
  std::vector<bool> visited(ids_.size(), false);
  for (std::uint32_t e : entries) {
    if (visited[e]) continue;
    visited[e] = true;
    const Candidate c{similarity(q, data(e)), e};
    candidates.push(c);
    results.push(c);
    if (results.size() > ef) results.pop();
  }
  while (!candidates.empty()) {
    const Candidate c = candidates.top();
    if (results.size() >= ef && c.first < results.top().first) break;
    candidates.pop();
    for (std::uint32_t n : links_[c.second][static_cast<std::size_t>(level)]) {
      if (visited[n]) continue;
      visited[n] = true;
      const float s = similarity(q, data(n));
      if (results.size() < ef || s > results.top().first) {
        candidates.push({s, n});
        results.push({s, n});
        if (results.size() > ef) results.pop();
      }
    }
  }
  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());  // best first
  return out;
}

std::vector<std::uint32_t> HnswIndex::select_neighbors(std::vector<Candidate> candidates,
                                                       std::size_t m) const {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  // Keep a candidate only if it is closer to the base than to every
  // neighbor already kept.
  std::vector<std::uint32_t> kept;
  for (const auto& [sim, node] : candidates) {
    if (kept.size() >= m) break;
    bool diverse = true;
    for (std::uint32_t k : kept) {
      if (similarity(data(node), data(k)) > sim) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(node);
  }
  return kept;
}

void HnswIndex::insert(const std::string& id, const Eigen::VectorXf& vector) {
  if (static_cast<std::size_t>(vector.size()) != dim_) {
    throw DataError("insert '" + id + "': dimension " + std::to_string(vector.size()) +
                    " does not match index dimension " + std::to_string(dim_));
  }
  if (by_id_.count(id)) throw DataError("insert: duplicate id '" + id + "'");
  const Eigen::VectorXf unit = normalized(vector, "insert");

  const auto node = static_cast<std::uint32_t>(ids_.size());
  const int level = draw_level(node);
  ids_.push_back(id);
  by_id_.emplace(id, node);
  data_.insert(data_.end(), unit.data(), unit.data() + dim_);
  levels_.push_back(level);
  links_.emplace_back(static_cast<std::size_t>(level) + 1);

  if (entry_ < 0) {
    entry_ = node;
    max_level_ = level;
    return;
  }
  const float* q = data(node);
  std::uint32_t cur = greedy_descend(q, static_cast<std::uint32_t>(entry_), max_level_, level);
  std::vector<std::uint32_t> entries{cur};
  for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
    auto found = search_layer(q, entries, static_cast<std::size_t>(params_.ef_construction), lc);
    auto chosen = select_neighbors(found, static_cast<std::size_t>(params_.max_neighbors));
    const auto lvl = static_cast<std::size_t>(lc);
    links_[node][lvl] = chosen;
    const std::size_t bound = degree_bound(lc);
    for (std::uint32_t n : chosen) {
      auto& adj = links_[n][lvl];
      adj.push_back(node);
      if (adj.size() > bound) {
        std::vector<Candidate> pool;
        pool.reserve(adj.size());
        for (std::uint32_t a : adj) pool.push_back({similarity(data(n), data(a)), a});
        adj = select_neighbors(std::move(pool), bound);
      }
    }
    entries.clear();
    for (const auto& c : found) entries.push_back(c.second);
  }
  if (level > max_level_) {
    max_level_ = level;
    entry_ = node;
  }
}

std::vector<SearchHit> HnswIndex::search(const Eigen::VectorXf& query, std::size_t k,
                                         int ef_search) const {
  if (static_cast<std::size_t>(query.size()) != dim_) {
    throw DataError("search: query dimension " + std::to_string(query.size()) +
                    " does not match index dimension " + std::to_string(dim_));
  }
  if (entry_ < 0 || k == 0) return {};
  const Eigen::VectorXf unit = normalized(query, "search");
  const std::size_t ef =
      std::max<std::size_t>(k, static_cast<std::size_t>(ef_search > 0 ? ef_search : params_.ef_search));
  const std::uint32_t start = greedy_descend(unit.data(), static_cast<std::uint32_t>(entry_), max_level_, 0);
  auto found = search_layer(unit.data(), {start}, ef, 0);
  std::vector<SearchHit> hits;
  hits.reserve(found.size());
  for (const auto& [sim, node] : found) hits.push_back({ids_[node], static_cast<double>(sim)});
  std::sort(hits.begin(), hits.end(), hit_order);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

std::string HnswIndex::serialize() const {
  binio::Writer w;
  w.put_bytes(kMagic);
  w.put(kVersion);
  w.put(static_cast<std::int32_t>(params_.max_neighbors));
  w.put(static_cast<std::int32_t>(params_.ef_construction));
  w.put(static_cast<std::int32_t>(params_.ef_search));
  w.put(static_cast<std::int32_t>(params_.dim));
  w.put(params_.seed);
  w.put(static_cast<std::uint64_t>(ids_.size()));
  w.put(static_cast<std::int32_t>(entry_));
  w.put(static_cast<std::int32_t>(max_level_));
  for (std::size_t n = 0; n < ids_.size(); ++n) {
    w.put_string(ids_[n]);
    w.put(static_cast<std::int32_t>(levels_[n]));
    for (std::size_t j = 0; j < dim_; ++j) w.put(data_[n * dim_ + j]);
    for (const auto& adj : links_[n]) {
      w.put(static_cast<std::uint32_t>(adj.size()));
      for (std::uint32_t a : adj) w.put(a);
    }
  }
  std::string out = w.bytes();
  binio::Writer trailer;
  trailer.put(crc32_of(out));
  out += trailer.bytes();
  return out;
}

HnswIndex HnswIndex::deserialize(std::string_view bytes, const std::string& context) {
  if (bytes.size() < kMagic.size() + 8 || bytes.substr(0, kMagic.size()) != kMagic) {
    throw DataError(context + ": not an index file");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  binio::Reader tail(bytes.substr(bytes.size() - 4), context);
  if (tail.get<std::uint32_t>() != crc32_of(body)) {
    throw DataError(context + ": checksum mismatch (corrupt or truncated index)");
  }
  binio::Reader r(body, context);
  r.get_bytes(kMagic.size());
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw DataError(context + ": unsupported index version " + std::to_string(version));
  IndexParams p;
  p.max_neighbors = r.get<std::int32_t>();
  p.ef_construction = r.get<std::int32_t>();
  p.ef_search = r.get<std::int32_t>();
  p.dim = r.get<std::int32_t>();
  p.seed = r.get<std::uint64_t>();
  try {
    p.validate();
  } catch (const UsageError& e) {
    throw DataError(context + ": " + e.what());
  }
  HnswIndex index(p);
  const auto count = r.get<std::uint64_t>();
  index.entry_ = r.get<std::int32_t>();
  index.max_level_ = r.get<std::int32_t>();
  if ((count == 0) != (index.entry_ < 0) || index.entry_ >= static_cast<std::int64_t>(count)) {
    throw DataError(context + ": inconsistent entry point");
  }
  for (std::uint64_t n = 0; n < count; ++n) {
    std::string id = r.get_string();
    const int level = r.get<std::int32_t>();
    if (level < 0 || level > index.max_level_) throw DataError(context + ": bad node level");
    index.by_id_.emplace(id, static_cast<std::uint32_t>(n));
    index.ids_.push_back(std::move(id));
    index.levels_.push_back(level);
    for (std::size_t j = 0; j < index.dim_; ++j) index.data_.push_back(r.get<float>());
    auto& node_links = index.links_.emplace_back(static_cast<std::size_t>(level) + 1);
    for (auto& adj : node_links) {
      const auto deg = r.get<std::uint32_t>();
      adj.resize(deg);
      for (auto& a : adj) {
        a = r.get<std::uint32_t>();
        if (a >= count) throw DataError(context + ": neighbor index out of range");
      }
    }
  }
  if (index.by_id_.size() != index.ids_.size()) throw DataError(context + ": duplicate ids");
  if (r.remaining() != 0) throw DataError(context + ": trailing bytes");
  return index;
}

void HnswIndex::save(const std::filesystem::path& path) const { write_file(path, serialize()); }

HnswIndex HnswIndex::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("index not found: " + path.string());
  return deserialize(read_file(path), path.string());
}

std::vector<SearchHit> exact_search(std::span<const IndexedVector> vectors,
                                    const Eigen::VectorXf& query, std::size_t k) {
  if (vectors.empty() || k == 0) return {};
  const Eigen::VectorXf q = normalized(query, "exact_search");
  std::vector<SearchHit> hits;
  hits.reserve(vectors.size());
  for (const auto& v : vectors) {
    if (v.vector.size() != q.size()) throw DataError("exact_search: dimension mismatch for '" + v.id + "'");
    const Eigen::VectorXf unit = normalized(v.vector, "exact_search");
    hits.push_back({v.id, static_cast<double>(unit.dot(q))});
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(), hit_order);
  hits.resize(keep);
  return hits;
}

}  // namespace trimodal
