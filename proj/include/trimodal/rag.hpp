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

#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "trimodal/embedder.hpp"
#include "trimodal/hnsw.hpp"
#include "trimodal/scoring.hpp"

namespace trimodal {

enum class ClinicalCategory : std::uint8_t {
  kCc,
  kCurrentMeds,
  kPastHistory,
  kAllergies,
  kVitals2BR,
  kPhysicalExamination,
  kTreatment,
  kImmunization,
  kProcedure,
  kSurgicalHistory,
  kHospitalization,
  kFamilyHistory,
  kSocialHistory,
  kRos,
  kHpi,
  kAssessment,
  kClinicalNotes,
  kInjection,
  kLabs,
  kPastOrders,
  kPreventive,
};

inline constexpr std::size_t kCategoryCount = 21;

/// Labels exactly as they appear in note files and chunk ids.
const std::array<std::string_view, kCategoryCount>& category_labels();
std::string_view to_string(ClinicalCategory c);
/// Throws DataError on an unknown label.
ClinicalCategory parse_category(std::string_view label);

using CategorySet = std::set<ClinicalCategory>;

struct NoteRecord {
  std::string patient_id;
  ClinicalCategory category;
  std::string text;
};

struct RagQuery {
  std::string query;
  std::string patient_id;
  CategorySet gold;
};

/// One piece of a split document and the delimiter consumed right after it.
struct TextChunk {
  std::string text;
  std::string trailing_delimiter;
};

/// Coarsest first; the empty string means character-level splitting.
inline const std::vector<std::string>& default_delimiters() {
  static const std::vector<std::string> d = {"\n\n", "\n", ". ", " ", ""};
  return d;
}

/// Recursive splitter: split on the coarsest delimiter present, greedily
/// merge pieces while the tokenizer count stays within `max_tokens`, and
/// recurse with finer delimiters into any piece that alone is too long.
/// Concatenating text + trailing_delimiter over the result reproduces the
/// input exactly. Empty input yields no chunks.
std::vector<TextChunk> split_text(std::string_view text, std::size_t max_tokens,
                                  std::span<const std::string> delimiters = default_delimiters());

struct Chunk {
  std::string patient_id;
  ClinicalCategory category;
  std::size_t sequence = 0;
  std::string text;
  std::string trailing_delimiter;
  std::size_t token_count = 0;
  Eigen::VectorXf embedding;

  /// "<patient>_<category>_chunk<seq>".
  std::string id() const;
};

struct RagParams {
  std::size_t max_chunk_tokens = 100;
  std::size_t k = 5;
  IndexParams index;
  /// Dense retrieval by default. Any other modality re-scores the top
  /// k * rerank_depth dense hits with that modality before cutting to k.
  Modality rerank = Modality::kDense;
  std::size_t rerank_depth = 4;
  EnsembleWeights weights;
};

struct PatientStore {
  std::vector<Chunk> chunks;
  std::map<std::string, std::size_t> by_id;
  HnswIndex index;
};

class ChunkStore {
 public:
  explicit ChunkStore(RagParams params) : params_(std::move(params)) {}

  const RagParams& params() const { return params_; }
  const std::map<std::string, PatientStore>& patients() const { return patients_; }
  /// Throws DataError for an unknown patient.
  const PatientStore& patient(const std::string& id) const;

 private:
  friend ChunkStore ingest_notes(std::span<const NoteRecord>, const RagParams&, const Embedder&);
  RagParams params_;
  std::map<std::string, PatientStore> patients_;
};

/// Groups records by (patient, category) in input order, joins each group
/// with blank lines, splits it, embeds every chunk and builds one index per
/// patient.
ChunkStore ingest_notes(std::span<const NoteRecord> records, const RagParams& params,
                        const Embedder& embedder);

struct RagResult {
  std::vector<SearchHit> hits;
  std::vector<const Chunk*> chunks;
  CategorySet retrieved;
};

RagResult rag_query(const ChunkStore& store, const RagQuery& query, std::size_t k,
                    const Embedder& embedder);

/// |G n R| / |G u R|; zero when R is empty.
double category_iou(const CategorySet& gold, const CategorySet& retrieved);

struct RagQueryReport {
  std::string query;
  std::string patient_id;
  CategorySet gold;
  CategorySet retrieved;
  std::vector<std::string> chunk_ids;
  double iou = 0.0;
};

struct RagReport {
  std::vector<RagQueryReport> queries;
  double mean_iou = 0.0;
};

/// Throws DataError (naming the query index) on an empty query set or an
/// unknown patient.
RagReport rag_evaluate(const ChunkStore& store, std::span<const RagQuery> queries, std::size_t k,
                       const Embedder& embedder);

}  // namespace trimodal
