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
#include "trimodal/rag.hpp"

#include <algorithm>

#include "trimodal/error.hpp"
#include "trimodal/tokenizer.hpp"

namespace trimodal {

const std::array<std::string_view, kCategoryCount>& category_labels() {
  static constexpr std::array<std::string_view, kCategoryCount> labels = {
      "cc",         "CurrentMeds",   "PastHistory",     "Allergies",     "vitals2BR",
      "PhysicalExamination", "Treatment", "Immunization", "Procedure",   "SurgicalHistory",
      "Hospitalization", "FamilyHistory", "SocialHistory", "ros",         "hpi",
      "assessment", "ClinicalNotes", "Injection",       "labs",          "PastOrders",
      "Preventive"};
  return labels;
}

std::string_view to_string(ClinicalCategory c) {
  return category_labels()[static_cast<std::size_t>(c)];
}

ClinicalCategory parse_category(std::string_view label) {
  const auto& labels = category_labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == label) return static_cast<ClinicalCategory>(i);
  }
  throw DataError("unknown clinical category '" + std::string(label) + "'");
}

namespace {

std::vector<TextChunk> split_on(std::string_view text, const std::string& delimiter) {
  std::vector<TextChunk> parts;
  if (delimiter.empty()) {
    // Character level, keeping UTF-8 sequences whole.
    std::size_t i = 0;
    while (i < text.size()) {
      std::size_t j = i + 1;
      while (j < text.size() && (static_cast<unsigned char>(text[j]) & 0xC0) == 0x80) ++j;
      parts.push_back({std::string(text.substr(i, j - i)), ""});
      i = j;
    }
    return parts;
  }
  std::size_t start = 0;
  while (true) {
    const std::size_t at = text.find(delimiter, start);
    if (at == std::string_view::npos) {
      parts.push_back({std::string(text.substr(start)), ""});
      break;
    }
    parts.push_back({std::string(text.substr(start, at - start)), delimiter});
    start = at + delimiter.size();
  }
  return parts;
}

std::vector<TextChunk> split_recursive(std::string_view text, std::size_t max_tokens,
                                       std::span<const std::string> delimiters) {
  if (text.empty()) return {};
  if (count_tokens(text) <= max_tokens || delimiters.empty()) {
    return {TextChunk{std::string(text), ""}};
  }
  std::size_t level = 0;
  while (level + 1 < delimiters.size() && !delimiters[level].empty() &&
         text.find(delimiters[level]) == std::string_view::npos) {
    ++level;
  }
  const auto finer = delimiters.subspan(level + 1);
  const auto parts = split_on(text, delimiters[level]);

  std::vector<TextChunk> out;
  TextChunk current;
  bool open = false;
  auto flush = [&] {
    if (open) out.push_back(std::move(current));
    current = {};
    open = false;
  };
  for (const auto& part : parts) {
    if (count_tokens(part.text) > max_tokens) {
      flush();
      auto sub = split_recursive(part.text, max_tokens, finer);
      sub.back().trailing_delimiter = part.trailing_delimiter;
      for (auto& s : sub) out.push_back(std::move(s));
      continue;
    }
    if (open) {
      std::string merged = current.text + current.trailing_delimiter + part.text;
      if (count_tokens(merged) <= max_tokens) {
        current.text = std::move(merged);
        current.trailing_delimiter = part.trailing_delimiter;
        continue;
      }
      flush();
    }
    current = part;
    open = true;
  }
  flush();
  return out;
}

}  // namespace

std::vector<TextChunk> split_text(std::string_view text, std::size_t max_tokens,
                                  std::span<const std::string> delimiters) {
  if (max_tokens < 1) throw UsageError("split_text: max_tokens must be >= 1");
  auto chunks = split_recursive(text, max_tokens, delimiters);
  // Fold token-free pieces (separators only) into a neighbor; this changes
  // neither token counts nor the reconstructed text.
  std::vector<TextChunk> out;
  std::string carry;
  for (auto& c : chunks) {
    if (chunks.size() > 1 && count_tokens(c.text) == 0) {
      if (!out.empty()) {
        out.back().trailing_delimiter += c.text + c.trailing_delimiter;
      } else {
        carry += c.text + c.trailing_delimiter;
      }
      continue;
    }
    c.text.insert(0, carry);
    carry.clear();
    out.push_back(std::move(c));
  }
  if (!carry.empty()) out.push_back({std::move(carry), ""});
  return out;
}

std::string Chunk::id() const {
  return patient_id + "_" + std::string(to_string(category)) + "_chunk" + std::to_string(sequence);
}

const PatientStore& ChunkStore::patient(const std::string& id) const {
  auto it = patients_.find(id);
  if (it == patients_.end()) throw DataError("unknown patient '" + id + "'");
  return it->second;
}

ChunkStore ingest_notes(std::span<const NoteRecord> records, const RagParams& params,
                        const Embedder& embedder) {
  if (params.max_chunk_tokens < 1) throw UsageError("max_chunk_tokens must be >= 1");
  const auto& enc = embedder.params().config;
  if (params.max_chunk_tokens + 1 > static_cast<std::size_t>(enc.max_seq_len)) {
    throw UsageError("max_chunk_tokens " + std::to_string(params.max_chunk_tokens) +
                     " does not fit the encoder max_seq_len " + std::to_string(enc.max_seq_len));
  }
  RagParams resolved = params;
  resolved.index.dim = enc.dim;
  ChunkStore store(resolved);

  std::map<std::string, std::map<ClinicalCategory, std::string>> documents;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.patient_id.empty()) throw DataError("note " + std::to_string(i) + ": empty patient_id");
    if (r.text.empty()) throw DataError("note " + std::to_string(i) + ": empty text");
    auto& doc = documents[r.patient_id][r.category];
    if (!doc.empty()) doc += "\n\n";
    doc += r.text;
  }

  for (const auto& [patient_id, by_category] : documents) {
    PatientStore ps{{}, {}, HnswIndex(resolved.index)};
    for (const auto& [category, doc] : by_category) {
      const auto pieces = split_text(doc, resolved.max_chunk_tokens);
      for (std::size_t seq = 0; seq < pieces.size(); ++seq) {
        Chunk c;
        c.patient_id = patient_id;
        c.category = category;
        c.sequence = seq;
        c.text = pieces[seq].text;
        c.trailing_delimiter = pieces[seq].trailing_delimiter;
        c.token_count = count_tokens(c.text);
        const std::string id = c.id();
        try {
          c.embedding = embedder.dense(c.text).cast<float>();
          ps.index.insert(id, c.embedding);
        } catch (const Error& e) {
          rethrow_with_prefix(e, "chunk " + id + ": ");
        }
        ps.by_id.emplace(id, ps.chunks.size());
        ps.chunks.push_back(std::move(c));
      }
    }
    store.patients_.emplace(patient_id, std::move(ps));
  }
  return store;
}

RagResult rag_query(const ChunkStore& store, const RagQuery& query, std::size_t k,
                    const Embedder& embedder) {
  const PatientStore& ps = store.patient(query.patient_id);
  const auto& params = store.params();
  const bool rerank = params.rerank != Modality::kDense;
  const Eigen::VectorXf q = embedder.dense(query.query).cast<float>();
  auto hits = ps.index.search(q, rerank ? k * params.rerank_depth : k);

  if (rerank && !hits.empty()) {
    const MultiRepresentation qrep = embedder.represent(query.query);
    for (auto& h : hits) {
      const Chunk& c = ps.chunks[ps.by_id.at(h.id)];
      const MultiRepresentation crep = embedder.represent(c.text);
      if (qrep.length() == 0 || crep.length() == 0) {
        h.similarity = params.rerank == Modality::kSparse ? 0.0 : -2.0;
        if (params.rerank == Modality::kEnsemble) {
          h.similarity = params.weights.dense * dense_score(qrep, crep);
        }
        continue;
      }
      h.similarity = score_pair(qrep, crep, params.weights).select(params.rerank);
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
      return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
    });
    if (hits.size() > k) hits.resize(k);
  }

  RagResult result;
  result.hits = std::move(hits);
  for (const auto& h : result.hits) {
    const Chunk& c = ps.chunks[ps.by_id.at(h.id)];
    result.chunks.push_back(&c);
    result.retrieved.insert(c.category);
  }
  return result;
}

double category_iou(const CategorySet& gold, const CategorySet& retrieved) {
  if (retrieved.empty()) return 0.0;
  std::size_t inter = 0;
  for (auto c : gold) inter += retrieved.count(c);
  const std::size_t uni = gold.size() + retrieved.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

RagReport rag_evaluate(const ChunkStore& store, std::span<const RagQuery> queries, std::size_t k,
                       const Embedder& embedder) {
  if (queries.empty()) throw DataError("rag_evaluate: empty query set");
  RagReport report;
  double sum = 0.0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    RagResult r;
    try {
      if (q.gold.empty()) throw DataError("empty gold category set");
      r = rag_query(store, q, k, embedder);
    } catch (const Error& e) {
      rethrow_with_prefix(e, "query " + std::to_string(i) + ": ");
    }
    RagQueryReport qr;
    qr.query = q.query;
    qr.patient_id = q.patient_id;
    qr.gold = q.gold;
    qr.retrieved = r.retrieved;
    for (const auto& h : r.hits) qr.chunk_ids.push_back(h.id);
    qr.iou = category_iou(q.gold, r.retrieved);
    sum += qr.iou;
    report.queries.push_back(std::move(qr));
  }
  report.mean_iou = sum / static_cast<double>(queries.size());
  return report;
}

}  // namespace trimodal
