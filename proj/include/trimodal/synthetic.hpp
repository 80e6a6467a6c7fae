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
#include <string>
#include <vector>

#include "trimodal/dataset.hpp"
#include "trimodal/rag.hpp"
#include "trimodal/tokenizer.hpp"

namespace trimodal {

/// Controls the seeded corpus generator. Concepts are assigned to clusters
/// round-robin. Each cluster owns a small pool of query-side words, each
/// paired with one passage-side word; a concept is a distinct pair from its
/// cluster's pool. Queries use the query-side words and passages the paired
/// passage-side words, so the two never share surface tokens and the word
/// correspondence has to be learned.
struct SyntheticSpec {
  std::size_t concepts = 200;
  std::size_t clusters = 20;
  /// Size of the generated pseudo-word lexicon that all content words come from.
  std::size_t vocab_size = 2000;
  std::uint64_t seed = 42;
  double hard_negative_fraction = 0.4;
  /// Probability that a passage mentions one of its concept's query words.
  double shared_term_rate = 0.0;

  std::size_t train_triplets = 500;
  std::size_t valid_triplets = 50;
  std::size_t test_triplets = 100;
  std::size_t distill_texts = 500;
  std::size_t distill_heldout = 100;

  std::size_t rag_patients = 10;
  std::size_t rag_train_patients = 10;
  std::size_t rag_categories_per_patient = 12;
  std::size_t rag_queries_per_patient = 10;
  /// Notes per (patient, category) document, drawn uniformly from this range.
  std::size_t rag_notes_min = 8;
  std::size_t rag_notes_max = 16;
  std::size_t rag_train_triplets = 400;

  void validate() const;
  /// Negatives per triplet drawn from the query's own cluster.
  std::size_t hard_negatives() const;
};

struct SyntheticCorpus {
  std::vector<TripletExample> train;
  std::vector<TripletExample> valid;
  std::vector<TripletExample> test;
  std::vector<DefinitionRecord> definitions;
  std::vector<KgRecord> kg;
  std::vector<DefinitionRecord> definitions_heldout;
  std::vector<KgRecord> kg_heldout;
  std::vector<NoteRecord> notes;
  std::vector<RagQuery> queries;
  std::vector<TripletExample> rag_train;
  Vocab vocab;
};

/// Throws DataError when the spec cannot be satisfied.
SyntheticCorpus gen_synthetic(const SyntheticSpec& spec);

/// File names used by write_corpus and the command-line tool.
namespace corpus_files {
inline constexpr const char* kTrain = "train.jsonl";
inline constexpr const char* kValid = "valid.jsonl";
inline constexpr const char* kTest = "test.jsonl";
inline constexpr const char* kDefinitions = "definitions.jsonl";
inline constexpr const char* kKg = "kg.jsonl";
inline constexpr const char* kDefinitionsHeldout = "definitions_heldout.jsonl";
inline constexpr const char* kKgHeldout = "kg_heldout.jsonl";
inline constexpr const char* kNotes = "notes.jsonl";
inline constexpr const char* kQueries = "queries.jsonl";
inline constexpr const char* kRagTrain = "rag_train.jsonl";
inline constexpr const char* kVocab = "vocab.txt";
}  // namespace corpus_files

std::vector<std::filesystem::path> corpus_paths(const std::filesystem::path& dir);
void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

}  // namespace trimodal
