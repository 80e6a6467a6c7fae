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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "trimodal/losses.hpp"
#include "trimodal/objective.hpp"
#include "trimodal/rag.hpp"
#include "trimodal/tokenizer.hpp"

namespace trimodal {

struct TripletExample {
  std::string query;
  std::string positive;
  std::array<std::string, kNegatives> negatives;
  /// Optional grouping label used for stratified reporting and k-fold splits.
  std::string stratum;
  /// Marks negatives drawn from the query's own concept neighborhood.
  std::array<bool, kNegatives> hard{};
};

struct DefinitionRecord {
  std::string term;
  std::string definition;
};

struct KgRecord {
  std::string subject;
  std::string predicate;
  std::string object;
  /// Empty means "render with render_kg".
  std::string rendered_text;
};

enum class DistillKind { kDefinition, kKgStatement };

struct DistillText {
  std::string text;
  DistillKind kind = DistillKind::kDefinition;
  /// Token count of text.
  std::size_t complexity = 0;
};

/// "The {subject} {predicate, underscores as spaces} the {object}."
std::string render_kg(std::string_view subject, std::string_view predicate,
                      std::string_view object);

/// "{term}: {definition}"
std::string render_definition(const DefinitionRecord& d);

DistillText make_distill_text(std::string text, DistillKind kind);
std::vector<DistillText> distill_texts(std::span<const DefinitionRecord> definitions,
                                       std::span<const KgRecord> statements);

/// Throws DataError naming the empty field when any text tokenizes to nothing.
TokenizedTriplet tokenize_triplet(const TripletExample& t, const Vocab& vocab);
std::vector<TokenizedTriplet> tokenize_triplets(std::span<const TripletExample> triplets,
                                                const Vocab& vocab);
std::vector<TokenSeq> tokenize_texts(std::span<const DistillText> texts, const Vocab& vocab);

// Line-delimited JSON files, one record per line.
void write_triplets(const std::filesystem::path& path, std::span<const TripletExample> items);
std::vector<TripletExample> read_triplets(const std::filesystem::path& path);
void write_definitions(const std::filesystem::path& path,
                       std::span<const DefinitionRecord> items);
std::vector<DefinitionRecord> read_definitions(const std::filesystem::path& path);
void write_kg(const std::filesystem::path& path, std::span<const KgRecord> items);
std::vector<KgRecord> read_kg(const std::filesystem::path& path);
void write_notes(const std::filesystem::path& path, std::span<const NoteRecord> items);
std::vector<NoteRecord> read_notes(const std::filesystem::path& path);
void write_queries(const std::filesystem::path& path, std::span<const RagQuery> items);
std::vector<RagQuery> read_queries(const std::filesystem::path& path);

}  // namespace trimodal
