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

namespace trimodal {

using TokenId = std::int32_t;

/// Token string <-> id table. Ids are dense in [0, size()); the first three
/// are reserved for the CLS, UNK and PAD markers.
class Vocab {
 public:
  static constexpr TokenId kCls = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kPad = 2;

  Vocab();

  /// Vocabulary over every word of `texts`, ids assigned in lexicographic
  /// order so the result does not depend on text order.
  static Vocab build(std::span<const std::string> texts);

  /// Returns the existing id when `token` is already present.
  TokenId add(std::string_view token);
  TokenId lookup(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  /// One token per line; line number is the id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> tokens;

  /// Token count N, CLS excluded.
  std::size_t length() const { return ids.size(); }
};

/// Lowercased words of `text`, split on ASCII whitespace and punctuation.
/// Bytes >= 0x80 are word characters, so UTF-8 text stays intact.
std::vector<std::string> split_words(std::string_view text);

std::size_t count_tokens(std::string_view text);

TokenSeq tokenize(std::string_view text, const Vocab& vocab);

}  // namespace trimodal
