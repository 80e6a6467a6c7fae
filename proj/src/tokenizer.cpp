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
#include "trimodal/tokenizer.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "trimodal/error.hpp"

namespace trimodal {
namespace {

bool is_separator(unsigned char c) {
  if (c >= 0x80) return false;
  return c <= ' ' || c == 0x7f ||
         (c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
         (c >= '[' && c <= '`') || (c >= '{' && c <= '~');
}

char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
}

template <class Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_separator(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !is_separator(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) fn(text.substr(start, i - start));
  }
}

}  // namespace

Vocab::Vocab() {
  add("[CLS]");
  add("[UNK]");
  add("[PAD]");
}

Vocab Vocab::build(std::span<const std::string> texts) {
  std::set<std::string> words;
  for (const auto& text : texts) {
    for (auto& w : split_words(text)) words.insert(std::move(w));
  }
  Vocab vocab;
  for (const auto& w : words) vocab.add(w);
  return vocab;
}

TokenId Vocab::add(std::string_view token) {
  std::string key(token);
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

TokenId Vocab::lookup(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return ids_.count(std::string(token)) != 0;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id out of range: " + std::to_string(id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocab: " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
  if (!out) throw DataError("failed writing vocab: " + path.string());
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocab: " + path.string());
  Vocab vocab;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (n < 3) {
      if (line != vocab.tokens_[n]) throw DataError("vocab reserved tokens mismatch in " + path.string());
    } else {
      if (vocab.contains(line)) throw DataError("duplicate vocab entry '" + line + "' in " + path.string());
      vocab.add(line);
    }
    ++n;
  }
  if (n < 3) throw DataError("vocab file too short: " + path.string());
  return vocab;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  for_each_word(text, [&](std::string_view w) {
    std::string lowered(w.size(), '\0');
    std::transform(w.begin(), w.end(), lowered.begin(),
                   [](char c) { return ascii_lower(static_cast<unsigned char>(c)); });
    words.push_back(std::move(lowered));
  });
  return words;
}

std::size_t count_tokens(std::string_view text) {
  std::size_t n = 0;
  for_each_word(text, [&](std::string_view) { ++n; });
  return n;
}

TokenSeq tokenize(std::string_view text, const Vocab& vocab) {
  TokenSeq seq;
  seq.tokens = split_words(text);
  seq.ids.reserve(seq.tokens.size());
  for (const auto& t : seq.tokens) seq.ids.push_back(vocab.lookup(t));
  return seq;
}

}  // namespace trimodal
