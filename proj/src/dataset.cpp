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
#include "trimodal/dataset.hpp"

#include <json.hpp>

#include "trimodal/error.hpp"
#include "trimodal/file_util.hpp"

namespace trimodal {

using Json = nlohmann::ordered_json;

namespace {

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  const std::string content = read_file(path);
  std::vector<Json> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    ++line_no;
    std::string_view line(content.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::string get_string(const Json& j, const char* key, bool required = true) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw DataError(std::string("missing field '") + key + "'");
    return {};
  }
  if (!it->is_string()) throw DataError(std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

template <typename T, typename Parse>
std::vector<T> read_records(const std::filesystem::path& path, Parse parse) {
  const auto rows = read_jsonl(path);
  std::vector<T> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    try {
      if (!rows[i].is_object()) throw DataError("record is not an object");
      out.push_back(parse(rows[i]));
    } catch (const DataError& e) {
      throw DataError(path.string() + ": record " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string render_kg(std::string_view subject, std::string_view predicate,
                      std::string_view object) {
  if (subject.empty() || predicate.empty() || object.empty()) {
    throw DataError("render_kg: empty field");
  }
  std::string p(predicate);
  for (char& c : p) {
    if (c == '_') c = ' ';
  }
  std::string out = "The ";
  out.append(subject);
  out += ' ';
  out += p;
  out += " the ";
  out.append(object);
  out += '.';
  return out;
}

std::string render_definition(const DefinitionRecord& d) {
  if (d.term.empty() || d.definition.empty()) throw DataError("definition: empty field");
  return d.term + ": " + d.definition;
}

DistillText make_distill_text(std::string text, DistillKind kind) {
  if (text.empty()) throw DataError("distill text is empty");
  DistillText t;
  t.complexity = count_tokens(text);
  t.text = std::move(text);
  t.kind = kind;
  return t;
}

std::vector<DistillText> distill_texts(std::span<const DefinitionRecord> definitions,
                                       std::span<const KgRecord> statements) {
  std::vector<DistillText> out;
  out.reserve(definitions.size() + statements.size());
  for (const auto& d : definitions) {
    out.push_back(make_distill_text(render_definition(d), DistillKind::kDefinition));
  }
  for (const auto& k : statements) {
    std::string text =
        k.rendered_text.empty() ? render_kg(k.subject, k.predicate, k.object) : k.rendered_text;
    out.push_back(make_distill_text(std::move(text), DistillKind::kKgStatement));
  }
  return out;
}

TokenizedTriplet tokenize_triplet(const TripletExample& t, const Vocab& vocab) {
  auto tok = [&](const std::string& text, const std::string& field) {
    TokenSeq s = tokenize(text, vocab);
    if (s.length() == 0) throw DataError(field + " has no tokens");
    return s;
  };
  TokenizedTriplet out;
  out.query = tok(t.query, "query");
  out.positive = tok(t.positive, "positive");
  for (std::size_t i = 0; i < kNegatives; ++i) {
    out.negatives[i] = tok(t.negatives[i], "negative " + std::to_string(i));
  }
  return out;
}

std::vector<TokenizedTriplet> tokenize_triplets(std::span<const TripletExample> triplets,
                                                const Vocab& vocab) {
  std::vector<TokenizedTriplet> out;
  out.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    try {
      out.push_back(tokenize_triplet(triplets[i], vocab));
    } catch (const DataError& e) {
      throw DataError("triplet " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TokenSeq> tokenize_texts(std::span<const DistillText> texts, const Vocab& vocab) {
  std::vector<TokenSeq> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(tokenize(texts[i].text, vocab));
    if (out.back().length() == 0) throw DataError("text " + std::to_string(i) + " has no tokens");
  }
  return out;
}

void write_triplets(const std::filesystem::path& path, std::span<const TripletExample> items) {
  std::vector<Json> rows;
  for (const auto& t : items) {
    Json j;
    j["query"] = t.query;
    j["positive"] = t.positive;
    j["negatives"] = t.negatives;
    if (!t.stratum.empty()) j["stratum"] = t.stratum;
    j["hard"] = t.hard;
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

std::vector<TripletExample> read_triplets(const std::filesystem::path& path) {
  return read_records<TripletExample>(path, [](const Json& j) {
    TripletExample t;
    t.query = get_string(j, "query");
    t.positive = get_string(j, "positive");
    auto it = j.find("negatives");
    if (it == j.end() || !it->is_array()) throw DataError("missing array field 'negatives'");
    if (it->size() != kNegatives) {
      throw DataError("expected " + std::to_string(kNegatives) + " negatives, got " +
                      std::to_string(it->size()));
    }
    for (std::size_t i = 0; i < kNegatives; ++i) {
      if (!(*it)[i].is_string()) throw DataError("negatives must be strings");
      t.negatives[i] = (*it)[i].get<std::string>();
    }
    t.stratum = get_string(j, "stratum", false);
    if (auto h = j.find("hard"); h != j.end()) {
      if (!h->is_array() || h->size() != kNegatives) throw DataError("bad 'hard' field");
      for (std::size_t i = 0; i < kNegatives; ++i) {
        if (!(*h)[i].is_boolean()) throw DataError("bad 'hard' field");
        t.hard[i] = (*h)[i].get<bool>();
      }
    }
    return t;
  });
}

void write_definitions(const std::filesystem::path& path,
                       std::span<const DefinitionRecord> items) {
  std::vector<Json> rows;
  for (const auto& d : items) rows.push_back(Json{{"term", d.term}, {"definition", d.definition}});
  write_jsonl(path, rows);
}

std::vector<DefinitionRecord> read_definitions(const std::filesystem::path& path) {
  return read_records<DefinitionRecord>(path, [](const Json& j) {
    return DefinitionRecord{get_string(j, "term"), get_string(j, "definition")};
  });
}

void write_kg(const std::filesystem::path& path, std::span<const KgRecord> items) {
  std::vector<Json> rows;
  for (const auto& k : items) {
    Json j{{"subject", k.subject}, {"predicate", k.predicate}, {"object", k.object}};
    if (!k.rendered_text.empty()) j["rendered_text"] = k.rendered_text;
    rows.push_back(std::move(j));
  }
  write_jsonl(path, rows);
}

std::vector<KgRecord> read_kg(const std::filesystem::path& path) {
  return read_records<KgRecord>(path, [](const Json& j) {
    KgRecord k{get_string(j, "subject"), get_string(j, "predicate"), get_string(j, "object"),
               get_string(j, "rendered_text", false)};
    if (k.subject.empty() || k.predicate.empty() || k.object.empty()) {
      throw DataError("kg record has an empty field");
    }
    return k;
  });
}

void write_notes(const std::filesystem::path& path, std::span<const NoteRecord> items) {
  std::vector<Json> rows;
  for (const auto& n : items) {
    rows.push_back(Json{{"patient_id", n.patient_id},
                        {"category", std::string(to_string(n.category))},
                        {"text", n.text}});
  }
  write_jsonl(path, rows);
}

std::vector<NoteRecord> read_notes(const std::filesystem::path& path) {
  return read_records<NoteRecord>(path, [](const Json& j) {
    NoteRecord n{get_string(j, "patient_id"), parse_category(get_string(j, "category")),
                 get_string(j, "text")};
    if (n.patient_id.empty() || n.text.empty()) throw DataError("note has an empty field");
    return n;
  });
}

void write_queries(const std::filesystem::path& path, std::span<const RagQuery> items) {
  std::vector<Json> rows;
  for (const auto& q : items) {
    Json gold = Json::array();
    for (auto c : q.gold) gold.push_back(std::string(to_string(c)));
    rows.push_back(
        Json{{"query", q.query}, {"patient_id", q.patient_id}, {"gold_categories", gold}});
  }
  write_jsonl(path, rows);
}

std::vector<RagQuery> read_queries(const std::filesystem::path& path) {
  return read_records<RagQuery>(path, [](const Json& j) {
    RagQuery q;
    q.query = get_string(j, "query");
    q.patient_id = get_string(j, "patient_id");
    auto it = j.find("gold_categories");
    if (it == j.end() || !it->is_array()) throw DataError("missing array 'gold_categories'");
    for (const auto& c : *it) {
      if (!c.is_string()) throw DataError("gold category must be a string");
      q.gold.insert(parse_category(c.get<std::string>()));
    }
    if (q.gold.empty()) throw DataError("empty gold category set");
    return q;
  });
}

}  // namespace trimodal
