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
#include "trimodal/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "trimodal/error.hpp"
#include "trimodal/random.hpp"

namespace trimodal {

namespace {

constexpr std::size_t kNameWords = 2;
constexpr std::size_t kCategoryContentWords = 10;
constexpr std::size_t kCategoryQueryWords = 3;

// Query-side and passage-side function words are disjoint.
constexpr std::array<const char*, 5> kQueryTemplates = {
    "what is {}", "define {}", "meaning of {}", "explain {}", "describe {}"};
constexpr std::array<const char*, 4> kPassageTemplates = {
    "a {c} structure that {0} with {1}", "{c} region involved in {0} and {1}",
    "found in {c} tissue {0} by {1}", "a {c} process for {0} and {1}"};
constexpr std::array<const char*, 4> kPredicates = {"anatomically_part_of", "regulates",
                                                    "projects_to", "associated_with"};
constexpr std::array<const char*, 8> kNoteFiller = {"patient", "reports", "noted", "today",
                                                    "stable",  "follow",  "up",    "plan"};
constexpr std::array<const char*, 4> kRagQueryTemplates = {"any {}", "check {}", "list {}",
                                                           "show recent {}"};

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  std::size_t at = 0;
  while ((at = s.find(from, at)) != std::string::npos) {
    s.replace(at, from.size(), to);
    at += to.size();
  }
  return s;
}

std::vector<std::string> make_lexicon(std::size_t n, Rng& rng) {
  static constexpr std::string_view consonants = "bdfgklmnprstvz";
  static constexpr std::string_view vowels = "aeiou";
  std::set<std::string> seen;
  std::vector<std::string> words;
  words.reserve(n);
  while (words.size() < n) {
    std::string w;
    for (int s = 0; s < 3; ++s) {
      w += consonants[rng.below(consonants.size())];
      w += vowels[rng.below(vowels.size())];
    }
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

// A concept is a pair of query-side words from its cluster's pool; its
// passages use the paired passage-side words.
struct Concept {
  std::size_t cluster = 0;
  std::array<std::string, kNameWords> name;
  std::array<std::string, kNameWords> desc;

  std::string term() const { return name[0] + " " + name[1]; }
};

struct Category {
  std::vector<std::string> content;
  std::vector<std::string> query;
};

class Generator {
 public:
  explicit Generator(const SyntheticSpec& spec) : spec_(spec), rng_(spec.seed) {}

  SyntheticCorpus run() {
    assign_words();
    SyntheticCorpus out;
    std::set<std::string> used;
    auto emit = [&](std::size_t count, bool round_robin, std::vector<TripletExample>& dst) {
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t c = round_robin ? i % concepts_.size() : rng_.below(concepts_.size());
        TripletExample t = triplet(c);
        // Splits never share a query/positive pair.
        for (int attempt = 0; !used.insert(t.query + "\t" + t.positive).second; ++attempt) {
          if (attempt > 100) throw DataError("synthetic: cannot draw distinct triplets");
          t = triplet(c);
        }
        dst.push_back(std::move(t));
      }
    };
    emit(spec_.train_triplets, true, out.train);
    emit(spec_.valid_triplets, false, out.valid);
    emit(spec_.test_triplets, false, out.test);
    distill(out);
    rag(out);
    out.vocab = build_vocab(out);
    return out;
  }

 private:
  static std::size_t pool_size(std::size_t members) {
    std::size_t m = 2;
    while (m * (m - 1) / 2 < members) ++m;
    return m;
  }

  void assign_words() {
    const std::size_t largest = (spec_.concepts + spec_.clusters - 1) / spec_.clusters;
    const std::size_t pool = pool_size(largest);
    const std::size_t needed = spec_.clusters * (1 + 2 * pool) +
                               kCategoryCount * (kCategoryContentWords + kCategoryQueryWords);
    if (spec_.vocab_size < needed) {
      throw DataError("synthetic: vocab_size " + std::to_string(spec_.vocab_size) +
                      " is below the " + std::to_string(needed) + " words this spec needs");
    }
    auto lex = make_lexicon(spec_.vocab_size, rng_);
    std::size_t next = 0;
    auto take = [&] { return lex[next++]; };
    std::vector<std::vector<std::array<std::size_t, 2>>> pairs(spec_.clusters);
    std::vector<std::vector<std::string>> query_pool(spec_.clusters), passage_pool(spec_.clusters);
    for (std::size_t k = 0; k < spec_.clusters; ++k) {
      cluster_words_.push_back(take());
      for (std::size_t i = 0; i < pool; ++i) {
        query_pool[k].push_back(take());
        passage_pool[k].push_back(take());
      }
      for (std::size_t i = 0; i < pool; ++i) {
        for (std::size_t j = i + 1; j < pool; ++j) pairs[k].push_back({i, j});
      }
      rng_.shuffle(std::span<std::array<std::size_t, 2>>(pairs[k]));
    }
    concepts_.resize(spec_.concepts);
    members_.resize(spec_.clusters);
    for (std::size_t c = 0; c < spec_.concepts; ++c) {
      auto& con = concepts_[c];
      con.cluster = c % spec_.clusters;
      const auto [i, j] = pairs[con.cluster][members_[con.cluster].size()];
      con.name = {query_pool[con.cluster][i], query_pool[con.cluster][j]};
      con.desc = {passage_pool[con.cluster][i], passage_pool[con.cluster][j]};
      members_[con.cluster].push_back(c);
    }
    categories_.resize(kCategoryCount);
    for (auto& cat : categories_) {
      for (std::size_t i = 0; i < kCategoryContentWords; ++i) cat.content.push_back(take());
      for (std::size_t i = 0; i < kCategoryQueryWords; ++i) cat.query.push_back(take());
    }
  }

  std::string query_text(std::size_t c) {
    const auto& con = concepts_[c];
    std::string term = rng_.below(2) ? con.name[0] + " " + con.name[1]
                                     : con.name[1] + " " + con.name[0];
    return replace_all(kQueryTemplates[rng_.below(kQueryTemplates.size())], "{}", term);
  }

  std::string passage_text(std::size_t c) {
    const auto& con = concepts_[c];
    const std::size_t first = rng_.below(2);
    std::string s = kPassageTemplates[rng_.below(kPassageTemplates.size())];
    std::string lead = cluster_words_[con.cluster];
    if (rng_.uniform() < spec_.shared_term_rate) lead += " " + con.name[rng_.below(2)];
    s = replace_all(s, "{c}", lead);
    s = replace_all(s, "{0}", con.desc[first]);
    s = replace_all(s, "{1}", con.desc[1 - first]);
    return s;
  }

  TripletExample triplet(std::size_t c) {
    TripletExample t;
    t.query = query_text(c);
    t.positive = passage_text(c);
    t.stratum = "cluster" + std::to_string(concepts_[c].cluster);
    const std::size_t hard = spec_.hard_negatives();
    std::set<std::size_t> chosen{c};
    const auto& own = members_[concepts_[c].cluster];
    for (std::size_t i = 0; i < kNegatives; ++i) {
      std::size_t n;
      do {
        if (i < hard) {
          n = own[rng_.below(own.size())];
        } else {
          n = rng_.below(concepts_.size());
          if (concepts_[n].cluster == concepts_[c].cluster) continue;
        }
      } while (chosen.count(n) || (i >= hard && concepts_[n].cluster == concepts_[c].cluster));
      chosen.insert(n);
      t.negatives[i] = passage_text(n);
      t.hard[i] = i < hard;
    }
    return t;
  }

  void distill(SyntheticCorpus& out) {
    struct Item {
      bool definition;
      DefinitionRecord d;
      KgRecord k;
    };
    std::vector<Item> items;
    std::set<std::string> seen;
    const std::size_t total = spec_.distill_texts + spec_.distill_heldout;
    const std::size_t want_kg = total / 3;
    std::size_t attempts = 0;
    while (items.size() < total) {
      if (++attempts > total * 100) throw DataError("synthetic: cannot draw distinct distill texts");
      const std::size_t c = rng_.below(concepts_.size());
      Item it{};
      if (items.size() < total - want_kg) {
        it.definition = true;
        it.d = {concepts_[c].term(), passage_text(c)};
      } else {
        const auto& own = members_[concepts_[c].cluster];
        const std::size_t o = own[rng_.below(own.size())];
        if (o == c) continue;
        it.definition = false;
        it.k = {concepts_[c].term(), kPredicates[rng_.below(kPredicates.size())],
                concepts_[o].term(), ""};
      }
      const std::string key = it.definition ? render_definition(it.d)
                                            : render_kg(it.k.subject, it.k.predicate, it.k.object);
      if (!seen.insert(key).second) continue;
      items.push_back(std::move(it));
    }
    rng_.shuffle(std::span<Item>(items));
    for (std::size_t i = 0; i < items.size(); ++i) {
      const bool held = i >= spec_.distill_texts;
      if (items[i].definition) {
        (held ? out.definitions_heldout : out.definitions).push_back(items[i].d);
      } else {
        (held ? out.kg_heldout : out.kg).push_back(items[i].k);
      }
    }
  }

  std::string note_text(std::size_t cat) {
    const auto& words = categories_[cat].content;
    auto w = [&] { return words[rng_.below(words.size())]; };
    auto f = [&] { return std::string(kNoteFiller[rng_.below(kNoteFiller.size())]); };
    std::string s;
    const std::size_t sentences = 2 + rng_.below(2);
    for (std::size_t i = 0; i < sentences; ++i) {
      if (i) s += ". ";
      s += f() + " " + w() + " " + w() + " " + f() + " " + w() + " " + w();
    }
    return s + ".";
  }

  std::string rag_query_text(const std::vector<std::size_t>& cats) {
    std::string body;
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const auto& q = categories_[cats[i]].query;
      if (i) body += " and ";
      body += q[rng_.below(q.size())] + " " + q[rng_.below(q.size())];
    }
    return replace_all(kRagQueryTemplates[rng_.below(kRagQueryTemplates.size())], "{}", body);
  }

  std::vector<std::size_t> patient_categories() {
    std::vector<std::size_t> all(kCategoryCount);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rng_.shuffle(std::span<std::size_t>(all));
    all.resize(spec_.rag_categories_per_patient);
    std::sort(all.begin(), all.end());
    return all;
  }

  void rag(SyntheticCorpus& out) {
    auto pid = [](const char* prefix, std::size_t i) {
      std::string n = std::to_string(i + 1);
      return std::string(prefix) + (n.size() < 2 ? "0" : "") + n;
    };
    for (std::size_t p = 0; p < spec_.rag_patients; ++p) {
      const std::string id = pid("Patient", p);
      const auto cats = patient_categories();
      for (auto cat : cats) {
        const std::size_t notes =
            spec_.rag_notes_min + rng_.below(spec_.rag_notes_max - spec_.rag_notes_min + 1);
        for (std::size_t n = 0; n < notes; ++n) {
          out.notes.push_back({id, static_cast<ClinicalCategory>(cat), note_text(cat)});
        }
      }
      for (std::size_t q = 0; q < spec_.rag_queries_per_patient; ++q) {
        std::vector<std::size_t> gold{cats[rng_.below(cats.size())]};
        if (rng_.below(3) == 0) {
          std::size_t second;
          do second = cats[rng_.below(cats.size())];
          while (second == gold[0]);
          gold.push_back(second);
        }
        RagQuery rq;
        rq.query = rag_query_text(gold);
        rq.patient_id = id;
        for (auto g : gold) rq.gold.insert(static_cast<ClinicalCategory>(g));
        out.queries.push_back(std::move(rq));
      }
    }
    if (spec_.rag_train_patients == 0) return;
    std::vector<std::vector<std::size_t>> train_cats;
    for (std::size_t p = 0; p < spec_.rag_train_patients; ++p) {
      train_cats.push_back(patient_categories());
    }
    for (std::size_t i = 0; i < spec_.rag_train_triplets; ++i) {
      const auto& cats = train_cats[i % train_cats.size()];
      const std::size_t gold = cats[rng_.below(cats.size())];
      TripletExample t;
      t.query = rag_query_text({gold});
      t.positive = note_text(gold);
      t.stratum = std::string(to_string(static_cast<ClinicalCategory>(gold)));
      std::set<std::size_t> chosen{gold};
      for (std::size_t n = 0; n < kNegatives; ++n) {
        std::size_t cat;
        do cat = cats[rng_.below(cats.size())];
        while (chosen.count(cat));
        chosen.insert(cat);
        t.negatives[n] = note_text(cat);
      }
      out.rag_train.push_back(std::move(t));
    }
  }

  static Vocab build_vocab(const SyntheticCorpus& c) {
    std::vector<std::string> texts;
    auto add_triplets = [&](const std::vector<TripletExample>& ts) {
      for (const auto& t : ts) {
        texts.push_back(t.query);
        texts.push_back(t.positive);
        for (const auto& n : t.negatives) texts.push_back(n);
      }
    };
    add_triplets(c.train);
    add_triplets(c.valid);
    add_triplets(c.test);
    add_triplets(c.rag_train);
    for (const auto& d : c.definitions) texts.push_back(render_definition(d));
    for (const auto& d : c.definitions_heldout) texts.push_back(render_definition(d));
    for (const auto& k : c.kg) texts.push_back(render_kg(k.subject, k.predicate, k.object));
    for (const auto& k : c.kg_heldout) texts.push_back(render_kg(k.subject, k.predicate, k.object));
    for (const auto& n : c.notes) texts.push_back(n.text);
    for (const auto& q : c.queries) texts.push_back(q.query);
    return Vocab::build(texts);
  }

  const SyntheticSpec& spec_;
  Rng rng_;
  std::vector<std::string> cluster_words_;
  std::vector<Concept> concepts_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<Category> categories_;
};

}  // namespace

void SyntheticSpec::validate() const {
  if (concepts == 0 || clusters == 0) throw DataError("synthetic: concepts and clusters must be > 0");
  if (clusters > concepts) throw DataError("synthetic: clusters must not exceed concepts");
  if (!(hard_negative_fraction >= 0.0 && hard_negative_fraction <= 1.0)) {
    throw DataError("synthetic: hard_negative_fraction must lie in [0, 1]");
  }
  if (!(shared_term_rate >= 0.0 && shared_term_rate <= 1.0)) {
    throw DataError("synthetic: shared_term_rate must lie in [0, 1]");
  }
  const std::size_t smallest = concepts / clusters;
  if (hard_negatives() + 1 > smallest) {
    throw DataError("synthetic: a cluster of " + std::to_string(smallest) +
                    " concepts cannot supply " + std::to_string(hard_negatives()) +
                    " hard negatives");
  }
  const std::size_t foreign = concepts - (concepts + clusters - 1) / clusters;
  if (kNegatives - hard_negatives() > foreign) {
    throw DataError("synthetic: not enough concepts outside a cluster for random negatives");
  }
  if (rag_patients > 0 && rag_categories_per_patient < 2) {
    throw DataError("synthetic: rag_categories_per_patient must be >= 2");
  }
  if (rag_notes_min == 0 || rag_notes_max < rag_notes_min) {
    throw DataError("synthetic: need 1 <= rag_notes_min <= rag_notes_max");
  }
  if (rag_categories_per_patient > kCategoryCount) {
    throw DataError("synthetic: rag_categories_per_patient exceeds the category count");
  }
  if (rag_train_triplets > 0 && rag_categories_per_patient < kNegatives + 1) {
    throw DataError("synthetic: rag training needs at least 6 categories per patient");
  }
  if (rag_train_triplets > 0 && rag_train_patients == 0) {
    throw DataError("synthetic: rag_train_triplets requires rag_train_patients > 0");
  }
}

std::size_t SyntheticSpec::hard_negatives() const {
  return static_cast<std::size_t>(std::lround(hard_negative_fraction * kNegatives));
}

SyntheticCorpus gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  return Generator(spec).run();
}

std::vector<std::filesystem::path> corpus_paths(const std::filesystem::path& dir) {
  using namespace corpus_files;
  std::vector<std::filesystem::path> out;
  for (const char* name : {kTrain, kValid, kTest, kDefinitions, kKg, kDefinitionsHeldout,
                           kKgHeldout, kNotes, kQueries, kRagTrain, kVocab}) {
    out.push_back(dir / name);
  }
  return out;
}

void write_corpus(const std::filesystem::path& dir, const SyntheticCorpus& c) {
  using namespace corpus_files;
  std::filesystem::create_directories(dir);
  write_triplets(dir / kTrain, c.train);
  write_triplets(dir / kValid, c.valid);
  write_triplets(dir / kTest, c.test);
  write_definitions(dir / kDefinitions, c.definitions);
  write_kg(dir / kKg, c.kg);
  write_definitions(dir / kDefinitionsHeldout, c.definitions_heldout);
  write_kg(dir / kKgHeldout, c.kg_heldout);
  write_notes(dir / kNotes, c.notes);
  write_queries(dir / kQueries, c.queries);
  write_triplets(dir / kRagTrain, c.rag_train);
  c.vocab.save(dir / kVocab);
}

}  // namespace trimodal
