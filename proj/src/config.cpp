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
#include "trimodal/config.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "trimodal/error.hpp"
#include "trimodal/file_util.hpp"
#include "trimodal/random.hpp"

namespace trimodal {

namespace {

using Json = nlohmann::json;
using OJson = nlohmann::ordered_json;

// A section is a list of (key, reader, writer) bindings onto struct fields.
struct Binding {
  std::function<void(const Json&)> read;
  std::function<OJson()> write;
};
using Section = std::vector<std::pair<std::string, Binding>>;

[[noreturn]] void bad_type(const std::string& key, const char* want) {
  throw UsageError("config key '" + key + "' must be " + want);
}

template <class T>
Binding bind(const std::string& key, T& field) {
  Binding b;
  b.write = [&field] {
    if constexpr (std::is_same_v<T, std::filesystem::path>) {
      return OJson(field.string());
    } else {
      return OJson(field);
    }
  };
  b.read = [&field, key](const Json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) bad_type(key, "a boolean");
      field = v.get<bool>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) bad_type(key, "a number");
      field = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) bad_type(key, "an integer");
      if (std::is_unsigned_v<T> && v.get<std::int64_t>() < 0) bad_type(key, "non-negative");
      field = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      if (!v.is_string()) bad_type(key, "a string");
      field = v.get<std::string>();
    }
  };
  return b;
}

Binding bind_modality(const std::string& key, Modality& field) {
  return {[&field, key](const Json& v) {
            if (!v.is_string()) bad_type(key, "a modality name");
            field = parse_modality(v.get<std::string>());
          },
          [&field] { return OJson(modality_name(field)); }};
}

Binding bind_optimizer(const std::string& key, OptimizerKind& field) {
  return {[&field, key](const Json& v) {
            if (!v.is_string()) bad_type(key, "an optimizer name");
            field = parse_optimizer(v.get<std::string>());
          },
          [&field] { return OJson(optimizer_name(field)); }};
}

#define TRIMODAL_FIELD(obj, name) {#name, bind(#name, (obj).name)}

Section train_section(TrainConfig& t) {
  return {TRIMODAL_FIELD(t, lr_max),
          TRIMODAL_FIELD(t, lr_min),
          TRIMODAL_FIELD(t, cycle_length),
          TRIMODAL_FIELD(t, cycle_multiplier),
          TRIMODAL_FIELD(t, warmup_steps),
          TRIMODAL_FIELD(t, clip),
          TRIMODAL_FIELD(t, batch_size),
          TRIMODAL_FIELD(t, epochs),
          TRIMODAL_FIELD(t, seed),
          TRIMODAL_FIELD(t, length_buckets),
          TRIMODAL_FIELD(t, accumulation_steps),
          {"optimizer", bind_optimizer("optimizer", t.optimizer)},
          TRIMODAL_FIELD(t, momentum),
          TRIMODAL_FIELD(t, weight_decay),
          TRIMODAL_FIELD(t, adam_beta1),
          TRIMODAL_FIELD(t, adam_beta2),
          TRIMODAL_FIELD(t, adam_epsilon),
          TRIMODAL_FIELD(t, eval_every_epochs),
          TRIMODAL_FIELD(t, patience),
          TRIMODAL_FIELD(t, checkpoint_every),
          TRIMODAL_FIELD(t, checkpoint_dir),
          TRIMODAL_FIELD(t, grad_check_every),
          TRIMODAL_FIELD(t, grad_check_tolerance)};
}

std::map<std::string, Section> sections(PipelineConfig& c) {
  std::map<std::string, Section> s;
  auto& sy = c.synthetic;
  s["synthetic"] = {TRIMODAL_FIELD(sy, concepts),
                    TRIMODAL_FIELD(sy, clusters),
                    TRIMODAL_FIELD(sy, vocab_size),
                    TRIMODAL_FIELD(sy, seed),
                    TRIMODAL_FIELD(sy, hard_negative_fraction),
                    TRIMODAL_FIELD(sy, shared_term_rate),
                    TRIMODAL_FIELD(sy, train_triplets),
                    TRIMODAL_FIELD(sy, valid_triplets),
                    TRIMODAL_FIELD(sy, test_triplets),
                    TRIMODAL_FIELD(sy, distill_texts),
                    TRIMODAL_FIELD(sy, distill_heldout),
                    TRIMODAL_FIELD(sy, rag_patients),
                    TRIMODAL_FIELD(sy, rag_train_patients),
                    TRIMODAL_FIELD(sy, rag_categories_per_patient),
                    TRIMODAL_FIELD(sy, rag_queries_per_patient),
                    TRIMODAL_FIELD(sy, rag_notes_min),
                    TRIMODAL_FIELD(sy, rag_notes_max),
                    TRIMODAL_FIELD(sy, rag_train_triplets)};
  auto& e = c.encoder;
  s["encoder"] = {TRIMODAL_FIELD(e, dim), TRIMODAL_FIELD(e, layers), TRIMODAL_FIELD(e, heads),
                  TRIMODAL_FIELD(e, max_seq_len), TRIMODAL_FIELD(e, seed)};
  s["train"] = train_section(c.train);
  s["distill"] = train_section(c.distill);
  s["distill"].push_back({"student_seed", bind("student_seed", c.student_seed)});
  auto& l = c.loss;
  s["loss"] = {TRIMODAL_FIELD(l, temperature),   TRIMODAL_FIELD(l, label_smoothing),
               TRIMODAL_FIELD(l, lambda_dense),  TRIMODAL_FIELD(l, lambda_sparse),
               TRIMODAL_FIELD(l, lambda_colbert), TRIMODAL_FIELD(l, alpha_cosine),
               TRIMODAL_FIELD(l, alpha_mse),     TRIMODAL_FIELD(l, alpha_sim)};
  auto& w = c.weights;
  s["weights"] = {TRIMODAL_FIELD(w, dense), TRIMODAL_FIELD(w, sparse), TRIMODAL_FIELD(w, colbert)};
  auto& i = c.index;
  s["index"] = {TRIMODAL_FIELD(i, max_neighbors), TRIMODAL_FIELD(i, ef_construction),
                TRIMODAL_FIELD(i, ef_search), TRIMODAL_FIELD(i, seed)};
  auto& r = c.rag;
  s["rag"] = {TRIMODAL_FIELD(r.params, max_chunk_tokens),
              TRIMODAL_FIELD(r.params, k),
              {"rerank", bind_modality("rerank", r.params.rerank)},
              TRIMODAL_FIELD(r.params, rerank_depth),
              TRIMODAL_FIELD(r, untrained)};
  auto& ev = c.eval;
  s["eval"] = {{"modality", bind_modality("modality", ev.modality)},
               TRIMODAL_FIELD(ev, dump_scores), TRIMODAL_FIELD(ev, export_misranked),
               TRIMODAL_FIELD(ev, folds), TRIMODAL_FIELD(ev, fold_seed)};
  auto& g = c.grad_check;
  s["grad_check"] = {TRIMODAL_FIELD(g, dim),      TRIMODAL_FIELD(g, layers),
                     TRIMODAL_FIELD(g, heads),    TRIMODAL_FIELD(g, triplets),
                     TRIMODAL_FIELD(g, step),     TRIMODAL_FIELD(g, tolerance),
                     TRIMODAL_FIELD(g, seed)};
  auto& p = c.paths;
  s["paths"] = {TRIMODAL_FIELD(p, data),
                TRIMODAL_FIELD(p, train),
                TRIMODAL_FIELD(p, valid),
                TRIMODAL_FIELD(p, test),
                TRIMODAL_FIELD(p, vocab),
                TRIMODAL_FIELD(p, definitions),
                TRIMODAL_FIELD(p, kg),
                TRIMODAL_FIELD(p, definitions_heldout),
                TRIMODAL_FIELD(p, kg_heldout),
                TRIMODAL_FIELD(p, notes),
                TRIMODAL_FIELD(p, queries),
                TRIMODAL_FIELD(p, checkpoint),
                TRIMODAL_FIELD(p, model),
                TRIMODAL_FIELD(p, teacher),
                TRIMODAL_FIELD(p, teacher_embeddings),
                TRIMODAL_FIELD(p, student),
                TRIMODAL_FIELD(p, index)};
  return s;
}

#undef TRIMODAL_FIELD

}  // namespace

void PipelineConfig::apply(const Json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object of sections");
  auto table = sections(*this);
  for (const auto& [name, body] : j.items()) {
    auto sec = table.find(name);
    if (sec == table.end()) throw UsageError("unknown config section '" + name + "'");
    if (!body.is_object()) throw UsageError("config section '" + name + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      auto it = std::find_if(sec->second.begin(), sec->second.end(),
                             [&](const auto& b) { return b.first == key; });
      if (it == sec->second.end()) {
        throw UsageError("unknown config key '" + name + "." + key + "'");
      }
      it->second.read(value);
    }
  }
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  synthetic.seed = seed;
  encoder.seed = seed;
  train.seed = seed;
  distill.seed = seed;
  student_seed = derive_seed(seed, 1);
  index.seed = seed;
  grad_check.seed = seed;
  eval.fold_seed = seed;
}

OJson PipelineConfig::to_json() const {
  auto table = sections(const_cast<PipelineConfig&>(*this));
  OJson out;
  for (const auto& [name, fields] : table) {
    OJson s;
    for (const auto& [key, b] : fields) s[key] = b.write();
    out[name] = std::move(s);
  }
  return out;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  PipelineConfig c;
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  c.apply(j);
  return c;
}

}  // namespace trimodal
