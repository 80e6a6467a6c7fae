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
#include "trimodal/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "trimodal/checkpoint.hpp"
#include "trimodal/dataset.hpp"
#include "trimodal/embedder.hpp"
#include "trimodal/error.hpp"
#include "trimodal/evaluate.hpp"
#include "trimodal/file_util.hpp"
#include "trimodal/gradcheck.hpp"
#include "trimodal/hnsw.hpp"
#include "trimodal/objective.hpp"
#include "trimodal/random.hpp"
#include "trimodal/synthetic.hpp"
#include "trimodal/trainer.hpp"

namespace trimodal {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kTrainLog = "train_log.jsonl";
constexpr const char* kSweep = "sweep.jsonl";
constexpr const char* kDistillLog = "distill_log.jsonl";
constexpr const char* kDistillReport = "distill_report.json";
constexpr const char* kMetricsJson = "metrics.json";
constexpr const char* kMetricsTable = "metrics.txt";
constexpr const char* kScores = "scores.jsonl";
constexpr const char* kMisranked = "misranked.jsonl";
constexpr const char* kIndexIds = "index_ids.jsonl";
constexpr const char* kIndexResults = "index_results.jsonl";
constexpr const char* kRagReport = "rag_report.json";
constexpr const char* kRagTable = "rag_report.txt";
constexpr const char* kGradCheck = "grad_check.json";

class Context {
 public:
  Context(const RunOptions& o, std::ostream& log)
      : options(o), cfg(resolve_config(o)), log(log) {
    cfg.train.loss = cfg.loss;
    cfg.train.weights = cfg.weights;
    cfg.distill.loss = cfg.loss;
    cfg.distill.weights = cfg.weights;
    if (!cfg.train.checkpoint_dir.empty()) cfg.train.checkpoint_dir = output(cfg.train.checkpoint_dir);
    if (!cfg.distill.checkpoint_dir.empty()) {
      cfg.distill.checkpoint_dir = output(cfg.distill.checkpoint_dir);
    }
  }

  fs::path input(const fs::path& p) const {
    if (p.is_absolute()) return p;
    return (cfg.paths.data.empty() ? options.out : cfg.paths.data) / p;
  }
  fs::path output(const fs::path& p) const { return p.is_absolute() ? p : options.out / p; }

  void guard(const std::vector<fs::path>& outputs) const {
    if (options.overwrite) return;
    for (const auto& p : outputs) {
      if (fs::exists(p)) {
        throw UsageError("refusing to overwrite " + p.string() + " (pass --overwrite)");
      }
    }
  }

  Vocab vocab() const { return Vocab::load(input(cfg.paths.vocab)); }

  EncoderConfig encoder_config(const Vocab& v, std::uint64_t seed) const {
    EncoderConfig e = cfg.encoder;
    e.vocab_size = static_cast<int>(v.size());
    e.seed = seed;
    return e;
  }

  static void require(const fs::path& p) {
    if (!fs::exists(p)) throw DataError("checkpoint not found: " + p.string());
  }

  EncoderParams checkpoint(const fs::path& p, const Vocab& v) const {
    require(p);
    EncoderParams params = load_checkpoint(p);
    if (params.config.vocab_size != static_cast<int>(v.size())) {
      throw DataError(p.string() + ": checkpoint vocabulary size " +
                      std::to_string(params.config.vocab_size) + " differs from vocab file size " +
                      std::to_string(v.size()));
    }
    return params;
  }

  const RunOptions& options;
  PipelineConfig cfg;
  std::ostream& log;
};

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

std::string format(const char* fmt, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, fmt, a, b, c);
  return buf;
}

std::vector<std::string> strata_of(const std::vector<TripletExample>& ts) {
  std::vector<std::string> s;
  bool any = false;
  for (const auto& t : ts) {
    s.push_back(t.stratum);
    any = any || !t.stratum.empty();
  }
  if (!any) s.clear();
  return s;
}

void cmd_gen_synthetic(Context& ctx) {
  const auto paths = corpus_paths(ctx.options.out);
  ctx.guard(paths);
  const auto corpus = gen_synthetic(ctx.cfg.synthetic);
  write_corpus(ctx.options.out, corpus);
  ctx.log << "wrote " << corpus.train.size() << " train, " << corpus.valid.size() << " valid, "
          << corpus.test.size() << " test triplets, "
          << corpus.definitions.size() + corpus.kg.size() << " distill texts, "
          << corpus.notes.size() << " notes, " << corpus.queries.size() << " rag queries, "
          << corpus.vocab.size() << " vocab entries to " << ctx.options.out.string() << "\n";
}

struct Phase1Run {
  TrainResult result;
  std::optional<double> valid_recall;
  std::optional<double> valid_loss;
};

Phase1Run phase1(const TrainConfig& tcfg, const EncoderConfig& ecfg,
                 std::span<const TokenizedTriplet> train, std::span<const TokenizedTriplet> valid) {
  Phase1Run r;
  std::optional<ValidationSet> vs;
  if (!valid.empty()) vs = ValidationSet{valid};
  r.result = train_phase1(init_encoder(ecfg), train, tcfg, vs);
  if (!valid.empty()) {
    r.valid_recall =
        evaluate(r.result.params, valid, {}, EvalOptions{Modality::kEnsemble, tcfg.weights})
            .recall_at_1;
    r.valid_loss = triplet_corpus_loss(r.result.params, valid, tcfg);
  }
  return r;
}

// Cartesian product of {section: {key: [values]}}.
std::vector<nlohmann::json> grid_points(const nlohmann::json& grid) {
  if (!grid.is_object()) throw UsageError("grid must be a JSON object of sections");
  std::vector<nlohmann::json> points{nlohmann::json::object()};
  for (const auto& [section, body] : grid.items()) {
    if (!body.is_object()) throw UsageError("grid section '" + section + "' must be an object");
    for (const auto& [key, values] : body.items()) {
      if (!values.is_array() || values.empty()) {
        throw UsageError("grid entry '" + section + "." + key + "' must be a non-empty array");
      }
      std::vector<nlohmann::json> next;
      for (const auto& p : points) {
        for (const auto& v : values) {
          auto q = p;
          q[section][key] = v;
          next.push_back(std::move(q));
        }
      }
      points = std::move(next);
    }
  }
  return points;
}

void cmd_train(Context& ctx) {
  const fs::path model = ctx.output(ctx.cfg.paths.model);
  const fs::path log_path = ctx.output(kTrainLog);
  std::vector<fs::path> outs{model, log_path};
  if (ctx.options.grid) outs.push_back(ctx.output(kSweep));
  ctx.guard(outs);

  const Vocab vocab = ctx.vocab();
  const auto train = read_triplets(ctx.input(ctx.cfg.paths.train));
  const auto train_tok = tokenize_triplets(train, vocab);
  std::vector<TokenizedTriplet> valid_tok;
  if (const auto vp = ctx.input(ctx.cfg.paths.valid); fs::exists(vp)) {
    valid_tok = tokenize_triplets(read_triplets(vp), vocab);
  }

  Phase1Run best;
  if (ctx.options.grid) {
    nlohmann::json grid;
    try {
      grid = nlohmann::json::parse(read_file(*ctx.options.grid));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("grid " + ctx.options.grid->string() + ": " + e.what());
    }
    const auto points = grid_points(grid);
    std::string sweep;
    std::optional<std::size_t> best_index;
    double best_score = -INFINITY;
    for (std::size_t i = 0; i < points.size(); ++i) {
      PipelineConfig c = ctx.cfg;
      c.apply(points[i]);
      c.train.loss = c.loss;
      c.train.weights = c.weights;
      auto r = phase1(c.train, ctx.encoder_config(vocab, c.encoder.seed), train_tok, valid_tok);
      const double final_loss = r.result.log.steps.empty() ? 0.0 : r.result.log.steps.back().loss;
      const double score = r.valid_recall ? *r.valid_recall : -final_loss;
      Json row{{"point", Json::parse(points[i].dump())}, {"final_train_loss", final_loss}};
      row["valid_recall_at_1"] = r.valid_recall ? Json(*r.valid_recall) : Json(nullptr);
      row["valid_loss"] = r.valid_loss ? Json(*r.valid_loss) : Json(nullptr);
      sweep += row.dump() + "\n";
      ctx.log << "grid point " << i << ": " << points[i].dump() << " score " << score << "\n";
      if (score > best_score) {
        best_score = score;
        best_index = i;
        best = std::move(r);
      }
    }
    write_file(ctx.output(kSweep), sweep);
    ctx.log << "best grid point " << *best_index << "\n";
  } else {
    best = phase1(ctx.cfg.train, ctx.encoder_config(vocab, ctx.cfg.encoder.seed), train_tok,
                  valid_tok);
  }
  save_checkpoint(best.result.params, model);
  write_file(log_path, best.result.log.to_jsonl());
  ctx.log << "trained " << best.result.log.steps.size() << " steps";
  if (!best.result.log.steps.empty()) ctx.log << ", last loss " << best.result.log.steps.back().loss;
  if (best.valid_recall) ctx.log << ", valid recall@1 " << *best.valid_recall;
  ctx.log << "; wrote " << model.string() << "\n";
}

Eigen::MatrixXd read_embeddings(const fs::path& path, std::size_t rows) {
  const std::string content = read_file(path);
  std::vector<std::vector<double>> data;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string::npos) end = content.size();
    const std::string line = content.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      data.push_back(j.at("embedding").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": record " + std::to_string(data.size()) + ": " + e.what());
    }
  }
  if (data.size() != rows) {
    throw DataError(path.string() + ": expected " + std::to_string(rows) + " embeddings, got " +
                    std::to_string(data.size()));
  }
  const std::size_t dim = data.empty() ? 0 : data[0].size();
  Eigen::MatrixXd m(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    if (data[i].size() != dim) throw DataError(path.string() + ": ragged embedding rows");
    for (std::size_t c = 0; c < dim; ++c) m(i, c) = data[i][c];
  }
  return m;
}

void cmd_distill(Context& ctx) {
  const fs::path student_path = ctx.output(ctx.cfg.paths.student);
  ctx.guard({student_path, ctx.output(kDistillLog), ctx.output(kDistillReport)});

  const Vocab vocab = ctx.vocab();
  const auto texts = distill_texts(read_definitions(ctx.input(ctx.cfg.paths.definitions)),
                                   read_kg(ctx.input(ctx.cfg.paths.kg)));
  const auto tokens = tokenize_texts(texts, vocab);

  std::optional<EncoderParams> teacher;
  Eigen::MatrixXd targets;
  EncoderConfig student_cfg;
  if (!ctx.cfg.paths.teacher_embeddings.empty()) {
    targets = read_embeddings(ctx.input(ctx.cfg.paths.teacher_embeddings), texts.size());
    student_cfg = ctx.encoder_config(vocab, ctx.cfg.student_seed);
  } else {
    teacher = ctx.checkpoint(ctx.output(ctx.cfg.paths.teacher), vocab);
    targets = dense_embeddings(*teacher, tokens);
    student_cfg = teacher->config;
    student_cfg.seed = ctx.cfg.student_seed;
  }
  const std::uint64_t teacher_hash = teacher ? fingerprint(teacher->weights) : 0;

  const EncoderParams student = init_encoder(student_cfg);
  const double initial = distill_corpus_loss(student, targets, texts, tokens, ctx.cfg.distill);
  auto result = train_phase2(student, targets, texts, tokens, ctx.cfg.distill);
  const double final_loss = distill_corpus_loss(result.params, targets, texts, tokens, ctx.cfg.distill);

  Json report;
  report["texts"] = texts.size();
  report["steps"] = result.log.steps.size();
  report["initial_loss"] = initial;
  report["final_loss"] = final_loss;
  report["reduction"] = initial > 0 ? 1.0 - final_loss / initial : 0.0;
  report["heldout_cosine"] = nullptr;
  if (teacher) {
    if (fingerprint(teacher->weights) != teacher_hash) {
      throw NumericError("teacher parameters changed during distillation");
    }
    report["teacher_fingerprint"] = teacher_hash;
    const auto dh = ctx.input(ctx.cfg.paths.definitions_heldout);
    const auto kh = ctx.input(ctx.cfg.paths.kg_heldout);
    if (fs::exists(dh) && fs::exists(kh)) {
      const auto held = distill_texts(read_definitions(dh), read_kg(kh));
      if (!held.empty()) {
        report["heldout_cosine"] =
            mean_embedding_cosine(result.params, *teacher, tokenize_texts(held, vocab));
      }
    }
  }
  save_checkpoint(result.params, student_path);
  write_file(ctx.output(kDistillLog), result.log.to_jsonl());
  write_json(ctx.output(kDistillReport), report);
  ctx.log << format("distill loss %.6f -> %.6f", initial, final_loss);
  if (!report["heldout_cosine"].is_null()) {
    ctx.log << format(", held-out cosine %.5f", report["heldout_cosine"].get<double>());
  }
  ctx.log << "; wrote " << student_path.string() << "\n";
}

Json modality_scores(const QueryScores& q, Modality m) {
  Json a = Json::array();
  for (const auto& c : q.candidates) a.push_back(c.select(m));
  return a;
}

void cmd_eval(Context& ctx) {
  const auto& ev = ctx.cfg.eval;
  const Modality modality = ctx.options.modality.value_or(ev.modality);
  std::vector<fs::path> outs{ctx.output(kMetricsJson), ctx.output(kMetricsTable)};
  if (ev.dump_scores) outs.push_back(ctx.output(kScores));
  if (ev.export_misranked) outs.push_back(ctx.output(kMisranked));
  ctx.guard(outs);

  ctx.require(ctx.output(ctx.cfg.paths.checkpoint));
  const Vocab vocab = ctx.vocab();
  const EncoderParams params = ctx.checkpoint(ctx.output(ctx.cfg.paths.checkpoint), vocab);
  const auto test = read_triplets(ctx.input(ctx.cfg.paths.test));
  const auto tokens = tokenize_triplets(test, vocab);
  const auto strata = strata_of(test);

  std::vector<QueryScores> scores;
  const MetricsReport report =
      evaluate(params, tokens, strata, EvalOptions{modality, ctx.cfg.weights}, &scores);

  Json out;
  out["metrics"] = report.to_json();
  Json comparisons = Json::array();
  std::vector<double> selected;
  for (const auto& q : scores) selected.push_back(1.0 / q.rank);
  const std::array<Modality, 4> all = {Modality::kDense, Modality::kSparse, Modality::kColbert,
                                       Modality::kEnsemble};
  for (Modality m : all) {
    if (m == modality) continue;
    std::vector<double> other;
    for (const auto& q : scores) other.push_back(1.0 / rank_positive(q.candidates, m));
    Json c{{"against", modality_name(m)}, {"metric", "reciprocal_rank"}};
    if (other.size() >= 2) {
      const auto t = paired_t_test(selected, other);
      c["t"] = std::isfinite(t.t) ? Json(t.t) : Json(nullptr);
      c["p"] = t.p;
      c["p_bonferroni"] = bonferroni(t.p, all.size() - 1);
      try {
        c["cohens_d"] = cohens_d(selected, other);
      } catch (const NumericError&) {
        c["cohens_d"] = nullptr;
      }
    }
    c["mean_difference"] = mean(selected) - mean(other);
    comparisons.push_back(std::move(c));
  }
  out["comparisons"] = std::move(comparisons);

  if (ev.folds >= 2) {
    std::vector<std::string> labels = strata;
    if (labels.empty()) labels.assign(test.size(), "all");
    const auto split = kfold_split(labels, ev.folds, ev.fold_seed);
    Json folds = Json::array();
    std::vector<double> r1;
    for (const auto& f : split.folds) {
      std::vector<int> ranks;
      for (auto i : f) ranks.push_back(report.ranks[i]);
      const auto m = metrics_from_ranks(ranks, {}, modality);
      r1.push_back(m.recall_at_1);
      folds.push_back({{"count", m.count},
                       {"recall_at_1", m.recall_at_1},
                       {"recall_at_3", m.recall_at_3},
                       {"recall_at_5", m.recall_at_5},
                       {"mrr", m.mrr}});
    }
    const auto ci = confidence_interval(r1);
    out["folds"] = {{"k", ev.folds},
                    {"degraded", split.degraded()},
                    {"small_strata", split.small_strata},
                    {"per_fold", std::move(folds)},
                    {"recall_at_1_mean", mean(r1)},
                    {"recall_at_1_ci95", {ci.lo, ci.hi}}};
  }

  write_json(ctx.output(kMetricsJson), out);
  write_file(ctx.output(kMetricsTable), report.to_table());
  if (ev.dump_scores) {
    std::string dump;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      Json row{{"index", i}, {"rank", scores[i].rank}};
      for (Modality m : all) row[modality_name(m)] = modality_scores(scores[i], m);
      dump += row.dump() + "\n";
    }
    write_file(ctx.output(kScores), dump);
  }
  if (ev.export_misranked) export_misranked(ctx.output(kMisranked), test, scores, modality);
  ctx.log << report.to_table();
}

std::vector<std::string> unique_passages(const std::vector<TripletExample>& test) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : test) {
    if (seen.insert(t.positive).second) out.push_back(t.positive);
    for (const auto& n : t.negatives) {
      if (seen.insert(n).second) out.push_back(n);
    }
  }
  return out;
}

std::string passage_id(std::size_t i) { return "passage" + std::to_string(i); }

void cmd_index_build(Context& ctx) {
  const fs::path index_path = ctx.output(ctx.cfg.paths.index);
  ctx.guard({index_path, ctx.output(kIndexIds)});
  ctx.require(ctx.output(ctx.cfg.paths.checkpoint));
  const Vocab vocab = ctx.vocab();
  const EncoderParams params = ctx.checkpoint(ctx.output(ctx.cfg.paths.checkpoint), vocab);
  const Embedder embedder(params, vocab);
  const auto passages = unique_passages(read_triplets(ctx.input(ctx.cfg.paths.test)));

  std::vector<IndexedVector> vectors;
  std::string ids;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    vectors.push_back({passage_id(i), embedder.dense(passages[i]).cast<float>()});
    ids += Json{{"id", passage_id(i)}, {"text", passages[i]}}.dump() + "\n";
  }
  IndexParams ip = ctx.cfg.index;
  ip.dim = params.config.dim;
  const HnswIndex index = HnswIndex::build(vectors, ip);
  index.save(index_path);
  write_file(ctx.output(kIndexIds), ids);
  ctx.log << "indexed " << index.size() << " passages (max level " << index.max_level()
          << "); wrote " << index_path.string() << "\n";
}

void cmd_index_query(Context& ctx) {
  ctx.guard({ctx.output(kIndexResults)});
  const std::size_t k = ctx.options.k.value_or(ctx.cfg.rag.params.k);
  if (k < 1) throw UsageError("--k must be >= 1");
  const HnswIndex index = HnswIndex::load(ctx.output(ctx.cfg.paths.index));
  const Vocab vocab = ctx.vocab();
  const EncoderParams params = ctx.checkpoint(ctx.output(ctx.cfg.paths.checkpoint), vocab);
  if (params.config.dim != index.params().dim) {
    throw DataError("index dimension " + std::to_string(index.params().dim) +
                    " differs from encoder dimension " + std::to_string(params.config.dim));
  }
  const Embedder embedder(params, vocab);
  const auto test = read_triplets(ctx.input(ctx.cfg.paths.test));
  const auto passages = unique_passages(test);
  std::map<std::string, std::string> id_of;
  for (std::size_t i = 0; i < passages.size(); ++i) id_of[passages[i]] = passage_id(i);

  std::string out;
  std::size_t found = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto hits = index.search(embedder.dense(test[i].query).cast<float>(), k);
    Json row{{"index", i}, {"query", test[i].query}};
    Json h = Json::array();
    std::optional<std::size_t> positive_rank;
    auto pid = id_of.find(test[i].positive);
    for (std::size_t r = 0; r < hits.size(); ++r) {
      h.push_back({{"id", hits[r].id}, {"similarity", hits[r].similarity}});
      if (pid != id_of.end() && hits[r].id == pid->second && !positive_rank) positive_rank = r + 1;
    }
    row["hits"] = std::move(h);
    row["positive_rank"] = positive_rank ? Json(*positive_rank) : Json(nullptr);
    found += positive_rank.has_value();
    out += row.dump() + "\n";
  }
  write_file(ctx.output(kIndexResults), out);
  ctx.log << "positive within top-" << k << " for " << found << " of " << test.size()
          << " queries\n";
}

void cmd_rag_eval(Context& ctx) {
  ctx.guard({ctx.output(kRagReport), ctx.output(kRagTable)});
  const Vocab vocab = ctx.vocab();
  const EncoderParams params = ctx.cfg.rag.untrained
                                   ? init_encoder(ctx.encoder_config(vocab, ctx.cfg.encoder.seed))
                                   : ctx.checkpoint(ctx.output(ctx.cfg.paths.checkpoint), vocab);
  RagParams rp = ctx.cfg.rag.params;
  rp.index = ctx.cfg.index;
  rp.weights = ctx.cfg.weights;
  if (ctx.options.modality) rp.rerank = *ctx.options.modality;
  const std::size_t k = ctx.options.k.value_or(rp.k);
  if (k < 1) throw UsageError("--k must be >= 1");
  const Embedder embedder(params, vocab);
  const auto notes = read_notes(ctx.input(ctx.cfg.paths.notes));
  const auto queries = read_queries(ctx.input(ctx.cfg.paths.queries));
  const ChunkStore store = ingest_notes(notes, rp, embedder);
  const RagReport report = rag_evaluate(store, queries, k, embedder);

  auto labels = [](const CategorySet& s) {
    Json a = Json::array();
    for (auto c : s) a.push_back(std::string(to_string(c)));
    return a;
  };
  Json j;
  j["k"] = k;
  j["max_chunk_tokens"] = rp.max_chunk_tokens;
  j["rerank"] = modality_name(rp.rerank);
  j["mean_iou"] = report.mean_iou;
  Json qs = Json::array();
  std::string table = "query  patient      iou     gold -> retrieved\n";
  for (std::size_t i = 0; i < report.queries.size(); ++i) {
    const auto& q = report.queries[i];
    qs.push_back({{"query", q.query},
                  {"patient_id", q.patient_id},
                  {"gold", labels(q.gold)},
                  {"retrieved", labels(q.retrieved)},
                  {"chunk_ids", q.chunk_ids},
                  {"iou", q.iou}});
    char line[96];
    std::snprintf(line, sizeof line, "%5zu  %-12s %.4f  ", i, q.patient_id.c_str(), q.iou);
    table += line + labels(q.gold).dump() + " -> " + labels(q.retrieved).dump() + "\n";
  }
  j["queries"] = std::move(qs);
  table += format("mean IoU %.4f\n", report.mean_iou);
  write_json(ctx.output(kRagReport), j);
  write_file(ctx.output(kRagTable), table);
  ctx.log << format("mean IoU %.4f", report.mean_iou) << " over " << queries.size()
          << " queries\n";
}

Json check_json(const char* term, const GradCheckReport& r) {
  Json tensors = Json::array();
  for (const auto& t : r.tensors) {
    tensors.push_back({{"name", t.name},
                       {"max_abs_error", t.max_abs_error},
                       {"scale", t.scale},
                       {"rel_error", t.rel_error}});
  }
  return {{"term", term},
          {"max_rel_error", r.max_rel_error},
          {"worst_tensor", r.worst_tensor},
          {"tensors", std::move(tensors)}};
}

void cmd_grad_check(Context& ctx) {
  ctx.guard({ctx.output(kGradCheck)});
  const auto& gc = ctx.cfg.grad_check;
  if (gc.triplets < 1) throw UsageError("grad_check.triplets must be >= 1");
  Rng rng(gc.seed);
  std::vector<std::string> words;
  for (int i = 0; i < 24; ++i) words.push_back("w" + std::to_string(i));
  Vocab vocab = Vocab::build(words);
  auto text = [&] {
    std::string s;
    const auto n = 2 + rng.below(4);
    for (std::uint64_t i = 0; i < n; ++i) s += (i ? " " : "") + words[rng.below(words.size())];
    return s;
  };
  std::vector<TripletExample> triplets(gc.triplets);
  for (auto& t : triplets) {
    t.query = text();
    t.positive = text();
    for (auto& n : t.negatives) n = text();
  }
  const auto batch = tokenize_triplets(triplets, vocab);

  EncoderConfig ec{gc.dim, gc.layers, gc.heads, 16, static_cast<int>(vocab.size()), gc.seed};
  const EncoderParams params = init_encoder(ec);
  const LossConfig& loss = ctx.cfg.loss;

  GradientSet g = GradientSet::zeros_like(params);
  const auto base = triplet_objective(params, batch, loss, ctx.cfg.weights, LossTerm::kFinal, &g);
  const auto final_check = finite_difference_check(
      params,
      [&](const EncoderParams& p) {
        return triplet_objective(p, batch, loss, ctx.cfg.weights, LossTerm::kFinal, nullptr,
                                 base.targets)
            .loss;
      },
      g, gc.step);

  std::vector<TokenSeq> texts;
  for (int i = 0; i < 4; ++i) texts.push_back(tokenize(text(), vocab));
  EncoderConfig tc = ec;
  tc.seed = derive_seed(gc.seed, 1);
  const Eigen::MatrixXd teacher = dense_embeddings(init_encoder(tc), texts);
  GradientSet gd = GradientSet::zeros_like(params);
  distill_objective(params, texts, teacher, loss, LossTerm::kDistillTotal, &gd);
  const auto distill_check = finite_difference_check(
      params,
      [&](const EncoderParams& p) {
        return distill_objective(p, texts, teacher, loss, LossTerm::kDistillTotal).loss;
      },
      gd, gc.step);

  const double worst = std::max(final_check.max_rel_error, distill_check.max_rel_error);
  const bool pass = worst < gc.tolerance;
  Json report{{"encoder", {{"dim", gc.dim}, {"layers", gc.layers}, {"heads", gc.heads}}},
              {"step", gc.step},
              {"tolerance", gc.tolerance},
              {"max_rel_error", worst},
              {"pass", pass},
              {"checks", {check_json("final", final_check), check_json("distill_total", distill_check)}}};
  write_json(ctx.output(kGradCheck), report);
  ctx.log << format("final loss: max relative error %.3e\n", final_check.max_rel_error);
  ctx.log << format("distill total: max relative error %.3e\n", distill_check.max_rel_error);
  if (!pass) {
    throw NumericError("gradient check failed: max relative error " + std::to_string(worst) +
                       " >= tolerance " + std::to_string(gc.tolerance));
  }
}

const std::map<std::string, std::function<void(Context&)>>& command_table() {
  static const std::map<std::string, std::function<void(Context&)>> table = {
      {"gen-synthetic", cmd_gen_synthetic}, {"train", cmd_train},
      {"distill", cmd_distill},             {"eval", cmd_eval},
      {"index-build", cmd_index_build},     {"index-query", cmd_index_query},
      {"rag-eval", cmd_rag_eval},           {"grad-check", cmd_grad_check}};
  return table;
}

}  // namespace

const std::vector<std::string>& pipeline_commands() {
  static const std::vector<std::string> names = {"gen-synthetic", "train",       "distill",
                                                 "eval",          "index-build", "index-query",
                                                 "rag-eval",      "grad-check"};
  return names;
}

PipelineConfig resolve_config(const RunOptions& options) {
  PipelineConfig cfg = options.config ? load_config(*options.config) : PipelineConfig{};
  if (options.seed) cfg.set_seed(*options.seed);
  if (options.modality) cfg.eval.modality = *options.modality;
  if (options.k) cfg.rag.params.k = *options.k;
  return cfg;
}

void run(const RunOptions& options, std::ostream& log) {
  const auto& table = command_table();
  auto it = table.find(options.command);
  if (it == table.end()) throw UsageError("unknown command '" + options.command + "'");
  fs::create_directories(options.out);
  Context ctx(options, log);
  it->second(ctx);
}

int exit_status(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) return err->exit_code();
  return 2;
}

}  // namespace trimodal
