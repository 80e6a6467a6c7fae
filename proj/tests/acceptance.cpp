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
// Acceptance suite: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <sstream>

#include "loss_oracle.hpp"
#include "rag_oracle.hpp"
#include "stats_reference.hpp"
#include "support.hpp"
#include "trimodal/checkpoint.hpp"
#include "trimodal/embedder.hpp"
#include "trimodal/evaluate.hpp"
#include "trimodal/file_util.hpp"
#include "trimodal/gradcheck.hpp"
#include "trimodal/metrics.hpp"
#include "trimodal/pipeline.hpp"
#include "trimodal/synthetic.hpp"
#include "trimodal/trainer.hpp"

using namespace trimodal;
namespace fs = std::filesystem;
namespace ts = testing::stats;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// Shared phase-1 setup: default synthetic corpus and a d=32, L=1 encoder.
struct Phase1 {
  SyntheticCorpus corpus = gen_synthetic(SyntheticSpec{});
  std::vector<TokenizedTriplet> train = tokenize_triplets(corpus.train, corpus.vocab);
  std::vector<TokenizedTriplet> valid = tokenize_triplets(corpus.valid, corpus.vocab);
  std::vector<TokenizedTriplet> test = tokenize_triplets(corpus.test, corpus.vocab);
  EncoderParams init;
  TrainConfig cfg;
  EncoderParams trained;

  Phase1() {
    EncoderConfig ec;
    ec.dim = 32;
    ec.layers = 1;
    ec.heads = 2;
    ec.vocab_size = static_cast<int>(corpus.vocab.size());
    ec.seed = 7;
    init = init_encoder(ec);
    cfg.lr_max = 1.0;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    cfg.cycle_length = cfg.epochs * ((train.size() + cfg.batch_size - 1) / cfg.batch_size);
    cfg.seed = 1;
    cfg.patience = cfg.epochs;
    trained = train_phase1(init, train, cfg, ValidationSet{valid}).params;
  }
};

Phase1& phase1() {
  static Phase1 p;
  return p;
}

Outcome loss_oracle() {
  const auto dev = testing::loss_oracle_deviation(1000, 2024);
  return {dev.max_abs < 1e-9,
          fmt("max |loss - reference| = %.3e over %.0f comparisons", dev.max_abs,
              static_cast<double>(dev.comparisons))};
}

Outcome gradients() {
  const auto corpus = testing::tiny_corpus(3, 31);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size()), 17));
  const LossConfig cfg;
  const EnsembleWeights w;
  const auto g = backward(params, corpus.triplets, cfg, w, LossTerm::kFinal);
  const auto targets = triplet_objective(params, corpus.triplets, cfg, w, LossTerm::kFinal).targets;
  const auto final_rep = finite_difference_check(
      params,
      [&](const EncoderParams& p) {
        return triplet_objective(p, corpus.triplets, cfg, w, LossTerm::kFinal, nullptr, targets).loss;
      },
      g, 1e-5);

  std::vector<TokenSeq> texts;
  for (const auto& t : corpus.triplets) {
    texts.push_back(t.query);
    texts.push_back(t.positive);
  }
  const auto teacher = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size()), 18));
  const Eigen::MatrixXd e_t = dense_embeddings(teacher, texts);
  const auto gd = backward(params, texts, e_t, cfg, LossTerm::kDistillTotal);
  const auto distill_rep = finite_difference_check(
      params,
      [&](const EncoderParams& p) {
        return distill_objective(p, texts, e_t, cfg, LossTerm::kDistillTotal).loss;
      },
      gd, 1e-5);
  return {final_rep.max_rel_error < 1e-4 && distill_rep.max_rel_error < 1e-4,
          "final " + fmt("%.2e", final_rep.max_rel_error) + " (" + final_rep.worst_tensor +
              "), distill total " + fmt("%.2e", distill_rep.max_rel_error) + " (" +
              distill_rep.worst_tensor + ")"};
}

Outcome hand_values() {
  LossConfig uniform_cfg;
  uniform_cfg.label_smoothing = 0.0;
  CandidateScores flat;
  flat.positive = 0.4;
  flat.negatives.fill(0.4);
  const double nce = info_nce(flat, uniform_cfg);
  const double ens = ensemble_score(0.5, 0.2, 0.4, EnsembleWeights{1.0, 0.3, 1.0});
  Eigen::MatrixXd es(2, 2), et(2, 2);
  es << 1, 0, 0, 1;
  et << 1, 0, 1, 0;
  const double sim = similarity_matrix_loss(es, et);
  const double iou = category_iou({ClinicalCategory::kCurrentMeds},
                                  {ClinicalCategory::kCurrentMeds, ClinicalCategory::kPastHistory});
  const bool pass = std::abs(nce - std::log(6.0)) <= 1e-9 && std::abs(ens - 0.96) <= 1e-12 &&
                    std::abs(sim - 0.5) <= 1e-12 && iou == 0.5;
  return {pass, fmt("InfoNCE %.12f, ensemble %.15f, similarity %.15f, IoU %.3f", nce, ens, sim, iou)};
}

Outcome learnability() {
  auto& p = phase1();
  const auto before = evaluate(p.init, p.test, {}, EvalOptions{});
  const auto after = evaluate(p.trained, p.test, {}, EvalOptions{});
  return {before.recall_at_1 <= 0.35 && after.recall_at_1 >= 0.95 && after.mrr >= 0.97,
          fmt("R@1 %.3f at init, %.3f trained; MRR %.4f", before.recall_at_1, after.recall_at_1,
              after.mrr)};
}

Outcome distillation() {
  auto& p = phase1();
  const auto texts = distill_texts(p.corpus.definitions, p.corpus.kg);
  const auto held = distill_texts(p.corpus.definitions_heldout, p.corpus.kg_heldout);
  const auto tokens = tokenize_texts(texts, p.corpus.vocab);
  const auto held_tokens = tokenize_texts(held, p.corpus.vocab);
  const Eigen::MatrixXd targets = dense_embeddings(p.trained, tokens);
  EncoderConfig sc = p.trained.config;
  sc.seed = 99;
  const auto student = init_encoder(sc);
  TrainConfig cfg;
  cfg.lr_max = 1.0;
  cfg.epochs = 300;
  cfg.batch_size = 16;
  cfg.cycle_length = cfg.epochs * ((texts.size() + cfg.batch_size - 1) / cfg.batch_size);
  cfg.seed = 1;
  const double l0 = distill_corpus_loss(student, targets, texts, tokens, cfg);
  const auto result = train_phase2(student, targets, texts, tokens, cfg);
  const double l1 = distill_corpus_loss(result.params, targets, texts, tokens, cfg);
  const double cos = mean_embedding_cosine(result.params, p.trained, held_tokens);
  const double reduction = 1.0 - l1 / l0;
  return {texts.size() == 500 && held.size() == 100 && reduction >= 0.9 && cos > 0.99,
          fmt("loss %.4f -> %.6f (reduction %.4f); held-out cosine %.5f", l0, l1, reduction, cos)};
}

Outcome self_distillation() {
  auto& p = phase1();
  const auto before = self_distill_gaps(p.init, p.test, p.cfg.loss, p.cfg.weights);
  const auto after = self_distill_gaps(p.trained, p.test, p.cfg.loss, p.cfg.weights);
  auto parts = [](const SelfDistillGap& g) {
    return fmt("dense %.3f, sparse %.3f, colbert %.3f", g.dense, g.sparse, g.colbert);
  };
  return {after.weighted < before.weighted,
          fmt("weighted gap %.5f at init, %.5f trained", before.weighted, after.weighted) +
              "; per modality init (" + parts(before) + "), trained (" + parts(after) + ")"};
}

Outcome index_quality() {
  constexpr int kDim = 64;
  Rng rng(7);
  auto gaussian = [&] {
    const double u1 = 1.0 - rng.uniform(), u2 = rng.uniform();
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
  };
  auto unit = [&] {
    Eigen::VectorXf v(kDim);
    for (int j = 0; j < kDim; ++j) v(j) = gaussian();
    return Eigen::VectorXf(v.normalized());
  };
  std::vector<IndexedVector> vectors;
  for (int i = 0; i < 10000; ++i) vectors.push_back({"v" + std::to_string(i), unit()});
  IndexParams params;
  params.dim = kDim;
  const auto index = HnswIndex::build(vectors, params);
  testing::TempDir dir;
  index.save(dir / "index.bin");
  const auto loaded = HnswIndex::load(dir / "index.bin");

  double hits = 0;
  bool identical = loaded.serialize() == index.serialize();
  for (int q = 0; q < 1000; ++q) {
    const auto query = unit();
    const auto approx = index.search(query, 10);
    const auto exact = exact_search(vectors, query, 10);
    std::set<std::string> truth;
    for (const auto& h : exact) truth.insert(h.id);
    for (const auto& h : approx) hits += truth.count(h.id);
    identical = identical && loaded.search(query, 10) == approx;
  }
  const double recall = hits / 10000.0;
  return {recall >= 0.95 && identical,
          fmt("recall@10 %.4f", recall) + (identical ? ", reloaded index identical"
                                                     : ", reloaded index differs")};
}

Outcome statistics() {
  double metric_dev = std::abs(mrr(ts::kRanks25) - ts::reciprocal_mean(ts::kRanks25));
  for (int k = 1; k <= 6; ++k) {
    metric_dev = std::max(metric_dev, std::abs(recall_at_k(ts::kRanks25, k) - ts::recall(ts::kRanks25, k)));
  }
  const auto a = ts::plus(ts::kSignsBase, ts::kSigns);
  const auto t1 = paired_t_test(a, ts::kSignsBase);
  const auto t2 = paired_t_test(ts::kPairedA, ts::kPairedB);
  const auto ci = confidence_interval(ts::kSample30);
  const auto ci90 = confidence_interval(ts::kSample30, 0.9);
  const double stat_dev = std::max(
      {std::abs(t1.t - ts::kSignsT), std::abs(t1.p - ts::kSignsP), std::abs(t2.t - ts::kPairedT),
       std::abs(t2.p - ts::kPairedP), std::abs(cohens_d(ts::kGroupX, ts::kGroupY) - ts::kCohensD),
       std::abs(ci.lo - ts::kCi95Lo), std::abs(ci.hi - ts::kCi95Hi),
       std::abs(ci90.lo - ts::kCi90Lo), std::abs(ci90.hi - ts::kCi90Hi)});
  return {metric_dev <= 1e-9 && stat_dev <= 1e-6,
          fmt("metrics max deviation %.2e, statistics max deviation %.2e", metric_dev, stat_dev)};
}

Outcome rag_pipeline() {
  auto& p = phase1();
  const auto train = tokenize_triplets(p.corpus.rag_train, p.corpus.vocab);
  TrainConfig cfg;
  cfg.lr_max = 1.0;
  cfg.epochs = 20;
  cfg.batch_size = 16;
  cfg.cycle_length = cfg.epochs * ((train.size() + cfg.batch_size - 1) / cfg.batch_size);
  cfg.seed = 1;
  const auto trained = train_phase1(p.init, train, cfg).params;
  RagParams rp;
  rp.max_chunk_tokens = 100;
  auto mean_iou = [&](const EncoderParams& params) {
    const Embedder e(params, p.corpus.vocab);
    const auto store = ingest_notes(p.corpus.notes, rp, e);
    return rag_evaluate(store, p.corpus.queries, 5, e).mean_iou;
  };
  const double untrained = mean_iou(p.init);
  const double tuned = mean_iou(trained);
  const auto fuzz = testing::fuzz_splitter(1000, 4242);
  const bool splitter = fuzz.cap_violations == 0 && fuzz.reconstruction_failures == 0;
  return {tuned - untrained >= 0.2 && splitter,
          fmt("mean IoU %.4f untrained, %.4f trained; splitter: %.0f cap violations, ", untrained,
              tuned, static_cast<double>(fuzz.cap_violations)) +
              fmt("%.0f reconstruction failures over %.0f documents",
                  static_cast<double>(fuzz.reconstruction_failures),
                  static_cast<double>(fuzz.documents))};
}

constexpr const char* kPipelineConfig = R"({
  "synthetic": {"train_triplets": 200, "valid_triplets": 20, "test_triplets": 50,
                "distill_texts": 100, "distill_heldout": 20},
  "encoder": {"dim": 16, "layers": 1, "heads": 2, "max_seq_len": 128},
  "train": {"epochs": 2, "lr_max": 0.5, "batch_size": 16},
  "distill": {"epochs": 2, "lr_max": 0.5, "batch_size": 16},
  "rag": {"max_chunk_tokens": 100, "k": 5},
  "eval": {"folds": 5, "dump_scores": true, "export_misranked": true}
})";

Outcome determinism() {
  testing::TempDir dir;
  write_file(dir / "config.json", kPipelineConfig);
  auto run_into = [&](const std::string& name) {
    std::ostringstream log;
    for (const char* cmd : {"gen-synthetic", "train", "distill", "eval", "index-build",
                            "index-query", "rag-eval", "grad-check"}) {
      RunOptions o;
      o.command = cmd;
      o.config = dir / "config.json";
      o.seed = 11;
      o.out = dir / name;
      trimodal::run(o, log);
    }
  };
  run_into("a");
  run_into("b");
  std::size_t files = 0, differing = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    ++files;
    const fs::path other = dir / "b" / fs::relative(entry.path(), dir / "a");
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other)) ++differing;
  }
  return {files >= 20 && differing == 0,
          fmt("%.0f files compared, %.0f differ", static_cast<double>(files),
              static_cast<double>(differing))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"loss oracle equivalence", loss_oracle},
      {"gradient correctness", gradients},
      {"hand-computed values", hand_values},
      {"phase-1 learnability", learnability},
      {"phase-2 distillation", distillation},
      {"self-distillation consistency", self_distillation},
      {"index quality and persistence", index_quality},
      {"metric and statistics oracles", statistics},
      {"retrieval-augmented pipeline", rag_pipeline},
      {"determinism", determinism}};
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %2zu %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
