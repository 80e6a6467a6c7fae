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
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "support.hpp"
#include "trimodal/checkpoint.hpp"
#include "trimodal/trainer.hpp"

using namespace trimodal;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.lr_max = 0.05;
  cfg.cycle_length = 1000;
  cfg.batch_size = 4;
  cfg.epochs = 2;
  cfg.seed = 9;
  cfg.loss.temperature = 0.5;
  return cfg;
}

double max_abs_diff(const EncoderWeights& a, const EncoderWeights& b) {
  std::vector<Eigen::MatrixXd> ta, tb;
  a.for_each([&](const std::string&, const auto& t) { ta.emplace_back(t); });
  b.for_each([&](const std::string&, const auto& t) { tb.emplace_back(t); });
  double m = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) m = std::max(m, (ta[i] - tb[i]).cwiseAbs().maxCoeff());
  return m;
}

std::size_t max_spread(const std::vector<std::vector<std::size_t>>& batches,
                       const std::vector<std::size_t>& lengths) {
  std::size_t worst = 0;
  for (const auto& b : batches) {
    std::size_t lo = SIZE_MAX, hi = 0;
    for (auto i : b) {
      lo = std::min(lo, lengths[i]);
      hi = std::max(hi, lengths[i]);
    }
    worst = std::max(worst, hi - lo);
  }
  return worst;
}

DistillText text_of(std::size_t tokens, DistillKind kind, const std::string& tag) {
  std::string t = tag;
  for (std::size_t i = 1; i < tokens; ++i) t += " x";
  return make_distill_text(t, kind);
}

}  // namespace

TEST_CASE("cosine schedule with warm restarts") {
  TrainConfig cfg;
  cfg.cycle_length = 10;
  CHECK(lr_schedule(0, cfg) == 2e-5);
  CHECK(lr_schedule(5, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_schedule(10, cfg) == 2e-5);
  CHECK(lr_schedule(9, cfg) < lr_schedule(8, cfg));
  cfg.cycle_multiplier = 2.0;
  CHECK(lr_schedule(10, cfg) == 2e-5);
  CHECK(lr_schedule(20, cfg) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_schedule(30, cfg) == 2e-5);
  cfg.lr_min = 1e-6;
  CHECK(lr_schedule(20, cfg) == doctest::Approx(1e-6 + 0.5 * (2e-5 - 1e-6)).epsilon(1e-12));
  for (std::size_t s = 0; s < 100; ++s) {
    CHECK(lr_schedule(s, cfg) >= cfg.lr_min);
    CHECK(lr_schedule(s, cfg) <= cfg.lr_max);
  }
}

TEST_CASE("linear warmup scales the schedule") {
  TrainConfig cfg;
  cfg.cycle_length = 100;
  TrainConfig warm = cfg;
  warm.warmup_steps = 4;
  CHECK(lr_schedule(0, warm) == doctest::Approx(0.25 * lr_schedule(0, cfg)).epsilon(1e-14));
  CHECK(lr_schedule(2, warm) == doctest::Approx(0.75 * lr_schedule(2, cfg)).epsilon(1e-14));
  for (std::size_t s = 3; s < 50; ++s) CHECK(lr_schedule(s, warm) == lr_schedule(s, cfg));
}

TEST_CASE("gradient clipping") {
  auto params = init_encoder(testing::tiny_config(10));
  auto g = GradientSet::zeros_like(params);
  g.weights.lexical_projection(0) = 0.3;
  g.weights.lexical_projection(1) = 0.4;
  const auto same = clip_gradients(g, 1.0);
  CHECK(same.weights.lexical_projection == g.weights.lexical_projection);

  g.weights.lexical_projection(0) = 6.0;
  g.weights.lexical_projection(1) = 8.0;
  const auto clipped = clip_gradients(g, 1.0);
  CHECK(clipped.norm() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(clipped.weights.lexical_projection(0) == doctest::Approx(0.6));

  Rng rng(3);
  auto r = GradientSet::zeros_like(params);
  r.weights.for_each([&](const std::string&, auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-1, 1);
  });
  const auto c = clip_gradients(r, 0.5);
  double dot = 0.0;
  std::vector<const double*> src;
  r.weights.for_each([&](const std::string&, const auto& t) { src.push_back(t.data()); });
  std::size_t k = 0;
  c.weights.for_each([&](const std::string&, const auto& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) dot += t.data()[i] * src[k][i];
    ++k;
  });
  CHECK(dot / (c.norm() * r.norm()) == doctest::Approx(1.0).epsilon(1e-12));

  g.weights.lexical_projection(2) = INFINITY;
  CHECK_THROWS_AS(clip_gradients(g, 1.0), NumericError);
  CHECK_THROWS_AS(clip_gradients(same, 0.0), UsageError);
}

TEST_CASE("make_batches covers every example once and is seeded") {
  const std::vector<std::size_t> one{7};
  const auto b1 = make_batches(one, 16, 8, 1);
  REQUIRE(b1.size() == 1);
  CHECK(b1[0] == std::vector<std::size_t>{0});

  Rng rng(4);
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 103; ++i) lengths.push_back(1 + rng.below(60));
  const auto a = make_batches(lengths, 8, 6, 42);
  CHECK(a == make_batches(lengths, 8, 6, 42));
  CHECK(a != make_batches(lengths, 8, 6, 43));
  std::vector<std::size_t> seen;
  for (const auto& b : a) {
    CHECK(b.size() <= 8);
    seen.insert(seen.end(), b.begin(), b.end());
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);
  CHECK(seen.size() == lengths.size());

  const auto big = make_batches(std::span(lengths).first(5), 16, 8, 0);
  CHECK(big.size() == 1);
  CHECK(big[0].size() == 5);
  CHECK_THROWS_AS(make_batches(std::span<const std::size_t>{}, 4, 2, 0), DataError);
}

TEST_CASE("length bucketing beats random partitions on a skewed set") {
  Rng rng(10);
  std::vector<std::size_t> lengths;
  for (int i = 0; i < 256; ++i) {
    const double u = rng.uniform();
    lengths.push_back(1 + static_cast<std::size_t>(120 * u * u * u));
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto bucketed = make_batches(lengths, 16, 16, seed);
    std::vector<std::size_t> order(lengths.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle(seed + 1000);
    shuffle.shuffle(std::span(order));
    std::vector<std::vector<std::size_t>> random;
    for (std::size_t at = 0; at < order.size(); at += 16) {
      random.emplace_back(order.begin() + at, order.begin() + std::min(order.size(), at + 16));
    }
    CHECK(max_spread(bucketed, lengths) <= max_spread(random, lengths));
  }
}

TEST_CASE("curriculum ordering") {
  std::vector<DistillText> mixed{text_of(9, DistillKind::kDefinition, "def9"),
                                 text_of(5, DistillKind::kKgStatement, "kg5"),
                                 text_of(5, DistillKind::kDefinition, "def5")};
  CHECK(curriculum_order(mixed) == std::vector<std::size_t>{2, 1, 0});

  std::vector<DistillText> sorted{text_of(1, DistillKind::kDefinition, "a"),
                                  text_of(2, DistillKind::kDefinition, "b"),
                                  text_of(2, DistillKind::kDefinition, "c"),
                                  text_of(3, DistillKind::kKgStatement, "d")};
  CHECK(curriculum_order(sorted) == std::vector<std::size_t>{0, 1, 2, 3});

  std::vector<DistillText> reversed{text_of(4, DistillKind::kKgStatement, "a"),
                                    text_of(3, DistillKind::kDefinition, "b"),
                                    text_of(2, DistillKind::kKgStatement, "c"),
                                    text_of(1, DistillKind::kDefinition, "d")};
  CHECK(curriculum_order(reversed) == std::vector<std::size_t>{3, 2, 1, 0});
  CHECK(curriculum_order({}).empty());
}

TEST_CASE("phase one with zero epochs leaves parameters untouched") {
  const auto corpus = testing::tiny_corpus(6, 1);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto out = train_phase1(params, corpus.triplets, cfg);
  CHECK(out.log.steps.empty());
  CHECK(fingerprint(out.params.weights) == fingerprint(params.weights));
  CHECK_THROWS_AS(train_phase1(params, std::span<const TokenizedTriplet>{}, small_config()), DataError);
}

TEST_CASE("repeated single batch descends with a small learning rate") {
  const auto corpus = testing::tiny_corpus(4, 2);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  auto cfg = small_config();
  cfg.batch_size = 4;
  cfg.epochs = 15;
  cfg.lr_max = 0.02;
  cfg.cycle_length = 1000000;
  cfg.clip = 100.0;
  const auto out = train_phase1(params, corpus.triplets, cfg);
  REQUIRE(out.log.steps.size() == 15);
  for (std::size_t k = 1; k < out.log.steps.size(); ++k) {
    CHECK(out.log.steps[k].loss <= out.log.steps[k - 1].loss);
  }
}

TEST_CASE("phase one is bit-for-bit deterministic") {
  const auto corpus = testing::tiny_corpus(10, 3);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  auto cfg = small_config();
  cfg.momentum = 0.5;
  const auto a = train_phase1(params, corpus.triplets, cfg);
  const auto b = train_phase1(params, corpus.triplets, cfg);
  CHECK(serialize_checkpoint(a.params) == serialize_checkpoint(b.params));
  CHECK(a.log.to_jsonl() == b.log.to_jsonl());
  CHECK(fingerprint(a.params.weights) != fingerprint(params.weights));
}

TEST_CASE("gradient accumulation equals one full batch") {
  const auto corpus = testing::tiny_corpus(8, 5);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  auto cfg = small_config();
  cfg.batch_size = 8;
  cfg.epochs = 3;
  const auto full = train_phase1(params, corpus.triplets, cfg);
  cfg.accumulation_steps = 4;
  const auto accumulated = train_phase1(params, corpus.triplets, cfg);
  CHECK(max_abs_diff(full.params.weights, accumulated.params.weights) < 1e-12);
}

TEST_CASE("adam and weight decay run deterministically") {
  const auto corpus = testing::tiny_corpus(8, 6);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  auto cfg = small_config();
  cfg.optimizer = OptimizerKind::kAdam;
  cfg.lr_max = 1e-3;
  cfg.weight_decay = 0.01;
  const auto a = train_phase1(params, corpus.triplets, cfg);
  const auto b = train_phase1(params, corpus.triplets, cfg);
  CHECK(fingerprint(a.params.weights) == fingerprint(b.params.weights));
  CHECK(parse_optimizer("adam") == OptimizerKind::kAdam);
  CHECK(std::string(optimizer_name(OptimizerKind::kSgd)) == "sgd");
  CHECK_THROWS_AS(parse_optimizer("lbfgs"), UsageError);
}

TEST_CASE("training log records steps in order with checkpoints") {
  testing::TempDir dir;
  const auto corpus = testing::tiny_corpus(12, 7);
  const auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  auto cfg = small_config();
  cfg.checkpoint_every = 2;
  cfg.checkpoint_dir = dir.path();
  cfg.grad_check_every = 3;
  const auto out = train_phase1(params, corpus.triplets, cfg);
  REQUIRE(out.log.steps.size() == 6);
  for (std::size_t k = 0; k < out.log.steps.size(); ++k) {
    CHECK(out.log.steps[k].step == k);
    CHECK(out.log.steps[k].clipped_norm <= cfg.clip + 1e-12);
    CHECK(out.log.steps[k].lr == lr_schedule(k, cfg));
    if (k % 3 == 0) {
      REQUIRE(out.log.steps[k].grad_check_error.has_value());
      CHECK(*out.log.steps[k].grad_check_error < 1e-4);
    }
  }
  CHECK(out.log.checkpoints.size() == 3);
  for (const auto& [step, path] : out.log.checkpoints) {
    CHECK(std::filesystem::exists(path));
    CHECK(step % 2 == 0);
  }
  std::istringstream lines(out.log.to_jsonl());
  std::string line;
  long last = -1;
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("type", "") == "summary") continue;
    CHECK(j["step"].get<long>() >= last);
    last = j["step"].get<long>();
    ++rows;
  }
  CHECK(rows == 9);
}

TEST_CASE("early stopping when the validation loss stops improving") {
  const auto corpus = testing::tiny_corpus(8, 8);
  auto params = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  std::vector<TokenizedTriplet> adversarial = corpus.triplets;
  for (auto& t : adversarial) std::swap(t.positive, t.negatives[0]);
  auto cfg = small_config();
  cfg.epochs = 40;
  cfg.lr_max = 0.2;
  cfg.patience = 2;
  const auto out = train_phase1(params, corpus.triplets, cfg, ValidationSet{adversarial});
  CHECK(out.log.stopped_early);
  CHECK(out.log.validations.size() < 40);
  CHECK(out.log.best_step.has_value());
}

TEST_CASE("phase two keeps a student equal to its teacher fixed") {
  const auto corpus = testing::tiny_corpus(6, 11);
  const auto teacher = init_encoder(testing::tiny_config(static_cast<int>(corpus.vocab.size())));
  std::vector<DistillText> texts;
  std::vector<TokenSeq> tokens;
  for (const auto& e : corpus.examples) texts.push_back(make_distill_text(e.positive, DistillKind::kDefinition));
  tokens = tokenize_texts(texts, corpus.vocab);
  auto cfg = small_config();
  cfg.lr_max = 0.1;
  const auto before = fingerprint(teacher.weights);
  const auto out = train_phase2(teacher, teacher, texts, tokens, cfg);
  CHECK(fingerprint(teacher.weights) == before);
  REQUIRE_FALSE(out.log.steps.empty());
  CHECK(std::abs(out.log.steps.front().loss) < 1e-12);
  CHECK(max_abs_diff(out.params.weights, teacher.weights) < 1e-12);
}

TEST_CASE("phase two moves a fresh student toward a frozen teacher") {
  const auto corpus = testing::tiny_corpus(16, 12);
  const auto cfg_e = testing::tiny_config(static_cast<int>(corpus.vocab.size()), 1);
  const auto teacher = init_encoder(cfg_e);
  auto student_cfg = cfg_e;
  student_cfg.seed = 2;
  const auto student = init_encoder(student_cfg);
  std::vector<DistillText> texts;
  for (const auto& e : corpus.examples) {
    texts.push_back(make_distill_text(e.positive, DistillKind::kDefinition));
    texts.push_back(make_distill_text(e.query, DistillKind::kKgStatement));
  }
  const auto tokens = tokenize_texts(texts, corpus.vocab);
  auto cfg = small_config();
  cfg.lr_max = 0.5;
  cfg.epochs = 20;
  cfg.batch_size = 8;
  const auto before = fingerprint(teacher.weights);
  const Eigen::MatrixXd e_t = dense_embeddings(teacher, tokens);
  const double start = distill_corpus_loss(student, e_t, texts, tokens, cfg);
  const auto out = train_phase2(student, teacher, texts, tokens, cfg);
  CHECK(fingerprint(teacher.weights) == before);
  CHECK(distill_corpus_loss(out.params, e_t, texts, tokens, cfg) < 0.5 * start);
  CHECK(dense_embeddings(teacher, tokens) == e_t);

  auto other = cfg_e;
  other.dim = 4;
  CHECK_THROWS_AS(train_phase2(init_encoder(other), teacher, texts, tokens, cfg), DataError);
  CHECK_THROWS_AS(train_phase2(student, e_t, texts, std::span(tokens).first(3), cfg), DataError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr_min = c.lr_max;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.cycle_length = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = TrainConfig{};
  c.clip = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}
