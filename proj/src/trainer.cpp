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
#include "trimodal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "trimodal/checkpoint.hpp"
#include "trimodal/error.hpp"
#include "trimodal/evaluate.hpp"
#include "trimodal/gradcheck.hpp"
#include "trimodal/random.hpp"

namespace trimodal {

namespace {

using Json = nlohmann::ordered_json;
using Flat = Eigen::Map<Eigen::VectorXd>;

std::vector<Flat> flat_views(EncoderWeights& w) {
  std::vector<Flat> out;
  w.for_each([&](const std::string&, auto& t) { out.emplace_back(t.data(), t.size()); });
  return out;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const EncoderParams& params) : cfg_(cfg) {
    params.weights.for_each([&](const std::string&, const auto& t) {
      first_.push_back(Eigen::VectorXd::Zero(t.size()));
      if (cfg.optimizer == OptimizerKind::kAdam) second_.push_back(Eigen::VectorXd::Zero(t.size()));
    });
  }

  void step(EncoderParams& params, GradientSet& grads, double lr) {
    ++t_;
    auto p = flat_views(params.weights);
    auto g = flat_views(grads.weights);
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (cfg_.weight_decay > 0) p[i] *= 1.0 - lr * cfg_.weight_decay;
      if (cfg_.optimizer == OptimizerKind::kAdam) {
        first_[i] = cfg_.adam_beta1 * first_[i] + (1 - cfg_.adam_beta1) * g[i];
        second_[i] = cfg_.adam_beta2 * second_[i] + (1 - cfg_.adam_beta2) * g[i].cwiseAbs2();
        const double c1 = 1 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
        const double c2 = 1 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
        p[i].array() -= lr * (first_[i].array() / c1) /
                        ((second_[i].array() / c2).sqrt() + cfg_.adam_epsilon);
      } else if (cfg_.momentum > 0) {
        first_[i] = cfg_.momentum * first_[i] + g[i];
        p[i] -= lr * first_[i];
      } else {
        p[i] -= lr * g[i];
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<Eigen::VectorXd> first_, second_;
  std::size_t t_ = 0;
};

Json report_json(const StepRecord& s) {
  Json j;
  j["type"] = "step";
  j["step"] = s.step;
  j["epoch"] = s.epoch;
  j["lr"] = s.lr;
  j["loss"] = s.loss;
  j["grad_norm"] = s.grad_norm;
  j["clipped_norm"] = s.clipped_norm;
  j["report"] = s.report.to_json();
  if (s.grad_check_error) j["grad_check_error"] = *s.grad_check_error;
  return j;
}

template <class T>
std::vector<T> gather(std::span<const T> items, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

void maybe_checkpoint(const TrainConfig& cfg, const EncoderParams& params, std::size_t step,
                      TrainLog& log) {
  if (cfg.checkpoint_every == 0 || cfg.checkpoint_dir.empty()) return;
  if (step % cfg.checkpoint_every != 0) return;
  std::filesystem::create_directories(cfg.checkpoint_dir);
  const auto path = cfg.checkpoint_dir / ("step_" + std::to_string(step) + ".ckpt");
  save_checkpoint(params, path);
  log.checkpoints.emplace_back(step, path.string());
}

// Runs one optimizer step from a summed gradient.
void apply_update(EncoderParams& params, GradientSet& grads, Optimizer& opt,
                  const TrainConfig& cfg, StepRecord& rec) {
  grads.check_finite();
  rec.grad_norm = grads.norm();
  grads = clip_gradients(std::move(grads), cfg.clip);
  rec.clipped_norm = grads.norm();
  rec.lr = lr_schedule(rec.step, cfg);
  opt.step(params, grads, rec.lr);
}

}  // namespace

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::kAdam ? "adam" : "sgd"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw UsageError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (!(lr_max > lr_min && lr_min >= 0)) throw UsageError("need lr_max > lr_min >= 0");
  if (cycle_length < 1) throw UsageError("cycle_length must be >= 1");
  if (!(cycle_multiplier >= 1.0)) throw UsageError("cycle_multiplier must be >= 1");
  if (!(clip > 0)) throw UsageError("clip must be > 0");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (length_buckets < 1) throw UsageError("length_buckets must be >= 1");
  if (accumulation_steps < 1) throw UsageError("accumulation_steps must be >= 1");
  if (!(weight_decay >= 0)) throw UsageError("weight_decay must be >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw UsageError("momentum must lie in [0, 1)");
  if (!(grad_check_tolerance > 0)) throw UsageError("grad_check_tolerance must be > 0");
  loss.validate();
}

std::string TrainLog::to_jsonl() const {
  // Merge step, validation and checkpoint records in step order.
  std::vector<std::pair<std::size_t, Json>> rows;
  for (const auto& s : steps) rows.emplace_back(s.step, report_json(s));
  for (const auto& v : validations) {
    rows.emplace_back(v.step, Json{{"type", "validation"},
                                   {"step", v.step},
                                   {"epoch", v.epoch},
                                   {"loss", v.loss},
                                   {"recall_at_1", v.recall_at_1}});
  }
  for (const auto& [step, path] : checkpoints) {
    rows.emplace_back(step, Json{{"type", "checkpoint"}, {"step", step}, {"path", path}});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::string out;
  for (const auto& [_, j] : rows) out += j.dump() + "\n";
  Json summary{{"type", "summary"}, {"steps", steps.size()}, {"stopped_early", stopped_early}};
  summary["best_step"] = best_step ? Json(*best_step) : Json(nullptr);
  out += summary.dump() + "\n";
  return out;
}

double lr_schedule(std::size_t step, const TrainConfig& cfg) {
  const double warmup =
      step < cfg.warmup_steps
          ? static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps)
          : 1.0;
  double t = static_cast<double>(step);
  double length = static_cast<double>(cfg.cycle_length);
  while (t >= length) {
    t -= length;
    length *= cfg.cycle_multiplier;
  }
  return warmup * (cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) *
                                    (1.0 + std::cos(std::numbers::pi * t / length)));
}

GradientSet clip_gradients(GradientSet g, double threshold) {
  if (!(threshold > 0)) throw UsageError("clip threshold must be > 0");
  g.check_finite();
  const double norm = g.norm();
  if (norm > threshold) g *= threshold / norm;
  return g;
}

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size, std::size_t buckets,
                                                   std::uint64_t seed) {
  if (lengths.empty()) throw DataError("make_batches: empty dataset");
  if (batch_size < 1 || buckets < 1) throw UsageError("make_batches: sizes must be >= 1");
  const std::size_t n = lengths.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] < lengths[b]; });
  Rng rng(seed);
  const std::size_t groups = std::min(buckets, n);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t lo = g * n / groups;
    const std::size_t hi = (g + 1) * n / groups;
    rng.shuffle(std::span<std::size_t>(order.data() + lo, hi - lo));
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < n; at += batch_size) {
    batches.emplace_back(order.begin() + at, order.begin() + std::min(n, at + batch_size));
  }
  rng.shuffle(std::span<std::vector<std::size_t>>(batches));
  return batches;
}

std::vector<std::size_t> curriculum_order(std::span<const DistillText> texts) {
  std::vector<std::size_t> order(texts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = texts[a];
    const auto& y = texts[b];
    if (x.complexity != y.complexity) return x.complexity < y.complexity;
    return x.kind == DistillKind::kDefinition && y.kind == DistillKind::kKgStatement;
  });
  return order;
}

double triplet_corpus_loss(const EncoderParams& params, std::span<const TokenizedTriplet> triplets,
                           const TrainConfig& cfg) {
  if (triplets.empty()) throw DataError("empty triplet set");
  const auto v = triplet_objective(params, triplets, cfg.loss, cfg.weights, LossTerm::kFinal);
  return v.loss / static_cast<double>(triplets.size());
}

TrainResult train_phase1(EncoderParams params, std::span<const TokenizedTriplet> triplets,
                         const TrainConfig& cfg, std::optional<ValidationSet> validation) {
  cfg.validate();
  if (triplets.empty()) throw DataError("train_phase1: empty triplet set");
  TrainResult out;
  Optimizer opt(cfg, params);
  std::vector<std::size_t> lengths;
  for (const auto& t : triplets) lengths.push_back(t.total_tokens());

  const bool validating = validation && !validation->triplets.empty() && cfg.eval_every_epochs > 0;
  double best_loss = INFINITY;
  double best_recall = -1.0;
  std::size_t since_improved = 0;
  std::optional<EncoderParams> best;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !out.log.stopped_early; ++epoch) {
    const auto batches =
        make_batches(lengths, cfg.batch_size, cfg.length_buckets, derive_seed(cfg.seed, epoch));
    for (const auto& batch : batches) {
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      GradientSet grads = GradientSet::zeros_like(params);
      const std::size_t parts = std::min(cfg.accumulation_steps, batch.size());
      for (std::size_t part = 0; part < parts; ++part) {
        const std::size_t lo = part * batch.size() / parts;
        const std::size_t hi = (part + 1) * batch.size() / parts;
        const auto sub = gather(triplets, std::span(batch).subspan(lo, hi - lo));
        ObjectiveValue v;
        try {
          v = triplet_objective(params, sub, cfg.loss, cfg.weights, LossTerm::kFinal, &grads);
        } catch (const Error& e) {
          rethrow_with_prefix(e, "step " + std::to_string(step) + ": ");
        }
        rec.loss += v.loss;
        rec.report += v.report;
      }
      const double scale = 1.0 / static_cast<double>(batch.size());
      rec.loss *= scale;
      rec.report *= scale;
      grads *= scale;
      if (!std::isfinite(rec.loss) || !rec.report.all_finite()) {
        throw NumericError("step " + std::to_string(step) + ": non-finite loss");
      }
      if (cfg.grad_check_every > 0 && step % cfg.grad_check_every == 0) {
        const auto sub = gather(triplets, std::span(batch));
        const auto frozen =
            triplet_objective(params, sub, cfg.loss, cfg.weights, LossTerm::kFinal).targets;
        const double n = static_cast<double>(sub.size());
        const auto fd = finite_difference_check(
            params,
            [&](const EncoderParams& p) {
              return triplet_objective(p, sub, cfg.loss, cfg.weights, LossTerm::kFinal, nullptr,
                                       frozen)
                         .loss /
                     n;
            },
            grads);
        rec.grad_check_error = fd.max_rel_error;
        if (fd.max_rel_error > cfg.grad_check_tolerance) {
          throw NumericError("step " + std::to_string(step) + ": gradient check failed on " +
                             fd.worst_tensor + " (relative error " +
                             std::to_string(fd.max_rel_error) + ")");
        }
      }
      try {
        apply_update(params, grads, opt, cfg, rec);
      } catch (const Error& e) {
        rethrow_with_prefix(e, "step " + std::to_string(step) + ": ");
      }
      out.log.steps.push_back(std::move(rec));
      ++step;
      maybe_checkpoint(cfg, params, step, out.log);
    }

    if (validating && (epoch + 1) % cfg.eval_every_epochs == 0) {
      ValidationRecord v;
      v.step = step;
      v.epoch = epoch;
      v.loss = triplet_corpus_loss(params, validation->triplets, cfg);
      v.recall_at_1 =
          evaluate(params, validation->triplets, {}, EvalOptions{Modality::kEnsemble, cfg.weights})
              .recall_at_1;
      out.log.validations.push_back(v);
      if (v.recall_at_1 > best_recall) {
        best_recall = v.recall_at_1;
        best = params;
        out.log.best_step = step;
      }
      if (v.loss < best_loss) {
        best_loss = v.loss;
        since_improved = 0;
      } else if (++since_improved >= cfg.patience) {
        out.log.stopped_early = true;
      }
    }
  }
  out.params = best ? std::move(*best) : std::move(params);
  return out;
}

double distill_corpus_loss(const EncoderParams& student, const Eigen::MatrixXd& teacher_embeddings,
                           std::span<const DistillText> texts, std::span<const TokenSeq> tokens,
                           const TrainConfig& cfg) {
  if (texts.empty() || texts.size() != tokens.size() ||
      static_cast<std::size_t>(teacher_embeddings.rows()) != texts.size()) {
    throw DataError("distill: texts, tokens and teacher rows must be non-empty and equal in count");
  }
  const auto order = curriculum_order(texts);
  double total = 0.0;
  std::size_t batches = 0;
  for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
    const auto idx = std::span(order).subspan(at, std::min(cfg.batch_size, order.size() - at));
    const auto seqs = gather(tokens, idx);
    Eigen::MatrixXd t(idx.size(), teacher_embeddings.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) t.row(r) = teacher_embeddings.row(idx[r]);
    total += distill_objective(student, seqs, t, cfg.loss, LossTerm::kDistillTotal).loss;
    ++batches;
  }
  return total / static_cast<double>(batches);
}

TrainResult train_phase2(EncoderParams student, const EncoderParams& teacher,
                         std::span<const DistillText> texts, std::span<const TokenSeq> tokens,
                         const TrainConfig& cfg) {
  return train_phase2(std::move(student), dense_embeddings(teacher, tokens), texts, tokens, cfg);
}

TrainResult train_phase2(EncoderParams student, const Eigen::MatrixXd& teacher_embeddings,
                         std::span<const DistillText> texts, std::span<const TokenSeq> tokens,
                         const TrainConfig& cfg) {
  cfg.validate();
  if (texts.empty()) throw DataError("train_phase2: empty text set");
  if (texts.size() != tokens.size() ||
      static_cast<std::size_t>(teacher_embeddings.rows()) != texts.size()) {
    throw DataError("train_phase2: texts, tokens and teacher rows differ in count");
  }
  if (teacher_embeddings.cols() != student.config.dim) {
    throw DataError("train_phase2: teacher embedding width " +
                    std::to_string(teacher_embeddings.cols()) + " differs from student dim " +
                    std::to_string(student.config.dim));
  }
  TrainResult out;
  Optimizer opt(cfg, student);
  const auto order = curriculum_order(texts);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
      const auto idx = std::span(order).subspan(at, std::min(cfg.batch_size, order.size() - at));
      const auto seqs = gather(tokens, idx);
      Eigen::MatrixXd t(idx.size(), teacher_embeddings.cols());
      for (std::size_t r = 0; r < idx.size(); ++r) t.row(r) = teacher_embeddings.row(idx[r]);

      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      GradientSet grads = GradientSet::zeros_like(student);
      try {
        const auto v =
            distill_objective(student, seqs, t, cfg.loss, LossTerm::kDistillTotal, &grads);
        rec.loss = v.loss;
        rec.report = v.report;
        if (!std::isfinite(rec.loss)) throw NumericError("non-finite loss");
        apply_update(student, grads, opt, cfg, rec);
      } catch (const Error& e) {
        rethrow_with_prefix(e, "step " + std::to_string(step) + ": ");
      }
      out.log.steps.push_back(std::move(rec));
      ++step;
      maybe_checkpoint(cfg, student, step, out.log);
    }
  }
  out.params = std::move(student);
  return out;
}

}  // namespace trimodal
