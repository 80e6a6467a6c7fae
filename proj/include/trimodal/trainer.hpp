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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trimodal/dataset.hpp"
#include "trimodal/encoder.hpp"
#include "trimodal/losses.hpp"
#include "trimodal/objective.hpp"
#include "trimodal/scoring.hpp"

namespace trimodal {

enum class OptimizerKind { kSgd, kAdam };

const char* optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct TrainConfig {
  double lr_max = 2e-5;
  double lr_min = 0.0;
  /// First cosine cycle length T0, in optimizer steps.
  std::size_t cycle_length = 1000;
  /// Each cycle is this many times longer than the previous one.
  double cycle_multiplier = 1.0;
  /// Linear ramp over the first steps, scaling the cosine schedule; 0 disables.
  std::size_t warmup_steps = 0;
  double clip = 1.0;
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::size_t length_buckets = 8;
  /// Sub-batches summed into one update; 1 disables accumulation.
  std::size_t accumulation_steps = 1;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  /// Heavy-ball momentum for kSgd.
  double momentum = 0.0;
  /// Decoupled decay: every step scales parameters by (1 - lr * weight_decay).
  double weight_decay = 0.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  /// Validation every this many epochs (0 disables).
  std::size_t eval_every_epochs = 1;
  /// Stop after this many validations without a lower validation loss.
  std::size_t patience = 5;
  std::size_t checkpoint_every = 0;
  std::filesystem::path checkpoint_dir;
  /// Finite-difference spot check of the training loss every this many steps
  /// (0 disables). Meant for tiny encoders only.
  std::size_t grad_check_every = 0;
  double grad_check_tolerance = 1e-4;
  LossConfig loss;
  EnsembleWeights weights;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double clipped_norm = 0.0;
  LossReport report;
  std::optional<double> grad_check_error;
};

struct ValidationRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double recall_at_1 = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<ValidationRecord> validations;
  /// (step, path) of every checkpoint written.
  std::vector<std::pair<std::size_t, std::string>> checkpoints;
  std::optional<std::size_t> best_step;
  bool stopped_early = false;

  /// One JSON object per line, ordered by step.
  std::string to_jsonl() const;
};

double lr_schedule(std::size_t step, const TrainConfig& cfg);

GradientSet clip_gradients(GradientSet g, double threshold);

/// Batches of indices into `lengths`: sorted into `buckets` length groups,
/// shuffled within each group, cut into batches of `batch_size`, then the
/// batch order is shuffled.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> lengths,
                                                   std::size_t batch_size, std::size_t buckets,
                                                   std::uint64_t seed);

/// Stable ascending sort by complexity; definitions precede KG statements of
/// equal complexity. Returns the permutation.
std::vector<std::size_t> curriculum_order(std::span<const DistillText> texts);

struct TrainResult {
  EncoderParams params;
  TrainLog log;
};

struct ValidationSet {
  std::span<const TokenizedTriplet> triplets;
};

TrainResult train_phase1(EncoderParams params, std::span<const TokenizedTriplet> triplets,
                         const TrainConfig& cfg, std::optional<ValidationSet> validation = {});

/// Teacher targets are the frozen teacher's dense embeddings, one row per text.
TrainResult train_phase2(EncoderParams student, const EncoderParams& teacher,
                         std::span<const DistillText> texts, std::span<const TokenSeq> tokens,
                         const TrainConfig& cfg);
TrainResult train_phase2(EncoderParams student, const Eigen::MatrixXd& teacher_embeddings,
                         std::span<const DistillText> texts, std::span<const TokenSeq> tokens,
                         const TrainConfig& cfg);

/// Mean of the combined distillation loss over curriculum-ordered batches.
double distill_corpus_loss(const EncoderParams& student, const Eigen::MatrixXd& teacher_embeddings,
                           std::span<const DistillText> texts, std::span<const TokenSeq> tokens,
                           const TrainConfig& cfg);

/// Mean final loss over the set, evaluated in one pass without gradients.
double triplet_corpus_loss(const EncoderParams& params, std::span<const TokenizedTriplet> triplets,
                           const TrainConfig& cfg);

}  // namespace trimodal
