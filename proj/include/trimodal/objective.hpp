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

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trimodal/encoder.hpp"
#include "trimodal/losses.hpp"
#include "trimodal/scoring.hpp"
#include "trimodal/tokenizer.hpp"

namespace trimodal {

struct TokenizedTriplet {
  TokenSeq query;
  TokenSeq positive;
  std::array<TokenSeq, kNegatives> negatives;

  /// Token count of all seven texts; the length-bucketing key.
  std::size_t total_tokens() const;
};

/// Which scalar a backward pass differentiates. The first group is
/// evaluated on triplets, the second on distillation batches.
enum class LossTerm {
  kFinal,
  kPrimary,
  kSelfDistill,
  kInfoNceDense,
  kInfoNceSparse,
  kInfoNceColbert,
  kInfoNceEnsemble,
  kDistillTotal,
  kCosine,
  kMse,
  kSimilarity,
};

bool is_triplet_term(LossTerm term);
const char* loss_term_name(LossTerm term);

struct ObjectiveValue {
  /// The differentiated scalar.
  double loss = 0.0;
  LossReport report;
  /// Per-triplet ensemble distributions used as self-distillation targets.
  std::vector<CandidateVector> targets;
};

/// Sum over the batch of the selected per-triplet loss. `report` holds
/// per-component sums over the batch. When `grads` is non-null the exact
/// gradient of `loss` is accumulated into it, with the self-distillation
/// target treated as a constant.
///
/// `frozen_targets`, when non-empty, replaces the self-distillation targets
/// (one per triplet). Finite-difference checks pass the targets of the
/// unperturbed point so the numeric derivative matches the stop-gradient.
ObjectiveValue triplet_objective(const EncoderParams& params,
                                 std::span<const TokenizedTriplet> batch, const LossConfig& cfg,
                                 const EnsembleWeights& weights, LossTerm term,
                                 GradientSet* grads = nullptr,
                                 std::span<const CandidateVector> frozen_targets = {});

/// Teacher-distillation loss of one batch. Cosine and MSE terms are batch
/// means, the similarity term is taken over the batch Gram matrices.
/// `teacher` holds one teacher embedding per row, aligned with `texts`.
ObjectiveValue distill_objective(const EncoderParams& student, std::span<const TokenSeq> texts,
                                 const Eigen::MatrixXd& teacher, const LossConfig& cfg,
                                 LossTerm term, GradientSet* grads = nullptr);

/// Gradient of the selected triplet loss; throws NumericError for a
/// non-finite loss or a non-finite gradient tensor (named in the message).
GradientSet backward(const EncoderParams& params, std::span<const TokenizedTriplet> batch,
                     const LossConfig& cfg, const EnsembleWeights& weights,
                     LossTerm term = LossTerm::kFinal);

GradientSet backward(const EncoderParams& student, std::span<const TokenSeq> texts,
                     const Eigen::MatrixXd& teacher, const LossConfig& cfg,
                     LossTerm term = LossTerm::kDistillTotal);

/// Dense embeddings of `texts`, one per row.
Eigen::MatrixXd dense_embeddings(const EncoderParams& params, std::span<const TokenSeq> texts);

}  // namespace trimodal
