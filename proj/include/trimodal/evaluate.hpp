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
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "trimodal/dataset.hpp"
#include "trimodal/encoder.hpp"
#include "trimodal/metrics.hpp"
#include "trimodal/objective.hpp"
#include "trimodal/scoring.hpp"

namespace trimodal {

struct StratumMetrics {
  std::size_t count = 0;
  double recall_at_1 = 0.0;
  double recall_at_3 = 0.0;
  double recall_at_5 = 0.0;
  double mrr = 0.0;
};

struct MetricsReport {
  Modality modality = Modality::kEnsemble;
  std::size_t count = 0;
  /// Identical to recall_at_1.
  double accuracy = 0.0;
  /// Sample SD of the per-query top-1 indicator.
  double std_dev = 0.0;
  double recall_at_1 = 0.0;
  double recall_at_3 = 0.0;
  double recall_at_5 = 0.0;
  double mrr = 0.0;
  /// 95% intervals; absent with fewer than two queries.
  std::optional<Interval> ci_recall_at_1, ci_recall_at_3, ci_recall_at_5, ci_mrr;
  std::map<std::string, StratumMetrics> strata;
  std::vector<int> ranks;

  nlohmann::ordered_json to_json() const;
  std::string to_table() const;
};

/// Aggregates ranks; `strata` is empty or parallel to `ranks`.
MetricsReport metrics_from_ranks(std::vector<int> ranks, std::span<const std::string> strata = {},
                                 Modality modality = Modality::kEnsemble);

struct QueryScores {
  std::array<ScoreBreakdown, kCandidates> candidates;
  int rank = 0;
};

struct EvalOptions {
  Modality modality = Modality::kEnsemble;
  EnsembleWeights weights;
};

/// Ranks every triplet's positive among its six candidates. `scores`, when
/// given, receives the raw per-candidate scores of every query.
MetricsReport evaluate(const EncoderParams& params, std::span<const TokenizedTriplet> testset,
                       std::span<const std::string> strata, const EvalOptions& options,
                       std::vector<QueryScores>* scores = nullptr);

/// Writes one JSONL record per misranked query with an empty "label" field
/// for manual error annotation.
void export_misranked(const std::filesystem::path& path, std::span<const TripletExample> testset,
                      std::span<const QueryScores> scores, Modality modality);

/// Per-modality mean over triplets of KL(ensemble || modality) at temperature
/// tau, and their lambda-weighted combination as aggregated by the
/// self-distillation loss. Each KL is that loss term minus the entropy of its
/// target, so `weighted` is the self-distillation loss minus its lower bound.
struct SelfDistillGap {
  double dense = 0.0;
  double sparse = 0.0;
  double colbert = 0.0;
  double weighted = 0.0;
};

SelfDistillGap self_distill_gaps(const EncoderParams& params,
                                 std::span<const TokenizedTriplet> triplets, const LossConfig& cfg,
                                 const EnsembleWeights& weights);

/// self_distill_gaps(...).weighted
double self_distill_gap(const EncoderParams& params, std::span<const TokenizedTriplet> triplets,
                        const LossConfig& cfg, const EnsembleWeights& weights);

/// Mean cosine similarity between student and teacher dense embeddings.
double mean_embedding_cosine(const EncoderParams& student, const EncoderParams& teacher,
                             std::span<const TokenSeq> texts);

}  // namespace trimodal
