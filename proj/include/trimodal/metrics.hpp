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
#include <span>
#include <string>
#include <vector>

#include "trimodal/losses.hpp"
#include "trimodal/scoring.hpp"

namespace trimodal {

/// 1 + number of negatives scoring at least as high as the positive
/// (candidate 0). Ties count against the positive.
int rank_positive(std::span<const ScoreBreakdown> candidates, Modality modality);
int rank_positive(const CandidateVector& scores);

double recall_at_k(std::span<const int> ranks, int k);
double mrr(std::span<const int> ranks);

double mean(std::span<const double> values);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double sample_sd(std::span<const double> values);

struct TTest {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

/// Two-sided paired t-test. All-zero differences give t = 0, p = 1.
TTest paired_t_test(std::span<const double> a, std::span<const double> b);
double bonferroni(double p, std::size_t comparisons);

/// (mean(a) - mean(b)) / pooled SD.
double cohens_d(std::span<const double> a, std::span<const double> b);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// mean +- t_{(1+level)/2, n-1} * SE.
Interval confidence_interval(std::span<const double> values, double level = 0.95);

struct FoldSplit {
  std::vector<std::vector<std::size_t>> folds;
  /// Strata with fewer than k members, which cannot reach every fold.
  std::vector<std::string> small_strata;
  bool degraded() const { return !small_strata.empty(); }
};

/// Stratified k-fold partition of indices [0, strata.size()).
FoldSplit kfold_split(std::span<const std::string> strata, std::size_t k, std::uint64_t seed);

}  // namespace trimodal
