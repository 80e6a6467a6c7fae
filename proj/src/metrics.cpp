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
#include "trimodal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/distributions/students_t.hpp>

#include "trimodal/error.hpp"
#include "trimodal/random.hpp"

namespace trimodal {

int rank_positive(std::span<const ScoreBreakdown> candidates, Modality modality) {
  if (candidates.size() != static_cast<std::size_t>(kCandidates)) {
    throw DataError("rank_positive: expected " + std::to_string(kCandidates) + " candidates");
  }
  CandidateVector v;
  for (int i = 0; i < kCandidates; ++i) v[i] = candidates[i].select(modality);
  return rank_positive(v);
}

int rank_positive(const CandidateVector& scores) {
  int rank = 1;
  for (int i = 1; i < kCandidates; ++i) {
    if (scores[i] >= scores[0]) ++rank;
  }
  return rank;
}

double recall_at_k(std::span<const int> ranks, int k) {
  if (k < 1) throw UsageError("recall_at_k: k must be >= 1");
  if (ranks.empty()) throw DataError("recall_at_k: empty rank list");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](int r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr(std::span<const int> ranks) {
  if (ranks.empty()) throw DataError("mrr: empty rank list");
  double s = 0.0;
  for (int r : ranks) s += 1.0 / r;
  return s / static_cast<double>(ranks.size());
}

double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean: empty input");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

TTest paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired_t_test: length mismatch");
  if (a.size() < 2) throw DataError("paired_t_test: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TTest r;
  r.df = static_cast<double>(d.size() - 1);
  const double m = mean(d);
  const double sd = sample_sd(d);
  if (sd == 0.0) {
    if (m == 0.0) return r;
    r.t = m > 0 ? INFINITY : -INFINITY;
    r.p = 0.0;
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(d.size())));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(r.t)));
  return r;
}

double bonferroni(double p, std::size_t comparisons) {
  if (comparisons == 0) throw UsageError("bonferroni: comparisons must be >= 1");
  return std::min(1.0, p * static_cast<double>(comparisons));
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("cohens_d: need at least 2 values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double va = std::pow(sample_sd(a), 2);
  const double vb = std::pow(sample_sd(b), 2);
  const double pooled = std::sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2));
  if (pooled == 0.0) throw NumericError("cohens_d: pooled standard deviation is zero");
  return (mean(a) - mean(b)) / pooled;
}

Interval confidence_interval(std::span<const double> values, double level) {
  if (values.size() < 2) throw DataError("confidence_interval: need at least 2 values");
  if (!(level > 0.0 && level < 1.0)) throw UsageError("confidence_interval: level in (0, 1)");
  const double m = mean(values);
  const double se = sample_sd(values) / std::sqrt(static_cast<double>(values.size()));
  boost::math::students_t dist(static_cast<double>(values.size() - 1));
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  return {m - q * se, m + q * se};
}

FoldSplit kfold_split(std::span<const std::string> strata, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw UsageError("kfold_split: k must be >= 2");
  if (k > strata.size()) {
    throw DataError("kfold_split: k = " + std::to_string(k) + " exceeds dataset size " +
                    std::to_string(strata.size()));
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);

  FoldSplit out;
  out.folds.resize(k);
  Rng rng(seed);
  std::size_t cursor = 0;
  for (auto& [label, members] : groups) {
    if (members.size() < k) out.small_strata.push_back(label);
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t idx : members) out.folds[cursor++ % k].push_back(idx);
  }
  for (auto& f : out.folds) std::sort(f.begin(), f.end());
  return out;
}

}  // namespace trimodal
