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
#include <set>

#include "stats_reference.hpp"
#include "support.hpp"
#include "trimodal/metrics.hpp"

using namespace trimodal;
namespace ts = testing::stats;

namespace {

std::vector<ScoreBreakdown> dense_only(std::initializer_list<double> s) {
  std::vector<ScoreBreakdown> out;
  for (double v : s) out.push_back(ScoreBreakdown{v, 0, 0, v});
  return out;
}

}  // namespace

TEST_CASE("rank of the positive with pessimistic ties") {
  CHECK(rank_positive(dense_only({0.9, 0.1, 0.2, 0.3, 0.4, 0.5}), Modality::kDense) == 1);
  CHECK(rank_positive(dense_only({0.5, 0.5, 0.2, 0.3, 0.4, 0.1}), Modality::kDense) == 2);
  CHECK(rank_positive(dense_only({0.0, 0.1, 0.2, 0.3, 0.4, 0.5}), Modality::kDense) == 6);
  CHECK(rank_positive(dense_only({0.3, 0.3, 0.3, 0.3, 0.3, 0.3}), Modality::kEnsemble) == 6);
  CHECK_THROWS_AS(rank_positive(dense_only({0.1, 0.2}), Modality::kDense), DataError);
  CandidateVector v;
  v << 0.2, 0.1, 0.3, 0.2, 0.0, -1.0;
  CHECK(rank_positive(v) == 3);
}

TEST_CASE("recall and mrr examples") {
  const std::vector<int> r{1, 3, 5};
  CHECK(recall_at_k(r, 3) == doctest::Approx(2.0 / 3.0));
  const std::vector<int> ones(7, 1);
  for (int k = 1; k <= 6; ++k) CHECK(recall_at_k(ones, k) == 1.0);
  const std::vector<int> all{1, 2, 3, 4, 5, 6, 6};
  CHECK(recall_at_k(all, 6) == 1.0);
  const std::vector<int> m{1, 2, 4};
  CHECK(mrr(m) == doctest::Approx(0.583333).epsilon(1e-6));
  CHECK(mrr(ones) == 1.0);
  const std::vector<int> six{6};
  CHECK(mrr(six) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS_AS(recall_at_k(std::span<const int>{}, 1), DataError);
  CHECK_THROWS_AS(recall_at_k(r, 0), UsageError);
  CHECK_THROWS_AS(mrr(std::span<const int>{}), DataError);
}

TEST_CASE("recall and mrr match direct counting on a fixed rank list") {
  for (int k = 1; k <= 6; ++k) {
    CHECK(std::abs(recall_at_k(ts::kRanks25, k) - ts::recall(ts::kRanks25, k)) <= 1e-9);
  }
  CHECK(std::abs(mrr(ts::kRanks25) - ts::reciprocal_mean(ts::kRanks25)) <= 1e-9);
}

TEST_CASE("recall is monotone in k and mrr is bracketed") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> ranks;
    const std::size_t n = 1 + rng.below(30);
    for (std::size_t i = 0; i < n; ++i) ranks.push_back(1 + static_cast<int>(rng.below(6)));
    for (int k = 1; k < 6; ++k) CHECK(recall_at_k(ranks, k) <= recall_at_k(ranks, k + 1));
    CHECK(mrr(ranks) >= recall_at_k(ranks, 1));
    CHECK(mrr(ranks) <= 1.0);
  }
}

TEST_CASE("paired t-test against reference values") {
  const auto a = ts::plus(ts::kSignsBase, ts::kSigns);
  const auto t1 = paired_t_test(a, ts::kSignsBase);
  CHECK(std::abs(t1.t - ts::kSignsT) <= 1e-6);
  CHECK(std::abs(t1.t - ts::paired_t(a, ts::kSignsBase)) <= 1e-9);
  CHECK(std::abs(t1.p - ts::kSignsP) <= 1e-6);
  CHECK(t1.df == 19);
  const auto t2 = paired_t_test(ts::kPairedA, ts::kPairedB);
  CHECK(std::abs(t2.t - ts::kPairedT) <= 1e-6);
  CHECK(std::abs(t2.p - ts::kPairedP) <= 1e-6);
  const auto swapped = paired_t_test(ts::kPairedB, ts::kPairedA);
  CHECK(swapped.t == doctest::Approx(-t2.t));
  CHECK(swapped.p == doctest::Approx(t2.p));

  const auto same = paired_t_test(ts::kPairedA, ts::kPairedA);
  CHECK(same.p == 1.0);
  CHECK(same.t == 0.0);
  CHECK_THROWS_AS(paired_t_test(ts::kPairedA, ts::kSignsBase), DataError);
  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(paired_t_test(one, one), DataError);
}

TEST_CASE("bonferroni correction") {
  CHECK(bonferroni(0.03, 5) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(bonferroni(0.4, 3) == 1.0);
  CHECK_THROWS_AS(bonferroni(0.1, 0), UsageError);
}

TEST_CASE("cohens d") {
  const std::vector<double> a{0, 2}, b{-1, 1};
  CHECK(cohens_d(std::vector<double>{1.0, 0.0, 2.0}, std::vector<double>{0.0, -1.0, 1.0}) ==
        doctest::Approx(1.0));
  CHECK(cohens_d(ts::kGroupX, ts::kGroupX) == 0.0);
  CHECK(std::abs(cohens_d(ts::kGroupX, ts::kGroupY) - ts::kCohensD) <= 1e-6);
  CHECK(std::abs(cohens_d(ts::kGroupX, ts::kGroupY) - ts::cohens_d(ts::kGroupX, ts::kGroupY)) <= 1e-9);
  const std::vector<double> flat{2, 2, 2};
  CHECK_THROWS_AS(cohens_d(flat, flat), NumericError);
  CHECK_THROWS_AS(cohens_d(std::vector<double>{1.0}, a), DataError);
  CHECK(cohens_d(a, b) == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("student t confidence intervals") {
  const std::vector<double> flat{0.4, 0.4, 0.4, 0.4};
  const auto z = confidence_interval(flat);
  CHECK(z.lo == doctest::Approx(0.4));
  CHECK(z.hi == doctest::Approx(0.4));
  const auto ci = confidence_interval(ts::kSample30);
  const double m = ts::mean(ts::kSample30);
  CHECK(m - ci.lo == doctest::Approx(ci.hi - m).epsilon(1e-12));
  CHECK(std::abs(ci.lo - ts::kCi95Lo) <= 1e-6);
  CHECK(std::abs(ci.hi - ts::kCi95Hi) <= 1e-6);
  const double half = ts::kT975Df29 * std::sqrt(ts::variance(ts::kSample30) / 30.0);
  CHECK(std::abs(ci.hi - (m + half)) <= 1e-9);
  const auto ci90 = confidence_interval(ts::kSample30, 0.9);
  CHECK(std::abs(ci90.lo - ts::kCi90Lo) <= 1e-6);
  CHECK(std::abs(ci90.hi - ts::kCi90Hi) <= 1e-6);
  CHECK_THROWS_AS(confidence_interval(std::vector<double>{1.0}), DataError);
  CHECK_THROWS_AS(confidence_interval(std::vector<double>{}), DataError);
}

TEST_CASE("k-fold examples") {
  const std::vector<std::string> one(10, "s");
  const auto f = kfold_split(one, 5, 3);
  REQUIRE(f.folds.size() == 5);
  for (const auto& fold : f.folds) CHECK(fold.size() == 2);
  CHECK_FALSE(f.degraded());

  std::vector<std::string> two;
  for (int i = 0; i < 5; ++i) two.push_back("a");
  for (int i = 0; i < 5; ++i) two.push_back("b");
  const auto g = kfold_split(two, 5, 8);
  for (const auto& fold : g.folds) {
    REQUIRE(fold.size() == 2);
    std::multiset<std::string> labels{two[fold[0]], two[fold[1]]};
    CHECK(labels.count("a") == 1);
    CHECK(labels.count("b") == 1);
  }
  CHECK_THROWS_AS(kfold_split(one, 11, 0), DataError);
  CHECK_THROWS_AS(kfold_split(one, 1, 0), UsageError);
}

TEST_CASE("k-fold partitions, balances strata and is seeded") {
  Rng rng(44);
  std::vector<std::string> strata;
  for (int i = 0; i < 97; ++i) strata.push_back("s" + std::to_string(rng.below(6)));
  strata.push_back("rare");
  const auto f = kfold_split(strata, 5, 1);
  CHECK(f.degraded());
  CHECK(std::find(f.small_strata.begin(), f.small_strata.end(), "rare") != f.small_strata.end());
  std::vector<std::size_t> all;
  for (const auto& fold : f.folds) all.insert(all.end(), fold.begin(), fold.end());
  std::sort(all.begin(), all.end());
  REQUIRE(all.size() == strata.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  std::map<std::string, std::vector<int>> counts;
  for (std::size_t k = 0; k < f.folds.size(); ++k) {
    for (auto i : f.folds[k]) {
      auto& c = counts[strata[i]];
      c.resize(5);
      ++c[k];
    }
  }
  for (const auto& [label, c] : counts) {
    CHECK(*std::max_element(c.begin(), c.end()) - *std::min_element(c.begin(), c.end()) <= 1);
  }
  CHECK(kfold_split(strata, 5, 1).folds == f.folds);
  CHECK(kfold_split(strata, 5, 2).folds != f.folds);
}

TEST_CASE("descriptive helpers") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(mean(v) == 2.5);
  CHECK(sample_sd(v) == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK_THROWS_AS(mean(std::vector<double>{}), DataError);
}
