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

#include <cmath>
#include <vector>

// Fixed samples with reference statistics computed offline by an independent
// statistics package (two-sided paired t-test, pooled-SD Cohen's d, Student-t
// interval), plus textbook formulas for the parts that are closed form.
namespace testing::stats {

inline const std::vector<double> kSignsBase{0.3,  0.5,  0.1,  0.9,  0.7,  0.2,  0.4,
                                            0.6,  0.8,  0.05, 0.15, 0.25, 0.35, 0.45,
                                            0.55, 0.65, 0.75, 0.85, 0.95, 0.5};
inline const std::vector<double> kSigns{1, 1, 1, -1, 1, 1, -1, 1, 1, 1,
                                        1, -1, 1, 1, 1, -1, 1, 1, 1, 1};
inline constexpr double kSignsT = 3.2691742076555044;
inline constexpr double kSignsP = 0.0040359153816269663;

inline const std::vector<double> kPairedA{0.81, 0.92, 0.77, 0.88, 0.95, 0.69, 0.84, 0.91,
                                          0.73, 0.86, 0.79, 0.94, 0.83, 0.9,  0.76, 0.87,
                                          0.8,  0.93, 0.71, 0.85, 0.89, 0.82};
inline const std::vector<double> kPairedB{0.78, 0.85, 0.79, 0.8,  0.9,  0.7, 0.76, 0.88,
                                          0.7,  0.8,  0.81, 0.86, 0.79, 0.84, 0.72, 0.83,
                                          0.75, 0.9,  0.69, 0.8,  0.85, 0.8};
inline constexpr double kPairedT = 6.2493242877973643;
inline constexpr double kPairedP = 3.3732273945010312e-06;

inline const std::vector<double> kGroupX{2.1, 2.5, 1.9, 2.8, 3.0, 2.2, 2.6, 2.4, 2.9, 2.3};
inline const std::vector<double> kGroupY{1.2, 1.8, 1.5, 1.1, 2.0, 1.4, 1.6, 1.3, 1.9, 1.7};
inline constexpr double kCohensD = 2.7697110126609932;

inline const std::vector<double> kSample30{0.61, 0.72, 0.55, 0.68, 0.74, 0.59, 0.66, 0.7,
                                           0.63, 0.77, 0.58, 0.69, 0.71, 0.64, 0.6,  0.73,
                                           0.67, 0.62, 0.75, 0.65, 0.57, 0.7,  0.68, 0.66,
                                           0.72, 0.6,  0.69, 0.64, 0.71, 0.63};
inline constexpr double kCi95Lo = 0.64164717565502516;
inline constexpr double kCi95Hi = 0.68435282434497491;
inline constexpr double kCi90Lo = 0.6452605930454165;
inline constexpr double kCi90Hi = 0.68073940695458357;
inline constexpr double kT975Df29 = 2.045229642132703;

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) d.push_back(a[i] - b[i]);
  return mean(d) / std::sqrt(variance(d) / static_cast<double>(d.size()));
}

inline double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled =
      std::sqrt(((na - 1) * variance(a) + (nb - 1) * variance(b)) / (na + nb - 2));
  return (mean(a) - mean(b)) / pooled;
}

inline std::vector<double> plus(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> r;
  for (std::size_t i = 0; i < a.size(); ++i) r.push_back(a[i] + b[i]);
  return r;
}

// Recall@k and MRR computed by direct counting.
inline double recall(const std::vector<int>& ranks, int k) {
  int hits = 0;
  for (int r : ranks) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

inline double reciprocal_mean(const std::vector<int>& ranks) {
  double s = 0.0;
  for (int r : ranks) s += 1.0 / r;
  return s / static_cast<double>(ranks.size());
}

inline const std::vector<int> kRanks25{1, 2, 1, 1, 3, 6, 1, 2, 1, 4, 1, 1, 5,
                                       1, 2, 1, 1, 3, 1, 1, 2, 1, 6, 1, 1};

}  // namespace testing::stats
