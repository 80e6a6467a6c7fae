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
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "trimodal/error.hpp"
#include "trimodal/scoring.hpp"

namespace trimodal {

inline constexpr int kNegatives = 5;
inline constexpr int kCandidates = kNegatives + 1;

/// Smallest probability admitted inside a logarithm.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossConfig {
  double temperature = 0.05;
  double label_smoothing = 0.1;
  double lambda_dense = 1.0;
  double lambda_sparse = 0.1;
  double lambda_colbert = 1.0;
  double alpha_cosine = 1.0;
  double alpha_mse = 1.0;
  double alpha_sim = 1.0;

  void validate() const;
};

/// Positive first, then the five negatives.
using CandidateVector = Eigen::Matrix<double, kCandidates, 1>;

struct CandidateScores {
  double positive = 0.0;
  std::array<double, kNegatives> negatives{};
  Modality modality = Modality::kDense;

  CandidateVector as_vector() const;
};

/// exp(s_i / tau) / sum_j exp(s_j / tau), evaluated after subtracting the max.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax_dist(
    const Eigen::MatrixBase<Derived>& scores, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = scores.reshaped() / tau;
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::MatrixBase<Derived>& scores, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = scores.reshaped() / tau;
  const Scalar m = z.maxCoeff();
  const Scalar lse = m + std::log((z.array() - m).exp().sum());
  return z.array() - lse;
}

/// Smoothed one-hot target over six candidates, positive first.
CandidateVector smoothed_target(double epsilon);

/// Cross-entropy between the smoothed target and softmax(scores / tau).
/// With zero smoothing this is -log p(positive).
double info_nce(const CandidateScores& c, const LossConfig& cfg);

/// Same loss from a raw score vector (positive first); writes
/// d(loss)/d(scores) when `grad` is non-null.
double info_nce(const CandidateVector& scores, const LossConfig& cfg,
                CandidateVector* grad = nullptr);

/// (l1 L_dense + l2 L_sparse + l3 L_colbert + L_ensemble) / 4.
double primary_loss(double dense, double sparse, double colbert, double ensemble,
                    const LossConfig& cfg);

struct SelfDistillResult {
  double value = 0.0;
  std::array<double, 3> per_modality{};  // dense, sparse, colbert
  bool floor_hit = false;
};

/// Cross-entropy of each modality distribution against the ensemble
/// distribution, weighted by lambda and averaged over the three modalities.
/// Log terms are floored at log(1e-12); `floor_hit` reports when that
/// happened for a positive target entry.
SelfDistillResult self_distill_loss(const CandidateVector& ensemble_dist,
                                    const std::array<CandidateVector, 3>& modality_dists,
                                    const LossConfig& cfg);

/// Score-level form used in training. The ensemble distribution is a
/// constant target; `grads` receives d(loss)/d(modality scores).
SelfDistillResult self_distill_from_scores(const CandidateVector& ensemble_scores,
                                           const std::array<CandidateVector, 3>& modality_scores,
                                           const LossConfig& cfg,
                                           std::array<CandidateVector, 3>* grads = nullptr);

/// As above with the target distribution given directly.
SelfDistillResult self_distill_against(const CandidateVector& target,
                                       const std::array<CandidateVector, 3>& modality_scores,
                                       const LossConfig& cfg,
                                       std::array<CandidateVector, 3>* grads = nullptr);

double final_loss(double primary, double distill);

/// 1 - cos(student, teacher). Throws DataError on zero vectors or
/// mismatched dimensions.
template <class DerivedS, class DerivedT>
typename DerivedS::Scalar cosine_embed_loss(const Eigen::MatrixBase<DerivedS>& student,
                                            const Eigen::MatrixBase<DerivedT>& teacher) {
  if (student.size() != teacher.size()) throw DataError("cosine_embed_loss: dimension mismatch");
  const auto ns = student.norm();
  const auto nt = teacher.norm();
  if (ns == 0 || nt == 0) throw DataError("cosine_embed_loss: zero vector");
  return 1 - student.reshaped().dot(teacher.reshaped()) / (ns * nt);
}

/// Gradient of cosine_embed_loss with respect to the student vector.
Eigen::VectorXd cosine_embed_loss_grad(const Eigen::VectorXd& student,
                                       const Eigen::VectorXd& teacher);

/// Squared L2 norm of student - teacher.
template <class DerivedS, class DerivedT>
typename DerivedS::Scalar mse_embed_loss(const Eigen::MatrixBase<DerivedS>& student,
                                         const Eigen::MatrixBase<DerivedT>& teacher) {
  if (student.size() != teacher.size()) throw DataError("mse_embed_loss: dimension mismatch");
  return (student.reshaped() - teacher.reshaped()).squaredNorm();
}

/// ||Es Es^T - Et Et^T||_F^2 / B^2 for B x d row-embedding matrices.
template <class DerivedS, class DerivedT>
typename DerivedS::Scalar similarity_matrix_loss(const Eigen::MatrixBase<DerivedS>& es,
                                                 const Eigen::MatrixBase<DerivedT>& et) {
  if (es.rows() != et.rows() || es.cols() != et.cols()) {
    throw DataError("similarity_matrix_loss: shape mismatch");
  }
  if (es.rows() < 1) throw DataError("similarity_matrix_loss: empty batch");
  using Scalar = typename DerivedS::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> diff =
      es * es.transpose() - et * et.transpose();
  const auto b = static_cast<Scalar>(es.rows());
  return diff.squaredNorm() / (b * b);
}

/// d/dEs of similarity_matrix_loss: (4 / B^2) (Es Es^T - Et Et^T) Es.
Eigen::MatrixXd similarity_matrix_loss_grad(const Eigen::MatrixXd& es, const Eigen::MatrixXd& et);

/// a1 L_cos + a2 L_mse + a3 L_sim.
double distill_total(double cosine, double mse, double sim, const LossConfig& cfg);

/// Per-step loss values. Phase-1 fields stay zero during phase 2 and the
/// reverse.
struct LossReport {
  double info_nce_dense = 0.0;
  double info_nce_sparse = 0.0;
  double info_nce_colbert = 0.0;
  double info_nce_ensemble = 0.0;
  double primary = 0.0;
  double self_distill_dense = 0.0;
  double self_distill_sparse = 0.0;
  double self_distill_colbert = 0.0;
  double self_distill = 0.0;
  double final = 0.0;
  double cosine = 0.0;
  double mse = 0.0;
  double sim = 0.0;
  double distill_total = 0.0;
  bool probability_floor_hit = false;

  LossReport& operator+=(const LossReport& other);
  LossReport& operator*=(double factor);
  bool all_finite() const;

  /// Single-line JSON object.
  std::string to_json() const;
};

}  // namespace trimodal
