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
#include "trimodal/losses.hpp"

#include <json.hpp>

namespace trimodal {

void LossConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw UsageError("temperature must be > 0");
  }
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) {
    throw UsageError("label_smoothing must lie in [0, 1)");
  }
  for (double v : {lambda_dense, lambda_sparse, lambda_colbert, alpha_cosine, alpha_mse, alpha_sim}) {
    if (!std::isfinite(v) || v < 0.0) throw UsageError("loss weights must be finite and >= 0");
  }
}

CandidateVector CandidateScores::as_vector() const {
  CandidateVector v;
  v(0) = positive;
  for (int i = 0; i < kNegatives; ++i) v(i + 1) = negatives[static_cast<std::size_t>(i)];
  return v;
}

CandidateVector smoothed_target(double epsilon) {
  CandidateVector t = CandidateVector::Constant(epsilon / kCandidates);
  t(0) += 1.0 - epsilon;
  return t;
}

double info_nce(const CandidateScores& c, const LossConfig& cfg) {
  return info_nce(c.as_vector(), cfg);
}

double info_nce(const CandidateVector& scores, const LossConfig& cfg, CandidateVector* grad) {
  const CandidateVector target = smoothed_target(cfg.label_smoothing);
  const Eigen::VectorXd logp = log_softmax(scores, cfg.temperature);
  if (grad) {
    // sum(target) == 1, so d/ds = (p - t) / tau.
    *grad = (logp.array().exp().matrix() - target) / cfg.temperature;
  }
  return -target.dot(logp);
}

double primary_loss(double dense, double sparse, double colbert, double ensemble,
                    const LossConfig& cfg) {
  return (cfg.lambda_dense * dense + cfg.lambda_sparse * sparse + cfg.lambda_colbert * colbert +
          ensemble) /
         4.0;
}

namespace {

std::array<double, 3> lambdas(const LossConfig& cfg) {
  return {cfg.lambda_dense, cfg.lambda_sparse, cfg.lambda_colbert};
}

}  // namespace

SelfDistillResult self_distill_loss(const CandidateVector& ensemble_dist,
                                    const std::array<CandidateVector, 3>& modality_dists,
                                    const LossConfig& cfg) {
  SelfDistillResult r;
  const auto lam = lambdas(cfg);
  for (std::size_t m = 0; m < 3; ++m) {
    double ce = 0.0;
    for (int i = 0; i < kCandidates; ++i) {
      const double p = modality_dists[m](i);
      if (p < kProbabilityFloor && ensemble_dist(i) > 0.0) r.floor_hit = true;
      ce -= ensemble_dist(i) * std::log(std::max(p, kProbabilityFloor));
    }
    r.per_modality[m] = ce;
    r.value += lam[m] * ce;
  }
  r.value /= 3.0;
  return r;
}

SelfDistillResult self_distill_from_scores(const CandidateVector& ensemble_scores,
                                           const std::array<CandidateVector, 3>& modality_scores,
                                           const LossConfig& cfg,
                                           std::array<CandidateVector, 3>* grads) {
  return self_distill_against(softmax_dist(ensemble_scores, cfg.temperature), modality_scores,
                              cfg, grads);
}

SelfDistillResult self_distill_against(const CandidateVector& target,
                                       const std::array<CandidateVector, 3>& modality_scores,
                                       const LossConfig& cfg,
                                       std::array<CandidateVector, 3>* grads) {
  SelfDistillResult r;
  const auto lam = lambdas(cfg);
  const double tau = cfg.temperature;
  const double log_floor = std::log(kProbabilityFloor);
  for (std::size_t m = 0; m < 3; ++m) {
    const CandidateVector logp = log_softmax(modality_scores[m], tau);
    const CandidateVector p = logp.array().exp();
    double ce = 0.0;
    // Floored terms are constant, so only unfloored entries carry gradient.
    double active_mass = 0.0;
    CandidateVector active_target = CandidateVector::Zero();
    for (int i = 0; i < kCandidates; ++i) {
      if (logp(i) < log_floor) {
        if (target(i) > 0.0) r.floor_hit = true;
        ce -= target(i) * log_floor;
      } else {
        ce -= target(i) * logp(i);
        active_mass += target(i);
        active_target(i) = target(i);
      }
    }
    r.per_modality[m] = ce;
    r.value += lam[m] * ce;
    if (grads) {
      (*grads)[m] = (lam[m] / 3.0) * (active_mass * p - active_target) / tau;
    }
  }
  r.value /= 3.0;
  return r;
}

double final_loss(double primary, double distill) { return (primary + distill) / 2.0; }

Eigen::VectorXd cosine_embed_loss_grad(const Eigen::VectorXd& student, const Eigen::VectorXd& teacher) {
  const double ns = student.norm();
  const double nt = teacher.norm();
  if (ns == 0 || nt == 0) throw DataError("cosine_embed_loss: zero vector");
  const double cos = student.dot(teacher) / (ns * nt);
  return -(teacher / (ns * nt) - cos * student / (ns * ns));
}

Eigen::MatrixXd similarity_matrix_loss_grad(const Eigen::MatrixXd& es, const Eigen::MatrixXd& et) {
  const Eigen::MatrixXd diff = es * es.transpose() - et * et.transpose();
  const double b = static_cast<double>(es.rows());
  return (4.0 / (b * b)) * diff * es;
}

double distill_total(double cosine, double mse, double sim, const LossConfig& cfg) {
  return cfg.alpha_cosine * cosine + cfg.alpha_mse * mse + cfg.alpha_sim * sim;
}

namespace {

using Field = double LossReport::*;
constexpr std::pair<const char*, Field> kReportFields[] = {
    {"info_nce_dense", &LossReport::info_nce_dense},
    {"info_nce_sparse", &LossReport::info_nce_sparse},
    {"info_nce_colbert", &LossReport::info_nce_colbert},
    {"info_nce_ensemble", &LossReport::info_nce_ensemble},
    {"primary", &LossReport::primary},
    {"self_distill_dense", &LossReport::self_distill_dense},
    {"self_distill_sparse", &LossReport::self_distill_sparse},
    {"self_distill_colbert", &LossReport::self_distill_colbert},
    {"self_distill", &LossReport::self_distill},
    {"final", &LossReport::final},
    {"cosine", &LossReport::cosine},
    {"mse", &LossReport::mse},
    {"sim", &LossReport::sim},
    {"distill_total", &LossReport::distill_total},
};

}  // namespace

LossReport& LossReport::operator+=(const LossReport& other) {
  for (const auto& [name, field] : kReportFields) this->*field += other.*field;
  probability_floor_hit = probability_floor_hit || other.probability_floor_hit;
  return *this;
}

LossReport& LossReport::operator*=(double factor) {
  for (const auto& [name, field] : kReportFields) this->*field *= factor;
  return *this;
}

bool LossReport::all_finite() const {
  for (const auto& [name, field] : kReportFields) {
    if (!std::isfinite(this->*field)) return false;
  }
  return true;
}

std::string LossReport::to_json() const {
  nlohmann::ordered_json j;
  for (const auto& [name, field] : kReportFields) j[name] = this->*field;
  j["probability_floor_hit"] = probability_floor_hit;
  return j.dump();
}

}  // namespace trimodal
