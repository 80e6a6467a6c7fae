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
#include "trimodal/objective.hpp"

#include <cmath>

#include "trimodal/error.hpp"

namespace trimodal {

std::size_t TokenizedTriplet::total_tokens() const {
  std::size_t n = query.length() + positive.length();
  for (const auto& neg : negatives) n += neg.length();
  return n;
}

bool is_triplet_term(LossTerm term) {
  switch (term) {
    case LossTerm::kDistillTotal:
    case LossTerm::kCosine:
    case LossTerm::kMse:
    case LossTerm::kSimilarity:
      return false;
    default:
      return true;
  }
}

const char* loss_term_name(LossTerm term) {
  switch (term) {
    case LossTerm::kFinal: return "final";
    case LossTerm::kPrimary: return "primary";
    case LossTerm::kSelfDistill: return "self_distill";
    case LossTerm::kInfoNceDense: return "info_nce_dense";
    case LossTerm::kInfoNceSparse: return "info_nce_sparse";
    case LossTerm::kInfoNceColbert: return "info_nce_colbert";
    case LossTerm::kInfoNceEnsemble: return "info_nce_ensemble";
    case LossTerm::kDistillTotal: return "distill_total";
    case LossTerm::kCosine: return "cosine";
    case LossTerm::kMse: return "mse";
    case LossTerm::kSimilarity: return "sim";
  }
  return "?";
}

namespace {

// d(term)/d(each InfoNCE) and d(term)/d(self-distillation).
struct TermCoefficients {
  std::array<double, 4> info_nce{};  // dense, sparse, colbert, ensemble
  double self_distill = 0.0;
};

TermCoefficients coefficients(LossTerm term, const LossConfig& cfg) {
  TermCoefficients c;
  const std::array<double, 4> primary = {cfg.lambda_dense / 4.0, cfg.lambda_sparse / 4.0,
                                         cfg.lambda_colbert / 4.0, 0.25};
  switch (term) {
    case LossTerm::kFinal:
      for (std::size_t i = 0; i < 4; ++i) c.info_nce[i] = primary[i] / 2.0;
      c.self_distill = 0.5;
      break;
    case LossTerm::kPrimary: c.info_nce = primary; break;
    case LossTerm::kSelfDistill: c.self_distill = 1.0; break;
    case LossTerm::kInfoNceDense: c.info_nce[0] = 1.0; break;
    case LossTerm::kInfoNceSparse: c.info_nce[1] = 1.0; break;
    case LossTerm::kInfoNceColbert: c.info_nce[2] = 1.0; break;
    case LossTerm::kInfoNceEnsemble: c.info_nce[3] = 1.0; break;
    default: throw UsageError(std::string("loss term ") + loss_term_name(term) + " needs a distillation batch");
  }
  return c;
}

double select_term(LossTerm term, const LossReport& r) {
  switch (term) {
    case LossTerm::kFinal: return r.final;
    case LossTerm::kPrimary: return r.primary;
    case LossTerm::kSelfDistill: return r.self_distill;
    case LossTerm::kInfoNceDense: return r.info_nce_dense;
    case LossTerm::kInfoNceSparse: return r.info_nce_sparse;
    case LossTerm::kInfoNceColbert: return r.info_nce_colbert;
    case LossTerm::kInfoNceEnsemble: return r.info_nce_ensemble;
    case LossTerm::kDistillTotal: return r.distill_total;
    case LossTerm::kCosine: return r.cosine;
    case LossTerm::kMse: return r.mse;
    case LossTerm::kSimilarity: return r.sim;
  }
  return 0.0;
}

LossReport one_triplet(const EncoderParams& params, const TokenizedTriplet& triplet,
                       const LossConfig& cfg, const EnsembleWeights& w,
                       const TermCoefficients& coef, GradientSet* grads,
                       const CandidateVector* frozen_target, CandidateVector& target) {
  const bool need_grad = grads != nullptr;
  std::array<const TokenSeq*, kCandidates + 1> seqs{};
  seqs[0] = &triplet.query;
  seqs[1] = &triplet.positive;
  for (int i = 0; i < kNegatives; ++i) seqs[static_cast<std::size_t>(i + 2)] = &triplet.negatives[static_cast<std::size_t>(i)];

  std::array<MultiRepresentation, kCandidates + 1> reps;
  std::array<EncoderTape, kCandidates + 1> tapes;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    reps[i] = encode(params, *seqs[i], need_grad ? &tapes[i] : nullptr);
  }
  const MultiRepresentation& q = reps[0];

  CandidateVector dense, sparse, colbert, ensemble;
  for (int k = 0; k < kCandidates; ++k) {
    const auto& c = reps[static_cast<std::size_t>(k + 1)];
    dense(k) = dense_score(q, c);
    sparse(k) = sparse_score(q, c);
    colbert(k) = colbert_score(q, c);
    ensemble(k) = ensemble_score(dense(k), sparse(k), colbert(k), w);
  }

  std::array<CandidateVector, 4> nce_grad;
  LossReport r;
  r.info_nce_dense = info_nce(dense, cfg, &nce_grad[0]);
  r.info_nce_sparse = info_nce(sparse, cfg, &nce_grad[1]);
  r.info_nce_colbert = info_nce(colbert, cfg, &nce_grad[2]);
  r.info_nce_ensemble = info_nce(ensemble, cfg, &nce_grad[3]);
  r.primary = primary_loss(r.info_nce_dense, r.info_nce_sparse, r.info_nce_colbert,
                           r.info_nce_ensemble, cfg);
  std::array<CandidateVector, 3> sd_grad;
  if (frozen_target) {
    target = *frozen_target;
  } else {
    target = softmax_dist(ensemble, cfg.temperature);
  }
  const SelfDistillResult sd = self_distill_against(target, {dense, sparse, colbert}, cfg, &sd_grad);
  r.self_distill_dense = sd.per_modality[0];
  r.self_distill_sparse = sd.per_modality[1];
  r.self_distill_colbert = sd.per_modality[2];
  r.self_distill = sd.value;
  r.probability_floor_hit = sd.floor_hit;
  r.final = final_loss(r.primary, r.self_distill);

  if (!need_grad) return r;

  const CandidateVector d_ensemble = coef.info_nce[3] * nce_grad[3];
  const CandidateVector d_dense =
      coef.info_nce[0] * nce_grad[0] + coef.self_distill * sd_grad[0] + w.dense * d_ensemble;
  const CandidateVector d_sparse =
      coef.info_nce[1] * nce_grad[1] + coef.self_distill * sd_grad[1] + w.sparse * d_ensemble;
  const CandidateVector d_colbert =
      coef.info_nce[2] * nce_grad[2] + coef.self_distill * sd_grad[2] + w.colbert * d_ensemble;

  const int dim = params.config.dim;
  std::array<RepresentationGrad, kCandidates + 1> rep_grads;
  for (std::size_t i = 0; i < reps.size(); ++i) rep_grads[i] = RepresentationGrad::zeros(dim, reps[i].length());
  for (int k = 0; k < kCandidates; ++k) {
    const auto ck = static_cast<std::size_t>(k + 1);
    if (d_dense(k) != 0.0) dense_score_backward(q, reps[ck], d_dense(k), rep_grads[0], rep_grads[ck]);
    if (d_sparse(k) != 0.0) sparse_score_backward(q, reps[ck], d_sparse(k), rep_grads[0], rep_grads[ck]);
    if (d_colbert(k) != 0.0) colbert_score_backward(q, reps[ck], d_colbert(k), rep_grads[0], rep_grads[ck]);
  }
  for (std::size_t i = 0; i < reps.size(); ++i) backprop(params, tapes[i], rep_grads[i], *grads);
  return r;
}

}  // namespace

ObjectiveValue triplet_objective(const EncoderParams& params,
                                 std::span<const TokenizedTriplet> batch, const LossConfig& cfg,
                                 const EnsembleWeights& weights, LossTerm term,
                                 GradientSet* grads,
                                 std::span<const CandidateVector> frozen_targets) {
  if (!frozen_targets.empty() && frozen_targets.size() != batch.size()) {
    throw DataError("triplet_objective: frozen target count differs from batch size");
  }
  const TermCoefficients coef = coefficients(term, cfg);
  ObjectiveValue out;
  out.targets.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const CandidateVector* frozen = frozen_targets.empty() ? nullptr : &frozen_targets[i];
    out.report += one_triplet(params, batch[i], cfg, weights, coef, grads, frozen, out.targets[i]);
  }
  out.loss = select_term(term, out.report);
  return out;
}

Eigen::MatrixXd dense_embeddings(const EncoderParams& params, std::span<const TokenSeq> texts) {
  Eigen::MatrixXd e(static_cast<Eigen::Index>(texts.size()), params.config.dim);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    e.row(static_cast<Eigen::Index>(i)) = encode(params, texts[i]).dense.transpose();
  }
  return e;
}

ObjectiveValue distill_objective(const EncoderParams& student, std::span<const TokenSeq> texts,
                                 const Eigen::MatrixXd& teacher, const LossConfig& cfg,
                                 LossTerm term, GradientSet* grads) {
  if (is_triplet_term(term)) {
    throw UsageError(std::string("loss term ") + loss_term_name(term) + " needs a triplet batch");
  }
  const auto b = static_cast<Eigen::Index>(texts.size());
  if (b == 0) throw DataError("distill_objective: empty batch");
  if (teacher.rows() != b || teacher.cols() != student.config.dim) {
    throw DataError("distill_objective: teacher embeddings shape mismatch");
  }
  std::vector<EncoderTape> tapes(grads ? texts.size() : 0);
  Eigen::MatrixXd es(b, student.config.dim);
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    es.row(i) = encode(student, texts[idx], grads ? &tapes[idx] : nullptr).dense.transpose();
  }

  ObjectiveValue out;
  auto& r = out.report;
  for (Eigen::Index i = 0; i < b; ++i) {
    r.cosine += cosine_embed_loss(es.row(i), teacher.row(i));
    r.mse += mse_embed_loss(es.row(i), teacher.row(i));
  }
  r.cosine /= static_cast<double>(b);
  r.mse /= static_cast<double>(b);
  r.sim = similarity_matrix_loss(es, teacher);
  r.distill_total = distill_total(r.cosine, r.mse, r.sim, cfg);
  out.loss = select_term(term, r);
  if (!grads) return out;

  double c_cos = 0.0, c_mse = 0.0, c_sim = 0.0;
  switch (term) {
    case LossTerm::kDistillTotal:
      c_cos = cfg.alpha_cosine;
      c_mse = cfg.alpha_mse;
      c_sim = cfg.alpha_sim;
      break;
    case LossTerm::kCosine: c_cos = 1.0; break;
    case LossTerm::kMse: c_mse = 1.0; break;
    default: c_sim = 1.0; break;
  }
  Eigen::MatrixXd d_es = Eigen::MatrixXd::Zero(b, es.cols());
  if (c_sim != 0.0) d_es += c_sim * similarity_matrix_loss_grad(es, teacher);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Eigen::VectorXd s = es.row(i).transpose();
    const Eigen::VectorXd t = teacher.row(i).transpose();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(s.size());
    if (c_cos != 0.0) g += (c_cos / static_cast<double>(b)) * cosine_embed_loss_grad(s, t);
    if (c_mse != 0.0) g += (c_mse / static_cast<double>(b)) * 2.0 * (s - t);
    d_es.row(i) += g.transpose();
  }
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    RepresentationGrad rg = RepresentationGrad::zeros(student.config.dim, texts[idx].length());
    rg.dense = d_es.row(i).transpose();
    backprop(student, tapes[idx], rg, *grads);
  }
  return out;
}

namespace {

void require_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw NumericError(std::string("non-finite ") + what + " loss");
}

}  // namespace

GradientSet backward(const EncoderParams& params, std::span<const TokenizedTriplet> batch,
                     const LossConfig& cfg, const EnsembleWeights& weights, LossTerm term) {
  GradientSet g = GradientSet::zeros_like(params);
  const auto v = triplet_objective(params, batch, cfg, weights, term, &g);
  require_finite(v.loss, loss_term_name(term));
  g.check_finite();
  return g;
}

GradientSet backward(const EncoderParams& student, std::span<const TokenSeq> texts,
                     const Eigen::MatrixXd& teacher, const LossConfig& cfg, LossTerm term) {
  GradientSet g = GradientSet::zeros_like(student);
  const auto v = distill_objective(student, texts, teacher, cfg, term, &g);
  require_finite(v.loss, loss_term_name(term));
  g.check_finite();
  return g;
}

}  // namespace trimodal
