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
#include "trimodal/scoring.hpp"

namespace trimodal {

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::kDense: return "dense";
    case Modality::kSparse: return "sparse";
    case Modality::kColbert: return "colbert";
    case Modality::kEnsemble: return "ensemble";
  }
  return "?";
}

Modality parse_modality(const std::string& name) {
  if (name == "dense") return Modality::kDense;
  if (name == "sparse") return Modality::kSparse;
  if (name == "colbert") return Modality::kColbert;
  if (name == "ensemble") return Modality::kEnsemble;
  throw UsageError("unknown modality '" + name + "' (dense|sparse|colbert|ensemble)");
}

double ScoreBreakdown::select(Modality m) const {
  switch (m) {
    case Modality::kDense: return dense;
    case Modality::kSparse: return sparse;
    case Modality::kColbert: return colbert;
    case Modality::kEnsemble: return ensemble;
  }
  return ensemble;
}

LexicalMap collapse_lexical(std::span<const std::string> tokens, const Eigen::VectorXd& weights) {
  LexicalMap map;
  map.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto pos = static_cast<Eigen::Index>(i);
    auto [it, inserted] = map.try_emplace(tokens[i], LexicalEntry{weights(pos), pos});
    if (!inserted && weights(pos) > it->second.weight) it->second = {weights(pos), pos};
  }
  return map;
}

double dense_score(const MultiRepresentation& q, const MultiRepresentation& p) {
  return dense_score(q.dense, p.dense);
}

namespace {

template <class Fn>
void for_each_shared(const MultiRepresentation& q, const MultiRepresentation& p, Fn&& fn) {
  if (q.length() == 0 || p.length() == 0) return;
  const LexicalMap qm = collapse_lexical(q.tokens, q.lexical_weights);
  const LexicalMap pm = collapse_lexical(p.tokens, p.lexical_weights);
  // Iterate query tokens in text order so summation order is deterministic.
  for (std::size_t i = 0; i < q.tokens.size(); ++i) {
    const auto& qe = qm.at(q.tokens[i]);
    if (qe.position != static_cast<Eigen::Index>(i)) continue;
    auto it = pm.find(q.tokens[i]);
    if (it != pm.end()) fn(qe, it->second);
  }
}

}  // namespace

double sparse_score(const MultiRepresentation& q, const MultiRepresentation& p) {
  double s = 0.0;
  for_each_shared(q, p, [&](const LexicalEntry& a, const LexicalEntry& b) { s += a.weight * b.weight; });
  return s;
}

double colbert_score(const MultiRepresentation& q, const MultiRepresentation& p) {
  return late_interaction_score(q.multi_vectors, p.multi_vectors);
}

double ensemble_score(double dense, double sparse, double colbert, const EnsembleWeights& w) {
  return w.dense * dense + w.sparse * sparse + w.colbert * colbert;
}

double ensemble_score(const ScoreBreakdown& b, const EnsembleWeights& w) {
  return ensemble_score(b.dense, b.sparse, b.colbert, w);
}

ScoreBreakdown score_pair(const MultiRepresentation& q, const MultiRepresentation& p,
                          const EnsembleWeights& w) {
  ScoreBreakdown b;
  b.dense = dense_score(q, p);
  b.sparse = sparse_score(q, p);
  b.colbert = colbert_score(q, p);
  b.ensemble = ensemble_score(b, w);
  return b;
}

std::vector<ScoreBreakdown> score_candidates(const MultiRepresentation& q,
                                             std::span<const MultiRepresentation> candidates,
                                             const EnsembleWeights& w) {
  if (candidates.empty()) throw DataError("score_candidates: empty candidate list");
  std::vector<ScoreBreakdown> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back(score_pair(q, c, w));
  return out;
}

void dense_score_backward(const MultiRepresentation& q, const MultiRepresentation& p,
                          double upstream, RepresentationGrad& gq, RepresentationGrad& gp) {
  gq.dense += upstream * p.dense;
  gp.dense += upstream * q.dense;
}

void sparse_score_backward(const MultiRepresentation& q, const MultiRepresentation& p,
                           double upstream, RepresentationGrad& gq, RepresentationGrad& gp) {
  for_each_shared(q, p, [&](const LexicalEntry& a, const LexicalEntry& b) {
    gq.lexical_weights(a.position) += upstream * b.weight;
    gp.lexical_weights(b.position) += upstream * a.weight;
  });
}

void colbert_score_backward(const MultiRepresentation& q, const MultiRepresentation& p,
                            double upstream, RepresentationGrad& gq, RepresentationGrad& gp) {
  const Eigen::Index n = q.multi_vectors.rows();
  if (n == 0 || p.multi_vectors.rows() == 0) {
    throw DataError("colbert_score: undefined for zero-token query or passage");
  }
  const Eigen::MatrixXd sim = q.multi_vectors * p.multi_vectors.transpose();
  const double share = upstream / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index j = 0;
    sim.row(i).maxCoeff(&j);
    gq.multi_vectors.row(i) += share * p.multi_vectors.row(j);
    gp.multi_vectors.row(j) += share * q.multi_vectors.row(i);
  }
}

}  // namespace trimodal
