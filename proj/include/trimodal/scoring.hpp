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

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "trimodal/encoder.hpp"
#include "trimodal/error.hpp"

namespace trimodal {

enum class Modality { kDense, kSparse, kColbert, kEnsemble };

const char* modality_name(Modality m);
Modality parse_modality(const std::string& name);

struct EnsembleWeights {
  double dense = 1.0;
  double sparse = 0.3;
  double colbert = 1.0;
};

struct ScoreBreakdown {
  double dense = 0.0;
  double sparse = 0.0;
  double colbert = 0.0;
  double ensemble = 0.0;

  double select(Modality m) const;
};

/// <q, p> of two unit vectors.
template <class DerivedQ, class DerivedP>
typename DerivedQ::Scalar dense_score(const Eigen::MatrixBase<DerivedQ>& q,
                                      const Eigen::MatrixBase<DerivedP>& p) {
  if (q.size() != p.size()) {
    throw DataError("dense_score: dimension mismatch " + std::to_string(q.size()) + " vs " +
                    std::to_string(p.size()));
  }
  return q.reshaped().dot(p.reshaped());
}

/// Mean over query rows of the best inner product with any passage row.
/// Rows of both matrices are token vectors.
template <class DerivedQ, class DerivedP>
typename DerivedQ::Scalar late_interaction_score(const Eigen::MatrixBase<DerivedQ>& q,
                                                 const Eigen::MatrixBase<DerivedP>& p) {
  if (q.rows() == 0 || p.rows() == 0) {
    throw DataError("colbert_score: undefined for zero-token query or passage");
  }
  if (q.cols() != p.cols()) throw DataError("colbert_score: dimension mismatch");
  using Scalar = typename DerivedQ::Scalar;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> sim = q * p.transpose();
  return sim.rowwise().maxCoeff().mean();
}

/// Token string -> (max weight, position of the first maximum).
struct LexicalEntry {
  double weight;
  Eigen::Index position;
};
using LexicalMap = std::unordered_map<std::string, LexicalEntry>;

/// Collapses repeated token strings to their maximum weight.
LexicalMap collapse_lexical(std::span<const std::string> tokens, const Eigen::VectorXd& weights);

double dense_score(const MultiRepresentation& q, const MultiRepresentation& p);

/// Sum over shared token strings of w_q(t) * w_p(t); zero when either side
/// has no tokens.
double sparse_score(const MultiRepresentation& q, const MultiRepresentation& p);

/// Throws DataError when q or p has no tokens.
double colbert_score(const MultiRepresentation& q, const MultiRepresentation& p);

double ensemble_score(const ScoreBreakdown& b, const EnsembleWeights& w);
double ensemble_score(double dense, double sparse, double colbert, const EnsembleWeights& w);

ScoreBreakdown score_pair(const MultiRepresentation& q, const MultiRepresentation& p,
                          const EnsembleWeights& w);

/// Element k holds the scores of candidate k. Throws DataError on an empty list.
std::vector<ScoreBreakdown> score_candidates(const MultiRepresentation& q,
                                             std::span<const MultiRepresentation> candidates,
                                             const EnsembleWeights& w);

// Backward passes: accumulate `upstream * d(score)/d(representation)`.
void dense_score_backward(const MultiRepresentation& q, const MultiRepresentation& p,
                          double upstream, RepresentationGrad& gq, RepresentationGrad& gp);
void sparse_score_backward(const MultiRepresentation& q, const MultiRepresentation& p,
                           double upstream, RepresentationGrad& gq, RepresentationGrad& gp);
void colbert_score_backward(const MultiRepresentation& q, const MultiRepresentation& p,
                            double upstream, RepresentationGrad& gq, RepresentationGrad& gp);

}  // namespace trimodal
