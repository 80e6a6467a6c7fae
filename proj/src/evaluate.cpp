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
#include "trimodal/evaluate.hpp"

#include <cstdio>

#include "trimodal/error.hpp"
#include "trimodal/file_util.hpp"

namespace trimodal {

namespace {

using Json = nlohmann::ordered_json;

Json interval_json(const std::optional<Interval>& ci) {
  if (!ci) return nullptr;
  return Json::array({ci->lo, ci->hi});
}

std::optional<Interval> maybe_ci(std::span<const double> v) {
  if (v.size() < 2) return std::nullopt;
  return confidence_interval(v);
}

std::array<MultiRepresentation, kCandidates + 1> encode_triplet(const EncoderParams& params,
                                                                const TokenizedTriplet& t) {
  std::array<MultiRepresentation, kCandidates + 1> reps;
  reps[0] = encode(params, t.query);
  reps[1] = encode(params, t.positive);
  for (int i = 0; i < kNegatives; ++i) reps[2 + i] = encode(params, t.negatives[i]);
  return reps;
}

}  // namespace

MetricsReport metrics_from_ranks(std::vector<int> ranks, std::span<const std::string> strata,
                                 Modality modality) {
  if (ranks.empty()) throw DataError("metrics: empty rank list");
  if (!strata.empty() && strata.size() != ranks.size()) {
    throw DataError("metrics: strata and ranks differ in length");
  }
  MetricsReport r;
  r.modality = modality;
  r.count = ranks.size();
  r.recall_at_1 = recall_at_k(ranks, 1);
  r.recall_at_3 = recall_at_k(ranks, 3);
  r.recall_at_5 = recall_at_k(ranks, 5);
  r.mrr = mrr(ranks);
  r.accuracy = r.recall_at_1;

  std::vector<double> top1, top3, top5, recip;
  for (int k : ranks) {
    top1.push_back(k <= 1);
    top3.push_back(k <= 3);
    top5.push_back(k <= 5);
    recip.push_back(1.0 / k);
  }
  r.std_dev = sample_sd(top1);
  r.ci_recall_at_1 = maybe_ci(top1);
  r.ci_recall_at_3 = maybe_ci(top3);
  r.ci_recall_at_5 = maybe_ci(top5);
  r.ci_mrr = maybe_ci(recip);

  if (!strata.empty()) {
    std::map<std::string, std::vector<int>> grouped;
    for (std::size_t i = 0; i < ranks.size(); ++i) grouped[strata[i]].push_back(ranks[i]);
    for (const auto& [label, rs] : grouped) {
      r.strata[label] = {rs.size(), recall_at_k(rs, 1), recall_at_k(rs, 3), recall_at_k(rs, 5),
                         mrr(rs)};
    }
  }
  r.ranks = std::move(ranks);
  return r;
}

Json MetricsReport::to_json() const {
  Json j;
  j["modality"] = modality_name(modality);
  j["count"] = count;
  j["accuracy"] = accuracy;
  j["std_dev"] = std_dev;
  j["recall_at_1"] = recall_at_1;
  j["recall_at_3"] = recall_at_3;
  j["recall_at_5"] = recall_at_5;
  j["mrr"] = mrr;
  j["ci95"] = {{"recall_at_1", interval_json(ci_recall_at_1)},
               {"recall_at_3", interval_json(ci_recall_at_3)},
               {"recall_at_5", interval_json(ci_recall_at_5)},
               {"mrr", interval_json(ci_mrr)}};
  Json s = Json::object();
  for (const auto& [label, m] : strata) {
    s[label] = {{"count", m.count},
                {"recall_at_1", m.recall_at_1},
                {"recall_at_3", m.recall_at_3},
                {"recall_at_5", m.recall_at_5},
                {"mrr", m.mrr}};
  }
  j["strata"] = std::move(s);
  j["ranks"] = ranks;
  return j;
}

std::string MetricsReport::to_table() const {
  std::string out;
  char line[160];
  auto ci = [](const std::optional<Interval>& c) {
    char buf[48];
    if (!c) return std::string("-");
    std::snprintf(buf, sizeof buf, "[%.4f, %.4f]", c->lo, c->hi);
    return std::string(buf);
  };
  std::snprintf(line, sizeof line, "modality %s, %zu queries\n", modality_name(modality), count);
  out += line;
  std::snprintf(line, sizeof line, "%-12s %8s  %s\n", "metric", "value", "95% CI");
  out += line;
  std::snprintf(line, sizeof line, "%-12s %8.4f  (std dev %.4f)\n", "accuracy", accuracy, std_dev);
  out += line;
  const std::array<std::tuple<const char*, double, std::string>, 4> rows = {
      std::tuple{"recall@1", recall_at_1, ci(ci_recall_at_1)},
      std::tuple{"recall@3", recall_at_3, ci(ci_recall_at_3)},
      std::tuple{"recall@5", recall_at_5, ci(ci_recall_at_5)},
      std::tuple{"mrr", mrr, ci(ci_mrr)}};
  for (const auto& [name, v, c] : rows) {
    std::snprintf(line, sizeof line, "%-12s %8.4f  %s\n", name, v, c.c_str());
    out += line;
  }
  if (!strata.empty()) {
    std::snprintf(line, sizeof line, "\n%-16s %6s %8s %8s %8s %8s\n", "stratum", "n", "R@1", "R@3",
                  "R@5", "MRR");
    out += line;
    for (const auto& [label, m] : strata) {
      std::snprintf(line, sizeof line, "%-16s %6zu %8.4f %8.4f %8.4f %8.4f\n", label.c_str(),
                    m.count, m.recall_at_1, m.recall_at_3, m.recall_at_5, m.mrr);
      out += line;
    }
  }
  return out;
}

MetricsReport evaluate(const EncoderParams& params, std::span<const TokenizedTriplet> testset,
                       std::span<const std::string> strata, const EvalOptions& options,
                       std::vector<QueryScores>* scores) {
  if (testset.empty()) throw DataError("evaluate: empty test set");
  std::vector<int> ranks;
  ranks.reserve(testset.size());
  if (scores) scores->clear();
  for (std::size_t i = 0; i < testset.size(); ++i) {
    QueryScores qs;
    try {
      const auto reps = encode_triplet(params, testset[i]);
      const auto s = score_candidates(
          reps[0], std::span<const MultiRepresentation>(reps.data() + 1, kCandidates),
          options.weights);
      std::copy(s.begin(), s.end(), qs.candidates.begin());
      qs.rank = rank_positive(qs.candidates, options.modality);
    } catch (const Error& e) {
      rethrow_with_prefix(e, "query " + std::to_string(i) + ": ");
    }
    ranks.push_back(qs.rank);
    if (scores) scores->push_back(qs);
  }
  return metrics_from_ranks(std::move(ranks), strata, options.modality);
}

void export_misranked(const std::filesystem::path& path, std::span<const TripletExample> testset,
                      std::span<const QueryScores> scores, Modality modality) {
  if (testset.size() != scores.size()) throw DataError("export_misranked: length mismatch");
  std::string out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].rank == 1) continue;
    const auto& t = testset[i];
    Json j;
    j["index"] = i;
    j["rank"] = scores[i].rank;
    j["query"] = t.query;
    j["positive"] = t.positive;
    Json cands = Json::array();
    for (int c = 0; c < kCandidates; ++c) cands.push_back(scores[i].candidates[c].select(modality));
    j["scores"] = std::move(cands);
    if (!t.stratum.empty()) j["stratum"] = t.stratum;
    j["label"] = "";
    out += j.dump();
    out += '\n';
  }
  write_file(path, out);
}

SelfDistillGap self_distill_gaps(const EncoderParams& params,
                                 std::span<const TokenizedTriplet> triplets, const LossConfig& cfg,
                                 const EnsembleWeights& weights) {
  if (triplets.empty()) throw DataError("self_distill_gap: empty triplet set");
  SelfDistillGap gap;
  for (const auto& t : triplets) {
    const auto reps = encode_triplet(params, t);
    const auto s = score_candidates(
        reps[0], std::span<const MultiRepresentation>(reps.data() + 1, kCandidates), weights);
    CandidateVector ens, dense, sparse, colbert;
    for (int c = 0; c < kCandidates; ++c) {
      ens[c] = s[c].ensemble;
      dense[c] = s[c].dense;
      sparse[c] = s[c].sparse;
      colbert[c] = s[c].colbert;
    }
    const CandidateVector p = softmax_dist(ens, cfg.temperature);
    const CandidateVector log_p = log_softmax(ens, cfg.temperature);
    auto kl = [&](const CandidateVector& m) {
      return (p.array() * (log_p - log_softmax(m, cfg.temperature)).array()).sum();
    };
    gap.dense += kl(dense);
    gap.sparse += kl(sparse);
    gap.colbert += kl(colbert);
  }
  const double n = static_cast<double>(triplets.size());
  gap.dense /= n;
  gap.sparse /= n;
  gap.colbert /= n;
  gap.weighted =
      (cfg.lambda_dense * gap.dense + cfg.lambda_sparse * gap.sparse + cfg.lambda_colbert * gap.colbert) /
      3.0;
  return gap;
}

double self_distill_gap(const EncoderParams& params, std::span<const TokenizedTriplet> triplets,
                        const LossConfig& cfg, const EnsembleWeights& weights) {
  return self_distill_gaps(params, triplets, cfg, weights).weighted;
}

double mean_embedding_cosine(const EncoderParams& student, const EncoderParams& teacher,
                             std::span<const TokenSeq> texts) {
  if (texts.empty()) throw DataError("mean_embedding_cosine: empty text set");
  const Eigen::MatrixXd s = dense_embeddings(student, texts);
  const Eigen::MatrixXd t = dense_embeddings(teacher, texts);
  double total = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    total += s.row(i).dot(t.row(i)) / (s.row(i).norm() * t.row(i).norm());
  }
  return total / static_cast<double>(texts.size());
}

}  // namespace trimodal
