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
#include "trimodal/encoder.hpp"

#include <cmath>
#include <cstring>

#include "trimodal/error.hpp"
#include "trimodal/random.hpp"

namespace trimodal {
namespace {

constexpr double kNormEps = 1e-5;

struct NormOut {
  Eigen::MatrixXd hat;
  Eigen::VectorXd inv_std;
  Eigen::MatrixXd out;
};

NormOut layer_norm(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& gain,
                   const Eigen::RowVectorXd& bias) {
  NormOut r;
  const Eigen::Index d = x.cols();
  Eigen::VectorXd mean = x.rowwise().mean();
  r.hat = x.colwise() - mean;
  Eigen::VectorXd var = r.hat.rowwise().squaredNorm() / static_cast<double>(d);
  r.inv_std = (var.array() + kNormEps).rsqrt();
  r.hat = r.inv_std.asDiagonal() * r.hat;
  r.out = (r.hat.array().rowwise() * gain.array()).matrix();
  r.out.rowwise() += bias;
  return r;
}

// Returns d(input); accumulates gain/bias gradients.
Eigen::MatrixXd layer_norm_backward(const Eigen::MatrixXd& grad_out, const Eigen::MatrixXd& hat,
                                    const Eigen::VectorXd& inv_std,
                                    const Eigen::RowVectorXd& gain,
                                    Eigen::RowVectorXd& grad_gain,
                                    Eigen::RowVectorXd& grad_bias) {
  grad_gain += (grad_out.array() * hat.array()).colwise().sum().matrix();
  grad_bias += grad_out.colwise().sum();
  Eigen::MatrixXd ghat = (grad_out.array().rowwise() * gain.array()).matrix();
  const double inv_d = 1.0 / static_cast<double>(hat.cols());
  Eigen::VectorXd mean_g = ghat.rowwise().sum() * inv_d;
  Eigen::VectorXd mean_gh = (ghat.array() * hat.array()).rowwise().sum().matrix() * inv_d;
  Eigen::MatrixXd dx = ghat.colwise() - mean_g;
  dx -= (hat.array().colwise() * mean_gh.array()).matrix();
  return inv_std.asDiagonal() * dx;
}

void softmax_rows(Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

template <class Derived>
void fill_uniform(Eigen::MatrixBase<Derived>& m, Rng& rng, double bound) {
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-bound, bound);
  }
}

}  // namespace

void EncoderConfig::validate() const {
  if (dim < 1 || layers < 1 || heads < 1 || vocab_size < 1) {
    throw UsageError("encoder config: dim, layers, heads and vocab_size must be >= 1");
  }
  if (dim % heads != 0) {
    throw UsageError("encoder config: dim " + std::to_string(dim) + " not divisible by heads " +
                     std::to_string(heads));
  }
  if (max_seq_len < 2) throw UsageError("encoder config: max_seq_len must be >= 2");
}

void EncoderWeights::set_zero() {
  for_each([](const std::string&, auto& t) { t.setZero(); });
}

std::size_t EncoderWeights::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

GradientSet GradientSet::zeros_like(const EncoderParams& params) {
  GradientSet g{params.weights};
  g.weights.set_zero();
  return g;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  weights.for_each([&](const std::string&, const auto& t) { s += t.squaredNorm(); });
  return s;
}

double GradientSet::norm() const { return std::sqrt(squared_norm()); }

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  std::vector<const double*> src;
  other.weights.for_each([&](const std::string&, const auto& t) { src.push_back(t.data()); });
  std::size_t i = 0;
  weights.for_each([&](const std::string&, auto& t) {
    t += Eigen::Map<const std::remove_reference_t<decltype(t)>>(src[i++], t.rows(), t.cols());
  });
  return *this;
}

GradientSet& GradientSet::operator*=(double factor) {
  weights.for_each([&](const std::string&, auto& t) { t *= factor; });
  return *this;
}

void GradientSet::check_finite() const {
  weights.for_each([](const std::string& name, const auto& t) {
    if (!t.allFinite()) throw NumericError("non-finite gradient in tensor " + name);
  });
}

RepresentationGrad RepresentationGrad::zeros(int dim, std::size_t tokens) {
  RepresentationGrad g;
  g.dense = Eigen::VectorXd::Zero(dim);
  g.lexical_weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(tokens));
  g.multi_vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(tokens), dim);
  return g;
}

EncoderParams init_encoder(const EncoderConfig& config) {
  config.validate();
  const int d = config.dim;
  const int ff = config.ff_dim();
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(config.seed);

  EncoderParams params;
  params.config = config;
  auto& w = params.weights;
  w.token_embedding.resize(config.vocab_size, d);
  w.position_embedding.resize(config.max_seq_len, d);
  fill_uniform(w.token_embedding, rng, bound);
  fill_uniform(w.position_embedding, rng, bound);
  w.layers.resize(static_cast<std::size_t>(config.layers));
  for (auto& layer : w.layers) {
    layer.norm1_gain = Eigen::RowVectorXd::Ones(d);
    layer.norm1_bias = Eigen::RowVectorXd::Zero(d);
    layer.norm2_gain = Eigen::RowVectorXd::Ones(d);
    layer.norm2_bias = Eigen::RowVectorXd::Zero(d);
    for (Eigen::MatrixXd* m : {&layer.query, &layer.key, &layer.value, &layer.output}) {
      m->resize(d, d);
      fill_uniform(*m, rng, bound);
    }
    layer.query_bias = Eigen::RowVectorXd::Zero(d);
    layer.key_bias = Eigen::RowVectorXd::Zero(d);
    layer.value_bias = Eigen::RowVectorXd::Zero(d);
    layer.output_bias = Eigen::RowVectorXd::Zero(d);
    layer.ffn_in.resize(d, ff);
    layer.ffn_out.resize(ff, d);
    fill_uniform(layer.ffn_in, rng, bound);
    fill_uniform(layer.ffn_out, rng, bound);
    layer.ffn_in_bias = Eigen::RowVectorXd::Zero(ff);
    layer.ffn_out_bias = Eigen::RowVectorXd::Zero(d);
  }
  w.final_norm_gain = Eigen::RowVectorXd::Ones(d);
  w.final_norm_bias = Eigen::RowVectorXd::Zero(d);
  w.lexical_projection.resize(d);
  fill_uniform(w.lexical_projection, rng, bound);
  w.multi_vector_projection.resize(d, d);
  fill_uniform(w.multi_vector_projection, rng, bound);
  return params;
}

MultiRepresentation encode(const EncoderParams& params, const TokenSeq& seq, EncoderTape* tape) {
  const auto& cfg = params.config;
  const auto& w = params.weights;
  const auto n = static_cast<Eigen::Index>(seq.length());
  const Eigen::Index t_len = n + 1;
  if (t_len > cfg.max_seq_len) {
    throw DataError("sequence of " + std::to_string(n) + " tokens exceeds max_seq_len " +
                    std::to_string(cfg.max_seq_len) + " (CLS included)");
  }
  const int d = cfg.dim;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  EncoderTape local;
  EncoderTape& tp = tape ? *tape : local;
  tp.ids.assign(1, Vocab::kCls);
  tp.ids.insert(tp.ids.end(), seq.ids.begin(), seq.ids.end());
  tp.layers.resize(w.layers.size());

  Eigen::MatrixXd x(t_len, d);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    const TokenId id = tp.ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= w.token_embedding.rows()) {
      throw DataError("token id " + std::to_string(id) + " outside embedding table");
    }
    x.row(t) = w.token_embedding.row(id) + w.position_embedding.row(t);
  }

  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& lw = w.layers[l];
    auto& lt = tp.layers[l];
    lt.input = x;
    NormOut n1 = layer_norm(x, lw.norm1_gain, lw.norm1_bias);
    lt.norm1_hat = std::move(n1.hat);
    lt.norm1_inv_std = std::move(n1.inv_std);
    lt.normed1 = std::move(n1.out);
    lt.q = (lt.normed1 * lw.query).rowwise() + lw.query_bias;
    lt.k = (lt.normed1 * lw.key).rowwise() + lw.key_bias;
    lt.v = (lt.normed1 * lw.value).rowwise() + lw.value_bias;
    lt.attention.resize(static_cast<std::size_t>(cfg.heads));
    lt.context.resize(t_len, d);
    for (int h = 0; h < cfg.heads; ++h) {
      auto& p = lt.attention[static_cast<std::size_t>(h)];
      p = lt.q.middleCols(h * dh, dh) * lt.k.middleCols(h * dh, dh).transpose() * scale;
      softmax_rows(p);
      lt.context.middleCols(h * dh, dh) = p * lt.v.middleCols(h * dh, dh);
    }
    x += (lt.context * lw.output).rowwise() + lw.output_bias;
    NormOut n2 = layer_norm(x, lw.norm2_gain, lw.norm2_bias);
    lt.norm2_hat = std::move(n2.hat);
    lt.norm2_inv_std = std::move(n2.inv_std);
    lt.normed2 = std::move(n2.out);
    lt.ffn_pre = (lt.normed2 * lw.ffn_in).rowwise() + lw.ffn_in_bias;
    lt.ffn_act = lt.ffn_pre.cwiseMax(0.0);
    x += (lt.ffn_act * lw.ffn_out).rowwise() + lw.ffn_out_bias;
  }

  NormOut fin = layer_norm(x, w.final_norm_gain, w.final_norm_bias);
  tp.final_hat = std::move(fin.hat);
  tp.final_inv_std = std::move(fin.inv_std);
  tp.hidden = std::move(fin.out);
  if (!tp.hidden.allFinite()) throw NumericError("non-finite encoder activations");

  MultiRepresentation rep;
  rep.tokens = seq.tokens;
  tp.cls_norm = tp.hidden.row(0).norm();
  if (tp.cls_norm == 0.0) throw NumericError("zero-norm CLS state");
  rep.dense = tp.hidden.row(0).transpose() / tp.cls_norm;

  const auto body = tp.hidden.bottomRows(n);
  tp.lexical_logits = body * w.lexical_projection;
  rep.lexical_weights = tp.lexical_logits.cwiseMax(0.0);
  tp.multi_raw = body * w.multi_vector_projection;
  rep.multi_vectors.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = tp.multi_raw.row(i).norm();
    if (norm == 0.0) throw NumericError("zero-norm multi-vector at token " + std::to_string(i));
    rep.multi_vectors.row(i) = tp.multi_raw.row(i) / norm;
  }
  return rep;
}

void backprop(const EncoderParams& params, const EncoderTape& tape,
              const RepresentationGrad& upstream, GradientSet& grads) {
  const auto& cfg = params.config;
  const auto& w = params.weights;
  auto& g = grads.weights;
  const int dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index t_len = tape.hidden.rows();
  const Eigen::Index n = t_len - 1;

  Eigen::MatrixXd dh_out = Eigen::MatrixXd::Zero(t_len, cfg.dim);

  // Dense head: u = h0 / |h0|.
  {
    Eigen::RowVectorXd u = tape.hidden.row(0) / tape.cls_norm;
    Eigen::RowVectorXd gu = upstream.dense.transpose();
    dh_out.row(0) += (gu - u * u.dot(gu)) / tape.cls_norm;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto h_t = tape.hidden.row(i + 1);
    if (tape.lexical_logits(i) > 0.0 && upstream.lexical_weights(i) != 0.0) {
      const double gw = upstream.lexical_weights(i);
      dh_out.row(i + 1) += gw * w.lexical_projection.transpose();
      g.lexical_projection += gw * h_t.transpose();
    }
    const auto ge = upstream.multi_vectors.row(i);
    if (!ge.isZero(0.0)) {
      const double norm = tape.multi_raw.row(i).norm();
      Eigen::RowVectorXd e = tape.multi_raw.row(i) / norm;
      Eigen::RowVectorXd dm = (ge - e * e.dot(ge)) / norm;
      g.multi_vector_projection.noalias() += h_t.transpose() * dm;
      dh_out.row(i + 1) += dm * w.multi_vector_projection.transpose();
    }
  }

  Eigen::MatrixXd dx = layer_norm_backward(dh_out, tape.final_hat, tape.final_inv_std,
                                           w.final_norm_gain, g.final_norm_gain,
                                           g.final_norm_bias);

  for (std::size_t l = w.layers.size(); l-- > 0;) {
    const auto& lw = w.layers[l];
    auto& lg = g.layers[l];
    const auto& lt = tape.layers[l];

    // Feed-forward residual branch.
    lg.ffn_out.noalias() += lt.ffn_act.transpose() * dx;
    lg.ffn_out_bias += dx.colwise().sum();
    Eigen::MatrixXd d_pre = (dx * lw.ffn_out.transpose()).cwiseProduct(
        (lt.ffn_pre.array() > 0.0).cast<double>().matrix());
    lg.ffn_in.noalias() += lt.normed2.transpose() * d_pre;
    lg.ffn_in_bias += d_pre.colwise().sum();
    Eigen::MatrixXd d_normed2 = d_pre * lw.ffn_in.transpose();
    dx += layer_norm_backward(d_normed2, lt.norm2_hat, lt.norm2_inv_std, lw.norm2_gain,
                              lg.norm2_gain, lg.norm2_bias);

    // Attention residual branch.
    lg.output.noalias() += lt.context.transpose() * dx;
    lg.output_bias += dx.colwise().sum();
    Eigen::MatrixXd d_context = dx * lw.output.transpose();
    Eigen::MatrixXd dq(t_len, cfg.dim), dk(t_len, cfg.dim), dv(t_len, cfg.dim);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto& p = lt.attention[static_cast<std::size_t>(h)];
      const auto dc = d_context.middleCols(h * dh, dh);
      Eigen::MatrixXd dp = dc * lt.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh) = p.transpose() * dc;
      Eigen::VectorXd row_dot = (dp.array() * p.array()).rowwise().sum();
      Eigen::MatrixXd ds = (p.array() * (dp.colwise() - row_dot).array()).matrix() * scale;
      dq.middleCols(h * dh, dh) = ds * lt.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh) = ds.transpose() * lt.q.middleCols(h * dh, dh);
    }
    lg.query.noalias() += lt.normed1.transpose() * dq;
    lg.key.noalias() += lt.normed1.transpose() * dk;
    lg.value.noalias() += lt.normed1.transpose() * dv;
    lg.query_bias += dq.colwise().sum();
    lg.key_bias += dk.colwise().sum();
    lg.value_bias += dv.colwise().sum();
    Eigen::MatrixXd d_normed1 =
        dq * lw.query.transpose() + dk * lw.key.transpose() + dv * lw.value.transpose();
    dx += layer_norm_backward(d_normed1, lt.norm1_hat, lt.norm1_inv_std, lw.norm1_gain,
                              lg.norm1_gain, lg.norm1_bias);
  }

  for (Eigen::Index t = 0; t < t_len; ++t) {
    g.token_embedding.row(tape.ids[static_cast<std::size_t>(t)]) += dx.row(t);
    g.position_embedding.row(t) += dx.row(t);
  }
}

std::uint64_t fingerprint(const EncoderWeights& weights) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  weights.for_each([&](const std::string&, const auto& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    const std::size_t len = static_cast<std::size_t>(t.size()) * sizeof(double);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

}  // namespace trimodal
