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

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trimodal/tokenizer.hpp"

namespace trimodal {

struct EncoderConfig {
  int dim = 64;
  int layers = 2;
  int heads = 2;
  int max_seq_len = 128;
  int vocab_size = 0;
  std::uint64_t seed = 0;

  int head_dim() const { return dim / heads; }
  int ff_dim() const { return 4 * dim; }

  /// Throws UsageError on an inconsistent shape.
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

struct LayerWeights {
  Eigen::RowVectorXd norm1_gain, norm1_bias;
  Eigen::MatrixXd query, key, value, output;
  Eigen::RowVectorXd query_bias, key_bias, value_bias, output_bias;
  Eigen::RowVectorXd norm2_gain, norm2_bias;
  Eigen::MatrixXd ffn_in, ffn_out;
  Eigen::RowVectorXd ffn_in_bias, ffn_out_bias;

  template <class Self, class Fn>
  static void visit(Self& self, const std::string& prefix, Fn&& fn) {
    fn(prefix + "norm1.gain", self.norm1_gain);
    fn(prefix + "norm1.bias", self.norm1_bias);
    fn(prefix + "attention.query.weight", self.query);
    fn(prefix + "attention.query.bias", self.query_bias);
    fn(prefix + "attention.key.weight", self.key);
    fn(prefix + "attention.key.bias", self.key_bias);
    fn(prefix + "attention.value.weight", self.value);
    fn(prefix + "attention.value.bias", self.value_bias);
    fn(prefix + "attention.output.weight", self.output);
    fn(prefix + "attention.output.bias", self.output_bias);
    fn(prefix + "norm2.gain", self.norm2_gain);
    fn(prefix + "norm2.bias", self.norm2_bias);
    fn(prefix + "ffn.in.weight", self.ffn_in);
    fn(prefix + "ffn.in.bias", self.ffn_in_bias);
    fn(prefix + "ffn.out.weight", self.ffn_out);
    fn(prefix + "ffn.out.bias", self.ffn_out_bias);
  }
};

/// Every learnable tensor of the encoder. Row-vector activations: a sequence
/// is a T x d matrix and a linear map is `x * W + b`.
struct EncoderWeights {
  Eigen::MatrixXd token_embedding;     // |V| x d
  Eigen::MatrixXd position_embedding;  // max_seq_len x d
  std::vector<LayerWeights> layers;
  Eigen::RowVectorXd final_norm_gain, final_norm_bias;
  Eigen::VectorXd lexical_projection;       // w_lex, d
  Eigen::MatrixXd multi_vector_projection;  // W_col, d x d; e = norm(W_col^T h)

  /// Calls `fn(name, tensor)` for every tensor in a fixed order.
  template <class Fn>
  void for_each(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    visit(*this, fn);
  }

  void set_zero();
  std::size_t parameter_count() const;

 private:
  template <class Self, class Fn>
  static void visit(Self& self, Fn& fn) {
    fn(std::string("token_embedding"), self.token_embedding);
    fn(std::string("position_embedding"), self.position_embedding);
    for (std::size_t i = 0; i < self.layers.size(); ++i) {
      LayerWeights::visit(self.layers[i], "layers." + std::to_string(i) + ".", fn);
    }
    fn(std::string("final_norm.gain"), self.final_norm_gain);
    fn(std::string("final_norm.bias"), self.final_norm_bias);
    fn(std::string("lexical_projection"), self.lexical_projection);
    fn(std::string("multi_vector_projection"), self.multi_vector_projection);
  }
};

struct EncoderParams {
  EncoderConfig config;
  EncoderWeights weights;
};

/// Gradient of a scalar loss with respect to every tensor of an
/// EncoderParams, shape for shape.
struct GradientSet {
  EncoderWeights weights;

  static GradientSet zeros_like(const EncoderParams& params);

  double squared_norm() const;
  double norm() const;
  GradientSet& operator+=(const GradientSet& other);
  GradientSet& operator*=(double factor);

  /// Throws NumericError naming the first tensor holding NaN or Inf.
  void check_finite() const;
};

/// One text in all three modalities.
struct MultiRepresentation {
  Eigen::VectorXd dense;            // unit, d
  Eigen::VectorXd lexical_weights;  // N, non-negative
  Eigen::MatrixXd multi_vectors;    // N x d, unit rows
  std::vector<std::string> tokens;  // N token strings for lexical matching

  std::size_t length() const { return tokens.size(); }
};

/// Gradient of a loss with respect to the fields of a MultiRepresentation.
struct RepresentationGrad {
  Eigen::VectorXd dense;
  Eigen::VectorXd lexical_weights;
  Eigen::MatrixXd multi_vectors;

  static RepresentationGrad zeros(int dim, std::size_t tokens);
};

/// Activations retained by a forward pass for backprop.
struct EncoderTape {
  struct Layer {
    Eigen::MatrixXd input;
    Eigen::MatrixXd norm1_hat;
    Eigen::VectorXd norm1_inv_std;
    Eigen::MatrixXd normed1;
    Eigen::MatrixXd q, k, v;
    std::vector<Eigen::MatrixXd> attention;  // per head, T x T
    Eigen::MatrixXd context;
    Eigen::MatrixXd norm2_hat;
    Eigen::VectorXd norm2_inv_std;
    Eigen::MatrixXd normed2;
    Eigen::MatrixXd ffn_pre;  // before ReLU
    Eigen::MatrixXd ffn_act;
  };

  std::vector<TokenId> ids;  // CLS first
  std::vector<Layer> layers;
  Eigen::MatrixXd final_hat;
  Eigen::VectorXd final_inv_std;
  Eigen::MatrixXd hidden;  // T x d, row 0 is CLS
  double cls_norm = 0.0;
  Eigen::VectorXd lexical_logits;  // N, w_lex . h_t
  Eigen::MatrixXd multi_raw;       // N x d, before normalization
};

/// Uniform(-1/sqrt(d), 1/sqrt(d)) for every matrix and projection, zero
/// biases, unit norm gains. Deterministic in `config.seed`.
EncoderParams init_encoder(const EncoderConfig& config);

/// CLS is prepended; dense is the normalized CLS state, lexical weights are
/// ReLU(w_lex . h_t) and multi-vectors normalize(W_col^T h_t) over the N
/// text tokens. Throws DataError when N + 1 exceeds max_seq_len and
/// NumericError on non-finite activations.
MultiRepresentation encode(const EncoderParams& params, const TokenSeq& seq,
                           EncoderTape* tape = nullptr);

/// Accumulates d(loss)/d(params) into `grads`, given d(loss)/d(representation)
/// for the forward pass recorded in `tape`.
void backprop(const EncoderParams& params, const EncoderTape& tape,
              const RepresentationGrad& upstream, GradientSet& grads);

/// FNV-1a hash over all tensor bytes in visit order.
std::uint64_t fingerprint(const EncoderWeights& weights);

}  // namespace trimodal
