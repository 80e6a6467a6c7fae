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

#include <string_view>

#include <Eigen/Dense>

#include "trimodal/encoder.hpp"
#include "trimodal/tokenizer.hpp"

namespace trimodal {

/// Text -> representation through a shared, read-only encoder snapshot.
class Embedder {
 public:
  Embedder(const EncoderParams& params, const Vocab& vocab) : params_(&params), vocab_(&vocab) {}

  MultiRepresentation represent(std::string_view text) const {
    return encode(*params_, tokenize(text, *vocab_));
  }
  Eigen::VectorXd dense(std::string_view text) const { return represent(text).dense; }

  const EncoderParams& params() const { return *params_; }
  const Vocab& vocab() const { return *vocab_; }

 private:
  const EncoderParams* params_;
  const Vocab* vocab_;
};

}  // namespace trimodal
