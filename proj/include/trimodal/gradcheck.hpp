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

#include <functional>
#include <string>
#include <vector>

#include "trimodal/encoder.hpp"

namespace trimodal {

struct TensorCheck {
  std::string name;
  double max_abs_error = 0.0;
  double scale = 0.0;  // largest |gradient| entry, analytic or numeric
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

/// Compares `analytic` with central differences of `loss` at step `h`, one
/// entry at a time. The relative error of a tensor is its largest absolute
/// discrepancy divided by max(largest |gradient| entry, 1e-4).
GradCheckReport finite_difference_check(const EncoderParams& params,
                                        const std::function<double(const EncoderParams&)>& loss,
                                        const GradientSet& analytic, double h = 1e-5);

}  // namespace trimodal
