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
#include "trimodal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace trimodal {

GradCheckReport finite_difference_check(const EncoderParams& params,
                                        const std::function<double(const EncoderParams&)>& loss,
                                        const GradientSet& analytic, double h) {
  EncoderParams probe = params;
  std::vector<const double*> analytic_data;
  analytic.weights.for_each(
      [&](const std::string&, const auto& t) { analytic_data.push_back(t.data()); });

  GradCheckReport report;
  std::size_t index = 0;
  probe.weights.for_each([&](const std::string& name, auto& t) {
    const double* a = analytic_data[index++];
    TensorCheck check;
    check.name = name;
    double* data = t.data();
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double up = loss(probe);
      data[i] = saved - h;
      const double down = loss(probe);
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      check.max_abs_error = std::max(check.max_abs_error, std::abs(numeric - a[i]));
      check.scale = std::max({check.scale, std::abs(numeric), std::abs(a[i])});
    }
    check.rel_error = check.max_abs_error / std::max(check.scale, 1e-4);
    if (check.rel_error >= report.max_rel_error) {
      report.max_rel_error = check.rel_error;
      report.worst_tensor = name;
    }
    report.tensors.push_back(std::move(check));
  });
  return report;
}

}  // namespace trimodal
