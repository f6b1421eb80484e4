/* Copyright (c) 2026 The a2u-lab Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef A2U_GRADCHECK_HPP_
#define A2U_GRADCHECK_HPP_

#include <functional>
#include <vector>

#include "a2u/rng.hpp"
#include "a2u/tape.hpp"
#include "a2u/tensor.hpp"

namespace a2u {

/// Central finite differences against the tape gradient, per coordinate.
/// `f` evaluates the scalar function of the given leaves; it receives a tape
/// for the analytic pass and nullptr for the plain evaluations. Returns the
/// worst relative error with denominator max(|analytic|, |numeric|, 1e-8).
/// Meant to run with T = double.
template <typename T>
double grad_check(const std::function<Tensor<T>(Tape<T>*)>& f, std::vector<Tensor<T>*> inputs,
                  double eps = 1e-4, int64_t max_coords_per_input = -1, uint64_t sample_seed = 0) {
  Tape<T> tape;
  for (Tensor<T>* in : inputs) tape.watch(*in);
  Tensor<T> loss = f(&tape);
  A2U_CHECK(loss.size() == 1, "grad_check needs a scalar function");
  tape.backward(loss);

  std::vector<std::vector<T>> analytic;
  analytic.reserve(inputs.size());
  for (Tensor<T>* in : inputs) analytic.emplace_back(in->grad(), in->grad() + in->size());

  Rng pick(sample_seed ^ 0x9e3779b97f4a7c15ULL);
  double worst = 0.0;
  for (size_t ii = 0; ii < inputs.size(); ++ii) {
    Tensor<T>& x = *inputs[ii];
    std::vector<int64_t> coords;
    if (max_coords_per_input < 0 || max_coords_per_input >= x.size()) {
      coords.resize(x.size());
      for (int64_t j = 0; j < x.size(); ++j) coords[j] = j;
    } else {
      for (int64_t j = 0; j < max_coords_per_input; ++j) coords.push_back(pick.below(x.size()));
    }
    for (int64_t j : coords) {
      const T saved = x[j];
      x[j] = saved + static_cast<T>(eps);
      const double fp = static_cast<double>(f(nullptr)[0]);
      x[j] = saved - static_cast<T>(eps);
      const double fm = static_cast<double>(f(nullptr)[0]);
      x[j] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = static_cast<double>(analytic[ii][j]);
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace a2u

#endif  // A2U_GRADCHECK_HPP_
