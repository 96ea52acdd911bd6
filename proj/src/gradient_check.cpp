// Copyright 2026 The DGN Authors. All Rights Reserved.
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

#include "dgn/autodiff.hpp"

#include <limits>

namespace dgn::ad {

namespace {

constexpr double kRoundoffUlps = 16.0;

struct Evaluation {
  double value;
  std::vector<signed char> kinks;
};

Evaluation evaluate(const ScalarFunction& f, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.parameter(p));
  const Var out = f(tape, vars);
  return {out.value().item(), tape.kink_signature()};
}

}  // namespace

GradientCheckReport finite_difference_check(const ScalarFunction& f,
                                             const std::vector<Tensor>& params, double h) {
  if (!(h > 0)) throw std::invalid_argument("finite_difference_check: step must be positive");

  Gradients analytic;
  std::vector<signed char> base_kinks;
  {
    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p));
    const Var out = f(tape, vars);
    analytic = tape.backward(out);
    base_kinks = tape.kink_signature();
  }

  GradientCheckReport report;
  std::vector<Tensor> probe = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Index k = 0; k < params[p].size(); ++k) {
      const double original = params[p][k];
      probe[p][k] = original + h;
      const Evaluation plus = evaluate(f, probe);
      probe[p][k] = original - h;
      const Evaluation minus = evaluate(f, probe);
      probe[p][k] = original;

      if (plus.kinks != base_kinks || minus.kinks != base_kinks) {
        ++report.excluded;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * h);
      const double exact = analytic[p][k];
      // (plus - minus) / 2h cannot resolve anything finer than the rounding
      // error of the two evaluations.
      const double noise = kRoundoffUlps * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(plus.value), std::abs(minus.value)) / h;
      const double denom = std::max({std::abs(exact), std::abs(numeric), 1e-8});
      const double rel = std::max(0.0, std::abs(exact - numeric) - noise) / denom;
      ++report.compared;
      if (report.compared == 1 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p;
        report.worst_entry = k;
        report.worst_analytic = exact;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace dgn::ad
