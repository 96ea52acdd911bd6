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

#include "dgn/evaluation.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <numeric>

namespace dgn {

CbtMatrix refine_cbt(const DgnModel& model, std::span<const SubjectTensor> training_subjects) {
  if (training_subjects.empty()) throw ConfigError("refine_cbt: empty training set");
  std::vector<Matrix> cbts;
  cbts.reserve(training_subjects.size());
  for (const auto& s : training_subjects) cbts.push_back(forward_cbt(model, s));
  return elementwise_median(cbts);
}

std::vector<double> view_distances(const CbtMatrix& cbt, std::span<const SubjectTensor> test_subjects) {
  std::vector<double> out;
  for (const auto& s : test_subjects) {
    for (Index v = 0; v < s.n_views(); ++v) out.push_back(frobenius_distance(cbt, s.view(v)));
  }
  return out;
}

double representativeness(const CbtMatrix& cbt, std::span<const SubjectTensor> test_subjects) {
  if (test_subjects.empty()) throw ConfigError("representativeness: empty test set");
  const auto d = view_distances(cbt, test_subjects);
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

CbtMatrix baseline_cbt(std::span<const SubjectTensor> training_subjects, BaselineMethod method) {
  if (training_subjects.empty()) throw ConfigError("baseline_cbt: empty training set");
  std::vector<Matrix> stack;
  for (const auto& s : training_subjects) stack.insert(stack.end(), s.views().begin(), s.views().end());
  return method == BaselineMethod::ElementwiseMean ? elementwise_mean(stack) : elementwise_median(stack);
}

RoiRanking discriminative_rois(const CbtMatrix& cbt_a, const CbtMatrix& cbt_b, Index k) {
  if (cbt_a.rows() != cbt_b.rows() || cbt_a.cols() != cbt_b.cols() || cbt_a.rows() != cbt_a.cols()) {
    throw ShapeError("discriminative_rois: templates are " + shape_string(cbt_a) + " and " + shape_string(cbt_b));
  }
  const Index n = cbt_a.rows();
  if (k < 1 || k > n) throw ConfigError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  RoiRanking r;
  r.k = k;
  r.scores = (cbt_a - cbt_b).cwiseAbs().colwise().sum().transpose();
  r.order.resize(static_cast<std::size_t>(n));
  std::iota(r.order.begin(), r.order.end(), Index{0});
  std::stable_sort(r.order.begin(), r.order.end(), [&r](Index x, Index y) { return r.scores(x) > r.scores(y); });
  return r;
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ConfigError("welch_t_test needs at least two samples per group");
  auto moments = [](std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double sa = va / static_cast<double>(a.size());
  const double sb = vb / static_cast<double>(b.size());
  WelchResult r;
  r.mean_a = ma;
  r.mean_b = mb;
  if (sa + sb == 0.0) {
    r.t = 0.0;
    r.dof = static_cast<double>(a.size() + b.size() - 2);
    r.p_two_sided = ma == mb ? 1.0 : 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(sa + sb);
  r.dof = (sa + sb) * (sa + sb) /
          (sa * sa / static_cast<double>(a.size() - 1) + sb * sb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(r.dof);
  r.p_two_sided = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Dgn: return "dgn";
    case Method::Mean: return "mean";
    case Method::Median: return "median";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "dgn") return Method::Dgn;
  if (name == "mean") return Method::Mean;
  if (name == "median") return Method::Median;
  throw ConfigError("unknown method '" + name + "' (expected dgn, mean or median)");
}

std::vector<double> EvalReport::scores(Method m) const {
  std::vector<double> out;
  for (const auto& f : fold_scores) {
    if (f.method == m) out.push_back(f.score);
  }
  return out;
}

}  // namespace dgn
