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

#ifndef DGN_EVALUATION_HPP
#define DGN_EVALUATION_HPP

#include "dgn/model.hpp"
#include "dgn/mvbn.hpp"
#include "dgn/training.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dgn {

/// Element-wise median of the templates generated from every training subject.
CbtMatrix refine_cbt(const DgnModel& model, std::span<const SubjectTensor> training_subjects);

/// d_F(cbt, T_i^v) for every (test subject, view), subject-major.
std::vector<double> view_distances(const CbtMatrix& cbt, std::span<const SubjectTensor> test_subjects);

/// Mean Frobenius distance from `cbt` to every view of every test subject.
double representativeness(const CbtMatrix& cbt, std::span<const SubjectTensor> test_subjects);

enum class BaselineMethod { ElementwiseMean, ElementwiseMedian };

/// Aggregates all views of all subjects jointly.
CbtMatrix baseline_cbt(std::span<const SubjectTensor> training_subjects, BaselineMethod method);

struct RoiRanking {
  Vector scores;             // per node: column sum of |A - B|
  std::vector<Index> order;  // descending score, ties by lower index
  Index k = 0;

  std::vector<Index> top() const { return {order.begin(), order.begin() + k}; }
};

RoiRanking discriminative_rois(const CbtMatrix& cbt_a, const CbtMatrix& cbt_b, Index k);

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_two_sided = 1.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

/// Welch's unequal-variance two-sample t-test.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Cross-validation

enum class Method { Dgn, Mean, Median };

std::string method_name(Method m);
/// Parses "dgn", "mean" or "median"; throws ConfigError otherwise.
Method parse_method(const std::string& name);

struct FoldScore {
  Method method;
  int fold = 0;
  double score = 0.0;  // mean Frobenius distance to the fold's test views
};

struct MethodSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over folds
  std::vector<double> view_distances;  // pooled per-(test subject, view) distances
};

struct CrossValidationConfig {
  int k_folds = 5;
  std::uint64_t split_seed = 0;
  std::vector<Method> methods = {Method::Dgn, Method::Mean, Method::Median};
  /// Worker threads over folds; 1 = sequential. Results do not depend on it.
  int threads = 1;
};

struct EvalReport {
  ModelConfig model_config;
  SnlConfig snl_config;
  CrossValidationConfig cv_config;
  std::vector<FoldScore> fold_scores;  // fold-major, methods in configured order
  std::map<Method, MethodSummary> summary;
  std::vector<std::vector<double>> dgn_loss_histories;  // per fold
  /// DGN vs element-wise mean over pooled distances, when both ran.
  std::optional<WelchResult> dgn_vs_mean;

  std::vector<double> scores(Method m) const;
};

/// For every fold: lambda from training subjects, train, refine; score each
/// method's template (built from training subjects only) on the test views.
EvalReport cross_validate(const Population& population, const ModelConfig& model_config, const SnlConfig& snl_config,
                          const CrossValidationConfig& cv_config);

/// Flat `method,fold,score` table.
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);
/// Full report as JSON: configs, per-fold scores, summaries, t-test.
void write_report_json(const EvalReport& report, const std::filesystem::path& path);

void write_ranking(const RoiRanking& ranking, const std::filesystem::path& path);

}  // namespace dgn

#endif  // DGN_EVALUATION_HPP
