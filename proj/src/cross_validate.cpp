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

#include <atomic>
#include <exception>
#include <numeric>
#include <thread>

namespace dgn {

namespace {

struct MethodOutcome {
  double score = 0.0;
  std::vector<double> distances;
};

struct FoldOutcome {
  std::vector<MethodOutcome> methods;  // cv_config.methods order
  std::vector<double> loss_history;
};

FoldOutcome run_fold(const Population& population, const FoldSplit& fold, const ModelConfig& model_config,
                     const SnlConfig& snl_config, const CrossValidationConfig& cv) {
  // Training statistics (lambda included) come from the training subjects only.
  const Population training = population.subset(fold.train_indices);
  std::vector<SubjectTensor> test;
  for (Index t : fold.test_indices) test.push_back(population.subject(t));

  FoldOutcome out;
  for (Method m : cv.methods) {
    CbtMatrix cbt;
    switch (m) {
      case Method::Dgn: {
        SnlConfig cfg = snl_config;
        cfg.seed = derive_seed(snl_config.seed, 100 + static_cast<std::uint64_t>(fold.fold_id));
        TrainResult trained = train(training, model_config, cfg);
        cbt = refine_cbt(trained.model, training.subjects());
        out.loss_history = std::move(trained.loss_history);
        break;
      }
      case Method::Mean:
        cbt = baseline_cbt(training.subjects(), BaselineMethod::ElementwiseMean);
        break;
      case Method::Median:
        cbt = baseline_cbt(training.subjects(), BaselineMethod::ElementwiseMedian);
        break;
    }
    MethodOutcome mo;
    mo.distances = view_distances(cbt, test);
    mo.score = std::accumulate(mo.distances.begin(), mo.distances.end(), 0.0) / static_cast<double>(mo.distances.size());
    out.methods.push_back(std::move(mo));
  }
  return out;
}

}  // namespace

EvalReport cross_validate(const Population& population, const ModelConfig& model_config, const SnlConfig& snl_config,
                          const CrossValidationConfig& cv_config) {
  if (cv_config.methods.empty()) throw ConfigError("cross_validate: no methods selected");
  const auto folds = kfold_split(population, cv_config.k_folds, cv_config.split_seed);
  for (const auto& f : folds) {
    if (f.test_indices.empty()) throw ConfigError("fold " + std::to_string(f.fold_id) + " has no test subjects");
  }
  std::vector<FoldOutcome> outcomes(folds.size());
  std::vector<std::exception_ptr> errors(folds.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t f = next++; f < folds.size(); f = next++) {
      try {
        outcomes[f] = run_fold(population, folds[f], model_config, snl_config, cv_config);
      } catch (...) {
        errors[f] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(cv_config.threads, 1, static_cast<int>(folds.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  EvalReport report;
  report.model_config = model_config;
  report.snl_config = snl_config;
  report.cv_config = cv_config;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    for (std::size_t m = 0; m < cv_config.methods.size(); ++m) {
      const Method method = cv_config.methods[m];
      const auto& mo = outcomes[f].methods[m];
      report.fold_scores.push_back({method, folds[f].fold_id, mo.score});
      auto& pooled = report.summary[method].view_distances;
      pooled.insert(pooled.end(), mo.distances.begin(), mo.distances.end());
    }
    if (!outcomes[f].loss_history.empty()) report.dgn_loss_histories.push_back(outcomes[f].loss_history);
  }
  for (auto& [method, s] : report.summary) {
    const auto scores = report.scores(method);
    const double n = static_cast<double>(scores.size());
    s.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : scores) ss += (x - s.mean) * (x - s.mean);
    s.stddev = scores.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  if (report.summary.count(Method::Dgn) && report.summary.count(Method::Mean)) {
    report.dgn_vs_mean = welch_t_test(report.summary[Method::Dgn].view_distances,
                                      report.summary[Method::Mean].view_distances);
  }
  return report;
}

}  // namespace dgn
