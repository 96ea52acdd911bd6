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

#include <json.hpp>

#include <cstdio>
#include <fstream>

namespace dgn {

namespace {

std::string exact(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "method,fold,score\n";
  for (const auto& f : report.fold_scores) out << method_name(f.method) << ',' << f.fold << ',' << exact(f.score) << '\n';
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path) {
  using nlohmann::json;
  json doc;
  doc["format"] = "dgn-eval-report";
  doc["model"] = {{"dims", report.model_config.dims},
                  {"n_views", report.model_config.n_views},
                  {"filter_hidden", report.model_config.filter_hidden}};
  const SnlConfig& s = report.snl_config;
  doc["training"] = {{"sample_size", s.sample_size}, {"learning_rate", s.learning_rate},
                     {"epochs", s.epochs},           {"adam_beta1", s.adam_beta1},
                     {"adam_beta2", s.adam_beta2},   {"adam_epsilon", s.adam_epsilon},
                     {"seed", s.seed}};
  doc["training"]["early_stop_patience"] = s.early_stop_patience ? json(*s.early_stop_patience) : json(nullptr);
  std::vector<std::string> methods;
  for (Method m : report.cv_config.methods) methods.push_back(method_name(m));
  doc["cross_validation"] = {{"k_folds", report.cv_config.k_folds},
                             {"split_seed", report.cv_config.split_seed},
                             {"methods", methods}};
  doc["folds"] = json::array();
  for (const auto& f : report.fold_scores) {
    doc["folds"].push_back({{"method", method_name(f.method)}, {"fold", f.fold}, {"score", f.score}});
  }
  for (const auto& [m, sum] : report.summary) {
    doc["summary"][method_name(m)] = {{"mean", sum.mean}, {"stddev", sum.stddev},
                                      {"view_distance_count", sum.view_distances.size()}};
  }
  if (report.dgn_vs_mean) {
    const auto& w = *report.dgn_vs_mean;
    doc["welch_dgn_vs_mean"] = {{"t", w.t}, {"dof", w.dof}, {"p_two_sided", w.p_two_sided},
                                {"mean_dgn", w.mean_a}, {"mean_baseline", w.mean_b}};
  }
  doc["dgn_loss_histories"] = report.dgn_loss_histories;
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
}

void write_ranking(const RoiRanking& ranking, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "rank\tnode\tscore\n";
  for (Index r = 0; r < ranking.k; ++r) {
    const Index node = ranking.order[static_cast<std::size_t>(r)];
    out << r + 1 << '\t' << node << '\t' << exact(ranking.scores(node)) << '\n';
  }
}

}  // namespace dgn
