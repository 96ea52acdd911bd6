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

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

std::string default_output_dir() {
  const char* env = std::getenv("DGN_OUTPUT_DIR");
  return env && *env ? env : "dgn_out";
}

std::uint64_t fnv1a64(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dgn::DataError("cannot hash " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// Resolved configuration plus a hash of every artifact, written next to the outputs.
void write_metadata(const fs::path& out_dir, const std::string& command, json config,
                    const std::vector<fs::path>& artifacts) {
  json doc;
  doc["command"] = command;
  doc["config"] = std::move(config);
  doc["artifacts"] = json::array();
  for (const auto& a : artifacts) {
    doc["artifacts"].push_back({{"path", fs::relative(a, out_dir).generic_string()}, {"fnv1a64", hex(fnv1a64(a))}});
  }
  std::ofstream(out_dir / "metadata.json") << doc.dump(2) << '\n';
}

struct TrainingFlags {
  std::vector<dgn::Index> dims = {1, 36, 24, 5};
  dgn::Index filter_hidden = 0;
  dgn::Index sample_size = 10;
  double learning_rate = 5e-4;
  dgn::Index epochs = 100;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  dgn::Index patience = 0;  // 0 = no early stopping

  dgn::ModelConfig model(dgn::Index n_views) const { return {dims, n_views, filter_hidden}; }

  dgn::SnlConfig snl() const {
    dgn::SnlConfig c;
    c.sample_size = sample_size;
    c.learning_rate = learning_rate;
    c.epochs = epochs;
    c.adam_beta1 = beta1;
    c.adam_beta2 = beta2;
    c.adam_epsilon = epsilon;
    c.seed = seed;
    if (patience > 0) c.early_stop_patience = patience;
    return c;
  }

  json to_json(dgn::Index n_views) const {
    return {{"dims", dims},       {"n_views", n_views}, {"filter_hidden", filter_hidden},
            {"snl_samples", sample_size}, {"lr", learning_rate}, {"epochs", epochs},
            {"adam_beta1", beta1}, {"adam_beta2", beta2}, {"adam_epsilon", epsilon},
            {"seed", seed},       {"patience", patience}};
  }
};

void add_training_flags(CLI::App* cmd, TrainingFlags& f) {
  cmd->add_option("--dims", f.dims, "Layer widths, starting with 1")->delimiter(',')->capture_default_str();
  cmd->add_option("--filter-hidden", f.filter_hidden, "Hidden width of the edge filter network (0 = none)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--snl-samples", f.sample_size, "Subjects sampled per loss evaluation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lr", f.learning_rate, "Adam learning rate")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--epochs", f.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--adam-beta1", f.beta1)->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  cmd->add_option("--adam-beta2", f.beta2)->check(CLI::Range(0.0, 0.999999))->capture_default_str();
  cmd->add_option("--adam-epsilon", f.epsilon)->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--seed", f.seed, "Training seed")->capture_default_str();
  cmd->add_option("--patience", f.patience, "Early-stopping patience in epochs (0 = off)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

// --- synth -----------------------------------------------------------------

struct SynthFlags {
  dgn::SynthConfig config;
  std::vector<double> scales;
  std::uint64_t seed = 0;
  std::string out;
};

int run_synth(SynthFlags& f) {
  auto& c = f.config;
  if (!f.scales.empty()) {
    c.view_scales = f.scales;
  } else if (c.views != 4) {
    c.view_scales.assign(static_cast<std::size_t>(c.views), 1.0);
  }
  const dgn::Population pop = dgn::generate_synthetic(c, f.seed);
  const fs::path out = f.out;
  const fs::path manifest = dgn::save_population(pop, out);

  std::vector<fs::path> artifacts{manifest};
  for (const auto& s : pop.subjects()) {
    for (dgn::Index v = 0; v < pop.n_views(); ++v) artifacts.push_back(out / (s.id() + "_v" + std::to_string(v) + ".txt"));
  }
  json cfg = {{"subjects", c.subjects},       {"rois", c.rois},
              {"views", c.views},             {"scales", c.view_scales},
              {"latent_rank", c.latent_rank}, {"latent_spread", c.latent_spread},
              {"noise", c.noise},             {"planted", c.planted_nodes},
              {"effect", c.effect_size},      {"seed", f.seed}};
  write_metadata(out, "synth", cfg, artifacts);
  std::cout << "wrote " << pop.size() * pop.n_views() << " matrices and " << manifest.string() << '\n';
  return kOk;
}

// --- train -----------------------------------------------------------------

struct SplitFlags {
  int fold = -1;
  int k = 5;
  std::uint64_t split_seed = 0;
};

struct TrainFlags {
  std::string manifest;
  std::string out;
  TrainingFlags training;
  SplitFlags split;
};

int run_train(TrainFlags& f) {
  const dgn::Population all = dgn::load_population(f.manifest);
  std::vector<dgn::Index> positions(static_cast<std::size_t>(all.size()));
  std::iota(positions.begin(), positions.end(), dgn::Index{0});
  if (f.split.fold >= 0) {
    if (f.split.fold >= f.split.k) {
      throw dgn::ConfigError("fold " + std::to_string(f.split.fold) + " must be below --k " + std::to_string(f.split.k));
    }
    positions = dgn::kfold_split(all, f.split.k, f.split.split_seed)[static_cast<std::size_t>(f.split.fold)].train_indices;
  }
  const dgn::Population training = all.subset(positions);
  const dgn::ModelConfig model_cfg = f.training.model(all.n_views());
  const dgn::TrainResult result = dgn::train(training, model_cfg, f.training.snl());
  const dgn::CbtMatrix cbt = dgn::refine_cbt(result.model, training.subjects());

  const fs::path out = f.out;
  fs::create_directories(out);
  dgn::save_checkpoint(result.model, out / "checkpoint.json");
  dgn::write_loss_history(out / "loss_history.tsv", result.loss_history);
  dgn::write_matrix(out / "cbt.txt", cbt);

  const auto& h = result.loss_history;
  std::size_t decreases = 0;
  for (std::size_t e = 1; e < h.size(); ++e) decreases += h[e] < h[e - 1];
  json cfg = f.training.to_json(all.n_views());
  cfg["manifest"] = fs::absolute(f.manifest).lexically_normal().string();
  cfg["fold"] = f.split.fold;
  cfg["k"] = f.split.k;
  cfg["split_seed"] = f.split.split_seed;
  cfg["training_subjects"] = training.size();
  cfg["lambdas"] = std::vector<double>(result.lambdas.data(), result.lambdas.data() + result.lambdas.size());
  cfg["seeds"] = {{"init", dgn::derive_seed(f.training.seed, 0)},
                  {"order", dgn::derive_seed(f.training.seed, 1)},
                  {"sample", dgn::derive_seed(f.training.seed, 2)}};
  cfg["summary"] = {{"first_epoch_loss", h.front()}, {"final_epoch_loss", h.back()},
                    {"best_epoch", result.best_epoch}, {"decreasing_epochs", decreases}};
  write_metadata(out, "train", cfg,
                 {out / "checkpoint.json", out / "loss_history.tsv", out / "cbt.txt"});

  std::printf("epochs %zu  first %.6g  final %.6g  reduction %.1f%%  best epoch %lld  decreasing epochs %zu/%zu\n",
              h.size(), h.front(), h.back(), 100.0 * (1.0 - h.back() / h.front()),
              static_cast<long long>(result.best_epoch), decreases, h.size() > 0 ? h.size() - 1 : 0);
  return kOk;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateFlags {
  std::string manifest;
  std::string cbt;
  std::string checkpoint;
  std::string train_manifest;
  std::string out;
};

int run_evaluate(EvaluateFlags& f) {
  const dgn::Population test = dgn::load_population(f.manifest);
  dgn::CbtMatrix cbt;
  if (!f.cbt.empty()) {
    cbt = dgn::read_matrix(f.cbt);
  } else {
    const dgn::DgnModel model = dgn::load_checkpoint(f.checkpoint);
    cbt = dgn::refine_cbt(model, dgn::load_population(f.train_manifest).subjects());
  }
  const auto distances = dgn::view_distances(cbt, test.subjects());
  const double score = dgn::representativeness(cbt, test.subjects());

  std::vector<double> per_view(static_cast<std::size_t>(test.n_views()), 0.0);
  for (std::size_t k = 0; k < distances.size(); ++k) per_view[k % per_view.size()] += distances[k];
  for (double& v : per_view) v /= static_cast<double>(test.size());

  const fs::path out = f.out;
  fs::create_directories(out);
  json result = {{"representativeness", score},
                 {"per_view_mean_distance", per_view},
                 {"test_subjects", test.size()},
                 {"view_names", test.view_names()}};
  std::ofstream(out / "evaluation.json") << result.dump(2) << '\n';
  json cfg = {{"manifest", f.manifest}, {"cbt", f.cbt}, {"checkpoint", f.checkpoint}, {"train_manifest", f.train_manifest}};
  write_metadata(out, "evaluate", cfg, {out / "evaluation.json"});
  std::printf("mean Frobenius distance %.10g over %zu views\n", score, distances.size());
  return kOk;
}

// --- cross-validate --------------------------------------------------------

struct CrossValidateFlags {
  std::string manifest;
  std::string out;
  TrainingFlags training;
  int k = 5;
  std::uint64_t split_seed = 0;
  std::vector<std::string> methods = {"dgn", "mean", "median"};
  int threads = 1;
};

int run_cross_validate(CrossValidateFlags& f) {
  const dgn::Population pop = dgn::load_population(f.manifest);
  dgn::CrossValidationConfig cv;
  cv.k_folds = f.k;
  cv.split_seed = f.split_seed;
  cv.threads = f.threads;
  cv.methods.clear();
  for (const auto& m : f.methods) cv.methods.push_back(dgn::parse_method(m));
  const dgn::EvalReport report = dgn::cross_validate(pop, f.training.model(pop.n_views()), f.training.snl(), cv);

  const fs::path out = f.out;
  dgn::write_report_csv(report, out / "scores.csv");
  dgn::write_report_json(report, out / "report.json");
  json cfg = f.training.to_json(pop.n_views());
  cfg["manifest"] = fs::absolute(f.manifest).lexically_normal().string();
  cfg["k"] = f.k;
  cfg["split_seed"] = f.split_seed;
  cfg["methods"] = f.methods;
  cfg["threads"] = f.threads;
  std::vector<std::uint64_t> fold_seeds;
  for (int fold = 0; fold < f.k; ++fold) fold_seeds.push_back(dgn::derive_seed(f.training.seed, 100 + static_cast<std::uint64_t>(fold)));
  cfg["fold_training_seeds"] = fold_seeds;
  write_metadata(out, "cross-validate", cfg, {out / "scores.csv", out / "report.json"});

  for (dgn::Method m : cv.methods) {
    const auto& s = report.summary.at(m);
    std::printf("%-7s mean %.6g  sd %.6g\n", dgn::method_name(m).c_str(), s.mean, s.stddev);
  }
  if (report.dgn_vs_mean) {
    std::printf("welch dgn vs mean: t %.4f  dof %.1f  p %.3g\n", report.dgn_vs_mean->t, report.dgn_vs_mean->dof,
                report.dgn_vs_mean->p_two_sided);
  }
  return kOk;
}

// --- rank-rois -------------------------------------------------------------

struct RankFlags {
  std::string cbt_a;
  std::string cbt_b;
  dgn::Index k = 15;
  std::string out;
};

int run_rank(RankFlags& f) {
  const dgn::Matrix a = dgn::read_matrix(f.cbt_a);
  const dgn::Matrix b = dgn::read_matrix(f.cbt_b);
  if (a.rows() != b.rows()) {
    throw dgn::ShapeError("templates have " + std::to_string(a.rows()) + " and " + std::to_string(b.rows()) + " nodes");
  }
  const dgn::RoiRanking ranking = dgn::discriminative_rois(a, b, f.k);
  const fs::path out = f.out;
  fs::create_directories(out);
  dgn::write_ranking(ranking, out / "ranking.tsv");
  write_metadata(out, "rank-rois", {{"cbt_a", f.cbt_a}, {"cbt_b", f.cbt_b}, {"k", f.k}}, {out / "ranking.tsv"});
  std::ifstream in(out / "ranking.tsv");
  std::cout << in.rdbuf();
  return kOk;
}

// --- inspect ---------------------------------------------------------------

int run_inspect(const std::string& checkpoint) {
  const dgn::DgnModel model = dgn::load_checkpoint(checkpoint);
  json doc;
  doc["dims"] = model.config().dims;
  doc["n_views"] = model.config().n_views;
  doc["filter_hidden"] = model.config().filter_hidden;
  doc["seed"] = model.seed();
  doc["parameter_count"] = model.parameter_count();
  const auto names = model.parameter_names();
  const auto tensors = model.parameter_tensors();
  for (std::size_t k = 0; k < names.size(); ++k) {
    doc["parameters"].push_back({{"name", names[k]}, {"shape", tensors[k].shape()}, {"l2_norm", tensors[k].values().norm()}});
  }
  std::cout << doc.dump(2) << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view brain network template estimation with edge-conditioned graph convolutions"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option values; flags override it");

  SynthFlags synth;
  synth.out = default_output_dir();
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic multi-view population");
  cmd_synth->add_option("--subjects", synth.config.subjects)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--rois", synth.config.rois)->check(CLI::Range(2, 1 << 20))->capture_default_str();
  cmd_synth->add_option("--views", synth.config.views)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--scales", synth.scales, "One scale per view (default 1,10,0.1,5 for 4 views, else ones)")
      ->delimiter(',');
  cmd_synth->add_option("--latent-rank", synth.config.latent_rank)->check(CLI::PositiveNumber)->capture_default_str();
  cmd_synth->add_option("--latent-spread", synth.config.latent_spread)->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_synth->add_option("--noise", synth.config.noise)->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd_synth->add_option("--planted", synth.config.planted_nodes, "Nodes whose edges are shifted")->delimiter(',');
  cmd_synth->add_option("--effect", synth.config.effect_size, "Shift of planted edges, in view-scale units")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd_synth->add_option("--seed", synth.seed)->capture_default_str();
  cmd_synth->add_option("--out", synth.out, "Output directory (default $DGN_OUTPUT_DIR or dgn_out)");

  TrainFlags train;
  train.out = default_output_dir();
  auto* cmd_train = app.add_subcommand("train", "Train on a population (or one fold's training subjects)");
  cmd_train->add_option("--manifest", train.manifest)->required();
  cmd_train->add_option("--out", train.out, "Output directory (default $DGN_OUTPUT_DIR or dgn_out)");
  cmd_train->add_option("--fold", train.split.fold, "Train on this fold's training subjects only")
      ->check(CLI::NonNegativeNumber);
  cmd_train->add_option("--k", train.split.k, "Fold count used with --fold")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  cmd_train->add_option("--split-seed", train.split.split_seed)->capture_default_str();
  add_training_flags(cmd_train, train.training);

  EvaluateFlags eval;
  eval.out = default_output_dir();
  auto* cmd_eval = app.add_subcommand("evaluate", "Mean Frobenius distance from a template to every view");
  cmd_eval->add_option("--manifest", eval.manifest, "Held-out subjects")->required();
  auto* opt_cbt = cmd_eval->add_option("--cbt", eval.cbt, "Template matrix file");
  auto* opt_ckpt = cmd_eval->add_option("--checkpoint", eval.checkpoint, "Refine this model's templates instead");
  auto* opt_train = cmd_eval->add_option("--train-manifest", eval.train_manifest, "Subjects to refine over");
  opt_cbt->excludes(opt_ckpt);
  opt_ckpt->needs(opt_train);
  cmd_eval->add_option("--out", eval.out, "Output directory (default $DGN_OUTPUT_DIR or dgn_out)");
  cmd_eval->callback([&] {
    if (eval.cbt.empty() && eval.checkpoint.empty()) throw CLI::ValidationError("evaluate", "one of --cbt or --checkpoint is required");
  });

  CrossValidateFlags cv;
  cv.out = default_output_dir();
  auto* cmd_cv = app.add_subcommand("cross-validate", "k-fold comparison of DGN and baseline templates");
  cmd_cv->add_option("--manifest", cv.manifest)->required();
  cmd_cv->add_option("--out", cv.out, "Output directory (default $DGN_OUTPUT_DIR or dgn_out)");
  cmd_cv->add_option("--k", cv.k, "Number of folds")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  cmd_cv->add_option("--split-seed", cv.split_seed)->capture_default_str();
  cmd_cv->add_option("--methods", cv.methods)
      ->delimiter(',')
      ->check(CLI::IsMember({"dgn", "mean", "median"}))
      ->capture_default_str();
  cmd_cv->add_option("--threads", cv.threads, "Folds trained concurrently")->check(CLI::PositiveNumber)->capture_default_str();
  add_training_flags(cmd_cv, cv.training);

  RankFlags rank;
  rank.out = default_output_dir();
  auto* cmd_rank = app.add_subcommand("rank-rois", "Rank nodes by how much two templates differ around them");
  cmd_rank->add_option("--cbt-a", rank.cbt_a)->required()->check(CLI::ExistingFile);
  cmd_rank->add_option("--cbt-b", rank.cbt_b)->required()->check(CLI::ExistingFile);
  cmd_rank->add_option("--k", rank.k, "Number of nodes reported")->check(CLI::PositiveNumber)->capture_default_str();
  cmd_rank->add_option("--out", rank.out, "Output directory (default $DGN_OUTPUT_DIR or dgn_out)");

  std::string inspect_path;
  auto* cmd_inspect = app.add_subcommand("inspect", "Print a checkpoint's configuration and tensor summary");
  cmd_inspect->add_option("checkpoint", inspect_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_train) return run_train(train);
    if (*cmd_eval) return run_evaluate(eval);
    if (*cmd_cv) return run_cross_validate(cv);
    if (*cmd_rank) return run_rank(rank);
    if (*cmd_inspect) return run_inspect(inspect_path);
  } catch (const dgn::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const dgn::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const dgn::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
