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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Criteria can be selected by name:
//   dgn_acceptance AC1 AC5

#include "dgn/evaluation.hpp"
#include "test_util.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

using namespace dgn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// --- AC1 -------------------------------------------------------------------

Outcome gradient_correctness() {
  Stopwatch clock;
  const ModelConfig cfg{{1, 4, 3, 2}, 3, 0};
  SynthConfig sc;
  sc.subjects = 10;
  sc.rois = 6;
  sc.views = 3;
  sc.view_scales = {1.0, 4.0, 0.5};
  double worst = 0.0;
  std::size_t compared = 0, excluded = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Population pop = generate_synthetic(sc, seed);
    const DgnModel model = test::random_model(cfg, seed, 0.5);
    std::vector<Index> positions(10);
    std::iota(positions.begin(), positions.end(), Index{0});
    std::mt19937_64 rng(seed);
    const auto sample = sample_subset(rng, positions, 2);
    const Index subject = static_cast<Index>(seed % 10);
    const ad::ScalarFunction f = [&](ad::Tape& tape, std::span<const ad::Var> vars) {
      const ad::Var cbt = forward_cbt(tape, layer_vars_from(cfg, vars), pop.subject(subject));
      return snl_loss(cbt, pop, sample, pop.view_lambdas());
    };
    const auto r = ad::finite_difference_check(f, model.parameter_tensors(), 1e-5);
    worst = std::max(worst, r.max_relative_error);
    compared += r.compared;
    excluded += r.excluded;
  }
  const double t = clock.seconds();
  return {worst < 1e-5 && t < 60.0 && compared > 0,
          "max relative error " + fmt("%.3g", worst) + " over " + std::to_string(compared) + " entries (" +
              std::to_string(excluded) + " at kinks), " + fmt("%.2f", t) + " s"};
}

// --- AC2 -------------------------------------------------------------------

Outcome structural_invariants() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> nodes(2, 12), views(1, 5), layers(1, 3), width(1, 8), hidden(0, 4);
  int valid = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ModelConfig cfg;
    cfg.dims = {1};
    for (int l = layers(rng); l > 0; --l) cfg.dims.push_back(width(rng));
    cfg.n_views = views(rng);
    cfg.filter_hidden = hidden(rng) == 0 ? 3 : 0;
    const DgnModel model = test::random_model(cfg, static_cast<std::uint64_t>(trial), 1.0);
    const Matrix c = forward_cbt(model, test::random_subject(rng, nodes(rng), cfg.n_views, 5.0));
    valid += c == c.transpose() && (c.array() >= 0).all() && (c.diagonal().array() == 0).all();
  }

  int equivariant = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 20;
    const DgnModel model = test::random_model(ModelConfig{}, 500 + static_cast<std::uint64_t>(trial), 0.3);
    const SubjectTensor subject = test::random_subject(rng, n, 4);
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(n);
    for (Index k = 0; k < n; ++k) p.indices()(k) = perm[static_cast<std::size_t>(k)];
    std::vector<Matrix> permuted;
    for (const auto& v : subject.views()) permuted.push_back(p * v * p.transpose());
    const Matrix c = forward_cbt(model, subject);
    equivariant += forward_cbt(model, SubjectTensor("p", permuted)) == Matrix(p * c * p.transpose());
  }
  return {valid == 1000 && equivariant == 20, std::to_string(valid) + "/1000 templates valid, " +
                                                   std::to_string(equivariant) + "/20 permutations exact"};
}

// --- AC3 -------------------------------------------------------------------

Outcome training_convergence() {
  Stopwatch clock;
  SynthConfig sc;  // 40 subjects, 20 nodes, 4 views
  const Population pop = generate_synthetic(sc, 0);
  const TrainResult r = train(pop, ModelConfig{}, SnlConfig{});
  const double first = r.loss_history.front(), last = r.loss_history.back();
  const double reduction = 1.0 - last / first;
  const double t = clock.seconds();
  return {r.loss_history.size() == 100 && last < first && reduction >= 0.30 && t < 600.0,
          "epoch 1 " + fmt("%.6g", first) + " -> epoch 100 " + fmt("%.6g", last) + " (" +
              fmt("%.1f", 100.0 * reduction) + "% reduction), " + fmt("%.1f", t) + " s"};
}

// --- AC4 -------------------------------------------------------------------

Outcome centeredness() {
  Stopwatch clock;
  SynthConfig sc;
  sc.view_scales = {0.1, 0.1, 0.1, 10.0};
  const Population pop = generate_synthetic(sc, 7);
  SnlConfig snl;
  snl.seed = 1;
  CrossValidationConfig cv;
  cv.methods = {Method::Dgn, Method::Mean};
  const EvalReport r = cross_validate(pop, ModelConfig{}, snl, cv);
  const auto dgn = r.scores(Method::Dgn), mean = r.scores(Method::Mean);
  int wins = 0;
  std::string folds;
  for (std::size_t f = 0; f < dgn.size(); ++f) {
    wins += dgn[f] <= mean[f];
    folds += (f ? ", " : "") + fmt("%.3f", dgn[f]) + "/" + fmt("%.3f", mean[f]);
  }
  const WelchResult& w = *r.dgn_vs_mean;
  return {wins >= 4 && w.p_two_sided < 0.05 && w.t < 0.0,
          "DGN <= mean on " + std::to_string(wins) + "/5 folds (dgn/mean: " + folds + "); Welch t " +
              fmt("%.3f", w.t) + ", p " + fmt("%.3g", w.p_two_sided) + "; " + fmt("%.0f", clock.seconds()) + " s"};
}

// --- AC5 -------------------------------------------------------------------

Outcome oracle_equivalence() {
  std::mt19937_64 rng(5);
  int median_ok = 0, median_total = 0;
  for (std::size_t count = 1; count <= 9; ++count) {
    for (Index n = 2; n <= 10; ++n) {
      std::vector<Matrix> stack;
      for (std::size_t s = 0; s < count; ++s) stack.push_back(test::random_connectome(rng, n));
      ++median_total;
      median_ok += elementwise_median(stack) == test::median_oracle(stack);
    }
  }
  // refine_cbt proper, over the templates of 1..9 subjects.
  for (Index count = 1; count <= 9; ++count) {
    const Index n = 2 + count % 9;
    const ModelConfig cfg{{1, 4, 3}, 2, 0};
    const DgnModel model = test::random_model(cfg, static_cast<std::uint64_t>(count));
    std::vector<SubjectTensor> subjects;
    std::vector<Matrix> templates;
    for (Index s = 0; s < count; ++s) {
      subjects.push_back(test::random_subject(rng, n, 2));
      templates.push_back(forward_cbt(model, subjects.back()));
    }
    ++median_total;
    median_ok += refine_cbt(model, subjects) == test::median_oracle(templates);
  }

  double layer_err = 0.0;
  for (Index n = 2; n <= 8; ++n) {
    for (Index hidden : {0, 3}) {
      const ModelConfig cfg{{1, 5, 4, 3}, 1 + n % 4, hidden};
      const DgnModel model = test::random_model(cfg, static_cast<std::uint64_t>(n * 7 + hidden));
      const SubjectTensor subject = test::random_subject(rng, n, cfg.n_views);
      for (std::size_t l = 0; l < model.layers().size(); ++l) {
        const DgnLayer& layer = model.layers()[l];
        const RowMatrix v = test::random_matrix(rng, n, layer.in_dim, -2.0, 2.0);
        ad::Tape tape;
        const auto vars = bind_parameters(tape, model);
        const RowMatrix got = layer_forward(vars[l], tape.constant(ad::Tensor::from_matrix(v)), make_edge_inputs(tape, subject))
                                  .value()
                                  .to_matrix();
        layer_err = std::max(layer_err, (got - test::layer_oracle(layer, v, subject)).cwiseAbs().maxCoeff());
      }
    }
  }

  const bool lambdas_ok = lambdas_from_means(Vector{{2.0, 4.0}}) == Vector{{1.0, 0.5}} &&
                          lambdas_from_means(Vector::Constant(3, 0.7)) == Vector::Ones(3) &&
                          lambdas_from_means(Vector{{0.5, 0.25, 0.1}}) == Vector{{0.2, 0.4, 1.0}};
  return {median_ok == median_total && layer_err <= 1e-12 && lambdas_ok,
          "median " + std::to_string(median_ok) + "/" + std::to_string(median_total) + " exact; layer max error " +
              fmt("%.3g", layer_err) + "; lambda cases " + (lambdas_ok ? "exact" : "WRONG")};
}

// --- AC6 -------------------------------------------------------------------

Outcome discriminative_recovery() {
  Stopwatch clock;
  int recovered = 0;
  std::string hits;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig sc;
    sc.subjects = 20;
    std::vector<Index> nodes(static_cast<std::size_t>(sc.rois));
    std::iota(nodes.begin(), nodes.end(), Index{0});
    std::mt19937_64 rng(derive_seed(seed, 7));
    std::vector<Index> planted;
    std::sample(nodes.begin(), nodes.end(), std::back_inserter(planted), 5, rng);

    const Population a = generate_synthetic(sc, seed);
    sc.planted_nodes = planted;
    sc.effect_size = 1.0;
    const Population b = generate_synthetic(sc, seed);

    SnlConfig snl;
    snl.epochs = 30;
    snl.seed = seed;
    const Matrix cbt_a = refine_cbt(train(a, ModelConfig{}, snl).model, a.subjects());
    const Matrix cbt_b = refine_cbt(train(b, ModelConfig{}, snl).model, b.subjects());
    const auto top = discriminative_rois(cbt_a, cbt_b, 5).top();
    int hit = 0;
    for (Index p : planted) hit += std::count(top.begin(), top.end(), p) > 0;
    recovered += hit >= 4;
    hits += (seed ? "," : "") + std::to_string(hit);
  }
  return {recovered >= 8, std::to_string(recovered) + "/10 seeds with >= 4 planted nodes in the top 5 (hits " + hits +
                              "), " + fmt("%.0f", clock.seconds()) + " s"};
}

// --- AC7 -------------------------------------------------------------------

int run(const std::string& args) {
  const std::string cmd = std::string(DGN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const auto dir = test::scratch_dir("acceptance_cli");
  const std::string d = "'" + dir.string() + "'";
  if (run("synth --subjects 15 --rois 8 --views 4 --seed 3 --out " + d + "/data") != 0) return {false, "synth failed"};
  const std::string cv = "cross-validate --manifest " + d + "/data/manifest.json --k 5 --methods dgn,mean,median --epochs 5 --seed 11";
  const int a = run(cv + " --out " + d + "/a");
  const int b = run(cv + " --out " + d + "/b");
  const int c = run(cv + " --threads 3 --out " + d + "/c");
  const std::string csv_a = slurp(dir / "a" / "scores.csv"), csv_b = slurp(dir / "b" / "scores.csv");
  const std::string csv_c = slurp(dir / "c" / "scores.csv");
  const auto rows = std::count(csv_a.begin(), csv_a.end(), '\n') - 1;
  return {a == 0 && b == 0 && c == 0 && rows == 15 && csv_a == csv_b && csv_a == csv_c,
          std::to_string(rows) + "-row CSVs: rerun " + (csv_a == csv_b ? "byte-identical" : "DIFFERS") +
              ", 3 threads " + (csv_a == csv_c ? "byte-identical" : "DIFFERS") + " (exit " + std::to_string(a) +
              ", " + std::to_string(b) + ", " + std::to_string(c) + ")"};
}

// --- AC8 -------------------------------------------------------------------

Outcome full_size_dry_run() {
  Stopwatch clock;
  struct Setting {
    Index subjects, views;
    std::vector<Index> dims;
    Index epochs;
  };
  std::string detail;
  bool ok = true;
  for (const Setting& s : {Setting{77, 4, {1, 36, 24, 5}, 5}, Setting{310, 6, {1, 36, 24, 8}, 2}}) {
    Stopwatch run_clock;
    SynthConfig sc;
    sc.subjects = s.subjects;
    sc.rois = 35;
    sc.views = s.views;
    sc.view_scales.clear();
    for (Index v = 0; v < s.views; ++v) sc.view_scales.push_back(std::pow(10.0, static_cast<double>(v % 3) - 1.0));
    const Population pop = generate_synthetic(sc, 35);
    SnlConfig snl;  // lr 0.0005, |S| = 10
    snl.epochs = s.epochs;
    const EvalReport r = cross_validate(pop, ModelConfig{s.dims, s.views, 0}, snl, CrossValidationConfig{});
    const bool complete = r.fold_scores.size() == 15 && r.dgn_loss_histories.size() == 5;
    ok = ok && complete;
    detail += (detail.empty() ? "" : "; ") + std::to_string(s.subjects) + "x35x" + std::to_string(s.views) + " " +
              (complete ? "complete" : "INCOMPLETE") + " in " + fmt("%.0f", run_clock.seconds()) + " s";
  }
  const double t = clock.seconds();
  return {ok && t < 1800.0, detail + ", total " + fmt("%.0f", t) + " s"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::pair<const char*, std::function<Outcome()>>>> criteria{
      {"AC1", {"gradient correctness", gradient_correctness}},
      {"AC2", {"structural template invariants", structural_invariants}},
      {"AC3", {"training convergence", training_convergence}},
      {"AC4", {"centeredness versus the mean baseline", centeredness}},
      {"AC5", {"oracle equivalence", oracle_equivalence}},
      {"AC6", {"discriminative node recovery", discriminative_recovery}},
      {"AC7", {"CLI determinism", cli_determinism}},
      {"AC8", {"full-size configuration dry run", full_size_dry_run}},
  };
  const std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << id << ' ' << (o.pass ? "PASS" : "FAIL") << "  " << entry.first << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
