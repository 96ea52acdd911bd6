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

#include "dgn/training.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace dgn {

using ad::Tensor;
using ad::Var;

void SnlConfig::validate(Index training_size) const {
  if (sample_size < 1 || sample_size > training_size) {
    throw ConfigError("SNL sample size " + std::to_string(sample_size) + " must lie in [1, " +
                      std::to_string(training_size) + "]");
  }
  if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1) || !(adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
  if (early_stop_patience && *early_stop_patience < 1) throw ConfigError("patience must be >= 1");
}

AdamState::AdamState(const std::vector<Eigen::Map<Vector>>& params) {
  for (const auto& p : params) {
    first_moment.push_back(Vector::Zero(p.size()));
    second_moment.push_back(Vector::Zero(p.size()));
  }
}

void adam_step(std::vector<Eigen::Map<Vector>>& params, const ad::Gradients& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(state.first_moment.size()) +
                     " moment blocks");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].size() || state.first_moment[k].size() != params[k].size()) {
      throw ShapeError("adam_step: block " + std::to_string(k) + " size mismatch");
    }
    const Vector& g = grads[k].values();
    for (Index e = 0; e < g.size(); ++e) {
      if (!std::isfinite(g(e))) {
        throw NumericalError("non-finite gradient " + std::to_string(g(e)) + " at parameter block " +
                             std::to_string(k) + " entry " + std::to_string(e) + " (step " +
                             std::to_string(state.step + 1) + ")");
      }
    }
  }
  ++state.step;
  for (std::size_t k = 0; k < params.size(); ++k) {
    adam_update(params[k], grads[k].values(), state.first_moment[k], state.second_moment[k], state.step, config);
  }
}

Var snl_loss(Var cbt, const Population& population, std::span<const Index> sample, const Vector& lambdas) {
  if (sample.empty()) throw ConfigError("snl_loss: empty sample set");
  if (lambdas.size() != population.n_views()) {
    throw ShapeError("snl_loss: " + std::to_string(lambdas.size()) + " lambdas for " +
                     std::to_string(population.n_views()) + " views");
  }
  const ad::Shape expected{population.n_rois(), population.n_rois()};
  if (cbt.shape() != expected) {
    throw ShapeError("snl_loss: template " + ad::to_string(cbt.shape()) + ", views " + ad::to_string(expected));
  }
  ad::Tape& tape = cbt.tape();
  Var total;
  bool first = true;
  for (Index v = 0; v < population.n_views(); ++v) {
    for (Index i : sample) {
      const Var target = tape.constant(Tensor::from_matrix(population.subject(i).view(v)));
      const Var term = ad::scalar_mul(ad::frobenius_norm(cbt - target), lambdas(v));
      total = first ? term : total + term;
      first = false;
    }
  }
  return total;
}

std::vector<Index> sample_subset(std::mt19937_64& rng, std::span<const Index> positions, Index sample_size) {
  if (sample_size < 0 || sample_size > static_cast<Index>(positions.size())) {
    throw ConfigError("cannot sample " + std::to_string(sample_size) + " of " + std::to_string(positions.size()) +
                      " subjects");
  }
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(sample_size));
  std::sample(positions.begin(), positions.end(), std::back_inserter(out), sample_size, rng);
  return out;
}

TrainResult train(const Population& training, const ModelConfig& model_config, const SnlConfig& snl_config) {
  model_config.validate();
  snl_config.validate(training.size());
  if (model_config.n_views != training.n_views()) {
    throw ConfigError("model expects " + std::to_string(model_config.n_views) + " views, data has " +
                      std::to_string(training.n_views()));
  }

  TrainResult result;
  result.model = init_parameters(model_config, derive_seed(snl_config.seed, 0));
  result.lambdas = training.view_lambdas();
  std::mt19937_64 order_rng(derive_seed(snl_config.seed, 1));
  std::mt19937_64 sample_rng(derive_seed(snl_config.seed, 2));

  std::vector<Index> positions(static_cast<std::size_t>(training.size()));
  std::iota(positions.begin(), positions.end(), Index{0});
  std::vector<Index> order = positions;

  auto params = result.model.parameters();
  AdamState state(params);
  const AdamConfig adam = snl_config.adam();

  DgnModel best = result.model;
  double best_loss = std::numeric_limits<double>::infinity();
  Index since_best = 0;

  for (Index epoch = 1; epoch <= snl_config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double total = 0.0;
    for (Index s : order) {
      try {
        ad::Tape tape;
        const auto vars = bind_parameters(tape, result.model);
        const Var cbt = forward_cbt(tape, vars, training.subject(s));
        const auto sample = sample_subset(sample_rng, positions, snl_config.sample_size);
        const Var loss = snl_loss(cbt, training, sample, result.lambdas);
        const auto grads = tape.backward(loss);
        adam_step(params, grads, state, adam);
        total += loss.value().item();
      } catch (const NumericalError& e) {
        // Nothing was updated for the failing step.
        TrainResult last = result;
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": " + e.what(),
                               std::move(last));
      }
    }
    const double mean = total / static_cast<double>(training.size());
    result.loss_history.push_back(mean);

    if (mean < best_loss) {
      best_loss = mean;
      result.best_epoch = epoch;
      since_best = 0;
      if (snl_config.early_stop_patience) best = result.model;
    } else if (snl_config.early_stop_patience && ++since_best >= *snl_config.early_stop_patience) {
      break;
    }
  }
  if (snl_config.early_stop_patience) result.model = best;
  return result;
}

TrainResult train(const Population& population, const FoldSplit& fold, const ModelConfig& model_config,
                  const SnlConfig& snl_config) {
  if (fold.train_indices.empty()) throw ConfigError("fold " + std::to_string(fold.fold_id) + " has no training subjects");
  return train(population.subset(fold.train_indices), model_config, snl_config);
}

void write_loss_history(const std::filesystem::path& path, const std::vector<double>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch\tmean_snl\n";
  char buf[48];
  for (std::size_t e = 0; e < history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\n", e + 1, history[e]);
    out << buf;
  }
}

}  // namespace dgn
