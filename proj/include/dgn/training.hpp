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

#ifndef DGN_TRAINING_HPP
#define DGN_TRAINING_HPP

#include "dgn/model.hpp"
#include "dgn/mvbn.hpp"

#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace dgn {

struct AdamConfig {
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct SnlConfig {
  /// |S|: training subjects drawn per loss evaluation.
  Index sample_size = 10;
  double learning_rate = 5e-4;
  Index epochs = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 0;
  /// Stop after this many epochs without a new best mean loss and return the
  /// best snapshot.
  std::optional<Index> early_stop_patience;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }
  void validate(Index training_size) const;
};

struct AdamState {
  std::vector<Vector> first_moment;
  std::vector<Vector> second_moment;
  long step = 0;

  AdamState() = default;
  explicit AdamState(const std::vector<Eigen::Map<Vector>>& params);
};

/// One bias-corrected Adam update of a single parameter block at step t >= 1.
inline void adam_update(Eigen::Ref<Vector> x, const Eigen::Ref<const Vector>& grad, Eigen::Ref<Vector> m,
                        Eigen::Ref<Vector> v, long t, const AdamConfig& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseAbs2();
  const double m_corr = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double v_corr = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  x.array() -= c.learning_rate * (m.array() / m_corr) / ((v.array() / v_corr).sqrt() + c.epsilon);
}

/// Updates every parameter in place. Throws NumericalError, naming the block
/// and entry, if any gradient is non-finite; nothing is modified in that case.
void adam_step(std::vector<Eigen::Map<Vector>>& params, const ad::Gradients& grads, AdamState& state,
               const AdamConfig& config);

/// sum_v sum_{i in S} lambda_v * ||C - T_i^v||_F, on the tape of `cbt`.
/// `sample` holds positions into `population`.
ad::Var snl_loss(ad::Var cbt, const Population& population, std::span<const Index> sample, const Vector& lambdas);

/// Uniform draw of `sample_size` distinct positions, returned in ascending order.
std::vector<Index> sample_subset(std::mt19937_64& rng, std::span<const Index> positions, Index sample_size);

struct TrainResult {
  DgnModel model;
  /// Mean SNL over training subjects, one entry per completed epoch.
  std::vector<double> loss_history;
  Index best_epoch = 0;
  Vector lambdas;
};

/// Raised when the loss or gradients become non-finite; carries the last
/// finite model and the history up to that point.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, TrainResult last) : NumericalError(what), last_(std::move(last)) {}
  const TrainResult& last_finite() const { return last_; }

 private:
  TrainResult last_;
};

/// Trains on every subject of `training` (lambda from those subjects only).
/// Each epoch visits the subjects in a freshly shuffled order and takes one
/// Adam step per subject against a fresh random subset S.
TrainResult train(const Population& training, const ModelConfig& model_config, const SnlConfig& snl_config);

/// Trains on the fold's training subjects only.
TrainResult train(const Population& population, const FoldSplit& fold, const ModelConfig& model_config,
                  const SnlConfig& snl_config);

/// Two-column text table: epoch (1-based) and mean SNL.
void write_loss_history(const std::filesystem::path& path, const std::vector<double>& history);

}  // namespace dgn

#endif  // DGN_TRAINING_HPP
