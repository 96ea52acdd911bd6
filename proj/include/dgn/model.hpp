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

// Edge-conditioned graph convolution network mapping one subject's
// multi-view tensor to a template (CBT) matrix.
//
// Layer l maps node embeddings V (n_r x d_in) to
//
//   v_i' = Theta v_i + mean_{j != i} F(e_ij) v_j + b
//
// where F is a small dense filter network turning the n_v edge attributes
// e_ij into a d_out x d_in matrix. Layers are separated by ReLU; the final
// layer is linear. The template is C_ij = sum_z |V_iz - V_jz| over the final
// embeddings.

#ifndef DGN_MODEL_HPP
#define DGN_MODEL_HPP

#include "dgn/autodiff.hpp"
#include "dgn/mvbn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dgn {

struct ModelConfig {
  /// Embedding widths [d_0, d_1, ..., d_L]; d_0 must be 1 (all-ones features).
  std::vector<Index> dims = {1, 36, 24, 5};
  Index n_views = 4;
  /// Width of an optional hidden ReLU layer inside every filter network; 0 = none.
  Index filter_hidden = 0;

  Index n_layers() const { return static_cast<Index>(dims.size()) - 1; }
  void validate() const;
};

/// Maps edge attributes (n_v) to a flattened row-major d_out x d_in matrix.
struct FilterNet {
  RowMatrix hidden_weight;  // n_v x h, empty without a hidden layer
  Vector hidden_bias;       // h
  RowMatrix weight;         // (h or n_v) x (d_out * d_in)
  Vector bias;              // d_out * d_in

  bool has_hidden() const { return hidden_weight.size() > 0; }
};

struct DgnLayer {
  Index in_dim = 0;
  Index out_dim = 0;
  RowMatrix root_weight;  // d_out x d_in
  Vector bias;            // d_out
  FilterNet filter;
};

/// Template matrix: symmetric, non-negative, zero diagonal.
using CbtMatrix = Matrix;

class DgnModel {
 public:
  DgnModel() = default;
  DgnModel(ModelConfig config, std::vector<DgnLayer> layers, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<DgnLayer>& layers() const { return layers_; }
  std::vector<DgnLayer>& layers() { return layers_; }
  std::uint64_t seed() const { return seed_; }

  /// Flat writable views over every parameter, in a fixed canonical order.
  std::vector<Eigen::Map<Vector>> parameters();
  /// Names matching parameters(), e.g. "layer1.filter.weight".
  std::vector<std::string> parameter_names() const;
  /// Tensors (with shapes) matching parameters().
  std::vector<ad::Tensor> parameter_tensors() const;
  /// Overwrites every parameter from tensors in canonical order.
  void set_parameters(const std::vector<ad::Tensor>& tensors);
  Index parameter_count() const;

 private:
  ModelConfig config_;
  std::vector<DgnLayer> layers_;
  std::uint64_t seed_ = 0;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
DgnModel init_parameters(const ModelConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Tape-level forward pass

/// A layer's parameters bound to tape variables.
struct LayerVars {
  Index in_dim = 0;
  Index out_dim = 0;
  ad::Var root_weight;
  ad::Var bias;
  bool has_hidden = false;
  ad::Var hidden_weight;
  ad::Var hidden_bias;
  ad::Var filter_weight;
  ad::Var filter_bias;
};

/// Registers every model parameter on `tape` as a gradient leaf, in the order
/// of DgnModel::parameters().
std::vector<LayerVars> bind_parameters(ad::Tape& tape, const DgnModel& model);

/// Builds LayerVars from already-recorded variables in canonical order.
std::vector<LayerVars> layer_vars_from(const ModelConfig& config, std::span<const ad::Var> vars);

/// Edge attributes of a fully connected graph with self-loops removed: the
/// attribute rows are ordered (i, j) for i ascending, then j != i ascending.
struct EdgeInputs {
  Index n_rois = 0;
  ad::Var attributes;              // [n_r (n_r - 1), n_v]
  std::vector<Index> neighbor_of;  // j for each attribute row
};

EdgeInputs make_edge_inputs(ad::Tape& tape, const SubjectTensor& subject);

/// One edge-conditioned convolution: [n_r, d_in] -> [n_r, d_out].
ad::Var layer_forward(const LayerVars& layer, ad::Var node_embeddings, const EdgeInputs& edges);

/// Final node embeddings V^L: [n_r, d_L].
ad::Var forward_embeddings(const std::vector<LayerVars>& layers, const EdgeInputs& edges);

/// Template from embeddings: C_ij = sum_z |V_iz - V_jz|, as [n_r, n_r].
ad::Var cbt_from_embeddings(ad::Var embeddings);

ad::Var forward_cbt(ad::Tape& tape, const std::vector<LayerVars>& layers, const SubjectTensor& subject);

/// Inference without gradients.
CbtMatrix forward_cbt(const DgnModel& model, const SubjectTensor& subject);

// ---------------------------------------------------------------------------
// Checkpoints

/// JSON checkpoint with config, seed and all parameters. Doubles are written
/// as shortest round-trip decimals, so save/load is bit-exact.
void save_checkpoint(const DgnModel& model, const std::filesystem::path& path);
DgnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace dgn

#endif  // DGN_MODEL_HPP
