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

#include "dgn/model.hpp"

#include <random>

namespace dgn {

using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
  if (dims.size() < 2) throw ConfigError("model needs at least one layer (dims of length >= 2)");
  if (dims.front() != 1) throw ConfigError("d_0 must be 1 (all-ones node features)");
  for (Index d : dims) {
    if (d < 1) throw ConfigError("layer widths must be >= 1");
  }
  if (n_views < 1) throw ConfigError("n_views must be >= 1");
  if (filter_hidden < 0) throw ConfigError("filter_hidden must be >= 0");
}

DgnModel::DgnModel(ModelConfig config, std::vector<DgnLayer> layers, std::uint64_t seed)
    : config_(std::move(config)), layers_(std::move(layers)), seed_(seed) {
  config_.validate();
  if (static_cast<Index>(layers_.size()) != config_.n_layers()) {
    throw ConfigError("layer count does not match dims");
  }
  for (Index l = 0; l < config_.n_layers(); ++l) {
    const DgnLayer& layer = layers_[static_cast<std::size_t>(l)];
    const Index in = config_.dims[static_cast<std::size_t>(l)];
    const Index out = config_.dims[static_cast<std::size_t>(l + 1)];
    const Index filter_in = config_.filter_hidden > 0 ? config_.filter_hidden : config_.n_views;
    const bool ok = layer.in_dim == in && layer.out_dim == out && layer.root_weight.rows() == out &&
                    layer.root_weight.cols() == in && layer.bias.size() == out &&
                    layer.filter.weight.rows() == filter_in && layer.filter.weight.cols() == out * in &&
                    layer.filter.bias.size() == out * in &&
                    (config_.filter_hidden == 0
                         ? !layer.filter.has_hidden()
                         : layer.filter.hidden_weight.rows() == config_.n_views &&
                               layer.filter.hidden_weight.cols() == config_.filter_hidden &&
                               layer.filter.hidden_bias.size() == config_.filter_hidden);
    if (!ok) throw ShapeError("layer " + std::to_string(l + 1) + " parameters do not match the configured dims");
  }
}

std::vector<Eigen::Map<Vector>> DgnModel::parameters() {
  std::vector<Eigen::Map<Vector>> out;
  auto push = [&out](auto& m) { out.emplace_back(m.data(), m.size()); };
  for (auto& layer : layers_) {
    push(layer.root_weight);
    push(layer.bias);
    if (layer.filter.has_hidden()) {
      push(layer.filter.hidden_weight);
      push(layer.filter.hidden_bias);
    }
    push(layer.filter.weight);
    push(layer.filter.bias);
  }
  return out;
}

std::vector<std::string> DgnModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer" + std::to_string(l + 1) + ".";
    names.push_back(p + "root_weight");
    names.push_back(p + "bias");
    if (layers_[l].filter.has_hidden()) {
      names.push_back(p + "filter.hidden_weight");
      names.push_back(p + "filter.hidden_bias");
    }
    names.push_back(p + "filter.weight");
    names.push_back(p + "filter.bias");
  }
  return names;
}

std::vector<Tensor> DgnModel::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const auto& layer : layers_) {
    out.push_back(Tensor::from_matrix(layer.root_weight));
    out.push_back(Tensor::from_vector(layer.bias));
    if (layer.filter.has_hidden()) {
      out.push_back(Tensor::from_matrix(layer.filter.hidden_weight));
      out.push_back(Tensor::from_vector(layer.filter.hidden_bias));
    }
    out.push_back(Tensor::from_matrix(layer.filter.weight));
    out.push_back(Tensor::from_vector(layer.filter.bias));
  }
  return out;
}

void DgnModel::set_parameters(const std::vector<Tensor>& tensors) {
  auto views = parameters();
  if (views.size() != tensors.size()) throw ShapeError("set_parameters: wrong tensor count");
  for (std::size_t k = 0; k < views.size(); ++k) {
    if (views[k].size() != tensors[k].size()) throw ShapeError("set_parameters: size mismatch at " + std::to_string(k));
    views[k] = tensors[k].values();
  }
}

Index DgnModel::parameter_count() const {
  Index n = 0;
  for (const auto& t : parameter_tensors()) n += t.size();
  return n;
}

DgnModel init_parameters(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](RowMatrix& m, Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = dist(rng);
  };

  std::vector<DgnLayer> layers;
  for (Index l = 0; l < config.n_layers(); ++l) {
    DgnLayer layer;
    layer.in_dim = config.dims[static_cast<std::size_t>(l)];
    layer.out_dim = config.dims[static_cast<std::size_t>(l + 1)];
    const Index flat = layer.in_dim * layer.out_dim;

    layer.root_weight.resize(layer.out_dim, layer.in_dim);
    uniform(layer.root_weight, layer.in_dim);
    layer.bias = Vector::Zero(layer.out_dim);

    Index filter_in = config.n_views;
    if (config.filter_hidden > 0) {
      layer.filter.hidden_weight.resize(config.n_views, config.filter_hidden);
      uniform(layer.filter.hidden_weight, config.n_views);
      layer.filter.hidden_bias = Vector::Zero(config.filter_hidden);
      filter_in = config.filter_hidden;
    }
    layer.filter.weight.resize(filter_in, flat);
    uniform(layer.filter.weight, filter_in);
    layer.filter.bias = Vector::Zero(flat);
    layers.push_back(std::move(layer));
  }
  return DgnModel(config, std::move(layers), seed);
}

std::vector<LayerVars> layer_vars_from(const ModelConfig& config, std::span<const Var> vars) {
  std::vector<LayerVars> out;
  std::size_t k = 0;
  auto next = [&]() {
    if (k >= vars.size()) throw ShapeError("layer_vars_from: too few variables");
    return vars[k++];
  };
  for (Index l = 0; l < config.n_layers(); ++l) {
    LayerVars lv;
    lv.in_dim = config.dims[static_cast<std::size_t>(l)];
    lv.out_dim = config.dims[static_cast<std::size_t>(l + 1)];
    lv.root_weight = next();
    lv.bias = next();
    lv.has_hidden = config.filter_hidden > 0;
    if (lv.has_hidden) {
      lv.hidden_weight = next();
      lv.hidden_bias = next();
    }
    lv.filter_weight = next();
    lv.filter_bias = next();
    out.push_back(lv);
  }
  if (k != vars.size()) throw ShapeError("layer_vars_from: too many variables");
  return out;
}

std::vector<LayerVars> bind_parameters(ad::Tape& tape, const DgnModel& model) {
  std::vector<Var> vars;
  for (auto& t : model.parameter_tensors()) vars.push_back(tape.parameter(std::move(t)));
  return layer_vars_from(model.config(), vars);
}

EdgeInputs make_edge_inputs(ad::Tape& tape, const SubjectTensor& subject) {
  const Index n = subject.n_rois();
  if (n < 2) throw ShapeError("edge-conditioned convolution needs at least 2 nodes");
  const Index nv = subject.n_views();
  Tensor attrs({n * (n - 1), nv});
  EdgeInputs edges;
  edges.n_rois = n;
  edges.neighbor_of.reserve(static_cast<std::size_t>(n * (n - 1)));
  auto x = attrs.matrix();
  Index row = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      for (Index v = 0; v < nv; ++v) x(row, v) = subject.view(v)(i, j);
      edges.neighbor_of.push_back(j);
      ++row;
    }
  }
  edges.attributes = tape.constant(std::move(attrs));
  return edges;
}

Var layer_forward(const LayerVars& layer, Var node_embeddings, const EdgeInputs& edges) {
  const Index n = edges.n_rois;
  if (n < 2) throw ShapeError("edge-conditioned convolution needs at least 2 nodes");
  const ad::Shape expected{n, layer.in_dim};
  if (node_embeddings.shape() != expected) {
    throw ShapeError("layer_forward: embeddings " + ad::to_string(node_embeddings.shape()) + ", expected " +
                     ad::to_string(expected));
  }
  const Index n_views = edges.attributes.value().dim(1);
  const Index filter_in = layer.has_hidden ? layer.hidden_weight.value().dim(0) : layer.filter_weight.value().dim(0);
  if (filter_in != n_views) {
    throw ShapeError("layer_forward: filter expects " + std::to_string(filter_in) + " edge attributes, got " +
                     std::to_string(n_views));
  }

  // Edge-specific weight matrices Theta_ij, one per (i, j != i).
  Var hidden = edges.attributes;
  if (layer.has_hidden) hidden = ad::relu(ad::matmul(hidden, layer.hidden_weight) + layer.hidden_bias);
  const Var filters = ad::matmul(hidden, layer.filter_weight) + layer.filter_bias;
  const Var theta = ad::reshape(filters, {n, n - 1, layer.out_dim, layer.in_dim});

  const Var neighbors = ad::reshape(ad::gather_rows(node_embeddings, edges.neighbor_of), {n, n - 1, layer.in_dim, 1});
  const Var messages = ad::matmul(theta, neighbors);  // [n, n-1, d_out, 1]
  const Var aggregated = ad::reshape(ad::mean_axis(messages, 1), {n, layer.out_dim});

  const Var root = ad::matmul(node_embeddings, ad::transpose_12(layer.root_weight));
  return root + aggregated + layer.bias;
}

Var forward_embeddings(const std::vector<LayerVars>& layers, const EdgeInputs& edges) {
  if (layers.empty()) throw ShapeError("forward pass needs at least one layer");
  ad::Tape& tape = edges.attributes.tape();
  Var v = tape.constant(Tensor({edges.n_rois, layers.front().in_dim}, Vector::Ones(edges.n_rois * layers.front().in_dim)));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    v = layer_forward(layers[l], v, edges);
    if (l + 1 < layers.size()) v = ad::relu(v);
  }
  return v;
}

Var cbt_from_embeddings(Var embeddings) {
  if (embeddings.value().rank() != 2) throw ShapeError("embeddings must be rank 2");
  const Index n = embeddings.value().dim(0);
  // replicated[x][y] = V[y]; its 1-2 transpose holds V[x].
  const Var replicated = ad::broadcast_leading(embeddings, n);
  const Var diff = ad::elementwise_abs(ad::transpose_12(replicated) - replicated);
  return ad::sum_axis(diff, 2);
}

Var forward_cbt(ad::Tape& tape, const std::vector<LayerVars>& layers, const SubjectTensor& subject) {
  const EdgeInputs edges = make_edge_inputs(tape, subject);
  return cbt_from_embeddings(forward_embeddings(layers, edges));
}

CbtMatrix forward_cbt(const DgnModel& model, const SubjectTensor& subject) {
  if (subject.n_views() != model.config().n_views) {
    throw ShapeError("subject '" + subject.id() + "' has " + std::to_string(subject.n_views()) +
                     " views, model expects " + std::to_string(model.config().n_views));
  }
  ad::Tape tape;
  std::vector<Var> vars;
  for (auto& t : model.parameter_tensors()) vars.push_back(tape.constant(std::move(t)));
  const Var c = forward_cbt(tape, layer_vars_from(model.config(), vars), subject);
  return c.value().to_matrix();
}

}  // namespace dgn
