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

// Tape-based reverse-mode differentiation over dense row-major tensors.
//
// A Tape records every operation in execution order, so parents always precede
// their children and backward() is a single reverse sweep. Values are 64-bit
// and must stay finite: any op producing NaN/Inf throws NumericalError.
//
// Broadcasting is limited to leading dimensions. In add/subtract the smaller
// operand's shape must be a suffix of the larger one's; in matmul the batch
// dimensions (all but the last two) broadcast numpy-style, sizes equal or 1.

#ifndef DGN_AUTODIFF_HPP
#define DGN_AUTODIFF_HPP

#include "dgn/core.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dgn::ad {

using Shape = std::vector<Index>;

std::string to_string(const Shape& shape);
Index shape_size(const Shape& shape);

/// Dense row-major tensor. A rank-0 tensor holds one scalar.
class Tensor {
 public:
  using RowMap = Eigen::Map<RowMatrix>;
  using ConstRowMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, Vector values);

  static Tensor scalar(double value);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);
  static Tensor from_vector(const Eigen::Ref<const Vector>& v);

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  Index size() const { return values_.size(); }
  bool empty() const { return shape_.empty() && values_.size() == 0; }

  const Vector& values() const { return values_; }
  Vector& values() { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  double operator[](Index k) const { return values_(k); }
  double& operator[](Index k) { return values_(k); }

  /// Value of a rank-0 (or single-element) tensor.
  double item() const;

  /// Rank-2 view; throws ShapeError for other ranks.
  ConstRowMap matrix() const;
  RowMap matrix();
  RowMatrix to_matrix() const { return matrix(); }

 private:
  Shape shape_;
  Vector values_;
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients indexed by parameter slot in registration order.
using Gradients = std::vector<Tensor>;

/// Per-node gradient buffers filled during a reverse sweep; additive on fan-out.
class GradAccumulator {
 public:
  explicit GradAccumulator(std::size_t nodes) : grads_(nodes), present_(nodes, 0) {}

  void add(std::size_t id, const Shape& shape, const Eigen::Ref<const Vector>& g);
  bool has(std::size_t id) const { return present_[id] != 0; }
  const Tensor& get(std::size_t id) const { return grads_[id]; }
  Tensor take(std::size_t id) { return std::move(grads_[id]); }

 private:
  std::vector<Tensor> grads_;
  std::vector<char> present_;
};

class Tape {
 public:
  /// Pushes `grad_out` to the parents through the accumulator.
  using BackwardFn = std::function<void(const Tensor& grad_out, GradAccumulator& acc)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Registers a leaf that receives a gradient.
  Var parameter(Tensor value);

  /// Appends a node. Throws NumericalError if `value` is not finite.
  Var record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward,
             const char* op_name);

  /// Marks the node as the input of a non-differentiable point (abs, relu at 0).
  void mark_kink(std::size_t input_id) { kink_inputs_.push_back(input_id); }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t parameter_count() const { return parameters_.size(); }
  const std::vector<std::size_t>& parameters() const { return parameters_; }

  /// Reverse sweep from a scalar node. Every registered parameter gets a
  /// gradient of its own shape; unreachable ones get explicit zeros.
  Gradients backward(Var loss) const;

  /// Sign (-1, 0, +1) of every element entering an abs or relu, in record
  /// order. Two evaluations with different signatures straddle a kink.
  std::vector<signed char> kink_signature() const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> parameters_;
  std::vector<std::size_t> kink_inputs_;
};

// ---------------------------------------------------------------------------
// Forward ops

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var subtract(Var a, Var b);
Var scalar_mul(Var a, double c);
Var elementwise_abs(Var a);
Var relu(Var a);
Var sum_axis(Var a, Index axis);
Var mean_axis(Var a, Index axis);
/// Sum of all entries as a rank-0 tensor.
Var sum(Var a);
Var frobenius_norm(Var a);
Var reshape(Var a, Shape shape);
/// Swaps the first two axes (matrix transpose for rank 2).
Var transpose_12(Var a);
/// Rows of `a` along axis 0 picked by `indices` (repeats allowed).
Var gather_rows(Var a, std::vector<Index> indices);
/// Prepends an axis of length `count`, replicating `a` along it.
Var broadcast_leading(Var a, Index count);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return subtract(a, b); }
inline Var operator*(double c, Var a) { return scalar_mul(a, c); }
inline Var operator*(Var a, double c) { return scalar_mul(a, c); }

/// Keeps norm gradients finite at the origin: d||x|| = x / max(||x||, eps).
inline constexpr double kNormEpsilon = 1e-12;

// ---------------------------------------------------------------------------
// Finite-difference oracle

struct GradientCheckReport {
  double max_relative_error = 0.0;
  std::size_t compared = 0;
  /// Entries whose +-h stencil crosses an abs/relu kink.
  std::size_t excluded = 0;
  // Location of the worst entry.
  std::size_t worst_parameter = 0;
  Index worst_entry = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

using ScalarFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares tape gradients of `f` at `params` with central differences
/// (f(p + h) - f(p - h)) / 2h entry by entry. The relative error uses the
/// denominator max(|analytic|, |numeric|, 1e-8); the discrepancy it divides
/// is taken net of the evaluation rounding noise, 16 ulps of |f| over h.
GradientCheckReport finite_difference_check(const ScalarFunction& f,
                                             const std::vector<Tensor>& params, double h);

}  // namespace dgn::ad

#endif  // DGN_AUTODIFF_HPP
