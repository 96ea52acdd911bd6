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

#include "dgn/autodiff.hpp"

#include <algorithm>
#include <numeric>

namespace dgn::ad {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), values_(Vector::Zero(shape_size(shape_))) {}

Tensor::Tensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("tensor of shape " + to_string(shape_) + " given " +
                     std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor({}, Vector::Constant(1, value)); }

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Tensor t({m.rows(), m.cols()});
  t.matrix() = m;
  return t;
}

Tensor Tensor::from_vector(const Eigen::Ref<const Vector>& v) { return Tensor({v.size()}, v); }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return values_(0);
}

Tensor::ConstRowMap Tensor::matrix() const {
  if (rank() != 2) throw ShapeError("matrix view of rank-" + std::to_string(rank()) + " tensor");
  return ConstRowMap(values_.data(), shape_[0], shape_[1]);
}

Tensor::RowMap Tensor::matrix() {
  if (rank() != 2) throw ShapeError("matrix view of rank-" + std::to_string(rank()) + " tensor");
  return RowMap(values_.data(), shape_[0], shape_[1]);
}

const Tensor& Var::value() const { return tape_->value(id_); }

// ---------------------------------------------------------------------------
// Tape

void GradAccumulator::add(std::size_t id, const Shape& shape, const Eigen::Ref<const Vector>& g) {
  if (present_[id]) {
    grads_[id].values() += g;
  } else {
    grads_[id] = Tensor(shape, g);
    present_[id] = 1;
  }
}

Var Tape::constant(Tensor value) { return record(std::move(value), {}, nullptr, "constant"); }

Var Tape::parameter(Tensor value) {
  Var v = record(std::move(value), {}, nullptr, "parameter");
  parameters_.push_back(v.id());
  return v;
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward,
                 const char* op_name) {
  if (!value.values().allFinite()) {
    throw NumericalError(std::string(op_name) + " produced a non-finite value (shape " +
                         to_string(value.shape()) + ")");
  }
  nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (&loss.tape() != this) throw std::invalid_argument("backward: loss belongs to another tape");
  const Tensor& out = value(loss.id());
  if (out.size() != 1) throw ShapeError("backward: loss must be scalar, got " + to_string(out.shape()));

  GradAccumulator acc(nodes_.size());
  acc.add(loss.id(), out.shape(), Vector::Ones(1));
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    if (!acc.has(id) || !nodes_[id].backward) continue;
    nodes_[id].backward(acc.get(id), acc);
  }

  Gradients grads;
  grads.reserve(parameters_.size());
  for (std::size_t p : parameters_) {
    grads.push_back(acc.has(p) ? acc.take(p) : Tensor(value(p).shape()));
  }
  return grads;
}

std::vector<signed char> Tape::kink_signature() const {
  std::vector<signed char> sig;
  for (std::size_t id : kink_inputs_) {
    const Vector& x = value(id).values();
    for (Index k = 0; k < x.size(); ++k) sig.push_back(static_cast<signed char>((x(k) > 0) - (x(k) < 0)));
  }
  return sig;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

using ConstMat = Eigen::Map<const RowMatrix>;
using Mat = Eigen::Map<RowMatrix>;

void require_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument(std::string(op) + ": operands on different tapes");
}

bool is_suffix(const Shape& small, const Shape& large) {
  if (small.size() > large.size()) return false;
  return std::equal(small.rbegin(), small.rend(), large.rbegin());
}

// a (+/-) b where one shape is a suffix of the other.
Var add_impl(Var a, Var b, double sign, const char* op) {
  require_same_tape(a, b, op);
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  Tape& tape = a.tape();
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();

  if (ta.shape() == tb.shape()) {
    Tensor out(ta.shape(), ta.values() + sign * tb.values());
    const Shape shape = ta.shape();
    return tape.record(std::move(out), {ia, ib},
                       [ia, ib, sign, shape](const Tensor& g, GradAccumulator& acc) {
                         acc.add(ia, shape, g.values());
                         acc.add(ib, shape, sign * g.values());
                       },
                       op);
  }

  const bool b_small = is_suffix(tb.shape(), ta.shape());
  if (!b_small && !is_suffix(ta.shape(), tb.shape())) {
    throw ShapeError(std::string(op) + ": shapes " + to_string(ta.shape()) + " and " +
                     to_string(tb.shape()) + " do not broadcast over leading dimensions");
  }
  const Tensor& big = b_small ? ta : tb;
  const Tensor& small = b_small ? tb : ta;
  const Index block = small.size();
  const Index blocks = big.size() / std::max<Index>(block, 1);
  const double sign_big = b_small ? 1.0 : sign;
  const double sign_small = b_small ? sign : 1.0;

  Tensor out(big.shape());
  for (Index r = 0; r < blocks; ++r) {
    out.values().segment(r * block, block) =
        sign_big * big.values().segment(r * block, block) + sign_small * small.values();
  }
  const std::size_t ibig = b_small ? ia : ib;
  const std::size_t ismall = b_small ? ib : ia;
  const Shape big_shape = big.shape();
  const Shape small_shape = small.shape();
  return tape.record(
      std::move(out), {ia, ib},
      [=](const Tensor& g, GradAccumulator& acc) {
        acc.add(ibig, big_shape, sign_big * g.values());
        Vector reduced = ConstMat(g.data(), blocks, block).colwise().sum().transpose();
        acc.add(ismall, small_shape, sign_small * reduced);
      },
      op);
}

// Decomposes `shape` around `axis` into (outer, length, inner).
struct AxisSplit {
  Index outer, length, inner;
};

AxisSplit split_axis(const Shape& shape, Index axis, const char* op) {
  if (axis < 0 || axis >= static_cast<Index>(shape.size())) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape));
  }
  AxisSplit s{1, shape[static_cast<std::size_t>(axis)], 1};
  for (Index d = 0; d < axis; ++d) s.outer *= shape[static_cast<std::size_t>(d)];
  for (Index d = axis + 1; d < static_cast<Index>(shape.size()); ++d) s.inner *= shape[static_cast<std::size_t>(d)];
  return s;
}

Var reduce_axis(Var a, Index axis, double scale, const char* op) {
  const Tensor& ta = a.value();
  const AxisSplit s = split_axis(ta.shape(), axis, op);
  Shape out_shape = ta.shape();
  out_shape.erase(out_shape.begin() + axis);

  // Terms are summed in ascending order.
  Tensor out(out_shape);
  std::vector<double> terms(static_cast<std::size_t>(s.length));
  for (Index o = 0; o < s.outer; ++o) {
    ConstMat slab(ta.data() + o * s.length * s.inner, s.length, s.inner);
    for (Index c = 0; c < s.inner; ++c) {
      for (Index l = 0; l < s.length; ++l) terms[static_cast<std::size_t>(l)] = slab(l, c);
      std::sort(terms.begin(), terms.end());
      out[o * s.inner + c] = scale * std::accumulate(terms.begin(), terms.end(), 0.0);
    }
  }
  const std::size_t ia = a.id();
  const Shape in_shape = ta.shape();
  return a.tape().record(
      std::move(out), {ia},
      [=](const Tensor& g, GradAccumulator& acc) {
        Vector ga(s.outer * s.length * s.inner);
        for (Index o = 0; o < s.outer; ++o) {
          const auto gs = g.values().segment(o * s.inner, s.inner);
          for (Index l = 0; l < s.length; ++l) {
            ga.segment((o * s.length + l) * s.inner, s.inner) = scale * gs;
          }
        }
        acc.add(ia, in_shape, ga);
      },
      op);
}

}  // namespace

Var add(Var a, Var b) { return add_impl(a, b, 1.0, "add"); }
Var subtract(Var a, Var b) { return add_impl(a, b, -1.0, "subtract"); }

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (ta.rank() < 2 || tb.rank() < 2) {
    throw ShapeError("matmul needs rank >= 2 operands, got " + to_string(ta.shape()) + " and " +
                     to_string(tb.shape()));
  }
  const Index m = ta.dim(ta.rank() - 2);
  const Index k = ta.dim(ta.rank() - 1);
  const Index n = tb.dim(tb.rank() - 1);
  if (tb.dim(tb.rank() - 2) != k) {
    throw ShapeError("matmul: inner dimensions differ in " + to_string(ta.shape()) + " x " +
                     to_string(tb.shape()));
  }

  // Batch broadcasting, aligned from the right.
  const Shape batch_a(ta.shape().begin(), ta.shape().end() - 2);
  const Shape batch_b(tb.shape().begin(), tb.shape().end() - 2);
  const std::size_t batch_rank = std::max(batch_a.size(), batch_b.size());
  Shape batch(batch_rank, 1);
  std::vector<Index> stride_a(batch_rank, 0), stride_b(batch_rank, 0);
  {
    Index sa = 1, sb = 1;
    for (std::size_t r = 0; r < batch_rank; ++r) {
      const std::size_t d = batch_rank - 1 - r;
      const Index da = r < batch_a.size() ? batch_a[batch_a.size() - 1 - r] : 1;
      const Index db = r < batch_b.size() ? batch_b[batch_b.size() - 1 - r] : 1;
      if (da != db && da != 1 && db != 1) {
        throw ShapeError("matmul: batch dimensions of " + to_string(ta.shape()) + " and " +
                         to_string(tb.shape()) + " do not broadcast");
      }
      batch[d] = std::max(da, db);
      stride_a[d] = da == 1 ? 0 : sa;
      stride_b[d] = db == 1 ? 0 : sb;
      sa *= da;
      sb *= db;
    }
  }
  const Index batches = shape_size(batch);
  std::vector<std::pair<Index, Index>> offsets(static_cast<std::size_t>(batches));
  for (Index t = 0; t < batches; ++t) {
    Index rem = t, oa = 0, ob = 0;
    for (std::size_t r = batch_rank; r-- > 0;) {
      const Index idx = rem % batch[r];
      rem /= batch[r];
      oa += idx * stride_a[r];
      ob += idx * stride_b[r];
    }
    offsets[static_cast<std::size_t>(t)] = {oa * m * k, ob * k * n};
  }

  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(n);
  Tensor out(out_shape);
  for (Index t = 0; t < batches; ++t) {
    const auto [oa, ob] = offsets[static_cast<std::size_t>(t)];
    Mat(out.data() + t * m * n, m, n).noalias() = ConstMat(ta.data() + oa, m, k) * ConstMat(tb.data() + ob, k, n);
  }

  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  Tape* tape = &a.tape();
  return tape->record(
      std::move(out), {ia, ib},
      [=](const Tensor& g, GradAccumulator& acc) {
        const Tensor& va = tape->value(ia);
        const Tensor& vb = tape->value(ib);
        Tensor ga(va.shape());
        Tensor gb(vb.shape());
        for (Index t = 0; t < batches; ++t) {
          const auto [oa, ob] = offsets[static_cast<std::size_t>(t)];
          ConstMat gt(g.data() + t * m * n, m, n);
          Mat(ga.data() + oa, m, k).noalias() += gt * ConstMat(vb.data() + ob, k, n).transpose();
          Mat(gb.data() + ob, k, n).noalias() += ConstMat(va.data() + oa, m, k).transpose() * gt;
        }
        acc.add(ia, ga.shape(), ga.values());
        acc.add(ib, gb.shape(), gb.values());
      },
      "matmul");
}

Var scalar_mul(Var a, double c) {
  const std::size_t ia = a.id();
  const Shape shape = a.shape();
  return a.tape().record(Tensor(shape, c * a.value().values()), {ia},
                         [=](const Tensor& g, GradAccumulator& acc) { acc.add(ia, shape, c * g.values()); },
                         "scalar_mul");
}

Var elementwise_abs(Var a) {
  const std::size_t ia = a.id();
  const Shape shape = a.shape();
  Tape* tape = &a.tape();
  tape->mark_kink(ia);
  return tape->record(Tensor(shape, a.value().values().cwiseAbs()), {ia},
                      [=](const Tensor& g, GradAccumulator& acc) {
                        const Vector& x = tape->value(ia).values();
                        // Subgradient at 0 is 0.
                        const Vector sign = x.unaryExpr([](double v) { return double((v > 0) - (v < 0)); });
                        acc.add(ia, shape, sign.cwiseProduct(g.values()));
                      },
                      "abs");
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  const Shape shape = a.shape();
  Tape* tape = &a.tape();
  tape->mark_kink(ia);
  return tape->record(Tensor(shape, a.value().values().cwiseMax(0.0)), {ia},
                      [=](const Tensor& g, GradAccumulator& acc) {
                        const Vector& x = tape->value(ia).values();
                        const Vector mask = x.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
                        acc.add(ia, shape, mask.cwiseProduct(g.values()));
                      },
                      "relu");
}

Var sum_axis(Var a, Index axis) { return reduce_axis(a, axis, 1.0, "sum_axis"); }

Var mean_axis(Var a, Index axis) {
  const Index len = split_axis(a.shape(), axis, "mean_axis").length;
  if (len == 0) throw ShapeError("mean_axis over an empty axis");
  return reduce_axis(a, axis, 1.0 / static_cast<double>(len), "mean_axis");
}

Var sum(Var a) {
  const std::size_t ia = a.id();
  const Shape shape = a.shape();
  return a.tape().record(Tensor::scalar(a.value().values().sum()), {ia},
                         [=](const Tensor& g, GradAccumulator& acc) {
                           acc.add(ia, shape, Vector::Constant(shape_size(shape), g.item()));
                         },
                         "sum");
}

Var frobenius_norm(Var a) {
  const std::size_t ia = a.id();
  const Shape shape = a.shape();
  const double norm = a.value().values().norm();
  Tape* tape = &a.tape();
  return tape->record(Tensor::scalar(norm), {ia},
                      [=](const Tensor& g, GradAccumulator& acc) {
                        const Vector& x = tape->value(ia).values();
                        acc.add(ia, shape, (g.item() / std::max(norm, kNormEpsilon)) * x);
                      },
                      "frobenius_norm");
}

Var reshape(Var a, Shape shape) {
  if (shape_size(shape) != a.value().size()) {
    throw ShapeError("reshape " + to_string(a.shape()) + " -> " + to_string(shape) + " changes size");
  }
  const std::size_t ia = a.id();
  const Shape in_shape = a.shape();
  return a.tape().record(Tensor(std::move(shape), a.value().values()), {ia},
                         [=](const Tensor& g, GradAccumulator& acc) { acc.add(ia, in_shape, g.values()); },
                         "reshape");
}

Var transpose_12(Var a) {
  const Tensor& ta = a.value();
  if (ta.rank() < 2) throw ShapeError("transpose_12 of rank-" + std::to_string(ta.rank()) + " tensor");
  const Index d0 = ta.dim(0);
  const Index d1 = ta.dim(1);
  const Index inner = ta.size() / std::max<Index>(d0 * d1, 1);
  Shape out_shape = ta.shape();
  std::swap(out_shape[0], out_shape[1]);

  // Moves block (i, j) of a [d0, d1] grid of `inner`-blocks to (j, i).
  auto permute = [inner](const Vector& src, Index rows, Index cols) {
    Vector dst(src.size());
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j)
        dst.segment((j * rows + i) * inner, inner) = src.segment((i * cols + j) * inner, inner);
    return dst;
  };
  const std::size_t ia = a.id();
  const Shape in_shape = ta.shape();
  return a.tape().record(Tensor(out_shape, permute(ta.values(), d0, d1)), {ia},
                         [=](const Tensor& g, GradAccumulator& acc) {
                           acc.add(ia, in_shape, permute(g.values(), d1, d0));
                         },
                         "transpose_12");
}

Var gather_rows(Var a, std::vector<Index> indices) {
  const Tensor& ta = a.value();
  if (ta.rank() < 1) throw ShapeError("gather_rows of a scalar");
  const Index rows = ta.dim(0);
  const Index width = ta.size() / std::max<Index>(rows, 1);
  Shape out_shape = ta.shape();
  out_shape[0] = static_cast<Index>(indices.size());
  Tensor out(out_shape);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const Index src = indices[r];
    if (src < 0 || src >= rows) {
      throw ShapeError("gather_rows: index " + std::to_string(src) + " out of range for " + to_string(ta.shape()));
    }
    out.values().segment(static_cast<Index>(r) * width, width) = ta.values().segment(src * width, width);
  }
  const std::size_t ia = a.id();
  const Shape in_shape = ta.shape();
  return a.tape().record(std::move(out), {ia},
                         [=, indices = std::move(indices)](const Tensor& g, GradAccumulator& acc) {
                           Vector ga = Vector::Zero(shape_size(in_shape));
                           for (std::size_t r = 0; r < indices.size(); ++r) {
                             ga.segment(indices[r] * width, width) +=
                                 g.values().segment(static_cast<Index>(r) * width, width);
                           }
                           acc.add(ia, in_shape, ga);
                         },
                         "gather_rows");
}

Var broadcast_leading(Var a, Index count) {
  if (count < 1) throw ShapeError("broadcast_leading: count must be >= 1");
  const Tensor& ta = a.value();
  Shape out_shape = ta.shape();
  out_shape.insert(out_shape.begin(), count);
  const Index block = ta.size();
  Tensor out(out_shape);
  for (Index r = 0; r < count; ++r) out.values().segment(r * block, block) = ta.values();
  const std::size_t ia = a.id();
  const Shape in_shape = ta.shape();
  return a.tape().record(std::move(out), {ia},
                         [=](const Tensor& g, GradAccumulator& acc) {
                           acc.add(ia, in_shape, ConstMat(g.data(), count, block).colwise().sum().transpose());
                         },
                         "broadcast_leading");
}

}  // namespace dgn::ad
