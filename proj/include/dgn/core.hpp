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

#ifndef DGN_CORE_HPP
#define DGN_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dgn {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using RowMatrix = RowMatrixX<double>;
using Vector = VectorX<double>;

/// Input data failed validation (shape, symmetry, sign, finiteness, consistency).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments with incompatible dimensions.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced NaN/Inf or otherwise broke down numerically.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value outside its valid range.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(Index rows, Index cols);

template <typename Derived>
std::string shape_string(const Eigen::DenseBase<Derived>& m) {
  return shape_string(m.rows(), m.cols());
}

/// d_F(A, B) = sqrt(sum_ij |A_ij - B_ij|^2).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar frobenius_distance(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("frobenius_distance: " + shape_string(a) + " vs " + shape_string(b));
  }
  return (a - b).norm();
}

template <typename Derived>
typename Derived::Scalar max_asymmetry(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Exactly symmetric, entries >= 0 and finite, zero diagonal.
template <typename Derived>
bool is_valid_connectome(const Eigen::MatrixBase<Derived>& m) {
  if (m.rows() != m.cols()) return false;
  for (Index j = 0; j < m.cols(); ++j) {
    if (m(j, j) != 0) return false;
    for (Index i = 0; i < m.rows(); ++i) {
      const auto x = m(i, j);
      if (!std::isfinite(x) || x < 0 || x != m(j, i)) return false;
    }
  }
  return true;
}

/// Mean of the off-diagonal entries of a square matrix.
template <typename Derived>
typename Derived::Scalar off_diagonal_mean(const Eigen::MatrixBase<Derived>& m) {
  const Index n = m.rows();
  if (n < 2) return 0;
  return (m.sum() - m.trace()) / static_cast<typename Derived::Scalar>(n * (n - 1));
}

/// Median of a scratch buffer; an even count yields the mean of the middle pair.
/// Reorders the buffer.
template <typename Scalar>
Scalar median_inplace(std::vector<Scalar>& values) {
  if (values.empty()) throw std::invalid_argument("median of an empty set");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const Scalar upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const Scalar lower = *std::max_element(values.begin(), values.begin() + mid);
  return (lower + upper) / Scalar(2);
}

/// Element-wise median over a stack of equally shaped matrices.
template <typename Scalar>
MatrixX<Scalar> elementwise_median(const std::vector<MatrixX<Scalar>>& stack) {
  if (stack.empty()) throw std::invalid_argument("elementwise_median: empty stack");
  const Index rows = stack.front().rows();
  const Index cols = stack.front().cols();
  for (const auto& m : stack) {
    if (m.rows() != rows || m.cols() != cols) {
      throw ShapeError("elementwise_median: " + shape_string(m) + " vs " + shape_string(rows, cols));
    }
  }
  MatrixX<Scalar> out(rows, cols);
  std::vector<Scalar> scratch(stack.size());
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      for (std::size_t s = 0; s < stack.size(); ++s) scratch[s] = stack[s](i, j);
      out(i, j) = median_inplace(scratch);
    }
  }
  return out;
}

/// Element-wise arithmetic mean over a stack of equally shaped matrices.
template <typename Scalar>
MatrixX<Scalar> elementwise_mean(const std::vector<MatrixX<Scalar>>& stack) {
  if (stack.empty()) throw std::invalid_argument("elementwise_mean: empty stack");
  MatrixX<Scalar> sum = MatrixX<Scalar>::Zero(stack.front().rows(), stack.front().cols());
  for (const auto& m : stack) {
    if (m.rows() != sum.rows() || m.cols() != sum.cols()) {
      throw ShapeError("elementwise_mean: " + shape_string(m) + " vs " + shape_string(sum));
    }
    sum += m;
  }
  return sum / static_cast<Scalar>(stack.size());
}

/// SplitMix64 finalizer; derives independent seeds for sub-streams of one run seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace dgn

#endif  // DGN_CORE_HPP
