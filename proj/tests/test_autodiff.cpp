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
#include "test_util.hpp"

#include <doctest.h>

#include <limits>

using namespace dgn;
using namespace dgn::ad;

namespace {

Tensor random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (Index k = 0; k < t.size(); ++k) t[k] = u(rng);
  return t;
}

// Random values bounded away from zero so abs/relu stay differentiable.
Tensor nonzero_tensor(std::mt19937_64& rng, Shape shape) {
  Tensor t = random_tensor(rng, std::move(shape), 0.2, 1.0);
  std::bernoulli_distribution flip(0.5);
  for (Index k = 0; k < t.size(); ++k) {
    if (flip(rng)) t[k] = -t[k];
  }
  return t;
}

double check(const ScalarFunction& f, const std::vector<Tensor>& params) {
  const auto report = finite_difference_check(f, params, 1e-6);
  CHECK(report.excluded == 0);
  return report.max_relative_error;
}

}  // namespace

TEST_CASE("forward examples") {
  Tape tape;
  const Var a = tape.constant(Tensor::from_matrix(RowMatrix{{-1.0, 2.0}}));
  CHECK(elementwise_abs(a).value().to_matrix() == RowMatrix{{1.0, 2.0}});

  const Var x = tape.constant(Tensor::from_matrix(RowMatrix{{0.0, 1.0}, {1.0, 0.0}}));
  CHECK(frobenius_norm(x).value().item() == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  std::mt19937_64 rng(1);
  const Var r = tape.constant(random_tensor(rng, {3, 4, 2}));
  const Var rt = transpose_12(r);
  CHECK(rt.shape() == Shape{4, 3, 2});
  CHECK(transpose_12(rt).value().values() == r.value().values());
  CHECK(transpose_12(rt).shape() == r.shape());
}

TEST_CASE("transpose_12 moves entry (i, j, k) to (j, i, k)") {
  std::mt19937_64 rng(2);
  Tape tape;
  const Tensor t = random_tensor(rng, {2, 3, 4});
  const Tensor out = transpose_12(tape.constant(t)).value();
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 4; ++k) CHECK(out[(j * 2 + i) * 4 + k] == t[(i * 3 + j) * 4 + k]);
}

TEST_CASE("backward examples") {
  SUBCASE("norm of [[3, 4]]") {
    Tape tape;
    const Var x = tape.parameter(Tensor::from_matrix(RowMatrix{{3.0, 4.0}}));
    const auto g = tape.backward(frobenius_norm(x));
    CHECK(g[0].shape() == Shape{1, 2});
    CHECK(g[0][0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(g[0][1] == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("sum of abs at [[-2, 5]]") {
    Tape tape;
    const Var x = tape.parameter(Tensor::from_matrix(RowMatrix{{-2.0, 5.0}}));
    const auto g = tape.backward(sum(elementwise_abs(x)));
    CHECK(g[0].to_matrix() == RowMatrix{{-1.0, 1.0}});
  }
  SUBCASE("abs subgradient at 0 is 0") {
    Tape tape;
    const Var x = tape.parameter(Tensor::from_matrix(RowMatrix{{0.0, -3.0}}));
    CHECK(tape.backward(sum(elementwise_abs(x)))[0].to_matrix() == RowMatrix{{0.0, -1.0}});
  }
  SUBCASE("norm at the origin has a zero gradient") {
    Tape tape;
    const Var x = tape.parameter(Tensor::from_matrix(RowMatrix::Zero(2, 2)));
    const auto g = tape.backward(frobenius_norm(x));
    CHECK(g[0].values().isZero(0.0));
  }
  SUBCASE("fan-out accumulates") {
    Tape tape;
    const Var x = tape.parameter(Tensor::from_vector(Vector{{1.0, -2.0, 3.0}}));
    const Var y = x + x + 3.0 * x;
    CHECK(tape.backward(sum(y))[0].values() == Vector::Constant(3, 5.0));
  }
  SUBCASE("disconnected parameter gets explicit zeros") {
    Tape tape;
    const Var used = tape.parameter(Tensor::scalar(2.0));
    tape.parameter(Tensor::from_matrix(RowMatrix::Ones(2, 3)));
    const auto g = tape.backward(used * 4.0);
    REQUIRE(g.size() == 2);
    CHECK(g[0].item() == 4.0);
    CHECK(g[1].shape() == Shape{2, 3});
    CHECK(g[1].values().isZero(0.0));
  }
}

TEST_CASE("relu forward and backward") {
  Tape tape;
  const Var x = tape.parameter(Tensor::from_vector(Vector{{-1.0, 0.0, 2.5}}));
  const Var y = relu(x);
  CHECK(y.value().values() == Vector{{0.0, 0.0, 2.5}});
  CHECK(tape.backward(sum(y))[0].values() == Vector{{0.0, 0.0, 1.0}});
}

TEST_CASE("batched matmul agrees with per-batch products") {
  std::mt19937_64 rng(3);
  Tape tape;
  const Tensor a = random_tensor(rng, {2, 3, 4, 5});
  const Tensor b = random_tensor(rng, {2, 3, 5, 2});
  const Tensor w = random_tensor(rng, {5, 2});
  const Tensor ab = matmul(tape.constant(a), tape.constant(b)).value();
  const Tensor aw = matmul(tape.constant(a), tape.constant(w)).value();
  CHECK(ab.shape() == Shape{2, 3, 4, 2});
  for (Index batch = 0; batch < 6; ++batch) {
    const Eigen::Map<const RowMatrix> ma(a.data() + batch * 20, 4, 5);
    const Eigen::Map<const RowMatrix> mb(b.data() + batch * 10, 5, 2);
    const Eigen::Map<const RowMatrix> mab(ab.data() + batch * 8, 4, 2);
    const Eigen::Map<const RowMatrix> maw(aw.data() + batch * 8, 4, 2);
    CHECK((mab - ma * mb).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((maw - ma * w.matrix()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("shape errors name both shapes") {
  Tape tape;
  const Var a = tape.constant(Tensor(Shape{2, 3}));
  const Var b = tape.constant(Tensor(Shape{4, 3}));
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2,3]"), ShapeError);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4,3]"), ShapeError);
  CHECK_THROWS_AS(reshape(a, {5}), ShapeError);
  CHECK_THROWS_AS(sum_axis(a, 2), ShapeError);
  CHECK_THROWS_AS(tape.backward(a), ShapeError);
}

TEST_CASE("non-finite results are rejected when recorded") {
  Tape tape;
  const Var big = tape.constant(Tensor::scalar(std::numeric_limits<double>::max()));
  CHECK_THROWS_AS(big * 10.0, NumericalError);
  CHECK_THROWS_AS(tape.constant(Tensor::scalar(std::nan(""))), NumericalError);
}

TEST_CASE("every op passes the finite-difference oracle") {
  std::mt19937_64 rng(4);
  SUBCASE("matmul, batched and broadcast") {
    const std::vector<Tensor> p{random_tensor(rng, {3, 2, 4}), random_tensor(rng, {4, 5})};
    CHECK(check([](Tape&, std::span<const Var> v) { return sum(elementwise_abs(matmul(v[0], v[1]))); }, p) < 1e-7);
  }
  SUBCASE("add and subtract with leading broadcast") {
    const std::vector<Tensor> p{random_tensor(rng, {3, 2, 4}), random_tensor(rng, {2, 4})};
    CHECK(check([](Tape&, std::span<const Var> v) { return frobenius_norm(v[0] - v[1]) + frobenius_norm(v[1] + v[0]); },
                p) < 1e-7);
  }
  SUBCASE("reductions") {
    const std::vector<Tensor> p{nonzero_tensor(rng, {3, 4, 2})};
    CHECK(check([](Tape&, std::span<const Var> v) {
            return frobenius_norm(sum_axis(v[0], 1)) + frobenius_norm(mean_axis(v[0], 0)) +
                   frobenius_norm(sum_axis(v[0], 2));
          },
                p) < 1e-7);
  }
  SUBCASE("abs and relu away from kinks") {
    const std::vector<Tensor> p{nonzero_tensor(rng, {4, 3})};
    CHECK(check([](Tape&, std::span<const Var> v) { return sum(relu(v[0])) + frobenius_norm(elementwise_abs(v[0])); }, p) <
          1e-7);
  }
  SUBCASE("reshape, transpose, gather, broadcast") {
    const std::vector<Tensor> p{random_tensor(rng, {3, 4})};
    CHECK(check([](Tape&, std::span<const Var> v) {
            const Var g = gather_rows(v[0], {2, 0, 2, 1});
            const Var t = transpose_12(broadcast_leading(g, 3));  // [4, 3, 4]
            return frobenius_norm(reshape(t - v[0], {12, 4}));
          },
                p) < 1e-7);
  }
}

TEST_CASE("finite-difference check on a quadratic is exact to roundoff") {
  std::mt19937_64 rng(5);
  const std::vector<Tensor> p{random_tensor(rng, {4, 3}), random_tensor(rng, {5})};
  const ScalarFunction f = [](Tape&, std::span<const Var> v) {
    // sum of squares as the inner product of each flattened parameter with itself
    const Var x = reshape(v[0], {1, 12});
    const Var y = reshape(v[1], {1, 5});
    return sum(matmul(x, reshape(v[0], {12, 1}))) + sum(matmul(y, reshape(v[1], {5, 1})));
  };
  const auto report = finite_difference_check(f, p, 1e-5);
  CHECK(report.compared == 17);
  CHECK(report.max_relative_error < 1e-9);
}

TEST_CASE("entries sitting exactly on an abs kink are excluded") {
  const std::vector<Tensor> p{Tensor::from_vector(Vector{{0.0, 0.7, -0.4}})};
  const ScalarFunction f = [](Tape&, std::span<const Var> v) { return sum(elementwise_abs(v[0])); };
  const auto report = finite_difference_check(f, p, 1e-5);
  CHECK(report.excluded == 1);
  CHECK(report.compared == 2);
  CHECK(report.max_relative_error < 1e-9);
}

TEST_CASE("the check detects a wrong backward rule") {
  // y = x^2 elementwise, with a backward rule that is off by 1%.
  const ScalarFunction f = [](Tape& tape, std::span<const Var> v) {
    const std::size_t id = v[0].id();
    const Tensor& x = v[0].value();
    Tensor y(x.shape(), x.values().cwiseAbs2());
    const Var out = tape.record(std::move(y), {id},
                                [id, xs = x.values(), shape = x.shape()](const Tensor& g, GradAccumulator& acc) {
                                  acc.add(id, shape, 2.02 * g.values().cwiseProduct(xs));
                                },
                                "bad_square");
    return sum(out);
  };
  const auto report = finite_difference_check(f, {Tensor::from_vector(Vector{{0.3, -1.7, 2.2}})}, 1e-5);
  CHECK(report.max_relative_error == doctest::Approx(0.02 / 2.02).epsilon(1e-4));
}

TEST_CASE("a structurally zero gradient is not mistaken for an error") {
  // Adding the same b everywhere cancels in the differences, so d/db = 0 exactly,
  // while the evaluations still carry rounding noise.
  std::mt19937_64 rng(10);
  const std::vector<Tensor> p{random_tensor(rng, {6, 3}, -3.0, 3.0), Tensor::from_vector(Vector{{0.37, -1.1, 0.9}})};
  const ScalarFunction f = [](Tape&, std::span<const Var> v) {
    const Var shifted = v[0] + v[1];
    return frobenius_norm(shifted - gather_rows(shifted, {5, 4, 3, 2, 1, 0}));
  };
  for (double h : {1e-5, 1e-6, 1e-7}) CHECK(finite_difference_check(f, p, h).max_relative_error < 1e-5);
}

TEST_CASE("linearity: gradients of c * f are c times those of f") {
  std::mt19937_64 rng(6);
  const Tensor a = random_tensor(rng, {3, 4});
  const Tensor b = random_tensor(rng, {4, 2});
  auto grads = [&](double c) {
    Tape tape;
    const Var x = tape.parameter(a);
    const Var y = tape.parameter(b);
    return tape.backward(c * frobenius_norm(elementwise_abs(matmul(x, y)) - gather_rows(y, {3, 1, 0})));
  };
  const auto g1 = grads(1.0);
  for (double c : {-3.0, 0.5, 17.25}) {
    const auto gc = grads(c);
    for (std::size_t k = 0; k < g1.size(); ++k) {
      CHECK(gc[k].shape() == g1[k].shape());
      CHECK((gc[k].values() - c * g1[k].values()).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("rerunning an identical tape is bit-identical") {
  std::mt19937_64 rng(7);
  const Tensor a = random_tensor(rng, {5, 3, 2});
  auto run = [&] {
    Tape tape;
    const Var x = tape.parameter(a);
    const Var loss = frobenius_norm(sum_axis(elementwise_abs(x - transpose_12(reshape(x, {3, 5, 2}))), 2));
    return std::pair{loss.value().item(), tape.backward(loss)[0].values()};
  };
  const auto [l1, g1] = run();
  const auto [l2, g2] = run();
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("axis reductions do not depend on the order of the reduced elements") {
  std::mt19937_64 rng(9);
  Tensor t = random_tensor(rng, {2, 7, 3}, -1e3, 1e3);
  t[3] = 1e-7;  // mixed magnitudes make naive sums order-dependent
  Tape tape;
  const Var x = tape.constant(t);
  const std::vector<Index> perm{4, 0, 6, 2, 5, 1, 3};
  std::vector<Index> rows;
  for (Index b = 0; b < 2; ++b)
    for (Index p : perm) rows.push_back(b * 7 + p);
  const Var shuffled = reshape(gather_rows(reshape(x, {14, 3}), rows), {2, 7, 3});
  CHECK(sum_axis(shuffled, 1).value().values() == sum_axis(x, 1).value().values());
  CHECK(mean_axis(shuffled, 1).value().values() == mean_axis(x, 1).value().values());
}

TEST_CASE("gradient shapes equal parameter shapes") {
  std::mt19937_64 rng(8);
  Tape tape;
  std::vector<Var> ps;
  for (const Shape& s : std::vector<Shape>{{2}, {3, 2}, {1, 2, 3}, {}}) ps.push_back(tape.parameter(random_tensor(rng, s)));
  const Var loss = sum(ps[0]) + sum(ps[1]) + sum(ps[2]) + ps[3];
  const auto g = tape.backward(loss);
  for (std::size_t k = 0; k < ps.size(); ++k) CHECK(g[k].shape() == ps[k].shape());
}
