#include "doctest.h"

#include <cmath>
#include <random>
#include <stdexcept>

#include "setad/error.hpp"
#include "setad/numcore/matrix.hpp"
#include "setad/numcore/tape.hpp"
#include "support/oracles.hpp"

using namespace setad::numcore;

TEST_CASE("matmul examples") {
  const Matrix a{{1, 2}, {3, 4}};
  CHECK(matmul(a, Matrix::identity(2)) == a);
  CHECK(matmul(Matrix{{1, 2}}, Matrix{{3}, {4}}) == Matrix{{11}});
}

TEST_CASE("matmul shape mismatch names both shapes") {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL("expected a shape error");
  } catch (const setad::Error& e) {
    CHECK(e.kind() == setad::ErrorKind::shape);
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("matmul gradient matches finite differences") {
  std::mt19937_64 rng(11);
  const Matrix a = oracle::random_matrix(3, 4, rng);
  const Matrix b = oracle::random_matrix(4, 2, rng);
  Tape tape;
  const Var va = tape.parameter(a);
  const Var vb = tape.parameter(b);
  tape.backward(mean(matmul(va, vb)));
  // mean scales by 1/6; compare against the same objective.
  const auto f = [&](const Matrix& x) { return mean(matmul(x, b))(0, 0); };
  CHECK(oracle::gradient_error(tape.grad(va), oracle::finite_difference(f, a)) < 1e-4);
  const auto fb = [&](const Matrix& x) { return mean(matmul(a, x))(0, 0); };
  CHECK(oracle::gradient_error(tape.grad(vb), oracle::finite_difference(fb, b)) < 1e-4);
}

TEST_CASE("softmax examples") {
  const Matrix s = softmax_rows(Matrix{{0, 0}});
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(0, 1) == doctest::Approx(0.5));
  const Matrix t = softmax_rows(Matrix{{1, 1, 1}});
  for (std::size_t c = 0; c < 3; ++c) CHECK(t(0, c) == doctest::Approx(1.0 / 3.0));
  const Matrix big = softmax_rows(Matrix{{1000, 0}});
  CHECK(big.all_finite());
  CHECK(big(0, 0) == doctest::Approx(1.0));
  CHECK(big(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("softmax rows sum to one for large and small entries") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const double magnitude = trial % 2 ? 1e3 : 2.0;
    const Matrix m = softmax_rows(oracle::random_matrix(4, 7, rng, -magnitude, magnitude));
    REQUIRE(m.all_finite());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double total = 0.0;
      for (double v : m.row(r)) total += v;
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("relu values and subgradient") {
  CHECK(relu(Matrix{{-1, 0, 2}}) == Matrix{{0, 0, 2}});
  Tape tape;
  const Var x = tape.parameter(Matrix{{2, -1, 0}});
  tape.backward(sum_cols(sum_rows(relu(x))));
  CHECK(tape.grad(x) == Matrix{{1, 0, 0}});
}

TEST_CASE("abs subgradient at zero is zero") {
  Tape tape;
  const Var x = tape.parameter(Matrix{{-3, 0, 4}});
  tape.backward(sum_cols(abs(x)));
  CHECK(tape.grad(x) == Matrix{{-1, 0, 1}});
}

TEST_CASE("backward examples") {
  SUBCASE("sum of relu at 3") {
    Tape tape;
    const Var x = tape.parameter(Matrix{{3}});
    tape.backward(sum_rows(relu(x)));
    CHECK(tape.grad(x) == Matrix{{1}});
  }
  SUBCASE("mae with prediction above label") {
    Tape tape;
    const Var pred = tape.parameter(Matrix{{2.0, 5.0, 1.5, 0.5}});
    const Var label = tape.constant(Matrix{{1.0, 1.0, 1.0, 0.0}});
    tape.backward(mean(abs(sub(pred, label))));
    for (std::size_t c = 0; c < 4; ++c) CHECK(tape.grad(pred)(0, c) == doctest::Approx(0.25));
  }
}

TEST_CASE("backward usage errors") {
  Tape tape;
  const Var x = tape.parameter(Matrix{{1, 2}});
  CHECK_THROWS_AS(tape.backward(relu(x)), std::logic_error);
  CHECK_THROWS_AS(tape.backward(tape.parameter(Matrix{{1}})), std::logic_error);
  CHECK_THROWS_AS(tape.backward(tape.constant(Matrix{{1}})), std::logic_error);

  Tape other;
  const Var foreign = other.parameter(Matrix{{1}});
  CHECK_THROWS_AS(tape.backward(sum_rows(relu(foreign))), std::logic_error);

  const Var loss = sum_cols(x);
  tape.backward(loss);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(loss), std::logic_error);
}

TEST_CASE("unused leaves receive zero gradients of their own shape") {
  Tape tape;
  const Var used = tape.parameter(Matrix{{1, 2}});
  const Var unused = tape.parameter(Matrix(3, 2, 5.0));
  tape.backward(sum_cols(used));
  CHECK(tape.grad(unused) == Matrix(3, 2, 0.0));
}

namespace {

// Exercises every primitive: returns a scalar from x (3×4) and y (4×4).
template <class M>
M composite(const M& x, const M& y, const M& bias) {
  const M a = add_row(matmul(x, y), bias);                   // 3×4
  const M b = softmax_rows(scale(matmul_transposed(a, x), 0.5));  // 3×3
  const M c = relu(sub(matmul(b, x), x));                    // 3×4
  const M left = slice_cols(c, 0, 2);
  const M right = slice_cols(square(a), 2, 2);
  const M parts[] = {left, right};
  const M joined = concat_cols(std::span<const M>(parts));   // 3×4
  const M pooled = add(sum_rows(joined), max_rows(abs(a)));  // 1×4
  return add(mean(pooled), sum_rows(sum_cols(b)));
}

}  // namespace

TEST_CASE("composite of every primitive matches finite differences") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const Matrix x = oracle::random_matrix(3, 4, rng);
    const Matrix y = oracle::random_matrix(4, 4, rng);
    const Matrix bias = oracle::random_matrix(1, 4, rng);
    Tape tape;
    const Var vx = tape.parameter(x), vy = tape.parameter(y), vb = tape.parameter(bias);
    const Var loss = composite(vx, vy, vb);
    CHECK(loss.value()(0, 0) == composite(x, y, bias)(0, 0));
    tape.backward(loss);
    const auto fx = [&](const Matrix& m) { return composite(m, y, bias)(0, 0); };
    const auto fy = [&](const Matrix& m) { return composite(x, m, bias)(0, 0); };
    const auto fb = [&](const Matrix& m) { return composite(x, y, m)(0, 0); };
    CHECK(oracle::gradient_error(tape.grad(vx), oracle::finite_difference(fx, x)) < 1e-4);
    CHECK(oracle::gradient_error(tape.grad(vy), oracle::finite_difference(fy, y)) < 1e-4);
    CHECK(oracle::gradient_error(tape.grad(vb), oracle::finite_difference(fb, bias)) < 1e-4);
  }
}

TEST_CASE("rebuilt tapes give bitwise identical gradients") {
  std::mt19937_64 rng(5);
  const Matrix x = oracle::random_matrix(3, 4, rng);
  const Matrix y = oracle::random_matrix(4, 4, rng);
  const Matrix bias = oracle::random_matrix(1, 4, rng);
  Matrix first, second;
  for (Matrix* out : {&first, &second}) {
    Tape tape;
    const Var vx = tape.parameter(x);
    tape.backward(composite(vx, tape.parameter(y), tape.parameter(bias)));
    *out = tape.grad(vx);
  }
  CHECK(first == second);
}

TEST_CASE("forward kernels reject bad shapes") {
  CHECK_THROWS_AS(add(Matrix(2, 2), Matrix(2, 3)), setad::Error);
  CHECK_THROWS_AS(add_row(Matrix(2, 2), Matrix(2, 2)), setad::Error);
  CHECK_THROWS_AS(slice_cols(Matrix(2, 2), 1, 2), setad::Error);
  CHECK_THROWS_AS(softmax_rows(Matrix()), setad::Error);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), setad::Error);
}

TEST_CASE("transpose and gather") {
  const Matrix a{{1, 2, 3}, {4, 5, 6}};
  CHECK(transpose(a) == Matrix{{1, 4}, {2, 5}, {3, 6}});
  const std::size_t idx[] = {1, 0, 1};
  CHECK(a.gather_rows(idx) == Matrix{{4, 5, 6}, {1, 2, 3}, {4, 5, 6}});
}
