#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "setad/numcore/matrix.hpp"

namespace setad::numcore {

class Tape;

// Handle to a value slot recorded on a Tape. Cheap to copy; valid until the
// owning tape is cleared or destroyed.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive operations in execution order and replays them in reverse
// to accumulate gradients. One tape per training step; not thread-safe.
class Tape {
 public:
  enum class Op : std::uint8_t {
    leaf,
    constant,
    matmul,
    matmul_transposed,
    add,
    sub,
    add_row,
    scale,
    relu,
    abs,
    square,
    softmax_rows,
    sum_rows,
    sum_cols,
    max_rows,
    mean,
    concat_cols,
    slice_cols,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Differentiable input; receives a gradient on backward().
  Var parameter(Matrix value);
  // Non-differentiable input.
  Var constant(Matrix value);

  const Matrix& value(Var v) const;
  // Gradient of the last backward() loss with respect to `v`. Leaves that do
  // not influence the loss get a zero matrix of their own shape.
  const Matrix& grad(Var v) const;

  // Throws std::logic_error if `loss` is not a 1×1 value recorded on this
  // tape, or if the tape was already consumed by a previous backward().
  void backward(Var loss);

  bool consumed() const noexcept { return consumed_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

  // Used by the free op functions below.
  Var record(Op op, Matrix value, std::vector<std::size_t> inputs, double scalar = 0.0,
             std::size_t aux = 0);
  void check_owned(Var v) const;

 private:
  struct Node {
    Op op = Op::constant;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    double scalar = 0.0;
    std::size_t aux = 0;
    bool needs_grad = false;
  };

  void accumulate(std::size_t id, const Matrix& delta);
  void propagate(const Node& node);

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

Var matmul(Var a, Var b);
Var matmul_transposed(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_row(Var a, Var bias);
Var scale(Var a, double factor);
Var relu(Var a);
Var abs(Var a);
Var square(Var a);
Var softmax_rows(Var a);
Var sum_rows(Var a);
Var sum_cols(Var a);
Var max_rows(Var a);
Var mean(Var a);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);

}  // namespace setad::numcore
