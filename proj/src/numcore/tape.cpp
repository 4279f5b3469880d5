#include "setad/numcore/tape.hpp"

#include <stdexcept>

#include "setad/error.hpp"

namespace setad::numcore {

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("Var: not attached to a tape");
  return tape_->value(*this);
}

Var Tape::parameter(Matrix value) {
  Var v = record(Op::leaf, std::move(value), {});
  nodes_.back().needs_grad = true;
  return v;
}

Var Tape::constant(Matrix value) { return record(Op::constant, std::move(value), {}); }

Var Tape::record(Op op, Matrix value, std::vector<std::size_t> inputs, double scalar,
                 std::size_t aux) {
  if (consumed_) throw std::logic_error("Tape: recording on a consumed tape; call clear() first");
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.scalar = scalar;
  node.aux = aux;
  for (std::size_t in : inputs) node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::check_owned(Var v) const {
  if (v.tape_ != this || v.id_ >= nodes_.size()) {
    throw std::logic_error("Tape: value slot does not belong to this tape");
  }
}

const Matrix& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

const Matrix& Tape::grad(Var v) const {
  check_owned(v);
  if (!consumed_) throw std::logic_error("Tape: gradients requested before backward()");
  return nodes_[v.id_].grad;
}

void Tape::clear() {
  nodes_.clear();
  consumed_ = false;
}

void Tape::accumulate(std::size_t id, const Matrix& delta) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    n.grad = delta;
    return;
  }
  auto g = n.grad.data();
  auto d = delta.data();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += d[i];
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (consumed_) throw std::logic_error("Tape: backward() called twice on the same tape");
  const Node& root = nodes_[loss.id_];
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw std::logic_error("Tape: backward() needs a scalar loss, got " + root.value.shape_string());
  }
  if (root.op == Op::leaf || root.op == Op::constant) {
    throw std::logic_error("Tape: backward() on an untaped value");
  }
  consumed_ = true;

  for (auto& n : nodes_) n.grad = Matrix();
  nodes_[loss.id_].grad = Matrix(1, 1, 1.0);

  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.empty() || n.inputs.empty()) continue;
    propagate(n);
  }

  for (auto& n : nodes_) {
    if (n.op == Op::leaf && n.grad.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  }
}

void Tape::propagate(const Node& node) {
  const Matrix& g = node.grad;
  const auto& in = node.inputs;
  auto val = [&](std::size_t k) -> const Matrix& { return nodes_[in[k]].value; };

  switch (node.op) {
    case Op::leaf:
    case Op::constant:
      break;
    case Op::matmul:
      // C = A·B: dA = dC·Bᵀ, dB = Aᵀ·dC
      accumulate(in[0], matmul_transposed(g, val(1)));
      accumulate(in[1], matmul(transpose(val(0)), g));
      break;
    case Op::matmul_transposed:
      // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
      accumulate(in[0], matmul(g, val(1)));
      accumulate(in[1], matmul(transpose(g), val(0)));
      break;
    case Op::add:
      accumulate(in[0], g);
      accumulate(in[1], g);
      break;
    case Op::sub:
      accumulate(in[0], g);
      accumulate(in[1], numcore::scale(g, -1.0));
      break;
    case Op::add_row:
      accumulate(in[0], g);
      accumulate(in[1], numcore::sum_rows(g));
      break;
    case Op::scale:
      accumulate(in[0], numcore::scale(g, node.scalar));
      break;
    case Op::relu: {
      Matrix d = g;
      auto x = val(0).data();
      auto dd = d.data();
      for (std::size_t i = 0; i < dd.size(); ++i)
        if (!(x[i] > 0.0)) dd[i] = 0.0;
      accumulate(in[0], d);
      break;
    }
    case Op::abs: {
      Matrix d = g;
      auto x = val(0).data();
      auto dd = d.data();
      for (std::size_t i = 0; i < dd.size(); ++i) {
        const double sign = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        dd[i] *= sign;
      }
      accumulate(in[0], d);
      break;
    }
    case Op::square: {
      Matrix d = g;
      auto x = val(0).data();
      auto dd = d.data();
      for (std::size_t i = 0; i < dd.size(); ++i) dd[i] *= 2.0 * x[i];
      accumulate(in[0], d);
      break;
    }
    case Op::softmax_rows: {
      // dX_i = Y_i ⊙ (dY_i − ⟨dY_i, Y_i⟩)
      const Matrix& y = node.value;
      Matrix d(y.rows(), y.cols());
      for (std::size_t r = 0; r < y.rows(); ++r) {
        auto yr = y.row(r);
        auto gr = g.row(r);
        double dot = 0.0;
        for (std::size_t c = 0; c < yr.size(); ++c) dot += gr[c] * yr[c];
        auto dr = d.row(r);
        for (std::size_t c = 0; c < yr.size(); ++c) dr[c] = yr[c] * (gr[c] - dot);
      }
      accumulate(in[0], d);
      break;
    }
    case Op::sum_rows: {
      const Matrix& x = val(0);
      Matrix d(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r) {
        auto dr = d.row(r);
        for (std::size_t c = 0; c < x.cols(); ++c) dr[c] = g(0, c);
      }
      accumulate(in[0], d);
      break;
    }
    case Op::sum_cols: {
      const Matrix& x = val(0);
      Matrix d(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) d(r, c) = g(r, 0);
      accumulate(in[0], d);
      break;
    }
    case Op::max_rows: {
      // Gradient flows to the first row attaining each column max.
      const Matrix& x = val(0);
      Matrix d(x.rows(), x.cols());
      for (std::size_t c = 0; c < x.cols(); ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < x.rows(); ++r)
          if (x(r, c) > x(best, c)) best = r;
        d(best, c) = g(0, c);
      }
      accumulate(in[0], d);
      break;
    }
    case Op::mean: {
      const Matrix& x = val(0);
      accumulate(in[0], Matrix(x.rows(), x.cols(), g(0, 0) / static_cast<double>(x.size())));
      break;
    }
    case Op::concat_cols: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t width = val(k).cols();
        accumulate(in[k], numcore::slice_cols(g, offset, width));
        offset += width;
      }
      break;
    }
    case Op::slice_cols: {
      const Matrix& x = val(0);
      Matrix d(x.rows(), x.cols());
      for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d(r, node.aux + c) = g(r, c);
      accumulate(in[0], d);
      break;
    }
  }
}

namespace {

Tape& tape_of(Var a) {
  Tape* t = a.tape();
  if (t == nullptr) throw std::logic_error("Var: not attached to a tape");
  t->check_owned(a);
  return *t;
}

Tape& tape_of(Var a, Var b) {
  Tape& t = tape_of(a);
  t.check_owned(b);
  return t;
}

}  // namespace

Var matmul(Var a, Var b) {
  return tape_of(a, b).record(Tape::Op::matmul, matmul(a.value(), b.value()), {a.id(), b.id()});
}

Var matmul_transposed(Var a, Var b) {
  return tape_of(a, b).record(Tape::Op::matmul_transposed,
                              matmul_transposed(a.value(), b.value()), {a.id(), b.id()});
}

Var add(Var a, Var b) {
  return tape_of(a, b).record(Tape::Op::add, add(a.value(), b.value()), {a.id(), b.id()});
}

Var sub(Var a, Var b) {
  return tape_of(a, b).record(Tape::Op::sub, sub(a.value(), b.value()), {a.id(), b.id()});
}

Var add_row(Var a, Var bias) {
  return tape_of(a, bias).record(Tape::Op::add_row, add_row(a.value(), bias.value()),
                                 {a.id(), bias.id()});
}

Var scale(Var a, double factor) {
  return tape_of(a).record(Tape::Op::scale, scale(a.value(), factor), {a.id()}, factor);
}

Var relu(Var a) { return tape_of(a).record(Tape::Op::relu, relu(a.value()), {a.id()}); }

Var abs(Var a) { return tape_of(a).record(Tape::Op::abs, abs(a.value()), {a.id()}); }

Var square(Var a) { return tape_of(a).record(Tape::Op::square, square(a.value()), {a.id()}); }

Var softmax_rows(Var a) {
  return tape_of(a).record(Tape::Op::softmax_rows, softmax_rows(a.value()), {a.id()});
}

Var sum_rows(Var a) { return tape_of(a).record(Tape::Op::sum_rows, sum_rows(a.value()), {a.id()}); }

Var sum_cols(Var a) { return tape_of(a).record(Tape::Op::sum_cols, sum_cols(a.value()), {a.id()}); }

Var max_rows(Var a) { return tape_of(a).record(Tape::Op::max_rows, max_rows(a.value()), {a.id()}); }

Var mean(Var a) { return tape_of(a).record(Tape::Op::mean, mean(a.value()), {a.id()}); }

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error(ErrorKind::shape, "concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  std::vector<Matrix> values;
  std::vector<std::size_t> ids;
  values.reserve(parts.size());
  for (Var p : parts) {
    t.check_owned(p);
    values.push_back(p.value());
    ids.push_back(p.id());
  }
  return t.record(Tape::Op::concat_cols, concat_cols(values), std::move(ids));
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  return tape_of(a).record(Tape::Op::slice_cols, slice_cols(a.value(), begin, count), {a.id()},
                           0.0, begin);
}

}  // namespace setad::numcore
