#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "setad/numcore/matrix.hpp"
#include "setad/numcore/tape.hpp"

namespace setad::encoder {

using numcore::Matrix;

enum class Pooling : std::uint32_t { sum = 0, max = 1 };

struct ModelShape {
  std::size_t input_dim = 0;   // d
  std::size_t latent_dim = 20; // d_h
  std::size_t heads = 2;       // h
  std::size_t depth = 1;       // attention blocks
  Pooling pooling = Pooling::sum;

  std::size_t head_width() const { return latent_dim / heads; }
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

template <class M>
struct AttentionWeights {
  M query;  // d_h×d_h
  M key;    // d_h×d_h
  M value;  // d_h×d_h
};

// Every learnable block of the set scoring model. Instantiated with Matrix for
// stored parameters and gradients, and with numcore::Var while taping.
template <class M>
struct WeightSet {
  M embed_weight;  // d_h×d
  M embed_bias;    // 1×d_h
  std::vector<AttentionWeights<M>> attention;
  M head_weight;   // 1×d_h
  M head_bias;     // 1×1
};

struct ModelParams {
  ModelShape shape;
  WeightSet<Matrix> weights;

  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

// Visits every block as (name, block, is_bias) in a fixed order.
template <class M, class Fn>
void for_each_block(WeightSet<M>& w, Fn&& fn) {
  fn(std::string("embed_weight"), w.embed_weight, false);
  fn(std::string("embed_bias"), w.embed_bias, true);
  for (std::size_t i = 0; i < w.attention.size(); ++i) {
    const std::string prefix = "attention[" + std::to_string(i) + "].";
    fn(prefix + "query", w.attention[i].query, false);
    fn(prefix + "key", w.attention[i].key, false);
    fn(prefix + "value", w.attention[i].value, false);
  }
  fn(std::string("head_weight"), w.head_weight, false);
  fn(std::string("head_bias"), w.head_bias, true);
}

template <class M, class Fn>
void for_each_block(const WeightSet<M>& w, Fn&& fn) {
  for_each_block(const_cast<WeightSet<M>&>(w),
                 [&](const std::string& name, M& block, bool is_bias) {
                   fn(name, static_cast<const M&>(block), is_bias);
                 });
}

void validate_shape(const ModelShape& shape);

// Weights uniform in ±sqrt(6 / (fan_in + fan_out)) per matrix, biases zero.
ModelParams init_params(std::uint64_t seed, const ModelShape& shape);
ModelParams init_params(std::uint64_t seed, std::size_t input_dim, std::size_t latent_dim,
                        std::size_t heads);

// Zero-filled weights with the model's block shapes.
WeightSet<Matrix> zeros_like(const ModelShape& shape);

// --- forward pass, generic over Matrix / Var -------------------------------

template <class M>
M embed_points(const WeightSet<M>& w, const M& points) {
  return relu(add_row(matmul_transposed(points, w.embed_weight), w.embed_bias));
}

// Multi-head self-attention with Z as query, key and value. No output
// projection, residual or normalization.
template <class M>
M attend_block(const AttentionWeights<M>& w, const M& z, std::size_t heads) {
  const M q = matmul_transposed(z, w.query);
  const M k = matmul_transposed(z, w.key);
  const M v = matmul_transposed(z, w.value);
  const std::size_t width = q.cols() / heads;
  const double inv_sqrt_width = 1.0 / std::sqrt(static_cast<double>(width));
  std::vector<M> outputs;
  outputs.reserve(heads);
  for (std::size_t j = 0; j < heads; ++j) {
    const M qj = slice_cols(q, j * width, width);
    const M kj = slice_cols(k, j * width, width);
    const M vj = slice_cols(v, j * width, width);
    const M weights = softmax_rows(scale(matmul_transposed(qj, kj), inv_sqrt_width));
    outputs.push_back(matmul(weights, vj));
  }
  if (heads == 1) return outputs.front();
  return concat_cols(std::span<const M>(outputs));
}

// φ_S over a k×d matrix of points: returns a 1×1 score.
template <class M>
M forward_set(const ModelShape& shape, const WeightSet<M>& w, const M& points) {
  M z = embed_points(w, points);
  for (const auto& block : w.attention) z = attend_block(block, z, shape.heads);
  const M pooled = shape.pooling == Pooling::max ? max_rows(z) : sum_rows(z);
  return add(matmul_transposed(pooled, w.head_weight), w.head_bias);
}

// --- untaped convenience API -------------------------------------------------

// Latent vector (1×d_h) for a single point.
Matrix embed(const ModelParams& params, std::span<const double> x);
// Z' for a k×d_h latent set, through every attention block.
Matrix attend(const ModelParams& params, const Matrix& latent_set);
// Attention weight matrices (one k×k per head) of the first block.
std::vector<Matrix> attention_weights(const ModelParams& params, const Matrix& latent_set);
double score_set(const ModelParams& params, const Matrix& points);

// Registers every parameter block as a tape leaf.
WeightSet<numcore::Var> attach(numcore::Tape& tape, const WeightSet<Matrix>& weights);
WeightSet<Matrix> gradients(const numcore::Tape& tape, const WeightSet<numcore::Var>& vars);

// --- persistence ---------------------------------------------------------------

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Little-endian binary: magic, version, shape meta, then each block as
// (rows, cols, row-major doubles) in for_each_block order.
std::vector<std::uint8_t> serialize(const ModelParams& params);
ModelParams deserialize(std::span<const std::uint8_t> bytes);
void save_model(const std::string& path, const ModelParams& params);
ModelParams load_model(const std::string& path);
// FNV-1a over the serialized bytes, as 16 hex digits.
std::string model_hash(const ModelParams& params);

}  // namespace setad::encoder
