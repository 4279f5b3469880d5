#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "setad/encoder.hpp"
#include "setad/numcore/tape.hpp"
#include "setad/sampler.hpp"

namespace setad::trainer {

using encoder::ModelParams;
using encoder::WeightSet;
using numcore::Matrix;

enum class LossKind { mae, mse };

struct Hyperparams {
  std::size_t set_size = 8;     // k
  std::size_t latent_dim = 20;  // d_h
  std::size_t heads = 2;        // h
  std::size_t depth = 1;
  encoder::Pooling pooling = encoder::Pooling::sum;
  std::size_t epochs = 20;
  std::size_t batches_per_epoch = 20;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double weight_decay = 0.1;
  double rmsprop_rho = 0.99;
  double rmsprop_epsilon = 1e-8;
  LossKind loss = LossKind::mae;
  sampler::GradeMix grade_mix = sampler::uniform_mix(2);
  std::size_t n_contexts = 60;  // n_C
  std::size_t n_refs = 30;      // n_r
  std::uint64_t seed = 0;

  // Throws config errors for counts < 1, non-positive rates, ρ outside (0, 1).
  void validate() const;
};

// Running mean of squared gradients, one block per parameter block.
struct OptimizerState {
  WeightSet<Matrix> mean_square;
};

OptimizerState make_optimizer_state(const encoder::ModelShape& shape);

double mae_loss(std::span<const double> predictions, std::span<const double> grades);
double mse_loss(std::span<const double> predictions, std::span<const double> grades);

// Taped batch loss over a 1×N row of predictions.
numcore::Var batch_loss(numcore::Var predictions, const Matrix& grades, LossKind kind);

// One RMSProp update with L2 decay added to the gradient of non-bias blocks:
//   g' = g + λ·w;  v = ρ·v + (1−ρ)·g'²;  w -= lr·g' / (√v + ε)
// A non-finite gradient aborts with a train error naming the block.
void rmsprop_step(ModelParams& params, const WeightSet<Matrix>& grads, OptimizerState& state,
                  const Hyperparams& hp);

struct BatchGradient {
  double loss = 0.0;
  WeightSet<Matrix> grads;
};

// Forward and backward over one batch on a fresh tape.
BatchGradient batch_gradient(const ModelParams& params, std::span<const sampler::SetSample> batch,
                             LossKind kind);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  ModelParams model;              // best checkpoint
  ModelParams final_model;        // parameters after the last step
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;     // 0 when no epoch ran
};

// Index (1-based epoch) of the minimal mean loss, earliest on ties; 0 if empty.
std::size_t best_epoch(std::span<const EpochRecord> history);

// Trains on X_U / X_A. Requires at least one labeled anomaly.
TrainResult train(const Matrix& unlabeled, const Matrix& anomalies, const Hyperparams& hp);

// Line-delimited JSON: a config record, then one record per epoch.
void write_training_log(std::ostream& out, const TrainResult& result, const Hyperparams& hp);

}  // namespace setad::trainer
