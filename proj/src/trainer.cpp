#include "setad/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ostream>

#include "json.hpp"

#include "setad/error.hpp"
#include "setad/random.hpp"

namespace setad::trainer {

void Hyperparams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::config, what);
  };
  require(set_size >= 1, "set_size must be >= 1");
  require(latent_dim >= 1 && heads >= 1 && depth >= 1, "latent_dim, heads and depth must be >= 1");
  require(batches_per_epoch >= 1 && batch_size >= 1, "batches_per_epoch and batch_size must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(rmsprop_rho > 0.0 && rmsprop_rho < 1.0, "rmsprop_rho must lie in (0, 1)");
  require(rmsprop_epsilon > 0.0, "rmsprop_epsilon must be > 0");
  require(n_contexts >= 1 && n_refs >= 1, "n_contexts and n_refs must be >= 1");
}

OptimizerState make_optimizer_state(const encoder::ModelShape& shape) {
  return {encoder::zeros_like(shape)};
}

namespace {

void check_lengths(std::span<const double> predictions, std::span<const double> grades) {
  if (predictions.empty()) throw Error(ErrorKind::train, "loss over an empty batch");
  if (predictions.size() != grades.size()) {
    throw Error(ErrorKind::shape, "loss: " + std::to_string(predictions.size()) + " predictions for " +
                                      std::to_string(grades.size()) + " grades");
  }
}

}  // namespace

double mae_loss(std::span<const double> predictions, std::span<const double> grades) {
  check_lengths(predictions, grades);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) total += std::fabs(predictions[i] - grades[i]);
  return total / static_cast<double>(predictions.size());
}

double mse_loss(std::span<const double> predictions, std::span<const double> grades) {
  check_lengths(predictions, grades);
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - grades[i];
    total += e * e;
  }
  return total / static_cast<double>(predictions.size());
}

numcore::Var batch_loss(numcore::Var predictions, const Matrix& grades, LossKind kind) {
  if (predictions.cols() == 0) throw Error(ErrorKind::train, "loss over an empty batch");
  auto* tape = predictions.tape();
  const numcore::Var residual = sub(predictions, tape->constant(grades));
  return mean(kind == LossKind::mae ? abs(residual) : square(residual));
}

void rmsprop_step(ModelParams& params, const WeightSet<Matrix>& grads, OptimizerState& state,
                  const Hyperparams& hp) {
  // Validate every block before touching any parameter.
  encoder::for_each_block(grads, [](const std::string& name, const Matrix& g, bool) {
    if (!g.all_finite()) throw Error(ErrorKind::train, "non-finite gradient in parameter block " + name);
  });

  std::vector<const Matrix*> grad_blocks;
  encoder::for_each_block(grads, [&](const std::string&, const Matrix& g, bool) { grad_blocks.push_back(&g); });
  std::vector<Matrix*> state_blocks;
  encoder::for_each_block(state.mean_square, [&](const std::string&, Matrix& v, bool) { state_blocks.push_back(&v); });

  std::size_t index = 0;
  encoder::for_each_block(params.weights, [&](const std::string& name, Matrix& w, bool is_bias) {
    const Matrix& g = *grad_blocks.at(index);
    Matrix& v = *state_blocks.at(index);
    ++index;
    if (!g.same_shape(w) || !v.same_shape(w)) {
      throw Error(ErrorKind::shape, "rmsprop: block " + name + " shape mismatch");
    }
    const double decay = is_bias ? 0.0 : hp.weight_decay;
    auto wd = w.data();
    auto gd = g.data();
    auto vd = v.data();
    for (std::size_t i = 0; i < wd.size(); ++i) {
      const double step_grad = gd[i] + decay * wd[i];
      vd[i] = hp.rmsprop_rho * vd[i] + (1.0 - hp.rmsprop_rho) * step_grad * step_grad;
      wd[i] -= hp.learning_rate * step_grad / (std::sqrt(vd[i]) + hp.rmsprop_epsilon);
    }
  });
}

BatchGradient batch_gradient(const ModelParams& params, std::span<const sampler::SetSample> batch,
                             LossKind kind) {
  numcore::Tape tape;
  const auto vars = encoder::attach(tape, params.weights);
  std::vector<numcore::Var> predictions;
  predictions.reserve(batch.size());
  Matrix grades(1, batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto points = tape.constant(batch[i].points);
    predictions.push_back(encoder::forward_set(params.shape, vars, points));
    grades(0, i) = static_cast<double>(batch[i].grade);
  }
  const numcore::Var loss = batch_loss(numcore::concat_cols(predictions), grades, kind);
  tape.backward(loss);
  return {loss.value()(0, 0), encoder::gradients(tape, vars)};
}

std::size_t best_epoch(std::span<const EpochRecord> history) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (best == 0 || history[i].mean_loss < history[best - 1].mean_loss) best = i + 1;
  }
  return best;
}

TrainResult train(const Matrix& unlabeled, const Matrix& anomalies, const Hyperparams& hp) {
  hp.validate();
  if (anomalies.rows() < 1) throw Error(ErrorKind::config, "training needs at least one labeled anomaly");
  if (unlabeled.rows() < 1) throw Error(ErrorKind::config, "training needs a nonempty unlabeled pool");
  if (anomalies.cols() != unlabeled.cols()) {
    throw Error(ErrorKind::shape, "unlabeled pool has " + std::to_string(unlabeled.cols()) +
                                      " features, labeled anomalies have " + std::to_string(anomalies.cols()));
  }

  encoder::ModelShape shape;
  shape.input_dim = unlabeled.cols();
  shape.latent_dim = hp.latent_dim;
  shape.heads = hp.heads;
  shape.depth = hp.depth;
  shape.pooling = hp.pooling;

  TrainResult result;
  result.model = encoder::init_params(hp.seed, shape);
  ModelParams current = result.model;
  OptimizerState state = make_optimizer_state(shape);
  const sampler::GradeMix mix =
      sampler::feasible_mix(hp.grade_mix, hp.set_size, unlabeled.rows(), anomalies.rows());
  Rng rng = make_rng(hp.seed, streams::sampler);

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < hp.batches_per_epoch; ++b) {
      const auto batch = sampler::sample_batch(unlabeled, anomalies, hp.set_size, hp.batch_size, mix, rng);
      const BatchGradient step = batch_gradient(current, batch, hp.loss);
      loss_sum += step.loss;
      rmsprop_step(current, step.grads, state, hp);
    }
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    result.history.push_back({epoch, loss_sum / static_cast<double>(hp.batches_per_epoch), elapsed.count()});
    if (best_epoch(result.history) == epoch) {
      result.model = current;
      result.best_epoch = epoch;
    }
  }
  result.final_model = current;
  return result;
}

void write_training_log(std::ostream& out, const TrainResult& result, const Hyperparams& hp) {
  nlohmann::ordered_json config = {
      {"set_size", hp.set_size},
      {"latent_dim", hp.latent_dim},
      {"heads", hp.heads},
      {"depth", hp.depth},
      {"pooling", hp.pooling == encoder::Pooling::sum ? "sum" : "max"},
      {"epochs", hp.epochs},
      {"batches_per_epoch", hp.batches_per_epoch},
      {"batch_size", hp.batch_size},
      {"learning_rate", hp.learning_rate},
      {"weight_decay", hp.weight_decay},
      {"rmsprop_rho", hp.rmsprop_rho},
      {"rmsprop_epsilon", hp.rmsprop_epsilon},
      {"loss", hp.loss == LossKind::mae ? "mae" : "mse"},
      {"grade_mix", hp.grade_mix},
      {"seed", hp.seed},
  };
  out << nlohmann::ordered_json{{"config", config}, {"best_epoch", result.best_epoch}}.dump() << '\n';
  for (const auto& rec : result.history) {
    out << nlohmann::ordered_json{{"epoch", rec.epoch}, {"mean_loss", rec.mean_loss}, {"wall_ms", rec.wall_ms}}.dump()
        << '\n';
  }
}

}  // namespace setad::trainer
