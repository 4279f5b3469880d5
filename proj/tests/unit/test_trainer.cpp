#include "doctest.h"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "setad/data.hpp"
#include "setad/encoder.hpp"
#include "setad/error.hpp"
#include "setad/numcore/tape.hpp"
#include "setad/sampler.hpp"
#include "setad/trainer.hpp"

using namespace setad;
using namespace setad::trainer;
using numcore::Matrix;

namespace {

data::PreparedData synthetic_split(std::uint64_t seed) {
  const auto d = data::synth_blobs(2000, 40, 10, 4.0, seed);
  data::SplitSpec spec;
  spec.labeled_count = 10;
  spec.seed = seed;
  return data::prepare(d, spec);
}

}  // namespace

TEST_CASE("mae_loss examples") {
  const double p1[] = {0, 1, 2}, g1[] = {0, 1, 2};
  CHECK(mae_loss(p1, g1) == 0.0);
  const double p2[] = {1, 2}, g2[] = {0, 0};
  CHECK(mae_loss(p2, g2) == 1.5);
  const double p3[] = {1, 3}, g3[] = {0, 0};
  CHECK(mse_loss(p3, g3) == 5.0);
  CHECK_THROWS_AS(mae_loss({}, {}), Error);
  CHECK_THROWS_AS(mae_loss(p1, g2), Error);
}

TEST_CASE("batch_loss gradient is +1/N above the grade") {
  numcore::Tape tape;
  const auto pred = tape.parameter(Matrix{{2.0, -1.0, 0.5, 3.0, 1.0}});
  const auto loss = batch_loss(pred, Matrix{{1.0, 0.0, 0.0, 2.0, 0.0}}, LossKind::mae);
  CHECK(loss.value()(0, 0) == doctest::Approx((1.0 + 1.0 + 0.5 + 1.0 + 1.0) / 5.0));
  tape.backward(loss);
  CHECK(tape.grad(pred)(0, 0) == doctest::Approx(0.2));
  CHECK(tape.grad(pred)(0, 1) == doctest::Approx(-0.2));
}

TEST_CASE("rmsprop hand example") {
  ModelParams p = encoder::init_params(0, 1, 2, 1);
  for_each_block(p.weights, [](const std::string&, Matrix& w, bool) { w = Matrix(w.rows(), w.cols(), 0.0); });
  auto grads = encoder::zeros_like(p.shape);
  for_each_block(grads, [](const std::string&, Matrix& g, bool) { g = Matrix(g.rows(), g.cols(), 1.0); });
  OptimizerState state = make_optimizer_state(p.shape);
  Hyperparams hp;
  rmsprop_step(p, grads, state, hp);
  for_each_block(state.mean_square, [](const std::string&, const Matrix& v, bool) {
    for (double x : v.data()) CHECK(x == doctest::Approx(0.01));
  });
  for_each_block(p.weights, [](const std::string&, const Matrix& w, bool) {
    for (double x : w.data()) CHECK(x == doctest::Approx(-0.01).epsilon(1e-6));
  });
}

TEST_CASE("rmsprop fixed point, decay exemption and determinism") {
  const ModelParams start = encoder::init_params(3, 4, 6, 2);
  const auto zero = encoder::zeros_like(start.shape);
  Hyperparams hp;

  hp.weight_decay = 0.0;
  ModelParams a = start;
  OptimizerState sa = make_optimizer_state(start.shape);
  rmsprop_step(a, zero, sa, hp);
  CHECK(a == start);

  hp.weight_decay = 0.1;
  ModelParams b = start;
  b.weights.embed_bias = Matrix(1, 6, 0.5);
  OptimizerState sb = make_optimizer_state(start.shape);
  rmsprop_step(b, zero, sb, hp);
  CHECK(b.weights.embed_bias == Matrix(1, 6, 0.5));
  CHECK_FALSE(b.weights.embed_weight == start.weights.embed_weight);

  ModelParams c = start, d = start;
  OptimizerState sc = make_optimizer_state(start.shape), sd = make_optimizer_state(start.shape);
  auto grads = encoder::zeros_like(start.shape);
  grads.head_weight = Matrix(1, 6, 0.3);
  rmsprop_step(c, grads, sc, hp);
  rmsprop_step(d, grads, sd, hp);
  CHECK(c == d);
}

TEST_CASE("rmsprop rejects non-finite gradients by block name") {
  ModelParams p = encoder::init_params(0, 3, 4, 2);
  const ModelParams before = p;
  auto grads = encoder::zeros_like(p.shape);
  grads.attention[0].key(1, 2) = std::numeric_limits<double>::infinity();
  OptimizerState state = make_optimizer_state(p.shape);
  try {
    rmsprop_step(p, grads, state, Hyperparams{});
    FAIL("expected train error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::train);
    CHECK(std::string(e.what()).find("attention[0].key") != std::string::npos);
  }
  CHECK(p == before);
}

TEST_CASE("best_epoch is the earliest argmin") {
  std::vector<EpochRecord> h = {{1, 0.9, 0}, {2, 0.4, 0}, {3, 0.6, 0}, {4, 0.4, 0}};
  CHECK(best_epoch(h) == 2);
  CHECK(best_epoch(std::vector<EpochRecord>{}) == 0);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  CHECK_NOTHROW(hp.validate());
  hp.rmsprop_rho = 1.0;
  CHECK_THROWS_AS(hp.validate(), Error);
  hp = Hyperparams{};
  hp.learning_rate = 0.0;
  CHECK_THROWS_AS(hp.validate(), Error);
  hp = Hyperparams{};
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), Error);
}

TEST_CASE("epochs=0 returns the initial parameters") {
  const auto split = synthetic_split(0);
  Hyperparams hp;
  hp.epochs = 0;
  hp.seed = 5;
  const TrainResult r = train(split.unlabeled, split.anomalies, hp);
  CHECK(r.history.empty());
  CHECK(r.best_epoch == 0);
  encoder::ModelShape shape;
  shape.input_dim = split.unlabeled.cols();
  CHECK(r.model == encoder::init_params(5, shape));
}

TEST_CASE("training on the synthetic data") {
  // Subcases re-enter the test case; train once.
  static const auto split = synthetic_split(1);
  Hyperparams hp;
  hp.seed = 1;
  static const TrainResult r = train(split.unlabeled, split.anomalies, hp);
  REQUIRE(r.history.size() == 20);

  SUBCASE("loss at least halves from the first to the last epoch") {
    CHECK(r.history.back().mean_loss < 0.5 * r.history.front().mean_loss);
  }
  SUBCASE("checkpoint is the argmin epoch") {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < r.history.size(); ++i)
      if (r.history[i].mean_loss < r.history[arg].mean_loss) arg = i;
    CHECK(r.best_epoch == arg + 1);
    if (r.best_epoch == r.history.size()) CHECK(r.model == r.final_model);
  }
  SUBCASE("same seed, bitwise identical checkpoint") {
    const TrainResult again = train(split.unlabeled, split.anomalies, hp);
    CHECK(encoder::serialize(again.model) == encoder::serialize(r.model));
    for (std::size_t i = 0; i < r.history.size(); ++i) CHECK(again.history[i].mean_loss == r.history[i].mean_loss);
  }
  SUBCASE("predictions are ordered by grade") {
    Rng rng = make_rng(99);
    double mean[3] = {0, 0, 0};
    for (std::size_t g = 0; g < 3; ++g) {
      for (int i = 0; i < 200; ++i) {
        const auto s = sampler::sample_set(split.unlabeled, split.anomalies, 8, g, rng);
        mean[g] += encoder::score_set(r.model, s.points) / 200.0;
      }
    }
    CHECK(mean[2] > mean[1]);
    CHECK(mean[1] > mean[0]);
  }
  SUBCASE("log format") {
    std::stringstream ss;
    write_training_log(ss, r, hp);
    std::string line;
    std::getline(ss, line);
    const auto head = nlohmann::json::parse(line);
    CHECK(head["config"]["set_size"] == 8);
    CHECK(head["config"]["learning_rate"] == 1e-3);
    CHECK(head["best_epoch"] == r.best_epoch);
    std::size_t n = 0;
    while (std::getline(ss, line)) {
      const auto rec = nlohmann::json::parse(line);
      CHECK(rec["epoch"] == ++n);
      CHECK(rec["mean_loss"].get<double>() == r.history[n - 1].mean_loss);
    }
    CHECK(n == 20);
  }
}

TEST_CASE("train errors") {
  Hyperparams hp;
  CHECK_THROWS_AS(train(Matrix(50, 3), Matrix(0, 3), hp), Error);
  CHECK_THROWS_AS(train(Matrix(50, 3), Matrix(3, 4), hp), Error);
}
