#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "setad/encoder.hpp"
#include "setad/error.hpp"
#include "setad/scorer.hpp"
#include "support/oracles.hpp"

using namespace setad;
using namespace setad::scorer;
using numcore::Matrix;

namespace {

// φ(S) = Σ_{x∈S} c(x) for a fixed nonlinear per-point contribution c.
struct AdditiveStub {
  std::vector<double> weights;
  double c(std::span<const double> x) const {
    double s = std::sin(x[0]);
    for (std::size_t j = 0; j < x.size(); ++j) s += weights[j] * x[j];
    return s;
  }
  SetScoreFn fn() const {
    return [stub = *this](const Matrix& set) {
      double total = 0.0;
      for (std::size_t r = 0; r < set.rows(); ++r) total += stub.c(set.row(r));
      return total;
    };
  }
};

AdditiveStub random_stub(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  AdditiveStub s;
  for (std::size_t j = 0; j < d; ++j) s.weights.push_back(n(rng));
  return s;
}

encoder::ModelParams random_model(std::size_t d, std::uint64_t seed) {
  encoder::ModelParams p = encoder::init_params(seed, d, 6, 2);
  std::mt19937_64 rng(seed);
  p.weights.embed_bias = oracle::random_matrix(1, 6, rng, -0.5, 0.5);
  return p;
}

ScoringOptions opts(std::size_t k, std::size_t n_contexts, std::size_t n_refs, std::uint64_t seed) {
  ScoringOptions o;
  o.set_size = k;
  o.n_contexts = n_contexts;
  o.n_refs = n_refs;
  o.seed = seed;
  return o;
}

double pool_mean(const AdditiveStub& stub, const Matrix& pool) {
  double total = 0.0;
  for (std::size_t r = 0; r < pool.rows(); ++r) total += stub.c(pool.row(r));
  return total / static_cast<double>(pool.rows());
}

double variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("sample_context draws k-1 distinct in-range rows") {
  std::mt19937_64 g(1);
  const Matrix pool = oracle::random_matrix(20, 3, g);
  Rng rng = make_rng(4, streams::contexts);
  for (int t = 0; t < 100; ++t) {
    const Context c = sample_context(pool, 8, rng);
    REQUIRE(c.indices.size() == 7);
    auto sorted = c.indices;
    std::sort(sorted.begin(), sorted.end());
    CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
    CHECK(sorted.back() < 20);
    for (std::size_t i = 0; i < 7; ++i)
      CHECK(std::equal(c.points.row(i).begin(), c.points.row(i).end(), pool.row(c.indices[i]).begin()));
  }
  CHECK_THROWS_AS(sample_context(Matrix(3, 3), 8, rng), Error);
}

TEST_CASE("raw_context_score") {
  std::mt19937_64 g(2);
  const encoder::ModelParams p = random_model(3, 2);
  const Matrix pool = oracle::random_matrix(30, 3, g);
  Rng rng = make_rng(0, streams::contexts);
  Context c = sample_context(pool, 5, rng);
  const Matrix x = oracle::random_matrix(1, 3, g);
  const SetScoreFn fn = model_scorer(p);

  SUBCASE("equals score_set on the assembled set bitwise") {
    CHECK(raw_context_score(fn, x.row(0), c) == encoder::score_set(p, assemble_set(x.row(0), c)));
    CHECK(assemble_set(x.row(0), c).rows() == 5);
  }
  SUBCASE("context order does not matter") {
    Context reversed = c;
    std::reverse(reversed.indices.begin(), reversed.indices.end());
    reversed.points = pool.gather_rows(reversed.indices);
    CHECK(std::abs(raw_context_score(fn, x.row(0), c) - raw_context_score(fn, x.row(0), reversed)) < 1e-9);
  }
  SUBCASE("constant head") {
    encoder::ModelParams q = p;
    q.weights.head_weight = Matrix(1, 6, 0.0);
    q.weights.head_bias = Matrix{{-1.25}};
    CHECK(raw_context_score(model_scorer(q), x.row(0), c) == -1.25);
  }
  SUBCASE("dimension mismatch") {
    const double wrong[] = {1.0, 2.0};
    CHECK_THROWS_AS(raw_context_score(fn, wrong, c), Error);
  }
}

TEST_CASE("reference_baseline") {
  std::mt19937_64 g(3);
  const Matrix pool = oracle::random_matrix(25, 2, g);
  const encoder::ModelParams p = random_model(2, 3);
  const SetScoreFn fn = model_scorer(p);
  Rng crng = make_rng(1, streams::contexts);
  const Context c = sample_context(pool, 4, crng);

  SUBCASE("constant model gives its bias") {
    const SetScoreFn constant = [](const Matrix&) { return 0.375; };
    Rng rng = make_rng(2);
    CHECK(reference_baseline(constant, c, pool, opts(4, 1, 30, 0), rng, nullptr) == 0.375);
  }
  SUBCASE("exhaustive mode is the brute-force mean over the pool minus the context") {
    ScoringOptions o = opts(4, 1, 30, 0);
    o.exhaustive_refs = true;
    Rng rng = make_rng(2);
    std::size_t used = 0;
    const double got = reference_baseline(fn, c, pool, o, rng, &used);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < pool.rows(); ++r) {
      if (std::find(c.indices.begin(), c.indices.end(), r) != c.indices.end()) continue;
      Matrix set(4, 2);
      std::copy(pool.row(r).begin(), pool.row(r).end(), set.row(0).begin());
      for (std::size_t i = 0; i < 3; ++i) std::copy(c.points.row(i).begin(), c.points.row(i).end(), set.row(i + 1).begin());
      total += oracle::naive_score(p, set);
      ++count;
    }
    CHECK(used == 22);
    CHECK(got == doctest::Approx(total / static_cast<double>(count)).epsilon(1e-12));

    o.exclude_context = false;
    CHECK(reference_baseline(fn, c, pool, o, rng, &used) != got);
    CHECK(used == 25);
  }
  SUBCASE("same seed, same baseline") {
    Rng a = make_rng(9), b = make_rng(9);
    CHECK(reference_baseline(fn, c, pool, opts(4, 1, 30, 0), a, nullptr) ==
          reference_baseline(fn, c, pool, opts(4, 1, 30, 0), b, nullptr));
  }
  SUBCASE("sampled references never hit the context") {
    std::vector<std::size_t> seen;
    const SetScoreFn spy = [&](const Matrix& set) {
      for (std::size_t r = 0; r < pool.rows(); ++r)
        if (std::equal(set.row(0).begin(), set.row(0).end(), pool.row(r).begin())) seen.push_back(r);
      return 0.0;
    };
    Rng rng = make_rng(5);
    reference_baseline(spy, c, pool, opts(4, 1, 500, 0), rng, nullptr);
    CHECK(seen.size() == 500);
    for (std::size_t r : seen) CHECK(std::find(c.indices.begin(), c.indices.end(), r) == c.indices.end());
  }
  SUBCASE("no eligible references") {
    Rng rng = make_rng(0);
    const Matrix tiny = oracle::random_matrix(3, 2, g);
    Context all = sample_context(tiny, 4, rng);
    try {
      reference_baseline(fn, all, tiny, opts(4, 1, 30, 0), rng, nullptr);
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::config);
    }
  }
}

TEST_CASE("constant model cancels exactly") {
  std::mt19937_64 g(4);
  const Matrix pool = oracle::random_matrix(50, 4, g);
  const ContextCache cache([](const Matrix&) { return 3.75; }, pool, opts(8, 60, 30, 1));
  for (int t = 0; t < 100; ++t) {
    const Matrix x = oracle::random_matrix(1, 4, g, -10.0, 10.0);
    CHECK(std::abs(score_point(cache, x.row(0)).score) < 1e-12);
  }
}

TEST_CASE("additive stub in exhaustive mode") {
  std::mt19937_64 g(5);
  const Matrix pool = oracle::random_matrix(40, 3, g);
  const AdditiveStub stub = random_stub(3, g);

  SUBCASE("full pool references give c(x) - mean c(X_U)") {
    ScoringOptions o = opts(8, 60, 30, 2);
    o.exhaustive_refs = true;
    o.exclude_context = false;
    const ContextCache cache(stub.fn(), pool, o);
    const double mu = pool_mean(stub, pool);
    for (int t = 0; t < 100; ++t) {
      const Matrix x = oracle::random_matrix(1, 3, g);
      CHECK(std::abs(score_point(cache, x.row(0)).score - (stub.c(x.row(0)) - mu)) < 1e-10);
    }
  }
  SUBCASE("excluding the context averages the per-context leave-out mean") {
    ScoringOptions o = opts(8, 10, 30, 2);
    o.exhaustive_refs = true;
    const ContextCache cache(stub.fn(), pool, o);
    const Matrix x = oracle::random_matrix(1, 3, g);
    double expected = 0.0;
    for (const auto& c : cache.contexts()) {
      double total = 0.0;
      std::size_t n = 0;
      for (std::size_t r = 0; r < pool.rows(); ++r) {
        if (std::find(c.indices.begin(), c.indices.end(), r) != c.indices.end()) continue;
        total += stub.c(pool.row(r));
        ++n;
      }
      expected += stub.c(x.row(0)) - total / static_cast<double>(n);
    }
    expected /= static_cast<double>(cache.contexts().size());
    CHECK(std::abs(score_point(cache, x.row(0)).score - expected) < 1e-10);
  }
}

TEST_CASE("single context with exhaustive references on a real model") {
  std::mt19937_64 g(6);
  const Matrix pool = oracle::random_matrix(15, 3, g);
  const encoder::ModelParams p = random_model(3, 6);
  ScoringOptions o = opts(4, 1, 30, 3);
  o.exhaustive_refs = true;
  o.keep_per_context = true;
  const ContextCache cache(model_scorer(p), pool, o);
  const Context& c = cache.contexts().front();
  const Matrix x = oracle::random_matrix(1, 3, g);
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < pool.rows(); ++r) {
    if (std::find(c.indices.begin(), c.indices.end(), r) != c.indices.end()) continue;
    total += oracle::naive_score(p, assemble_set(pool.row(r), c));
    ++n;
  }
  const double expected = oracle::naive_score(p, assemble_set(x.row(0), c)) - total / static_cast<double>(n);
  const CalibratedScore s = score_point(cache, x.row(0));
  CHECK(s.score == doctest::Approx(expected).epsilon(1e-12));
  REQUIRE(s.per_context.size() == 1);
  CHECK(s.per_context[0] == s.score);
}

TEST_CASE("additive stub Monte-Carlo error is bounded by the context budget") {
  std::mt19937_64 g(7);
  int within = 0;
  for (int t = 0; t < 100; ++t) {
    const Matrix pool = oracle::random_matrix(200, 3, g);
    const AdditiveStub stub = random_stub(3, g);
    std::vector<double> cs;
    for (std::size_t r = 0; r < pool.rows(); ++r) cs.push_back(stub.c(pool.row(r)));
    const double sd = std::sqrt(variance(cs));
    const Matrix x = oracle::random_matrix(1, 3, g);
    const ScoringOptions o = opts(8, 60, 30, static_cast<std::uint64_t>(t));
    const ContextCache cache(stub.fn(), pool, o);
    const double err = std::abs(score_point(cache, x.row(0)).score - (stub.c(x.row(0)) - pool_mean(stub, pool)));
    if (err < 5.0 * sd / std::sqrt(60.0)) ++within;
  }
  CHECK(within == 100);
}

TEST_CASE("context budget reduces variance") {
  std::mt19937_64 g(8);
  const Matrix pool = oracle::random_matrix(300, 4, g);
  const encoder::ModelParams p = random_model(4, 8);
  const Matrix x = oracle::random_matrix(1, 4, g);
  auto repeated = [&](std::size_t n_contexts) {
    std::vector<double> out;
    for (std::uint64_t s = 0; s < 500; ++s) {
      const ContextCache cache(model_scorer(p), pool, opts(8, n_contexts, 30, 1000 * n_contexts + s));
      out.push_back(score_point(cache, x.row(0)).score);
    }
    return out;
  };
  std::vector<double> mads;
  std::vector<double> vars;
  for (std::size_t n : {1, 4, 16, 64}) {
    const auto v = repeated(n);
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double mad = 0.0;
    for (double s : v) mad += std::abs(s - m);
    mads.push_back(mad / static_cast<double>(v.size()));
    vars.push_back(variance(v));
  }
  const double ratio = vars[2] / vars[0];
  CHECK(ratio >= 1.0 / 32.0);
  CHECK(ratio <= 1.0 / 8.0);
  CHECK(mads[0] > mads[1]);
  CHECK(mads[1] > mads[2]);
  CHECK(mads[2] > mads[3]);
}

TEST_CASE("score_dataset") {
  std::mt19937_64 g(9);
  const Matrix pool = oracle::random_matrix(60, 3, g);
  const encoder::ModelParams p = random_model(3, 9);
  data::Dataset test;
  test.features = oracle::random_matrix(12, 3, g);
  test.labels = {0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0};
  const ScoringOptions o = opts(5, 20, 10, 4);

  const ScoreReport report = score_dataset(p, test, pool, o);
  REQUIRE(report.points.size() == 12);
  REQUIRE(report.metrics.has_value());
  CHECK(report.metrics->n_pos == 3);
  CHECK(report.model_hash == encoder::model_hash(p));

  SUBCASE("single row matches score_point") {
    const std::vector<std::size_t> idx = {4};
    const data::Dataset one = test.subset(idx);
    const ScoreReport single = score_dataset(p, one, pool, o);
    REQUIRE(single.points.size() == 1);
    CHECK(single.points[0].score == score_point(p, test.features.row(4), pool, o).score);
    CHECK(single.points[0].score == report.points[4].score);
  }
  SUBCASE("shuffled rows give the same multiset") {
    std::vector<std::size_t> order(12);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), g);
    const ScoreReport shuffled = score_dataset(p, test.subset(order), pool, o);
    auto a = report.scores(), b = shuffled.scores();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
    for (std::size_t i = 0; i < 12; ++i) CHECK(shuffled.points[i].score == report.points[order[i]].score);
  }
  SUBCASE("threads keep input order and values") {
    ScoringOptions threaded = o;
    threaded.threads = 3;
    CHECK(score_dataset(p, test, pool, threaded).scores() == report.scores());
  }
  SUBCASE("empty test set") {
    data::Dataset empty;
    empty.features = Matrix(0, 3);
    const ScoreReport r = score_dataset(p, empty, pool, o);
    CHECK(r.points.empty());
    CHECK_FALSE(r.metrics.has_value());
  }
  SUBCASE("single-class labels omit metrics") {
    data::Dataset normals = test;
    std::fill(normals.labels.begin(), normals.labels.end(), 0);
    CHECK_FALSE(score_dataset(p, normals, pool, o).metrics.has_value());
  }
  SUBCASE("shape errors") {
    data::Dataset wide;
    wide.features = Matrix(2, 4);
    CHECK_THROWS_AS(score_dataset(p, wide, pool, o), Error);
    CHECK_THROWS_AS(score_dataset(p, test, Matrix(10, 2), o), Error);
  }
  SUBCASE("report round trip") {
    std::stringstream ss;
    write_report(ss, report);
    const std::string first = ss.str();
    const ScoreReport back = read_report(ss);
    CHECK(back.model_hash == report.model_hash);
    CHECK(back.scores() == report.scores());
    CHECK(back.options.n_contexts == 20);
    std::stringstream again;
    write_report(again, back);
    CHECK(again.str() == first);
  }
}

TEST_CASE("non-finite model output is a score error") {
  std::mt19937_64 g(10);
  const Matrix pool = oracle::random_matrix(20, 2, g);
  int calls = 0;
  const SetScoreFn flaky = [&](const Matrix&) {
    return ++calls > 50 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  };
  const ContextCache cache(flaky, pool, opts(3, 5, 10, 0));
  try {
    const double x[] = {0.0, 0.0};
    score_point(cache, x);
    FAIL("expected score error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::score);
  }
}
