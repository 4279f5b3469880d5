#include "setad/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <thread>

#include "json.hpp"

#include "setad/error.hpp"
#include "setad/sampler.hpp"

namespace setad::scorer {

SetScoreFn model_scorer(const encoder::ModelParams& params) {
  return [params](const Matrix& set) { return encoder::score_set(params, set); };
}

Context sample_context(const Matrix& pool, std::size_t set_size, Rng& rng) {
  if (set_size < 1) throw Error(ErrorKind::config, "set size must be >= 1");
  const std::size_t size = set_size - 1;
  if (pool.rows() < size) {
    throw Error(ErrorKind::config, "unlabeled pool has " + std::to_string(pool.rows()) +
                                       " rows, a context needs " + std::to_string(size));
  }
  Context c;
  c.indices = sampler::sample_distinct(pool.rows(), size, rng);
  c.points = pool.gather_rows(c.indices);
  return c;
}

Matrix assemble_set(std::span<const double> x, const Context& context) {
  const std::size_t d = x.size();
  if (context.points.rows() > 0 && context.points.cols() != d) {
    throw Error(ErrorKind::shape, "point has " + std::to_string(d) + " features, context has " +
                                      std::to_string(context.points.cols()));
  }
  Matrix set(context.points.rows() + 1, d);
  std::copy(x.begin(), x.end(), set.row(0).begin());
  for (std::size_t r = 0; r < context.points.rows(); ++r) {
    auto src = context.points.row(r);
    std::copy(src.begin(), src.end(), set.row(r + 1).begin());
  }
  return set;
}

double raw_context_score(const SetScoreFn& score, std::span<const double> x, const Context& context) {
  return score(assemble_set(x, context));
}

double reference_baseline(const SetScoreFn& score, const Context& context, const Matrix& pool,
                          const ScoringOptions& options, Rng& rng, std::size_t* refs_used) {
  if (pool.rows() == 0) throw Error(ErrorKind::config, "reference pool is empty");
  const auto in_context = [&](std::size_t row) {
    return options.exclude_context &&
           std::find(context.indices.begin(), context.indices.end(), row) != context.indices.end();
  };
  const std::size_t eligible = options.exclude_context ? pool.rows() - context.indices.size() : pool.rows();
  if (eligible == 0) {
    throw Error(ErrorKind::config, "unlabeled pool of " + std::to_string(pool.rows()) +
                                       " rows leaves no reference points outside a context of " +
                                       std::to_string(context.indices.size()));
  }

  double total = 0.0;
  std::size_t count = 0;
  auto add_reference = [&](std::size_t row) {
    const double s = raw_context_score(score, pool.row(row), context);
    if (!std::isfinite(s)) {
      throw Error(ErrorKind::score, "non-finite set score for reference row " + std::to_string(row));
    }
    total += s;
    ++count;
  };

  if (options.exhaustive_refs) {
    for (std::size_t row = 0; row < pool.rows(); ++row)
      if (!in_context(row)) add_reference(row);
  } else {
    if (options.n_refs < 1) throw Error(ErrorKind::config, "n_refs must be >= 1");
    std::uniform_int_distribution<std::size_t> pick(0, pool.rows() - 1);
    for (std::size_t j = 0; j < options.n_refs; ++j) {
      std::size_t row = pick(rng);
      while (in_context(row)) row = pick(rng);
      add_reference(row);
    }
  }
  if (refs_used) *refs_used = count;
  return total / static_cast<double>(count);
}

ContextCache::ContextCache(SetScoreFn score, const Matrix& pool, const ScoringOptions& options)
    : score_(std::move(score)), options_(options), input_dim_(pool.cols()) {
  if (options.n_contexts < 1) throw Error(ErrorKind::config, "n_contexts must be >= 1");
  Rng rng = make_rng(options.seed, streams::contexts);
  contexts_.reserve(options.n_contexts);
  for (std::size_t i = 0; i < options.n_contexts; ++i) {
    Context c = sample_context(pool, options.set_size, rng);
    c.baseline = reference_baseline(score_, c, pool, options_, rng, &c.refs_used);
    contexts_.push_back(std::move(c));
  }
}

CalibratedScore score_point(const ContextCache& cache, std::span<const double> x, std::size_t point_id) {
  if (x.size() != cache.input_dim()) {
    throw Error(ErrorKind::shape, "test point has " + std::to_string(x.size()) + " features, pool has " +
                                      std::to_string(cache.input_dim()));
  }
  CalibratedScore out;
  out.point_id = point_id;
  out.n_contexts = cache.contexts().size();
  out.n_refs = cache.options().exhaustive_refs ? 0 : cache.options().n_refs;
  double total = 0.0;
  for (std::size_t i = 0; i < cache.contexts().size(); ++i) {
    const Context& c = cache.contexts()[i];
    const double raw = raw_context_score(cache.score_fn(), x, c);
    if (!std::isfinite(raw)) {
      throw Error(ErrorKind::score, "non-finite set score for point " + std::to_string(point_id) + " in context " +
                                        std::to_string(i));
    }
    const double normalized = raw - c.baseline;
    if (cache.options().keep_per_context) out.per_context.push_back(normalized);
    total += normalized;
  }
  out.score = total / static_cast<double>(cache.contexts().size());
  return out;
}

CalibratedScore score_point(const encoder::ModelParams& params, std::span<const double> x, const Matrix& pool,
                            const ScoringOptions& options) {
  const ContextCache cache(model_scorer(params), pool, options);
  return score_point(cache, x);
}

std::vector<double> ScoreReport::scores() const {
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(p.score);
  return out;
}

ScoreReport score_dataset(const ContextCache& cache, const data::Dataset& test) {
  ScoreReport report;
  report.options = cache.options();
  const std::size_t n = test.rows();
  report.points.resize(n);

  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      report.points[r].row = r;
      report.points[r].score = score_point(cache, test.features.row(r), r).score;
      if (test.labeled()) report.points[r].label = test.labels[r];
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(cache.options().threads, n));
  if (threads <= 1) {
    score_range(0, n);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    {
      std::vector<std::jthread> workers;
      const std::size_t chunk = (n + threads - 1) / threads;
      for (std::size_t t = 0; t < threads; ++t) {
        workers.emplace_back([&, t] {
          try {
            score_range(std::min(n, t * chunk), std::min(n, (t + 1) * chunk));
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  if (test.labeled() && n > 0) {
    const std::size_t pos = test.anomaly_count();
    if (pos > 0 && pos < n) report.metrics = metrics::evaluate(report.scores(), test.labels);
  }
  return report;
}

ScoreReport score_dataset(const encoder::ModelParams& params, const data::Dataset& test, const Matrix& pool,
                          const ScoringOptions& options) {
  if (test.rows() > 0 && test.dim() != params.shape.input_dim) {
    throw Error(ErrorKind::shape, "test data has " + std::to_string(test.dim()) + " features, model expects " +
                                      std::to_string(params.shape.input_dim));
  }
  if (pool.cols() != params.shape.input_dim) {
    throw Error(ErrorKind::shape, "unlabeled pool has " + std::to_string(pool.cols()) + " features, model expects " +
                                      std::to_string(params.shape.input_dim));
  }
  ScoreReport report;
  if (test.rows() == 0) {
    report.options = options;
  } else {
    const ContextCache cache(model_scorer(params), pool, options);
    report = score_dataset(cache, test);
  }
  report.model_hash = encoder::model_hash(params);
  return report;
}

// --- report serialization -------------------------------------------------------------

void write_report(std::ostream& out, const ScoreReport& report) {
  using nlohmann::ordered_json;
  ordered_json meta = {
      {"format", "setad-score-report"},
      {"version", 1},
      {"model_hash", report.model_hash},
      {"train_seed", report.train_seed ? ordered_json(*report.train_seed) : ordered_json(nullptr)},
      {"score_seed", report.options.seed},
      {"set_size", report.options.set_size},
      {"n_contexts", report.options.n_contexts},
      {"n_refs", report.options.n_refs},
      {"exhaustive_refs", report.options.exhaustive_refs},
      {"exclude_context", report.options.exclude_context},
      {"n_points", report.points.size()},
  };
  ordered_json points = ordered_json::array();
  for (const auto& p : report.points) {
    ordered_json rec = {{"row", p.row}, {"score", p.score}};
    if (p.label) rec["label"] = *p.label;
    points.push_back(std::move(rec));
  }
  ordered_json doc = {{"meta", meta}, {"points", points}};
  if (report.metrics) {
    doc["metrics"] = {{"auc_roc", report.metrics->auc_roc},
                      {"auc_pr", report.metrics->auc_pr},
                      {"n_pos", report.metrics->n_pos},
                      {"n_neg", report.metrics->n_neg}};
  }
  out << doc.dump(2) << '\n';
}

ScoreReport read_report(std::istream& in) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("score report: ") + e.what());
  }
  try {
    const auto& meta = doc.at("meta");
    if (meta.at("format") != "setad-score-report") throw Error(ErrorKind::parse, "not a score report");
    ScoreReport r;
    r.model_hash = meta.at("model_hash").get<std::string>();
    if (!meta.at("train_seed").is_null()) r.train_seed = meta.at("train_seed").get<std::uint64_t>();
    r.options.seed = meta.at("score_seed").get<std::uint64_t>();
    r.options.set_size = meta.at("set_size").get<std::size_t>();
    r.options.n_contexts = meta.at("n_contexts").get<std::size_t>();
    r.options.n_refs = meta.at("n_refs").get<std::size_t>();
    r.options.exhaustive_refs = meta.at("exhaustive_refs").get<bool>();
    r.options.exclude_context = meta.at("exclude_context").get<bool>();
    for (const auto& p : doc.at("points")) {
      PointRecord rec;
      rec.row = p.at("row").get<std::size_t>();
      rec.score = p.at("score").get<double>();
      if (p.contains("label")) rec.label = p.at("label").get<std::uint8_t>();
      r.points.push_back(rec);
    }
    if (doc.contains("metrics")) {
      const auto& m = doc.at("metrics");
      r.metrics = metrics::EvalResult{m.at("auc_roc").get<double>(), m.at("auc_pr").get<double>(),
                                      m.at("n_pos").get<std::size_t>(), m.at("n_neg").get<std::size_t>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse, std::string("score report: ") + e.what());
  }
}

}  // namespace setad::scorer
