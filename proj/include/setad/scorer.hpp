#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "setad/data.hpp"
#include "setad/encoder.hpp"
#include "setad/metrics.hpp"
#include "setad/random.hpp"

namespace setad::scorer {

using numcore::Matrix;

// φ_S over a k×d set of points.
using SetScoreFn = std::function<double(const Matrix&)>;

SetScoreFn model_scorer(const encoder::ModelParams& params);

struct ScoringOptions {
  std::size_t set_size = 8;     // k
  std::size_t n_contexts = 60;  // n_C
  std::size_t n_refs = 30;      // n_r
  // Use every eligible pool point as a reference instead of n_r random draws.
  bool exhaustive_refs = false;
  // Reference points never coincide with a member of their context.
  bool exclude_context = true;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool keep_per_context = false;
};

// k−1 distinct rows of X_U and the cached reference baseline for them.
struct Context {
  std::vector<std::size_t> indices;
  Matrix points;  // (k−1)×d
  double baseline = 0.0;
  std::size_t refs_used = 0;
};

Context sample_context(const Matrix& pool, std::size_t set_size, Rng& rng);

// φ_S({x} ∪ C) with x as the first row.
Matrix assemble_set(std::span<const double> x, const Context& context);
double raw_context_score(const SetScoreFn& score, std::span<const double> x, const Context& context);

// Mean raw score of reference points from the pool placed in `context`.
double reference_baseline(const SetScoreFn& score, const Context& context, const Matrix& pool,
                          const ScoringOptions& options, Rng& rng, std::size_t* refs_used = nullptr);

// Contexts with precomputed baselines, shared by every test point of a run.
class ContextCache {
 public:
  ContextCache(SetScoreFn score, const Matrix& pool, const ScoringOptions& options);

  const std::vector<Context>& contexts() const { return contexts_; }
  const ScoringOptions& options() const { return options_; }
  const SetScoreFn& score_fn() const { return score_; }
  std::size_t input_dim() const { return input_dim_; }

 private:
  SetScoreFn score_;
  ScoringOptions options_;
  std::vector<Context> contexts_;
  std::size_t input_dim_ = 0;
};

struct CalibratedScore {
  std::size_t point_id = 0;
  double score = 0.0;
  std::size_t n_contexts = 0;
  std::size_t n_refs = 0;
  std::vector<double> per_context;  // filled when keep_per_context
};

CalibratedScore score_point(const ContextCache& cache, std::span<const double> x, std::size_t point_id = 0);
CalibratedScore score_point(const encoder::ModelParams& params, std::span<const double> x, const Matrix& pool,
                            const ScoringOptions& options);

struct PointRecord {
  std::size_t row = 0;
  double score = 0.0;
  std::optional<std::uint8_t> label;
};

struct ScoreReport {
  std::string model_hash;
  std::optional<std::uint64_t> train_seed;
  ScoringOptions options;
  std::vector<PointRecord> points;
  std::optional<metrics::EvalResult> metrics;

  std::vector<double> scores() const;
};

// Scores every row of `test` (in input order) against one shared cache.
// Metrics are attached when the test set carries both label classes.
ScoreReport score_dataset(const ContextCache& cache, const data::Dataset& test);
ScoreReport score_dataset(const encoder::ModelParams& params, const data::Dataset& test, const Matrix& pool,
                          const ScoringOptions& options);

void write_report(std::ostream& out, const ScoreReport& report);
ScoreReport read_report(std::istream& in);

}  // namespace setad::scorer
