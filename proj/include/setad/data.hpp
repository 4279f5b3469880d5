#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "setad/numcore/matrix.hpp"

namespace setad::data {

using numcore::Matrix;

struct Dataset {
  Matrix features;                  // n×d
  std::vector<std::uint8_t> labels; // n flags, 1 = anomaly; empty when unlabeled
  std::vector<std::string> feature_names;

  std::size_t rows() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  bool labeled() const { return !labels.empty(); }
  std::size_t anomaly_count() const;
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

struct CsvOptions {
  // Column holding the 0/1 label. Empty means the last column.
  std::string label_column;
  // Parse every column as a feature (scoring unlabeled data).
  bool unlabeled = false;
};

Dataset load_csv(const std::string& path, const CsvOptions& options = {});
Dataset parse_csv(const std::string& text, const CsvOptions& options = {},
                  const std::string& source = "<memory>");
void write_csv(const std::string& path, const Dataset& data);

struct NormStats {
  std::vector<double> mean;          // per surviving feature
  std::vector<double> stddev;        // per surviving feature, population std
  std::vector<std::size_t> kept;     // original column indices kept
  std::vector<std::size_t> dropped;  // original column indices with zero std
  std::size_t input_dim = 0;

  Matrix apply(const Matrix& raw) const;
};

// Per-feature z-score statistics of `rows`; zero-std columns are dropped.
NormStats fit_normalizer(const Matrix& rows);

struct Normalized {
  Dataset train;
  Dataset test;
  NormStats stats;
};

// Statistics from `train` only, applied to both.
Normalized preprocess(const Dataset& train, const Dataset& test);

struct SplitSpec {
  double test_fraction = 0.2;
  // Exactly one of the two budgets is used; the absolute count wins.
  std::optional<std::size_t> labeled_count;
  std::optional<double> labeled_ratio;  // fraction of training-split anomalies
  double contamination_cap = 0.02;
  // Retain exactly the cap's worth of anomalies in the pool or fail, instead of
  // at most that many. Used by the contamination sweep.
  bool exact_contamination = false;
  std::uint64_t seed = 0;
};

enum class NormSource { train, all };

struct PreparedData {
  Matrix unlabeled;   // X_U
  Matrix anomalies;   // X_A
  Dataset test;       // natural label distribution
  NormStats stats;
  // Source row ids in the input dataset, aligned with the matrices above.
  std::vector<std::size_t> unlabeled_rows;
  std::vector<std::size_t> anomaly_rows;
  std::vector<std::size_t> test_rows;
  std::size_t unlabeled_anomalies = 0;  // hidden anomalies inside X_U

  double contamination() const {
    return unlabeled.rows() ? static_cast<double>(unlabeled_anomalies) / unlabeled.rows() : 0.0;
  }
};

std::size_t labeled_budget(const SplitSpec& spec, std::size_t train_anomalies);

// Partitions raw rows into X_U, X_A and test. Features are left untouched.
PreparedData split(const Dataset& data, const SplitSpec& spec);

// Normalizes a split in place with statistics from the training rows
// (X_U ∪ X_A), or from every input row when `source` is `all`.
void normalize(PreparedData& prepared, const Dataset& original, NormSource source = NormSource::train);

PreparedData prepare(const Dataset& data, const SplitSpec& spec, NormSource source = NormSource::train);

void save_prepared(const std::string& dir, const PreparedData& prepared);
PreparedData load_prepared(const std::string& dir);

// Normals ~ N(0, I_d); anomalies uniform in the shell of radii
// [separation·√d, (separation+1)·√d].
Dataset synth_blobs(std::size_t n_normal, std::size_t n_anomaly, std::size_t dim, double separation,
                    std::uint64_t seed);

}  // namespace setad::data
