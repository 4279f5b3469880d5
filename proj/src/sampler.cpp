#include "setad/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

#include "setad/error.hpp"

namespace setad::sampler {

GradeMix uniform_mix(std::size_t max_grade) {
  return GradeMix(max_grade + 1, 1.0 / static_cast<double>(max_grade + 1));
}

std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t j = n - count; j < n; ++j) {
    const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
    if (std::find(out.begin(), out.end(), t) == out.end()) {
      out.push_back(t);
    } else {
      out.push_back(j);
    }
  }
  return out;
}

SetSample sample_set(const Matrix& unlabeled, const Matrix& anomalies, std::size_t k,
                     std::size_t n_anomalies, Rng& rng) {
  if (n_anomalies > k) {
    throw Error(ErrorKind::config, "sampling error: grade " + std::to_string(n_anomalies) +
                                       " exceeds set size " + std::to_string(k));
  }
  if (n_anomalies > anomalies.rows()) {
    throw Error(ErrorKind::config, "sampling error: labeled-anomaly pool has " +
                                       std::to_string(anomalies.rows()) + " rows, " +
                                       std::to_string(n_anomalies) + " requested");
  }
  const std::size_t n_unlabeled = k - n_anomalies;
  if (n_unlabeled > unlabeled.rows()) {
    throw Error(ErrorKind::config, "sampling error: unlabeled pool has " +
                                       std::to_string(unlabeled.rows()) + " rows, " +
                                       std::to_string(n_unlabeled) + " requested");
  }
  if (n_anomalies > 0 && n_unlabeled > 0 && anomalies.cols() != unlabeled.cols()) {
    throw Error(ErrorKind::shape, "sampling error: pools have different feature counts");
  }

  SetSample s;
  s.grade = n_anomalies;
  s.points = Matrix(k, n_anomalies > 0 ? anomalies.cols() : unlabeled.cols());
  std::size_t r = 0;
  for (std::size_t row : sample_distinct(anomalies.rows(), n_anomalies, rng)) {
    std::copy_n(anomalies.row(row).begin(), s.points.cols(), s.points.row(r++).begin());
    s.members.push_back({Pool::anomalies, row});
  }
  for (std::size_t row : sample_distinct(unlabeled.rows(), n_unlabeled, rng)) {
    std::copy_n(unlabeled.row(row).begin(), s.points.cols(), s.points.row(r++).begin());
    s.members.push_back({Pool::unlabeled, row});
  }
  return s;
}

GradeMix feasible_mix(const GradeMix& mix, std::size_t k, std::size_t unlabeled_count,
                      std::size_t anomaly_count) {
  if (mix.empty()) throw Error(ErrorKind::config, "grade mix is empty");
  double total = 0.0;
  for (double p : mix) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorKind::config, "grade mix has a negative or non-finite weight");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw Error(ErrorKind::config, "grade mix must sum to 1");

  GradeMix out = mix;
  bool dropped = false;
  for (std::size_t g = 0; g < out.size(); ++g) {
    const bool feasible = g <= k && g <= anomaly_count && k - g <= unlabeled_count;
    if (!feasible && out[g] > 0.0) {
      out[g] = 0.0;
      dropped = true;
    }
  }
  const double kept = std::accumulate(out.begin(), out.end(), 0.0);
  if (kept <= 0.0) {
    throw Error(ErrorKind::config, "sampling error: no grade in the mix can be drawn from pools of " +
                                       std::to_string(unlabeled_count) + " unlabeled and " +
                                       std::to_string(anomaly_count) + " labeled-anomaly rows");
  }
  if (dropped) {
    std::cerr << "warning: grades above " << std::min(anomaly_count, k)
              << " dropped from the grade mix (only " << anomaly_count
              << " labeled anomalies); remaining grades renormalized\n";
    for (double& p : out) p /= kept;
  }
  return out;
}

std::vector<SetSample> sample_batch(const Matrix& unlabeled, const Matrix& anomalies,
                                    std::size_t k, std::size_t batch_size, const GradeMix& mix,
                                    Rng& rng) {
  if (batch_size < 1) throw Error(ErrorKind::config, "batch size must be >= 1");
  double total = 0.0;
  for (double p : mix) total += p;
  if (mix.empty() || std::fabs(total - 1.0) > 1e-9) {
    throw Error(ErrorKind::config, "grade mix must sum to 1");
  }
  std::discrete_distribution<std::size_t> grade_dist(mix.begin(), mix.end());
  std::vector<SetSample> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    batch.push_back(sample_set(unlabeled, anomalies, k, grade_dist(rng), rng));
  }
  return batch;
}

}  // namespace setad::sampler
