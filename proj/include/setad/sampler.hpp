#pragma once

#include <cstddef>
#include <vector>

#include "setad/numcore/matrix.hpp"
#include "setad/random.hpp"

namespace setad::sampler {

using numcore::Matrix;

enum class Pool { unlabeled, anomalies };

struct Member {
  Pool pool;
  std::size_t row;
};

// A training set of k points whose grade is the number of planted labeled
// anomalies.
struct SetSample {
  Matrix points;  // k×d
  std::size_t grade = 0;
  std::vector<Member> members;  // provenance of each row of `points`
};

// Probability of each grade 0..size()-1.
using GradeMix = std::vector<double>;

GradeMix uniform_mix(std::size_t max_grade);

// k − n_A distinct unlabeled rows plus n_A distinct anomaly rows.
SetSample sample_set(const Matrix& unlabeled, const Matrix& anomalies, std::size_t k,
                     std::size_t n_anomalies, Rng& rng);

// Drops grades the pools cannot supply (n_A > |X_A| or k − n_A > |X_U|) and
// renormalizes, warning on stderr when anything was dropped.
GradeMix feasible_mix(const GradeMix& mix, std::size_t k, std::size_t unlabeled_count,
                      std::size_t anomaly_count);

std::vector<SetSample> sample_batch(const Matrix& unlabeled, const Matrix& anomalies,
                                    std::size_t k, std::size_t batch_size, const GradeMix& mix,
                                    Rng& rng);

// `count` distinct indices from [0, n), uniformly at random (Floyd's algorithm).
std::vector<std::size_t> sample_distinct(std::size_t n, std::size_t count, Rng& rng);

}  // namespace setad::sampler
