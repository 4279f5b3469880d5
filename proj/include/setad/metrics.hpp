#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace setad::metrics {

struct EvalResult {
  double auc_roc = 0.0;
  double auc_pr = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

// Mann–Whitney statistic via rank sums with average ranks for ties, i.e.
// P(s_pos > s_neg) + ½·P(s_pos = s_neg). Needs both classes present.
double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision: Σ (R_t − R_{t−1})·P_t over descending distinct score
// thresholds, each tie group handled as one threshold. Needs a positive.
double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels);

EvalResult evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace setad::metrics
