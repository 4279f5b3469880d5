#include "setad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "setad/error.hpp"

namespace setad::metrics {

namespace {

struct Counts {
  std::size_t pos = 0;
  std::size_t neg = 0;
};

Counts check_inputs(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::shape, "metrics: " + std::to_string(scores.size()) + " scores for " +
                                      std::to_string(labels.size()) + " labels");
  }
  Counts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw Error(ErrorKind::config, "metrics: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw Error(ErrorKind::score, "metrics: non-finite score");
    (labels[i] ? c.pos : c.neg) += 1;
  }
  return c;
}

// Indices sorted by score, descending when `descending`.
std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return idx;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const Counts c = check_inputs(scores, labels);
  if (c.pos == 0 || c.neg == 0) {
    throw Error(ErrorKind::score, "auc_roc needs at least one positive and one negative label");
  }
  const auto idx = order_by_score(scores, false);
  // Twice the rank sum keeps average ranks of tie groups integral.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) pos_in_group += labels[idx[j++]];
    // ranks i+1 .. j, average (i+1+j)/2
    twice_rank_sum += static_cast<std::uint64_t>(pos_in_group) * (i + 1 + j);
    i = j;
  }
  const double np = static_cast<double>(c.pos);
  const double u = static_cast<double>(twice_rank_sum) / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(c.neg));
}

double auc_pr(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const Counts c = check_inputs(scores, labels);
  if (c.pos == 0) throw Error(ErrorKind::score, "auc_pr needs at least one positive label");
  const auto idx = order_by_score(scores, true);
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t prev_tp = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) tp += labels[idx[j++]];
    seen = j;
    if (tp > prev_tp) {
      const double recall_step = static_cast<double>(tp - prev_tp) / static_cast<double>(c.pos);
      ap += recall_step * static_cast<double>(tp) / static_cast<double>(seen);
    }
    prev_tp = tp;
    i = j;
  }
  return ap;
}

EvalResult evaluate(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const Counts c = check_inputs(scores, labels);
  return {auc_roc(scores, labels), auc_pr(scores, labels), c.pos, c.neg};
}

}  // namespace setad::metrics
