#pragma once

// Independent reference implementations used only by tests. Nothing here calls
// into the library's forward kernels or metric code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "setad/encoder.hpp"
#include "setad/numcore/matrix.hpp"

namespace oracle {

using setad::numcore::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -2.0,
                            double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

// Central differences of `f` with respect to every entry of `x`.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, double step = 1e-5) {
  Matrix g(x.rows(), x.cols());
  Matrix probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + step;
    const double up = f(probe);
    probe.data()[i] = saved - step;
    const double down = f(probe);
    probe.data()[i] = saved;
    g.data()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

// Worst violation of the gradient tolerance: relative error where the true
// gradient is at least 1e-3, absolute error (scaled by 1e-4 / 1e-6) below it.
// A return value below 1e-4 means every entry passes.
inline double gradient_error(const Matrix& analytic, const Matrix& numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i];
    const double n = numeric.data()[i];
    const double diff = std::abs(a - n);
    const double err = std::abs(n) < 1e-3 ? diff * (1e-4 / 1e-6) : diff / std::abs(n);
    worst = std::max(worst, err);
  }
  return worst;
}

// Plain-loop forward pass of the set model, written directly from the model
// definition: z = relu(W_e x + b); per head softmax(Q Kᵀ/√w) V; sum or max
// pool; linear head.
inline double naive_score(const setad::encoder::ModelParams& p, const Matrix& x) {
  const auto& w = p.weights;
  const std::size_t k = x.rows(), d = x.cols(), dh = p.shape.latent_dim, h = p.shape.heads;
  std::vector<std::vector<double>> z(k, std::vector<double>(dh, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t a = 0; a < dh; ++a) {
      double s = w.embed_bias(0, a);
      for (std::size_t j = 0; j < d; ++j) s += w.embed_weight(a, j) * x(i, j);
      z[i][a] = s > 0.0 ? s : 0.0;
    }
  for (const auto& blk : w.attention) {
    auto project = [&](const Matrix& W) {
      std::vector<std::vector<double>> out(k, std::vector<double>(dh, 0.0));
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t a = 0; a < dh; ++a)
          for (std::size_t b = 0; b < dh; ++b) out[i][a] += W(a, b) * z[i][b];
      return out;
    };
    const auto q = project(blk.query), kk = project(blk.key), v = project(blk.value);
    const std::size_t width = dh / h;
    std::vector<std::vector<double>> next(k, std::vector<double>(dh, 0.0));
    for (std::size_t head = 0; head < h; ++head) {
      const std::size_t off = head * width;
      for (std::size_t i = 0; i < k; ++i) {
        std::vector<double> logits(k, 0.0);
        for (std::size_t j = 0; j < k; ++j) {
          for (std::size_t c = 0; c < width; ++c) logits[j] += q[i][off + c] * kk[j][off + c];
          logits[j] /= std::sqrt(static_cast<double>(width));
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double total = 0.0;
        for (auto& l : logits) total += (l = std::exp(l - mx));
        for (std::size_t j = 0; j < k; ++j)
          for (std::size_t c = 0; c < width; ++c) next[i][off + c] += logits[j] / total * v[j][off + c];
      }
    }
    z = next;
  }
  double out = w.head_bias(0, 0);
  for (std::size_t a = 0; a < dh; ++a) {
    double pooled = p.shape.pooling == setad::encoder::Pooling::max ? z[0][a] : 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (p.shape.pooling == setad::encoder::Pooling::max) {
        pooled = std::max(pooled, z[i][a]);
      } else {
        pooled += z[i][a];
      }
    }
    out += w.head_weight(0, a) * pooled;
  }
  return out;
}

// P(score_pos > score_neg) + ½ P(tie) by counting every pair. Returns the
// count of pair-halves so equality tests can be exact.
inline std::uint64_t pair_half_count(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::uint64_t halves = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      if (scores[i] > scores[j]) halves += 2;
      else if (scores[i] == scores[j]) halves += 1;
    }
  }
  return halves;
}

inline double brute_auc_roc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::uint64_t pos = 0, neg = 0;
  for (auto l : labels) (l ? pos : neg)++;
  return static_cast<double>(pair_half_count(scores, labels)) / (2.0 * static_cast<double>(pos * neg));
}

// Average precision: for each distinct threshold t (descending), recall gain
// times precision at "score >= t".
inline double brute_average_precision(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double total_pos = 0;
  for (auto l : labels) total_pos += l;
  double ap = 0.0, prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0, n = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (scores[i] >= t) {
        ++n;
        tp += labels[i];
      }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / n);
    prev_recall = recall;
  }
  return ap;
}

}  // namespace oracle
