#pragma once
// Numerically safe elementary functions shared by every module.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "ltlab/matrix.hpp"

namespace ltlab {

// Clamp half-width used on the gradient path of arccos; d/du arccos(u) is
// singular at |u| = 1 and stage-one training backpropagates through it.
inline constexpr double kArccosGradEps = 1e-7;

// arccos with the input clamped to [-1, 1] on the value path, so cosine
// values that overshoot by a few ulps never produce NaN.
inline double safe_arccos(double u) {
  if (std::isnan(u)) throw std::invalid_argument("safe_arccos: NaN input");
  return std::acos(std::clamp(u, -1.0, 1.0));
}

// Derivative of (pi - arccos(u)) with the epsilon-clamped input:
// d/du (pi - arccos u) = 1 / sqrt(1 - u^2).
inline double angular_similarity_grad(double u) {
  const double uc = std::clamp(u, -1.0 + kArccosGradEps, 1.0 - kArccosGradEps);
  return 1.0 / std::sqrt(1.0 - uc * uc);
}

// Stable softmax with max subtraction.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& logits) {
  return softmax(std::span<const double>(logits));
}

// Row-wise softmax of a logit matrix.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto p = softmax(logits.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

// Index of the maximum; ties broken by the lowest index.
inline std::size_t argmax_tiebreak(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline std::size_t argmax_tiebreak(const std::vector<double>& v) {
  return argmax_tiebreak(std::span<const double>(v));
}

// Min-max normalization to [0, 1]; a constant series maps to all ones
// (degenerate rule shared by the diagnostics profiles).
inline std::vector<double> minmax_normalize(std::span<const double> v) {
  if (v.empty()) return {};
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  if (*hi == *lo) {
    std::fill(out.begin(), out.end(), 1.0);
    return out;
  }
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / span;
  return out;
}

// Shortest text form that round-trips a 64-bit float exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace ltlab
