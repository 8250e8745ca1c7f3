#pragma once
// Training objectives: cross-entropy, label-aware smoothing (LAS), its
// active batch-adaptive variant (ALAS), and angular entropy minimization
// (AEM), with analytic gradients w.r.t. pre-softmax logits.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "ltlab/matrix.hpp"
#include "ltlab/numeric.hpp"

namespace ltlab {

// Counts how often a log argument had to be clamped at 1e-300.
inline std::atomic<unsigned long long> log_clamp_warnings{0};

inline double clamped_log(double p) {
  if (p < 1e-300) {
    log_clamp_warnings.fetch_add(1, std::memory_order_relaxed);
    p = 1e-300;
  }
  return std::log(p);
}

// -sum_i q_i log p_i with the 0*log 0 = 0 convention.
inline double cross_entropy(std::span<const double> probs,
                            std::span<const double> target) {
  if (probs.size() != target.size())
    throw std::invalid_argument("cross_entropy: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (target[i] > 0.0) loss -= target[i] * clamped_log(probs[i]);
  }
  return loss;
}

// H(p) = -sum p log p.
inline double entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

// L(q, p) = -(sum q log p + sum p log p) = CE(q, p) + H(p).
inline double aem_loss(std::span<const double> probs,
                       std::span<const double> target) {
  return cross_entropy(probs, target) + entropy(probs);
}

enum class SmoothForm { linear, concave };

// Applies the chosen form to an already min-max-normalized input.
inline double smooth_form(double x_hat, SmoothForm form) {
  switch (form) {
    case SmoothForm::linear:
      return x_hat;
    case SmoothForm::concave:
      return std::sin(std::numbers::pi * x_hat / 2.0);
  }
  return x_hat;
}

// f(N_y): class counts min-max normalized to [0, 1], then the chosen form.
// Larger classes get larger smoothing factors. Balanced counts degenerate to
// zero smoothing (one-hot targets).
inline std::vector<double> las_smoothing_factors(
    const std::vector<std::size_t>& class_counts, SmoothForm form) {
  if (class_counts.empty())
    throw std::invalid_argument("las_smoothing_factors: no classes");
  for (std::size_t n : class_counts) {
    if (n == 0) throw std::invalid_argument("las_smoothing_factors: zero count");
  }
  const auto [lo, hi] = std::minmax_element(class_counts.begin(), class_counts.end());
  std::vector<double> f(class_counts.size(), 0.0);
  if (*hi == *lo) return f;
  for (std::size_t c = 0; c < class_counts.size(); ++c) {
    const double x_hat = static_cast<double>(class_counts[c] - *lo) /
                         static_cast<double>(*hi - *lo);
    f[c] = smooth_form(x_hat, form);
  }
  return f;
}

// Row y is the LAS target distribution for true class y:
// 1 - f(N_y) on y, f(N_y)/(M-1) elsewhere.
inline Matrix las_targets(const std::vector<std::size_t>& class_counts,
                          SmoothForm form) {
  const std::size_t m = class_counts.size();
  if (m < 2) throw std::invalid_argument("las_targets: need at least 2 classes");
  const std::vector<double> f = las_smoothing_factors(class_counts, form);
  Matrix q(m, m);
  for (std::size_t y = 0; y < m; ++y) {
    for (std::size_t i = 0; i < m; ++i) {
      q.at(y, i) = (i == y) ? 1.0 - f[y] : f[y] / static_cast<double>(m - 1);
    }
  }
  return q;
}

inline constexpr double kAlasCeiling = 1.0 - 1e-6;

// Per-class regularization factors R^b_y carried across batches.
struct SmoothingState {
  std::vector<double> factors;  // R^b_y, clamped to [0, 1-1e-6]
  std::size_t batch_count = 0;
  double tau = 0.75;
  SmoothForm form = SmoothForm::concave;
  bool initialized = false;
};

// R^0_y = f(N_y).
inline SmoothingState alas_init(const std::vector<std::size_t>& class_counts,
                                double tau, SmoothForm form) {
  SmoothingState st;
  st.factors = las_smoothing_factors(class_counts, form);
  for (double& r : st.factors) r = std::clamp(r, 0.0, kAlasCeiling);
  st.tau = tau;
  st.form = form;
  st.initialized = true;
  return st;
}

// One moving-average step for explicitly supplied per-class f outputs:
// R^b_y = clamp((tau * f_y + R^{b-1}_y) / 2, 0, 1-1e-6).
inline double alas_step(double f_out, double prev, double tau) {
  return std::clamp((tau * f_out + prev) / 2.0, 0.0, kAlasCeiling);
}

// Applies one moving-average update from accumulated per-class true-class
// probability sums and sample counts. Classes with zero count carry their
// factor forward; the present-class means are min-max normalized before f.
inline void alas_update_from_sums(SmoothingState& st,
                                  const std::vector<double>& sums,
                                  const std::vector<std::size_t>& counts) {
  if (!st.initialized) throw std::runtime_error("alas_update: uninitialized state");
  const std::size_t m = st.factors.size();
  if (sums.size() != m || counts.size() != m)
    throw std::invalid_argument("alas_update: class count mismatch");
  std::vector<std::size_t> present;
  std::vector<double> means;
  for (std::size_t y = 0; y < m; ++y) {
    if (counts[y] > 0) {
      present.push_back(y);
      means.push_back(sums[y] / static_cast<double>(counts[y]));
    }
  }
  const std::vector<double> normed = minmax_normalize(means);
  for (std::size_t k = 0; k < present.size(); ++k) {
    const double f_out = smooth_form(normed[k], st.form);
    st.factors[present[k]] = alas_step(f_out, st.factors[present[k]], st.tau);
  }
  ++st.batch_count;
}

// Batch update of the smoothing factors from angular softmax outputs.
// For each class present in the batch, the mean over its own samples of
// P^A_y(x) feeds f (after min-max normalization across the present classes);
// absent classes carry R forward. Returns the per-sample true-class target
// weights 1 - R^b_y.
inline std::vector<double> alas_update(SmoothingState& st,
                                       const Matrix& angular_probs,
                                       const std::vector<std::size_t>& labels) {
  if (!st.initialized) throw std::runtime_error("alas_update: uninitialized state");
  if (angular_probs.rows != labels.size())
    throw std::invalid_argument("alas_update: batch size mismatch");
  const std::size_t m = st.factors.size();
  std::vector<double> sums(m, 0.0);
  std::vector<std::size_t> counts(m, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t y = labels[i];
    if (y >= m) throw std::invalid_argument("alas_update: label out of range");
    sums[y] += angular_probs.at(i, y);
    ++counts[y];
  }
  alas_update_from_sums(st, sums, counts);

  std::vector<double> weights(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    weights[i] = 1.0 - st.factors[labels[i]];
  }
  return weights;
}

// --- gradients w.r.t. pre-softmax logits ---

// d/dz CE(q, softmax(z)) = p - q.
inline std::vector<double> ce_softmax_grad(std::span<const double> probs,
                                           std::span<const double> target) {
  if (probs.size() != target.size())
    throw std::invalid_argument("ce_softmax_grad: length mismatch");
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = probs[i] - target[i];
  return g;
}

// ALAS emits a weighted NLL on the true class only; the gradient is
// (1 - R_y) * (p - e_y).
inline std::vector<double> weighted_nll_grad(std::span<const double> probs,
                                             std::size_t label, double weight) {
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) g[i] = weight * probs[i];
  g[label] -= weight;
  return g;
}

// d/dz [CE(q, p) + H(p)] = (p - q) - p .* (log p + H(p)).
inline std::vector<double> aem_grad(std::span<const double> probs,
                                    std::span<const double> target) {
  if (probs.size() != target.size())
    throw std::invalid_argument("aem_grad: length mismatch");
  const double h = entropy(probs);
  std::vector<double> g(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = probs[i];
    g[i] = (p - target[i]) - p * (clamped_log(p) + h);
  }
  return g;
}

}  // namespace ltlab
