#pragma once
// Angular prediction head: angles between features and classifier weight
// rows, and the angular similarity logits pi - arccos(cos) that replace the
// inner-product output. Positive rescaling of either vector leaves these
// logits unchanged, which is the whole point.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlab/matrix.hpp"
#include "ltlab/model.hpp"
#include "ltlab/numeric.hpp"

namespace ltlab {

// Norm floor applied to ||phi|| during training only: ReLU nets can emit
// all-zero feature rows and the angle is undefined there. Evaluation paths
// treat a zero-norm row as an error instead.
inline constexpr double kTrainNormFloor = 1e-12;

struct AngularCache {
  Matrix cosines;                   // n x M
  Matrix logits;                    // n x M, pi - arccos(cos)
  std::vector<double> feat_norms;   // n
  std::vector<double> weight_norms; // M
};

inline AngularCache angular_forward(const Matrix& features, const Matrix& weights,
                                    bool training = false) {
  if (features.cols != weights.cols)
    throw std::invalid_argument("angular: feature dim mismatch");
  AngularCache cache;
  cache.feat_norms.resize(features.rows);
  cache.weight_norms.resize(weights.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double n = row_norm(features, i);
    if (n == 0.0 && !training)
      throw std::runtime_error("angular: zero-norm feature row " + std::to_string(i));
    cache.feat_norms[i] = training ? n + kTrainNormFloor : n;
  }
  for (std::size_t c = 0; c < weights.rows; ++c) {
    const double n = row_norm(weights, c);
    if (n == 0.0 && !training)
      throw std::runtime_error("angular: zero-norm weight row " + std::to_string(c));
    cache.weight_norms[c] = training ? n + kTrainNormFloor : n;
  }
  cache.cosines = Matrix(features.rows, weights.rows);
  cache.logits = Matrix(features.rows, weights.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    for (std::size_t c = 0; c < weights.rows; ++c) {
      double dot = 0.0;
      for (std::size_t k = 0; k < features.cols; ++k)
        dot += features.at(i, k) * weights.at(c, k);
      const double u = dot / (cache.feat_norms[i] * cache.weight_norms[c]);
      cache.cosines.at(i, c) = u;
      cache.logits.at(i, c) = std::numbers::pi - safe_arccos(u);
    }
  }
  return cache;
}

// A_i(x) = arccos(phi . W_i / ||phi|| ||W_i||), entries in [0, pi].
inline Matrix angles(const Matrix& features, const Matrix& weights) {
  const AngularCache cache = angular_forward(features, weights);
  Matrix out(cache.logits.rows, cache.logits.cols);
  for (std::size_t k = 0; k < out.data.size(); ++k)
    out.data[k] = std::numbers::pi - cache.logits.data[k];
  return out;
}

// P^A_c = pi - A_c(x), entries in [0, pi].
inline Matrix angular_logits(const Matrix& features, const Matrix& weights) {
  return angular_forward(features, weights).logits;
}

// Row-wise softmax of the angular logits.
inline Matrix angular_probs(const Matrix& features, const Matrix& weights) {
  return softmax_rows(angular_logits(features, weights));
}

// Backward through the angular head: given dL/d(angular logits), accumulate
// dL/dW into g.classifier and return dL/d_features.
//
// With u = phi.w_c / (|phi||w_c|):
//   dz/du   = 1/sqrt(1-u^2)   (epsilon-clamped, see numeric.hpp)
//   du/dphi = w_c/(|phi||w_c|) - u * phi/|phi|^2
//   du/dw_c = phi/(|phi||w_c|) - u * w_c/|w_c|^2
inline Matrix angular_backward(const ModelParams& p, const Matrix& features,
                               const AngularCache& cache, const Matrix& d_logits,
                               Grads& g) {
  const Matrix& w = p.classifier;
  Matrix d_feat(features.rows, features.cols);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const double fn = cache.feat_norms[i];
    for (std::size_t c = 0; c < w.rows; ++c) {
      const double upstream = d_logits.at(i, c);
      if (upstream == 0.0) continue;
      const double wn = cache.weight_norms[c];
      const double u = cache.cosines.at(i, c);
      const double scale = upstream * angular_similarity_grad(u);
      const double inv = 1.0 / (fn * wn);
      for (std::size_t k = 0; k < features.cols; ++k) {
        const double phi_k = features.at(i, k);
        const double w_k = w.at(c, k);
        d_feat.at(i, k) += scale * (w_k * inv - u * phi_k / (fn * fn));
        g.classifier.at(c, k) += scale * (phi_k * inv - u * w_k / (wn * wn));
      }
    }
  }
  return d_feat;
}

}  // namespace ltlab
