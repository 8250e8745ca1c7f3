#pragma once
// Analysis artifacts: per-class weight-norm / mean-logit / mean-probability
// profiles, the smoothness statistic, and hardness-accuracy correlation.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlab/angular.hpp"
#include "ltlab/calibrate.hpp"
#include "ltlab/dataset.hpp"
#include "ltlab/model.hpp"
#include "ltlab/numeric.hpp"
#include "ltlab/prune.hpp"

namespace ltlab {

enum class ProfileKind { weight_norm, mean_linear_logit, mean_angular_logit, mean_prob };

struct ProfileSeries {
  std::vector<double> values;  // per class, min-max normalized to [0, 1]
  ProfileKind kind = ProfileKind::weight_norm;
  std::vector<double> raw;     // pre-normalization values
};

inline const char* profile_kind_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::weight_norm: return "weight_norm";
    case ProfileKind::mean_linear_logit: return "mean_linear_logit";
    case ProfileKind::mean_angular_logit: return "mean_angular_logit";
    case ProfileKind::mean_prob: return "mean_prob";
  }
  return "?";
}

// Per-class L2 norms of the classifier rows, min-max normalized.
inline ProfileSeries weight_norm_profile(const Matrix& classifier) {
  if (classifier.rows < 2)
    throw std::invalid_argument("weight_norm_profile: need at least 2 classes");
  ProfileSeries s;
  s.kind = ProfileKind::weight_norm;
  s.raw.resize(classifier.rows);
  for (std::size_t c = 0; c < classifier.rows; ++c) s.raw[c] = row_norm(classifier, c);
  s.values = minmax_normalize(s.raw);
  return s;
}

enum class LogitMode { linear, angular };

// Per-class mean of the chosen logit over all samples, min-max normalized.
inline ProfileSeries mean_logit_profile(const ModelParams& model, const Dataset& ds,
                                        LogitMode mode) {
  if (ds.size() == 0) throw std::invalid_argument("mean_logit_profile: empty dataset");
  const ForwardCache cache = forward_extractor(model, ds.features);
  const Matrix logits = (mode == LogitMode::linear)
                            ? linear_logits(model, cache.features())
                            : angular_logits(cache.features(), model.classifier);
  ProfileSeries s;
  s.kind = (mode == LogitMode::linear) ? ProfileKind::mean_linear_logit
                                       : ProfileKind::mean_angular_logit;
  s.raw.assign(logits.cols, 0.0);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    for (std::size_t c = 0; c < logits.cols; ++c) s.raw[c] += logits.at(i, c);
  }
  for (double& v : s.raw) v /= static_cast<double>(logits.rows);
  s.values = minmax_normalize(s.raw);
  return s;
}

// Per-class mean softmax probability, optionally after ABS re-weighting.
inline ProfileSeries mean_prob_profile(
    const ModelParams& model, const Dataset& ds, LogitMode mode,
    const std::optional<CalibrationProfile>& calib = std::nullopt) {
  if (ds.size() == 0) throw std::invalid_argument("mean_prob_profile: empty dataset");
  const ForwardCache cache = forward_extractor(model, ds.features);
  Matrix probs = (mode == LogitMode::linear)
                     ? softmax_rows(linear_logits(model, cache.features()))
                     : angular_probs(cache.features(), model.classifier);
  if (calib) {
    const Matrix scores = abs_apply(probs, *calib);
    for (std::size_t i = 0; i < probs.rows; ++i) {
      const auto renorm = renormalize(scores.row(i));
      std::copy(renorm.begin(), renorm.end(), probs.row(i).begin());
    }
  }
  ProfileSeries s;
  s.kind = ProfileKind::mean_prob;
  s.raw.assign(probs.cols, 0.0);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    for (std::size_t c = 0; c < probs.cols; ++c) s.raw[c] += probs.at(i, c);
  }
  for (double& v : s.raw) v /= static_cast<double>(probs.rows);
  s.values = minmax_normalize(s.raw);
  return s;
}

// Max adjacent-class difference of a normalized series; smaller = smoother.
inline double smoothness(const std::vector<double>& series) {
  double worst = 0.0;
  for (std::size_t c = 0; c + 1 < series.size(); ++c) {
    worst = std::max(worst, std::abs(series[c + 1] - series[c]));
  }
  return worst;
}

inline double smoothness(const ProfileSeries& s) { return smoothness(s.values); }

inline std::optional<double> pearson(const std::vector<double>& x,
                                     const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// Average ranks for ties.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

inline std::optional<double> spearman(const std::vector<double>& x,
                                      const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) return std::nullopt;
  return pearson(ranks(x), ranks(y));
}

struct HardnessRecord {
  std::vector<double> class_mean_avh;
  std::vector<double> class_accuracy;
  std::optional<double> pearson_r;
  std::optional<double> spearman_r;
  std::size_t correct_samples = 0;        // correct by angular argmax, all members
  std::size_t avh_bound_violations = 0;   // correct samples with S_AVH > 1/M
};

// Correlates per-class mean AVH with per-class accuracy and checks the exact
// bound: a sample every ensemble member classifies correctly by angular
// argmax has its true-class angle as the row minimum, so S_AVH <= 1/M.
inline HardnessRecord hardness_accuracy(const PruneScoreTable& avh_table,
                                        const std::vector<Matrix>& angles_per_model,
                                        const std::vector<std::size_t>& labels,
                                        const std::vector<double>& class_accuracy) {
  const std::size_t m = class_accuracy.size();
  HardnessRecord rec;
  rec.class_accuracy = class_accuracy;
  rec.class_mean_avh.assign(m, 0.0);
  std::vector<std::size_t> counts(m, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    rec.class_mean_avh[labels[i]] += avh_table.scores[i];
    ++counts[labels[i]];
  }
  for (std::size_t c = 0; c < m; ++c) {
    if (counts[c] > 0) rec.class_mean_avh[c] /= static_cast<double>(counts[c]);
  }
  rec.pearson_r = pearson(rec.class_mean_avh, class_accuracy);
  rec.spearman_r = spearman(rec.class_mean_avh, class_accuracy);

  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool all_correct = true;
    for (const Matrix& a : angles_per_model) {
      // Angular argmax = smallest angle.
      std::size_t best = 0;
      for (std::size_t c = 1; c < a.cols; ++c) {
        if (a.at(i, c) < a.at(i, best)) best = c;
      }
      if (best != labels[i]) {
        all_correct = false;
        break;
      }
    }
    if (all_correct) {
      ++rec.correct_samples;
      if (avh_table.scores[i] > 1.0 / static_cast<double>(m)) {
        ++rec.avh_bound_violations;
      }
    }
  }
  return rec;
}

// CSV export: class_index, value.
inline void save_profile_csv(const ProfileSeries& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_profile_csv: cannot open " + path);
  out << "class_index,value\n";
  for (std::size_t c = 0; c < s.values.size(); ++c) {
    out << c << "," << format_double(s.values[c]) << "\n";
  }
}

}  // namespace ltlab
