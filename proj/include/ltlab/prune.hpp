#pragma once
// Data-pruning scores (EL2N, AVH) from an ensemble of briefly trained
// models, random baselines, and score-ranked prune plans.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlab/angular.hpp"
#include "ltlab/dataset.hpp"
#include "ltlab/numeric.hpp"
#include "ltlab/rng.hpp"
#include "ltlab/train.hpp"

namespace ltlab {

enum class PruneMetric { el2n, avh, random, class_random };

inline const char* metric_name(PruneMetric m) {
  switch (m) {
    case PruneMetric::el2n: return "el2n";
    case PruneMetric::avh: return "avh";
    case PruneMetric::random: return "random";
    case PruneMetric::class_random: return "class_random";
  }
  return "?";
}

struct PruneScoreTable {
  std::vector<double> scores;  // one per training sample
  PruneMetric metric = PruneMetric::el2n;
  std::size_t ensemble_size = 0;
  std::size_t epochs = 0;
  std::vector<std::uint64_t> seeds;
};

enum class PruneDirection { drop_lowest, drop_highest };

struct PrunePlan {
  double fraction = 0.0;
  PruneDirection direction = PruneDirection::drop_lowest;
  std::vector<std::size_t> kept;  // sorted, unique
  std::size_t warnings = 0;       // classes rescued from being emptied
};

// S_EL2N = E over models of || softmax(linear logits) - one-hot ||_2.
inline std::vector<double> el2n_score(const std::vector<Matrix>& probs_per_model,
                                      const std::vector<std::size_t>& labels) {
  if (probs_per_model.empty()) throw std::invalid_argument("el2n_score: k = 0");
  const std::size_t n = labels.size();
  std::vector<double> scores(n, 0.0);
  for (const Matrix& probs : probs_per_model) {
    if (probs.rows != n) throw std::invalid_argument("el2n_score: shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t c = 0; c < probs.cols; ++c) {
        const double diff = probs.at(i, c) - (c == labels[i] ? 1.0 : 0.0);
        acc += diff * diff;
      }
      scores[i] += std::sqrt(acc);
    }
  }
  for (double& s : scores) s /= static_cast<double>(probs_per_model.size());
  return scores;
}

// S_AVH = E over models of A_y / sum_i A_i.
inline std::vector<double> avh_score(const std::vector<Matrix>& angles_per_model,
                                     const std::vector<std::size_t>& labels) {
  if (angles_per_model.empty()) throw std::invalid_argument("avh_score: k = 0");
  const std::size_t n = labels.size();
  std::vector<double> scores(n, 0.0);
  for (const Matrix& a : angles_per_model) {
    if (a.rows != n) throw std::invalid_argument("avh_score: shape mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t c = 0; c < a.cols; ++c) sum += a.at(i, c);
      if (sum <= 0.0)
        throw std::runtime_error("avh_score: zero angle sum at row " + std::to_string(i));
      scores[i] += a.at(i, labels[i]) / sum;
    }
  }
  for (double& s : scores) s /= static_cast<double>(angles_per_model.size());
  return scores;
}

inline std::size_t keep_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(
      std::floor((1.0 - fraction) * static_cast<double>(n) + 0.5));
}

// Uniform keep of round((1-f)*n) samples, seeded.
inline PrunePlan random_prune(std::size_t n, double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("random_prune: f must be in [0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RngStream rng(seed, stream::prune);
  rng.shuffle(idx);
  idx.resize(keep_count(n, fraction));
  std::sort(idx.begin(), idx.end());
  return PrunePlan{fraction, PruneDirection::drop_lowest, std::move(idx), 0};
}

// Identical fraction dropped from every class; a class emptied by rounding
// keeps one sample and bumps the warning counter.
inline PrunePlan classwise_random_prune(const std::vector<std::size_t>& labels,
                                        double fraction, std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("classwise_random_prune: f must be in [0, 1)");
  const std::size_t m =
      labels.empty() ? 0 : 1 + *std::max_element(labels.begin(), labels.end());
  std::vector<std::vector<std::size_t>> by_class(m);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  RngStream rng(seed, stream::prune);
  PrunePlan plan{fraction, PruneDirection::drop_lowest, {}, 0};
  for (std::size_t c = 0; c < m; ++c) {
    auto idx = by_class[c];
    rng.shuffle(idx);
    std::size_t keep = keep_count(idx.size(), fraction);
    if (keep == 0 && !idx.empty()) {
      keep = 1;
      ++plan.warnings;
    }
    idx.resize(keep);
    plan.kept.insert(plan.kept.end(), idx.begin(), idx.end());
  }
  std::sort(plan.kept.begin(), plan.kept.end());
  return plan;
}

// Stable score-ranked plan: drop_lowest removes the smallest scores (the
// easy samples); ties broken by sample index.
inline PrunePlan prune_by_score(const std::vector<double>& scores, double fraction,
                                PruneDirection direction) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw std::invalid_argument("prune_by_score: f must be in [0, 1)");
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  const std::size_t keep = keep_count(n, fraction);
  const std::size_t drop = n - keep;
  PrunePlan plan{fraction, direction, {}, 0};
  if (direction == PruneDirection::drop_lowest) {
    plan.kept.assign(idx.begin() + static_cast<std::ptrdiff_t>(drop), idx.end());
  } else {
    plan.kept.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  std::sort(plan.kept.begin(), plan.kept.end());
  return plan;
}

inline Dataset apply_plan(const Dataset& ds, const PrunePlan& plan) {
  Dataset out;
  out.name = ds.name + "-pruned";
  out.features = gather_rows(ds.features, plan.kept);
  out.labels.resize(plan.kept.size());
  for (std::size_t i = 0; i < plan.kept.size(); ++i) {
    out.labels[i] = ds.labels[plan.kept[i]];
  }
  out.class_counts = counts_from_labels(out.labels, ds.num_classes());
  return out;
}

// Trains k fresh models for e epochs each (plain CE, instance-uniform
// sampling), then scores the full training set with the requested metric.
// The table is the seed-ordered mean of the per-model scores.
inline PruneScoreTable ensemble_protocol(const Dataset& train, const ModelSpec& spec,
                                         PruneMetric metric, std::size_t epochs,
                                         const std::vector<std::uint64_t>& seeds,
                                         std::size_t batch_size = 64,
                                         const OptSettings& opt = {}) {
  if (seeds.empty()) throw std::invalid_argument("ensemble_protocol: k = 0");
  if (metric != PruneMetric::el2n && metric != PruneMetric::avh)
    throw std::invalid_argument("ensemble_protocol: metric has no ensemble");
  std::vector<Matrix> per_model;
  per_model.reserve(seeds.size());
  for (const std::uint64_t seed : seeds) {
    const ModelParams model = train_stage_one(train, spec, Stage1Loss::ce, epochs,
                                              batch_size, opt, seed);
    const ForwardCache cache = forward_extractor(model, train.features);
    if (metric == PruneMetric::el2n) {
      per_model.push_back(softmax_rows(linear_logits(model, cache.features())));
    } else {
      // Training-mode norm floor: a brief CE run can leave some ReLU
      // features at exactly zero.
      const AngularCache ang =
          angular_forward(cache.features(), model.classifier, true);
      Matrix a(ang.logits.rows, ang.logits.cols);
      for (std::size_t k = 0; k < a.data.size(); ++k) {
        a.data[k] = std::numbers::pi - ang.logits.data[k];
      }
      per_model.push_back(std::move(a));
    }
  }
  PruneScoreTable table;
  table.metric = metric;
  table.ensemble_size = seeds.size();
  table.epochs = epochs;
  table.seeds = seeds;
  table.scores = (metric == PruneMetric::el2n)
                     ? el2n_score(per_model, train.labels)
                     : avh_score(per_model, train.labels);
  return table;
}

// CSV export: sample_index, label, score, metric, k, e.
inline void save_scores_csv(const PruneScoreTable& table,
                            const std::vector<std::size_t>& labels,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_scores_csv: cannot open " + path);
  out << "sample_index,label,score,metric,k,e\n";
  for (std::size_t i = 0; i < table.scores.size(); ++i) {
    out << i << "," << labels[i] << "," << format_double(table.scores[i]) << ","
        << metric_name(table.metric) << "," << table.ensemble_size << ","
        << table.epochs << "\n";
  }
}

}  // namespace ltlab
