#pragma once
// Long-tailed dataset generation, ingestion and sampling. Classes are always
// indexed so that sample counts are non-increasing: the larger the class
// index, the fewer samples it has.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlab/matrix.hpp"
#include "ltlab/numeric.hpp"
#include "ltlab/rng.hpp"

namespace ltlab {

struct Dataset {
  Matrix features;                     // n x d
  std::vector<std::size_t> labels;     // values in [0, M)
  std::vector<std::size_t> class_counts;
  std::string name;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }
  std::size_t num_classes() const { return class_counts.size(); }
};

struct LTSpec {
  std::size_t total = 0;      // N
  std::size_t classes = 0;    // M
  double imbalance = 1.0;     // beta = n_max / n_min
};

struct GroupSpec {
  // Half-open [begin, end) index ranges over [0, M).
  std::size_t head_end = 0;
  std::size_t mid_end = 0;
  std::size_t classes = 0;
};

struct SynthSpec {
  std::size_t dim = 20;
  std::size_t classes = 10;
  double mean_radius = 1.0;
  double noise_sigma = 0.5;
  LTSpec lt;
  std::uint64_t seed = 0;
};

inline void validate(const SynthSpec& s) {
  if (s.dim < 2) throw std::invalid_argument("SynthSpec: dim must be >= 2");
  if (s.noise_sigma <= 0.0)
    throw std::invalid_argument("SynthSpec: noise_sigma must be > 0");
  if (s.classes < 2) throw std::invalid_argument("SynthSpec: classes must be >= 2");
}

inline std::vector<std::size_t> counts_from_labels(
    const std::vector<std::size_t>& labels, std::size_t classes) {
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t y : labels) {
    if (y >= classes) throw std::invalid_argument("label out of range");
    ++counts[y];
  }
  return counts;
}

// n_c = round((N/M) * beta^(-c/(M-1))), round half up, clamped to >= 1.
// Monotone non-increasing; n_0 / n_{M-1} = beta within rounding.
inline std::vector<std::size_t> longtail_counts(const LTSpec& spec) {
  if (spec.classes < 2) throw std::invalid_argument("longtail_counts: M < 2");
  if (spec.imbalance < 1.0) throw std::invalid_argument("longtail_counts: beta < 1");
  if (spec.total < spec.classes)
    throw std::invalid_argument("longtail_counts: N < M");
  const double base = static_cast<double>(spec.total) / static_cast<double>(spec.classes);
  std::vector<std::size_t> counts(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const double expo = -static_cast<double>(c) / static_cast<double>(spec.classes - 1);
    const double n = base * std::pow(spec.imbalance, expo);
    counts[c] = static_cast<std::size_t>(std::max(1.0, std::floor(n + 0.5)));
  }
  return counts;
}

// Seeded uniform-without-replacement per-class subsample of a larger set.
inline Dataset subsample_longtail(const Dataset& src,
                                  const std::vector<std::size_t>& counts,
                                  std::uint64_t seed) {
  const std::size_t m = src.num_classes();
  if (counts.size() != m)
    throw std::invalid_argument("subsample_longtail: counts size mismatch");
  std::vector<std::vector<std::size_t>> by_class(m);
  for (std::size_t i = 0; i < src.size(); ++i) by_class[src.labels[i]].push_back(i);

  RngStream rng(seed, stream::data);
  std::vector<std::size_t> selected;
  for (std::size_t c = 0; c < m; ++c) {
    if (counts[c] > by_class[c].size()) {
      throw std::runtime_error("subsample_longtail: class " + std::to_string(c) +
                               " has " + std::to_string(by_class[c].size()) +
                               " samples, requested " + std::to_string(counts[c]));
    }
    auto idx = by_class[c];
    rng.shuffle(idx);
    idx.resize(counts[c]);
    std::sort(idx.begin(), idx.end());
    selected.insert(selected.end(), idx.begin(), idx.end());
  }

  Dataset out;
  out.name = src.name + "-lt";
  out.features = Matrix(selected.size(), src.dim());
  out.labels.resize(selected.size());
  for (std::size_t i = 0; i < selected.size(); ++i) {
    const auto s = src.features.row(selected[i]);
    std::copy(s.begin(), s.end(), out.features.row(i).begin());
    out.labels[i] = src.labels[selected[i]];
  }
  out.class_counts = counts_from_labels(out.labels, m);
  return out;
}

// Class means drawn uniformly on the radius-r sphere, deterministic from the
// spec seed. Shared by train and test generation so both see the same means.
inline Matrix synth_class_means(const SynthSpec& spec) {
  validate(spec);
  RngStream rng(spec.seed, stream::data);
  Matrix means(spec.classes, spec.dim);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      means.at(c, j) = rng.next_gaussian();
      norm += means.at(c, j) * means.at(c, j);
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) norm = 1.0;
    for (std::size_t j = 0; j < spec.dim; ++j) {
      means.at(c, j) *= spec.mean_radius / norm;
    }
  }
  return means;
}

inline Dataset synth_with_counts(const SynthSpec& spec,
                                 const std::vector<std::size_t>& counts,
                                 std::uint64_t noise_stream,
                                 const std::string& name) {
  const Matrix means = synth_class_means(spec);
  RngStream rng(spec.seed, noise_stream);
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  Dataset ds;
  ds.name = name;
  ds.features = Matrix(n, spec.dim);
  ds.labels.resize(n);
  std::size_t row = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t k = 0; k < counts[c]; ++k, ++row) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        ds.features.at(row, j) = means.at(c, j) + spec.noise_sigma * rng.next_gaussian();
      }
      ds.labels[row] = c;
    }
  }
  ds.class_counts = counts;
  return ds;
}

// Long-tailed Gaussian blob dataset: means on a sphere, isotropic noise,
// counts from the exponential long-tail profile.
inline Dataset synth_gaussian_lt(const SynthSpec& spec) {
  validate(spec);
  return synth_with_counts(spec, longtail_counts(spec.lt), stream::data + 1000,
                           "synth-lt");
}

// Balanced companion set from the same class means (held-out noise stream).
inline Dataset synth_balanced_test(const SynthSpec& spec, std::size_t per_class) {
  validate(spec);
  std::vector<std::size_t> counts(spec.classes, per_class);
  return synth_with_counts(spec, counts, stream::test_data, "synth-test");
}

// Infinite class-balanced index stream: each draw picks a class uniformly,
// then cycles through a per-class seeded permutation (reshuffled per cycle).
class ClassBalancedStream {
 public:
  ClassBalancedStream(const Dataset& ds, std::uint64_t seed)
      : rng_(seed, stream::batch) {
    const std::size_t m = ds.num_classes();
    perms_.resize(m);
    pos_.assign(m, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) perms_[ds.labels[i]].push_back(i);
    for (std::size_t c = 0; c < m; ++c) {
      if (perms_[c].empty()) {
        throw std::runtime_error("class_balanced_stream: class " +
                                 std::to_string(c) + " is empty");
      }
      rng_.shuffle(perms_[c]);
    }
  }

  std::size_t next() {
    const std::size_t c = static_cast<std::size_t>(rng_.next_below(perms_.size()));
    if (pos_[c] == perms_[c].size()) {
      rng_.shuffle(perms_[c]);
      pos_[c] = 0;
    }
    return perms_[c][pos_[c]++];
  }

 private:
  RngStream rng_;
  std::vector<std::vector<std::size_t>> perms_;
  std::vector<std::size_t> pos_;
};

struct MixedBatch {
  Matrix features;     // n x d
  Matrix soft_labels;  // n x M, rows sum to 1
};

// lambda ~ Beta(alpha, alpha) per pair; convex combination of inputs and of
// one-hot (or soft) label rows.
inline MixedBatch mixup(const Matrix& xa, const Matrix& qa, const Matrix& xb,
                        const Matrix& qb, double alpha, RngStream& rng) {
  if (!xa.same_shape(xb) || !qa.same_shape(qb) || xa.rows != qa.rows)
    throw std::invalid_argument("mixup: shape mismatch");
  if (alpha <= 0.0) throw std::invalid_argument("mixup: alpha must be > 0");
  MixedBatch out{Matrix(xa.rows, xa.cols), Matrix(qa.rows, qa.cols)};
  for (std::size_t i = 0; i < xa.rows; ++i) {
    const double lam = rng.next_beta(alpha);
    for (std::size_t j = 0; j < xa.cols; ++j) {
      out.features.at(i, j) = lam * xa.at(i, j) + (1.0 - lam) * xb.at(i, j);
    }
    for (std::size_t j = 0; j < qa.cols; ++j) {
      out.soft_labels.at(i, j) = lam * qa.at(i, j) + (1.0 - lam) * qb.at(i, j);
    }
  }
  return out;
}

// Validate a head/mid/tail partition of [0, M).
inline GroupSpec group_split(std::size_t classes,
                             std::pair<std::size_t, std::size_t> head,
                             std::pair<std::size_t, std::size_t> mid,
                             std::pair<std::size_t, std::size_t> tail) {
  if (head.first != 0)
    throw std::invalid_argument("group_split: head must start at 0");
  if (head.second != mid.first)
    throw std::invalid_argument("group_split: gap at " + std::to_string(head.second));
  if (mid.second != tail.first)
    throw std::invalid_argument("group_split: gap at " + std::to_string(mid.second));
  if (tail.second != classes)
    throw std::invalid_argument("group_split: tail must end at M");
  if (head.second < head.first || mid.second < mid.first || tail.second < tail.first)
    throw std::invalid_argument("group_split: reversed range");
  return GroupSpec{head.second, mid.second, classes};
}

inline GroupSpec default_group_split(std::size_t classes) {
  if (classes == 10) return group_split(10, {0, 3}, {3, 7}, {7, 10});
  if (classes == 100) return group_split(100, {0, 36}, {36, 71}, {71, 100});
  const std::size_t h = classes / 3;
  const std::size_t m = classes - classes / 3;
  return group_split(classes, {0, h}, {h, m}, {m, classes});
}

// CSV schema: header "label,f0,...,f{d-1}", UTF-8, LF endings, floats with
// 17 significant digits.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out << "label";
  for (std::size_t j = 0; j < ds.dim(); ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.labels[i];
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      out << "," << format_double(ds.features.at(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: empty file");
  if (line.rfind("label", 0) != 0)
    throw std::runtime_error("load_csv: bad header at line 1");
  std::size_t dim = 0;
  for (char ch : line) {
    if (ch == ',') ++dim;
  }
  if (dim == 0) throw std::runtime_error("load_csv: no feature columns");

  std::vector<std::size_t> labels;
  std::vector<double> values;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ','))
      throw std::runtime_error("load_csv: malformed row at line " + std::to_string(lineno));
    try {
      labels.push_back(std::stoull(cell));
    } catch (const std::exception&) {
      throw std::runtime_error("load_csv: bad label at line " + std::to_string(lineno));
    }
    std::size_t fields = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument("trailing chars");
      } catch (const std::exception&) {
        throw std::runtime_error("load_csv: bad value at line " + std::to_string(lineno));
      }
      ++fields;
    }
    if (fields != dim)
      throw std::runtime_error("load_csv: wrong field count at line " + std::to_string(lineno));
  }
  if (labels.empty()) throw std::runtime_error("load_csv: no data rows");

  Dataset ds;
  ds.name = path;
  ds.labels = labels;
  ds.features = Matrix(labels.size(), dim);
  std::copy(values.begin(), values.end(), ds.features.data.begin());
  const std::size_t classes = 1 + *std::max_element(labels.begin(), labels.end());
  ds.class_counts = counts_from_labels(labels, classes);
  return ds;
}

}  // namespace ltlab
