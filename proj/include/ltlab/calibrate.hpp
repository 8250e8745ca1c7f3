#pragma once
// ABS test-time re-weighting: estimate the per-class implicit bias from mean
// training confidences and multiply test probabilities by gamma = 1 - s*F.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlab/losses.hpp"
#include "ltlab/matrix.hpp"
#include "ltlab/numeric.hpp"

namespace ltlab {

struct CalibrationProfile {
  std::vector<double> mean_conf;  // m_c: mean train probability per class
  std::vector<double> bias;       // F_c in [0, 1]
  std::vector<double> gamma;      // 1 - s*F_c in [1-s, 1]
  double strength = 0.0;          // s in [0, 1]
  SmoothForm form = SmoothForm::concave;  // concave = sine form
};

// m_c = mean over training samples of the probability assigned to class c.
inline std::vector<double> class_mean_confidence(const Matrix& train_probs) {
  if (train_probs.rows == 0)
    throw std::invalid_argument("class_mean_confidence: empty input");
  std::vector<double> m(train_probs.cols, 0.0);
  for (std::size_t i = 0; i < train_probs.rows; ++i) {
    for (std::size_t c = 0; c < train_probs.cols; ++c) m[c] += train_probs.at(i, c);
  }
  for (double& v : m) v /= static_cast<double>(train_probs.rows);
  return m;
}

// F from m: min-max normalize, then linear or sine. Degenerate (all means
// equal) gives F = 0 everywhere, i.e. identity calibration.
inline std::vector<double> bias_profile(const std::vector<double>& mean_conf,
                                        SmoothForm form) {
  for (double v : mean_conf) {
    if (std::isnan(v)) throw std::invalid_argument("bias_profile: NaN input");
  }
  const auto [lo, hi] = std::minmax_element(mean_conf.begin(), mean_conf.end());
  std::vector<double> f(mean_conf.size(), 0.0);
  if (*hi == *lo) return f;
  for (std::size_t c = 0; c < mean_conf.size(); ++c) {
    const double x_hat = (mean_conf[c] - *lo) / (*hi - *lo);
    f[c] = smooth_form(x_hat, form);
  }
  return f;
}

inline CalibrationProfile build_profile(const Matrix& train_probs, double strength,
                                        SmoothForm form) {
  if (strength < 0.0 || strength > 1.0)
    throw std::invalid_argument("build_profile: s must be in [0, 1]");
  CalibrationProfile p;
  p.mean_conf = class_mean_confidence(train_probs);
  p.bias = bias_profile(p.mean_conf, form);
  p.strength = strength;
  p.form = form;
  p.gamma.resize(p.bias.size());
  for (std::size_t c = 0; c < p.bias.size(); ++c) {
    p.gamma[c] = 1.0 - strength * p.bias[c];
  }
  return p;
}

// score_c = gamma_c * p_c. Prediction is the argmax of the scores; the
// renormalized view is for reporting only (argmax is scale-free).
inline std::vector<double> abs_apply(std::span<const double> probs,
                                     const CalibrationProfile& profile) {
  if (probs.size() != profile.gamma.size())
    throw std::invalid_argument("abs_apply: length mismatch");
  std::vector<double> scores(probs.size());
  for (std::size_t c = 0; c < probs.size(); ++c) {
    scores[c] = profile.gamma[c] * probs[c];
  }
  return scores;
}

inline Matrix abs_apply(const Matrix& probs, const CalibrationProfile& profile) {
  Matrix out(probs.rows, probs.cols);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto s = abs_apply(probs.row(i), profile);
    std::copy(s.begin(), s.end(), out.row(i).begin());
  }
  return out;
}

inline std::vector<double> renormalize(std::span<const double> scores) {
  double sum = 0.0;
  for (double v : scores) sum += v;
  std::vector<double> out(scores.begin(), scores.end());
  if (sum > 0.0) {
    for (double& v : out) v /= sum;
  }
  return out;
}

// key=value sidecar with float arrays, so a profile can be reused across runs.
inline void save_profile(const CalibrationProfile& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_profile: cannot open " + path);
  out << "s=" << format_double(p.strength) << "\n";
  out << "form=" << (p.form == SmoothForm::concave ? "sine" : "linear") << "\n";
  auto dump = [&out](const char* key, const std::vector<double>& v) {
    out << key << "=";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out << " ";
      out << format_double(v[i]);
    }
    out << "\n";
  };
  dump("m", p.mean_conf);
  dump("F", p.bias);
  dump("gamma", p.gamma);
}

inline CalibrationProfile load_profile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_profile: cannot open " + path);
  CalibrationProfile p;
  std::string line;
  auto parse_array = [](const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    double x;
    while (ss >> x) v.push_back(x);
    return v;
  };
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "s") {
      p.strength = std::stod(val);
    } else if (key == "form") {
      p.form = (val == "sine") ? SmoothForm::concave : SmoothForm::linear;
    } else if (key == "m") {
      p.mean_conf = parse_array(val);
    } else if (key == "F") {
      p.bias = parse_array(val);
    } else if (key == "gamma") {
      p.gamma = parse_array(val);
    } else {
      throw std::runtime_error("load_profile: unknown key " + key);
    }
  }
  if (p.gamma.size() != p.bias.size() || p.gamma.size() != p.mean_conf.size())
    throw std::runtime_error("load_profile: inconsistent arrays in " + path);
  return p;
}

}  // namespace ltlab
