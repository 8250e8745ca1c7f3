#pragma once
// Small MLP feature extractor with a linear classifier head, manual
// backpropagation, SGD with momentum and coupled weight decay, parameter
// freezing and bit-exact checkpoints.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ltlab/matrix.hpp"
#include "ltlab/rng.hpp"

namespace ltlab {

enum class Activation { identity, relu };

struct Layer {
  Matrix weight;           // out x in
  std::vector<double> bias;  // out
  Activation act = Activation::relu;
};

struct ModelParams {
  std::vector<Layer> extractor;
  Matrix classifier;                    // M x feat_dim; row c is W_c
  std::vector<double> classifier_bias;  // empty when the head is bias-free
  std::vector<double> lws_scale;        // empty unless the LWS head is attached

  std::size_t num_classes() const { return classifier.rows; }
  std::size_t feat_dim() const { return classifier.cols; }
  std::size_t input_dim() const {
    return extractor.empty() ? classifier.cols : extractor.front().weight.cols;
  }
  bool has_bias() const { return !classifier_bias.empty(); }
  bool has_lws() const { return !lws_scale.empty(); }
};

// He-style initialization, deterministic from the stream.
inline ModelParams init_mlp(std::size_t input_dim,
                            const std::vector<std::size_t>& hidden,
                            std::size_t feat_dim, std::size_t classes,
                            bool with_bias, RngStream& rng,
                            bool feature_relu = true) {
  ModelParams p;
  std::size_t in = input_dim;
  std::vector<std::size_t> dims = hidden;
  dims.push_back(feat_dim);
  for (std::size_t li = 0; li < dims.size(); ++li) {
    Layer layer;
    layer.weight = Matrix(dims[li], in);
    layer.bias.assign(dims[li], 0.0);
    layer.act = (li + 1 == dims.size() && !feature_relu) ? Activation::identity
                                                         : Activation::relu;
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (double& w : layer.weight.data) w = scale * rng.next_gaussian();
    p.extractor.push_back(std::move(layer));
    in = dims[li];
  }
  p.classifier = Matrix(classes, in);
  const double scale = std::sqrt(1.0 / static_cast<double>(in));
  for (double& w : p.classifier.data) w = scale * rng.next_gaussian();
  if (with_bias) p.classifier_bias.assign(classes, 0.0);
  return p;
}

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer
  const Matrix& features() const { return post.empty() ? input : post.back(); }
};

// Runs the extractor; features are the last hidden activations.
inline ForwardCache forward_extractor(const ModelParams& p, const Matrix& x) {
  if (x.cols != p.input_dim())
    throw std::invalid_argument("forward: input width " + std::to_string(x.cols) +
                                " != model input dim " + std::to_string(p.input_dim()));
  ForwardCache cache;
  cache.input = x;
  const Matrix* cur = &cache.input;
  for (const Layer& layer : p.extractor) {
    Matrix z = matmul_nt(*cur, layer.weight);
    for (std::size_t i = 0; i < z.rows; ++i) {
      for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += layer.bias[j];
    }
    Matrix a = z;
    if (layer.act == Activation::relu) {
      for (double& v : a.data) v = std::max(0.0, v);
    }
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(a));
    cur = &cache.post.back();
  }
  return cache;
}

// P^L = phi W^T (+ bias when enabled).
inline Matrix linear_logits(const ModelParams& p, const Matrix& features) {
  Matrix z = matmul_nt(features, p.classifier);
  if (p.has_bias()) {
    for (std::size_t i = 0; i < z.rows; ++i) {
      for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) += p.classifier_bias[j];
    }
  }
  return z;
}

// s_c * P^L_c, the learnable-weight-scaling head.
inline Matrix lws_logits(const ModelParams& p, const Matrix& features) {
  if (!p.has_lws()) throw std::runtime_error("lws_logits: lws_scale is absent");
  Matrix z = linear_logits(p, features);
  for (std::size_t i = 0; i < z.rows; ++i) {
    for (std::size_t j = 0; j < z.cols; ++j) z.at(i, j) *= p.lws_scale[j];
  }
  return z;
}

struct Grads {
  std::vector<Matrix> layer_weight;
  std::vector<std::vector<double>> layer_bias;
  Matrix classifier;
  std::vector<double> classifier_bias;
  std::vector<double> lws_scale;
};

inline Grads zero_grads(const ModelParams& p) {
  Grads g;
  for (const Layer& layer : p.extractor) {
    g.layer_weight.emplace_back(layer.weight.rows, layer.weight.cols);
    g.layer_bias.emplace_back(layer.bias.size(), 0.0);
  }
  g.classifier = Matrix(p.classifier.rows, p.classifier.cols);
  g.classifier_bias.assign(p.classifier_bias.size(), 0.0);
  g.lws_scale.assign(p.lws_scale.size(), 0.0);
  return g;
}

// Backpropagates d_features through the extractor into g (accumulating).
inline void backward_extractor(const ModelParams& p, const ForwardCache& cache,
                               const Matrix& d_features, Grads& g) {
  if (cache.pre.size() != p.extractor.size())
    throw std::runtime_error("backward: cache does not match model");
  Matrix delta = d_features;
  for (std::size_t li = p.extractor.size(); li-- > 0;) {
    const Layer& layer = p.extractor[li];
    const Matrix& pre = cache.pre[li];
    if (!delta.same_shape(pre)) throw std::runtime_error("backward: stale cache");
    if (layer.act == Activation::relu) {
      for (std::size_t k = 0; k < delta.data.size(); ++k) {
        if (pre.data[k] <= 0.0) delta.data[k] = 0.0;
      }
    }
    const Matrix& below = (li == 0) ? cache.input : cache.post[li - 1];
    Matrix gw = matmul_tn(delta, below);
    for (std::size_t k = 0; k < gw.data.size(); ++k)
      g.layer_weight[li].data[k] += gw.data[k];
    for (std::size_t i = 0; i < delta.rows; ++i) {
      for (std::size_t j = 0; j < delta.cols; ++j)
        g.layer_bias[li][j] += delta.at(i, j);
    }
    if (li > 0) delta = matmul(delta, layer.weight);
  }
}

// Head backward for the linear (and optionally LWS-scaled) logits.
// Returns dL/d_features and accumulates classifier grads.
inline Matrix backward_linear_head(const ModelParams& p, const Matrix& features,
                                   const Matrix& d_logits, Grads& g,
                                   bool lws = false) {
  Matrix dz = d_logits;
  if (lws) {
    if (!p.has_lws()) throw std::runtime_error("backward: lws_scale is absent");
    const Matrix raw = linear_logits(p, features);
    for (std::size_t i = 0; i < dz.rows; ++i) {
      for (std::size_t j = 0; j < dz.cols; ++j) {
        g.lws_scale[j] += d_logits.at(i, j) * raw.at(i, j);
        dz.at(i, j) = d_logits.at(i, j) * p.lws_scale[j];
      }
    }
  }
  Matrix gw = matmul_tn(dz, features);
  for (std::size_t k = 0; k < gw.data.size(); ++k) g.classifier.data[k] += gw.data[k];
  if (p.has_bias()) {
    for (std::size_t i = 0; i < dz.rows; ++i) {
      for (std::size_t j = 0; j < dz.cols; ++j) g.classifier_bias[j] += dz.at(i, j);
    }
  }
  return matmul(dz, p.classifier);
}

struct FreezeMask {
  std::vector<bool> extractor_layers;  // one flag per layer (weight+bias)
  bool classifier = false;
  bool classifier_bias = false;
  bool lws_scale = false;
};

inline FreezeMask freeze_nothing(const ModelParams& p) {
  FreezeMask m;
  m.extractor_layers.assign(p.extractor.size(), false);
  return m;
}

inline FreezeMask freeze_extractor(const ModelParams& p) {
  FreezeMask m = freeze_nothing(p);
  std::fill(m.extractor_layers.begin(), m.extractor_layers.end(), true);
  return m;
}

// Frozen parameters get exactly zero gradient. Idempotent.
inline void apply_freeze(Grads& g, const FreezeMask& mask) {
  if (mask.extractor_layers.size() != g.layer_weight.size())
    throw std::invalid_argument("apply_freeze: mask does not cover every layer");
  for (std::size_t li = 0; li < g.layer_weight.size(); ++li) {
    if (!mask.extractor_layers[li]) continue;
    std::fill(g.layer_weight[li].data.begin(), g.layer_weight[li].data.end(), 0.0);
    std::fill(g.layer_bias[li].begin(), g.layer_bias[li].end(), 0.0);
  }
  if (mask.classifier)
    std::fill(g.classifier.data.begin(), g.classifier.data.end(), 0.0);
  if (mask.classifier_bias)
    std::fill(g.classifier_bias.begin(), g.classifier_bias.end(), 0.0);
  if (mask.lws_scale)
    std::fill(g.lws_scale.begin(), g.lws_scale.end(), 0.0);
}

struct OptState {
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  // Global-norm gradient clip applied before the momentum update; 0 disables.
  // The angular gradient path has a 1/sin(theta) factor that spikes for
  // well-aligned samples, so angular losses train with a finite clip.
  double grad_clip = 0.0;
  Grads velocity;
  bool initialized = false;
};

inline double grad_global_norm(const Grads& g) {
  double sq = 0.0;
  for (const auto& m : g.layer_weight)
    for (double v : m.data) sq += v * v;
  for (const auto& b : g.layer_bias)
    for (double v : b) sq += v * v;
  for (double v : g.classifier.data) sq += v * v;
  for (double v : g.classifier_bias) sq += v * v;
  for (double v : g.lws_scale) sq += v * v;
  return std::sqrt(sq);
}

inline void scale_grads(Grads& g, double a) {
  for (auto& m : g.layer_weight)
    for (double& v : m.data) v *= a;
  for (auto& b : g.layer_bias)
    for (double& v : b) v *= a;
  for (double& v : g.classifier.data) v *= a;
  for (double& v : g.classifier_bias) v *= a;
  for (double& v : g.lws_scale) v *= a;
}

namespace detail {
inline void sgd_tensor(std::vector<double>& w, std::vector<double>& v,
                       const std::vector<double>& grad, const OptState& opt) {
  for (std::size_t k = 0; k < w.size(); ++k) {
    const double g = grad[k] + opt.weight_decay * w[k];
    v[k] = opt.momentum * v[k] + g;
    w[k] -= opt.lr * v[k];
  }
}
}  // namespace detail

// g <- clip(g); g <- g + lambda*w; v <- mu*v + g; w <- w - lr*v
// (coupled weight decay; clip rescales the whole gradient to grad_clip when
// its global norm exceeds it). Tensors frozen by the mask are skipped
// entirely, so weight decay never touches them and the freeze contract
// (frozen parameters bit-identical across training) holds.
inline void sgd_step(ModelParams& p, const Grads& g_in, OptState& opt,
                     const FreezeMask* mask = nullptr) {
  if (!opt.initialized) {
    opt.velocity = zero_grads(p);
    opt.initialized = true;
  }
  Grads clipped;
  const Grads* gp = &g_in;
  if (opt.grad_clip > 0.0) {
    const double norm = grad_global_norm(g_in);
    if (norm > opt.grad_clip) {
      clipped = g_in;
      scale_grads(clipped, opt.grad_clip / norm);
      gp = &clipped;
    }
  }
  const Grads& g = *gp;
  for (std::size_t li = 0; li < p.extractor.size(); ++li) {
    if (mask && mask->extractor_layers[li]) continue;
    detail::sgd_tensor(p.extractor[li].weight.data, opt.velocity.layer_weight[li].data,
                       g.layer_weight[li].data, opt);
    detail::sgd_tensor(p.extractor[li].bias, opt.velocity.layer_bias[li],
                       g.layer_bias[li], opt);
  }
  if (!mask || !mask->classifier) {
    detail::sgd_tensor(p.classifier.data, opt.velocity.classifier.data,
                       g.classifier.data, opt);
  }
  if (!mask || !mask->classifier_bias) {
    detail::sgd_tensor(p.classifier_bias, opt.velocity.classifier_bias,
                       g.classifier_bias, opt);
  }
  if (!mask || !mask->lws_scale) {
    detail::sgd_tensor(p.lws_scale, opt.velocity.lws_scale, g.lws_scale, opt);
  }
}

// Checkpoint: text manifest (key=value lines), then "data <count>" and the
// raw row-major little-endian 64-bit float arrays in declared order.
inline void checkpoint_save(const ModelParams& p, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint_save: cannot open " + path);
  out << "ltlab_checkpoint=1\n";
  out << "layers=" << p.extractor.size() << "\n";
  for (std::size_t li = 0; li < p.extractor.size(); ++li) {
    const Layer& l = p.extractor[li];
    out << "layer" << li << "=" << l.weight.rows << "x" << l.weight.cols << ","
        << (l.act == Activation::relu ? "relu" : "identity") << "\n";
  }
  out << "classifier=" << p.classifier.rows << "x" << p.classifier.cols << "\n";
  out << "bias=" << (p.has_bias() ? 1 : 0) << "\n";
  out << "lws=" << (p.has_lws() ? 1 : 0) << "\n";
  std::size_t total = 0;
  for (const Layer& l : p.extractor) total += l.weight.data.size() + l.bias.size();
  total += p.classifier.data.size() + p.classifier_bias.size() + p.lws_scale.size();
  out << "data=" << total << "\n";
  auto dump = [&out](const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
  };
  for (const Layer& l : p.extractor) {
    dump(l.weight.data);
    dump(l.bias);
  }
  dump(p.classifier.data);
  dump(p.classifier_bias);
  dump(p.lws_scale);
  if (!out) throw std::runtime_error("checkpoint_save: write failed for " + path);
}

inline ModelParams checkpoint_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint_load: cannot open " + path);
  auto expect_line = [&in, &path](const std::string& key) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(key + "=", 0) != 0) {
      throw std::runtime_error("checkpoint_load: corrupt manifest in " + path +
                               " at offset " + std::to_string(in.tellg()));
    }
    return line.substr(key.size() + 1);
  };
  if (expect_line("ltlab_checkpoint") != "1")
    throw std::runtime_error("checkpoint_load: unsupported version");
  const std::size_t layers = std::stoull(expect_line("layers"));
  ModelParams p;
  for (std::size_t li = 0; li < layers; ++li) {
    const std::string desc = expect_line("layer" + std::to_string(li));
    std::size_t rows = 0, cols = 0;
    char x = 0;
    std::string act;
    std::stringstream ss(desc);
    ss >> rows >> x >> cols;
    std::getline(ss, act, ',');
    std::getline(ss, act);
    Layer l;
    l.weight = Matrix(rows, cols);
    l.bias.assign(rows, 0.0);
    l.act = (act == "relu") ? Activation::relu : Activation::identity;
    p.extractor.push_back(std::move(l));
  }
  {
    std::size_t rows = 0, cols = 0;
    char x = 0;
    std::stringstream ss(expect_line("classifier"));
    ss >> rows >> x >> cols;
    p.classifier = Matrix(rows, cols);
  }
  if (expect_line("bias") == "1") p.classifier_bias.assign(p.classifier.rows, 0.0);
  if (expect_line("lws") == "1") p.lws_scale.assign(p.classifier.rows, 0.0);
  const std::size_t total = std::stoull(expect_line("data"));
  std::size_t expected = 0;
  for (const Layer& l : p.extractor) expected += l.weight.data.size() + l.bias.size();
  expected += p.classifier.data.size() + p.classifier_bias.size() + p.lws_scale.size();
  if (total != expected)
    throw std::runtime_error("checkpoint_load: data count mismatch in " + path);
  auto slurp = [&in, &path](std::vector<double>& v) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(double)) {
      throw std::runtime_error("checkpoint_load: truncated file " + path +
                               " at offset " + std::to_string(in.tellg()));
    }
  };
  for (Layer& l : p.extractor) {
    slurp(l.weight.data);
    slurp(l.bias);
  }
  slurp(p.classifier.data);
  slurp(p.classifier_bias);
  slurp(p.lws_scale);
  return p;
}

inline bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.extractor.size() != b.extractor.size()) return false;
  for (std::size_t li = 0; li < a.extractor.size(); ++li) {
    if (a.extractor[li].weight.data != b.extractor[li].weight.data) return false;
    if (a.extractor[li].bias != b.extractor[li].bias) return false;
    if (a.extractor[li].act != b.extractor[li].act) return false;
  }
  return a.classifier.data == b.classifier.data &&
         a.classifier_bias == b.classifier_bias && a.lws_scale == b.lws_scale;
}

inline bool extractor_equal(const ModelParams& a, const ModelParams& b) {
  if (a.extractor.size() != b.extractor.size()) return false;
  for (std::size_t li = 0; li < a.extractor.size(); ++li) {
    if (a.extractor[li].weight.data != b.extractor[li].weight.data) return false;
    if (a.extractor[li].bias != b.extractor[li].bias) return false;
  }
  return true;
}

}  // namespace ltlab
