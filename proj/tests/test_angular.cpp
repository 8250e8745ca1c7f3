// Angular prediction head: angles, scale invariance, softmax, backward.
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "ltlab/angular.hpp"
#include "ltlab/losses.hpp"
#include "ltlab/model.hpp"
#include "ltlab/rng.hpp"

using namespace ltlab;
using Catch::Approx;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("angles match trigonometric examples", "[angular]") {
  Matrix phi(1, 2);
  phi.at(0, 0) = 1.0;

  Matrix w(3, 2);
  w.at(0, 0) = 2.0;               // parallel to phi
  w.at(1, 1) = 5.0;               // perpendicular
  w.at(2, 0) = 1.0;
  w.at(2, 1) = 1.0;               // 45 degrees

  const Matrix a = angles(phi, w);
  CHECK(a.at(0, 0) == Approx(0.0).margin(1e-12));
  CHECK(a.at(0, 1) == Approx(kPi / 2.0).margin(1e-12));
  CHECK(a.at(0, 2) == Approx(kPi / 4.0).margin(1e-12));

  // P^A = pi - angle; the 45-degree row gives 3*pi/4.
  const Matrix z = angular_logits(phi, w);
  CHECK(z.at(0, 2) == Approx(3.0 * kPi / 4.0).margin(1e-12));
  CHECK(z.at(0, 0) == Approx(kPi).margin(1e-12));  // cosine 1 -> pi
  // Anti-parallel weight: cosine -1 -> logit 0.
  Matrix wneg(1, 2);
  wneg.at(0, 0) = -3.0;
  CHECK(angular_logits(phi, wneg).at(0, 0) == Approx(0.0).margin(1e-12));
}

TEST_CASE("angular softmax matches the two-class pinned example", "[angular]") {
  // Logits (pi, 0): probabilities (e^pi/(e^pi+1), 1/(e^pi+1)).
  Matrix phi(1, 2);
  phi.at(0, 0) = 1.0;
  Matrix w(2, 2);
  w.at(0, 0) = 1.0;    // logit pi
  w.at(1, 0) = -1.0;   // logit 0
  const Matrix p = angular_probs(phi, w);
  const double e = std::exp(kPi);
  CHECK(p.at(0, 0) == Approx(e / (e + 1.0)).margin(1e-12));
  CHECK(p.at(0, 1) == Approx(1.0 / (e + 1.0)).margin(1e-12));
  CHECK(p.at(0, 0) == Approx(0.9585).margin(1e-4));
}

TEST_CASE("angular logits are invariant to positive rescaling", "[angular]") {
  RngStream rng(11, stream::data);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix phi(3, 5), w(4, 5);
    for (double& v : phi.data) v = rng.next_gaussian();
    for (double& v : w.data) v = rng.next_gaussian();
    const Matrix base = angular_logits(phi, w);

    Matrix phi2 = phi, w2 = w;
    for (std::size_t i = 0; i < phi2.rows; ++i) {
      const double s = 0.1 + 3.0 * rng.next_double();
      for (double& v : phi2.row(i)) v *= s;
    }
    for (std::size_t c = 0; c < w2.rows; ++c) {
      const double s = 0.1 + 3.0 * rng.next_double();
      for (double& v : w2.row(c)) v *= s;
    }
    const Matrix scaled = angular_logits(phi2, w2);
    for (std::size_t k = 0; k < base.data.size(); ++k) {
      CHECK(std::abs(scaled.data[k] - base.data[k]) < 1e-9);
    }
  }
}

TEST_CASE("equal-norm rows: linear and angular argmax agree", "[angular]") {
  RngStream rng(12, stream::data);
  Matrix w(4, 6);
  for (double& v : w.data) v = rng.next_gaussian();
  for (std::size_t c = 0; c < w.rows; ++c) {
    const double n = row_norm(w, c);
    for (double& v : w.row(c)) v /= n;  // all norms 1
  }
  Matrix phi(10, 6);
  for (double& v : phi.data) v = rng.next_gaussian();

  ModelParams p;
  p.classifier = w;
  const Matrix lin = linear_logits(p, phi);
  const Matrix ang = angular_logits(phi, w);
  for (std::size_t i = 0; i < phi.rows; ++i) {
    CHECK(argmax_tiebreak(lin.row(i)) == argmax_tiebreak(ang.row(i)));
  }
}

TEST_CASE("zero-norm rows throw in eval mode, are floored in training", "[angular]") {
  Matrix phi(2, 3);
  phi.at(0, 0) = 1.0;  // row 1 is all zero
  Matrix w(2, 3);
  w.at(0, 0) = 1.0;
  w.at(1, 1) = 1.0;
  CHECK_THROWS_WITH(angular_forward(phi, w),
                    Catch::Matchers::ContainsSubstring("zero-norm feature row 1"));
  CHECK_NOTHROW(angular_forward(phi, w, true));

  Matrix wz(2, 3);
  wz.at(0, 0) = 1.0;  // weight row 1 all zero
  Matrix ok(1, 3);
  ok.at(0, 0) = 1.0;
  CHECK_THROWS_WITH(angular_forward(ok, wz),
                    Catch::Matchers::ContainsSubstring("zero-norm weight row"));

  Matrix bad(1, 2);
  CHECK_THROWS_AS(angular_forward(bad, w), std::invalid_argument);
}

TEST_CASE("angular backward passes finite differences", "[angular]") {
  const double h = 1e-5;
  RngStream rng(21, stream::data);
  for (int trial = 0; trial < 10; ++trial) {
    ModelParams p;
    p.classifier = Matrix(3, 4);
    for (double& v : p.classifier.data) v = rng.next_gaussian();
    Matrix phi(2, 4);
    for (double& v : phi.data) v = rng.next_gaussian();
    std::vector<std::size_t> labels{static_cast<std::size_t>(rng.next_below(3)),
                                    static_cast<std::size_t>(rng.next_below(3))};

    auto loss_of = [&](const Matrix& features, const Matrix& weights) {
      const AngularCache c = angular_forward(features, weights, true);
      const Matrix probs = softmax_rows(c.logits);
      double total = 0.0;
      for (std::size_t i = 0; i < features.rows; ++i) {
        total -= clamped_log(probs.at(i, labels[i]));
      }
      return total / static_cast<double>(features.rows);
    };

    // Analytic gradients through the angular softmax CE.
    const AngularCache cache = angular_forward(phi, p.classifier, true);
    const Matrix probs = softmax_rows(cache.logits);
    Matrix d_logits(2, 3);
    for (std::size_t i = 0; i < 2; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        d_logits.at(i, c) =
            (probs.at(i, c) - (c == labels[i] ? 1.0 : 0.0)) / 2.0;
      }
    }
    Grads g = zero_grads(p);
    const Matrix d_feat = angular_backward(p, phi, cache, d_logits, g);

    auto fd_check = [&](double analytic, double* slot) {
      const double orig = *slot;
      *slot = orig + h;
      const double up = loss_of(phi, p.classifier);
      *slot = orig - h;
      const double dn = loss_of(phi, p.classifier);
      *slot = orig;
      const double fd = (up - dn) / (2.0 * h);
      const double denom = std::max(std::abs(fd) + std::abs(analytic), 1e-3);
      CHECK(std::abs(fd - analytic) / denom < 1e-4);
    };
    for (std::size_t k = 0; k < p.classifier.data.size(); ++k) {
      fd_check(g.classifier.data[k], &p.classifier.data[k]);
    }
    for (std::size_t k = 0; k < phi.data.size(); ++k) {
      fd_check(d_feat.data[k], &phi.data[k]);
    }
  }
}

TEST_CASE("angular cache exposes consistent norms and cosines", "[angular]") {
  Matrix phi(1, 2);
  phi.at(0, 0) = 3.0;
  phi.at(0, 1) = 4.0;
  Matrix w(1, 2);
  w.at(0, 0) = 1.0;
  const AngularCache c = angular_forward(phi, w);
  CHECK(c.feat_norms[0] == Approx(5.0).margin(1e-12));
  CHECK(c.weight_norms[0] == Approx(1.0).margin(1e-12));
  CHECK(c.cosines.at(0, 0) == Approx(0.6).margin(1e-12));
  CHECK(c.logits.at(0, 0) == Approx(kPi - std::acos(0.6)).margin(1e-12));
}
