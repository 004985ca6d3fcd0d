#pragma once

// Channel-only actor: a two-layer perceptron from the flattened estimated
// gain matrix to one score per (device, option).

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mecsim/gcn.hpp"

namespace mecsim {

struct MlpParams {
  Mat w1;  // in x hidden
  RowVec b1;
  Mat w2;  // hidden x out
  RowVec b2;

  static MlpParams zeros(Eigen::Index in, Eigen::Index hidden, Eigen::Index out) {
    return {Mat::Zero(in, hidden), RowVec::Zero(hidden), Mat::Zero(hidden, out),
            RowVec::Zero(out)};
  }
  MlpParams zeros_like() const { return zeros(w1.rows(), w1.cols(), w2.cols()); }

  template <typename F>
  void for_each(F&& f) {
    f("w1", w1.data(), w1.size());
    f("b1", b1.data(), b1.size());
    f("w2", w2.data(), w2.size());
    f("b2", b2.data(), b2.size());
  }
};

inline MlpParams mlp_glorot_init(Eigen::Index in, Eigen::Index hidden, Eigen::Index out,
                                 Engine& rng) {
  MlpParams p = MlpParams::zeros(in, hidden, out);
  auto fill = [&](Mat& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -a, a);
  };
  fill(p.w1);
  fill(p.w2);
  return p;
}

struct MlpCache {
  RowVec x, z1, h1, logits, scores;
};

inline MlpCache mlp_forward(const RowVec& x, const MlpParams& p) {
  MlpCache c;
  c.x = x;
  c.z1 = x * p.w1 + p.b1;
  c.h1 = c.z1.cwiseMax(0.0);
  c.logits = c.h1 * p.w2 + p.b2;
  c.scores.resize(c.logits.size());
  for (Eigen::Index k = 0; k < c.logits.size(); ++k) c.scores(k) = sigmoid(c.logits(k));
  return c;
}

inline void mlp_backward(const MlpParams& p, const MlpCache& c, const RowVec& dlogits,
                         MlpParams& grad) {
  grad.w2 += c.h1.transpose() * dlogits;
  grad.b2 += dlogits;
  RowVec dz1 = dlogits * p.w2.transpose();
  for (Eigen::Index j = 0; j < dz1.size(); ++j) {
    if (c.z1(j) <= 0.0) dz1(j) = 0.0;
  }
  grad.w1 += c.x.transpose() * dz1;
  grad.b1 += dz1;
}

inline double mlp_loss_and_grad(const std::vector<const RowVec*>& inputs,
                                const std::vector<const Vec*>& labels, const MlpParams& p,
                                MlpParams& grad) {
  grad = p.zeros_like();
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const MlpCache c = mlp_forward(*inputs[i], p);
    const Vec& y = *labels[i];
    loss += bce_from_logits(c.logits.transpose(), y);
    const double inv_e = inv_b / static_cast<double>(c.logits.size());
    RowVec d(c.logits.size());
    for (Eigen::Index k = 0; k < d.size(); ++k) d(k) = (c.scores(k) - y(k)) * inv_e;
    mlp_backward(p, c, d, grad);
  }
  return loss * inv_b;
}

}  // namespace mecsim
