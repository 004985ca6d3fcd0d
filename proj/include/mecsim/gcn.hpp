#pragma once

// Two-layer GCN actor with an edge classifier, hand-written reverse mode and
// Adam. Node update: h' = relu([h, A h] W + b), A = mean over neighbours.
// Edge score: sigmoid(relu([h_src, h_dst] M1 + c1) m2 + c2).

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mecsim/error.hpp"
#include "mecsim/graph.hpp"
#include "mecsim/rng.hpp"

namespace mecsim {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

struct GcnShape {
  int in_dim = kFeatureDim;
  int hidden1 = 128;
  int hidden2 = 64;
  int mlp_hidden = 64;
};

struct GcnParams {
  GcnShape shape;
  Mat w1;      // 2*in x hidden1
  RowVec b1;
  Mat w2;      // 2*hidden1 x hidden2
  RowVec b2;
  Mat m1_src;  // hidden2 x mlp_hidden (first half of MLP1 input)
  Mat m1_dst;  // hidden2 x mlp_hidden
  RowVec c1;
  Vec m2;      // mlp_hidden
  double c2 = 0.0;

  static GcnParams zeros(const GcnShape& s) {
    GcnParams p;
    p.shape = s;
    p.w1 = Mat::Zero(2 * s.in_dim, s.hidden1);
    p.b1 = RowVec::Zero(s.hidden1);
    p.w2 = Mat::Zero(2 * s.hidden1, s.hidden2);
    p.b2 = RowVec::Zero(s.hidden2);
    p.m1_src = Mat::Zero(s.hidden2, s.mlp_hidden);
    p.m1_dst = Mat::Zero(s.hidden2, s.mlp_hidden);
    p.c1 = RowVec::Zero(s.mlp_hidden);
    p.m2 = Vec::Zero(s.mlp_hidden);
    p.c2 = 0.0;
    return p;
  }

  // Visits every tensor as a flat column-major block. c2 is exposed as 1x1.
  template <typename F>
  void for_each(F&& f) {
    f("w1", w1.data(), w1.size());
    f("b1", b1.data(), b1.size());
    f("w2", w2.data(), w2.size());
    f("b2", b2.data(), b2.size());
    f("m1_src", m1_src.data(), m1_src.size());
    f("m1_dst", m1_dst.data(), m1_dst.size());
    f("c1", c1.data(), c1.size());
    f("m2", m2.data(), m2.size());
    f("c2", &c2, Eigen::Index{1});
  }
};

// U(-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))) weights, zero biases.
// The MLP1 halves share one 2*hidden2 x mlp_hidden fan.
inline GcnParams glorot_init(const GcnShape& s, Engine& rng) {
  GcnParams p = GcnParams::zeros(s);
  auto fill = [&](Mat& m, double fan_in, double fan_out) {
    const double a = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = uniform(rng, -a, a);
  };
  fill(p.w1, 2.0 * s.in_dim, s.hidden1);
  fill(p.w2, 2.0 * s.hidden1, s.hidden2);
  fill(p.m1_src, 2.0 * s.hidden2, s.mlp_hidden);
  fill(p.m1_dst, 2.0 * s.hidden2, s.mlp_hidden);
  const double a = std::sqrt(6.0 / (s.mlp_hidden + 1.0));
  for (Eigen::Index i = 0; i < p.m2.size(); ++i) p.m2(i) = uniform(rng, -a, a);
  return p;
}

struct GcnCache {
  Mat x1, z1, h1;   // layer 1 input [h0, A h0], pre-activation, output
  Mat x2, z2, h2;
  Mat p, q;         // per-device / per-option MLP1 contributions
  Mat e1;           // edges x mlp_hidden pre-activation
  Vec logits;       // per edge
  Vec scores;
};

inline Mat relu(const Mat& z) { return z.cwiseMax(0.0); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Scores for the complete device x option edge set, device-major.
inline GcnCache gcn_forward(const MecGraph& g, const GcnParams& p) {
  if (g.features.cols() != p.shape.in_dim) {
    throw ModelError("gcn_forward: feature width does not match parameters");
  }
  GcnCache c;
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const auto U = static_cast<Eigen::Index>(g.num_devices);
  const auto O = static_cast<Eigen::Index>(g.num_options);

  c.x1.resize(n, 2 * p.shape.in_dim);
  c.x1 << g.features, g.aggregation * g.features;
  c.z1 = (c.x1 * p.w1).rowwise() + p.b1;
  c.h1 = relu(c.z1);

  c.x2.resize(n, 2 * p.shape.hidden1);
  c.x2 << c.h1, g.aggregation * c.h1;
  c.z2 = (c.x2 * p.w2).rowwise() + p.b2;
  c.h2 = relu(c.z2);

  c.p = c.h2.topRows(U) * p.m1_src;
  c.q = c.h2.bottomRows(O) * p.m1_dst;
  const auto E = static_cast<Eigen::Index>(g.num_edges());
  c.e1.resize(E, p.shape.mlp_hidden);
  c.logits.resize(E);
  c.scores.resize(E);
  for (Eigen::Index k = 0; k < E; ++k) {
    const auto [u, o] = g.edges[static_cast<std::size_t>(k)];
    c.e1.row(k) = c.p.row(static_cast<Eigen::Index>(u)) +
                  c.q.row(static_cast<Eigen::Index>(o)) + p.c1;
  }
  c.logits = (c.e1.cwiseMax(0.0) * p.m2).array() + p.c2;
  for (Eigen::Index k = 0; k < E; ++k) c.scores(k) = sigmoid(c.logits(k));
  return c;
}

// mean over edges of BCE(label, sigmoid(logit)), computed from logits.
inline double bce_from_logits(const Vec& logits, const Vec& labels) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < logits.size(); ++k) {
    const double z = logits(k);
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += softplus - labels(k) * z;
  }
  return s / static_cast<double>(logits.size());
}

// BCE on probabilities, for reference checks.
inline double bce(const Vec& scores, const Vec& labels) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < scores.size(); ++k) {
    s -= labels(k) * std::log(scores(k)) + (1.0 - labels(k)) * std::log(1.0 - scores(k));
  }
  return s / static_cast<double>(scores.size());
}

// Accumulates scale * d(loss)/d(params) into grad, where dlogits is the
// gradient of the loss with respect to the edge logits.
inline void gcn_backward(const MecGraph& g, const GcnParams& p, const GcnCache& c,
                         const Vec& dlogits, GcnParams& grad) {
  const auto U = static_cast<Eigen::Index>(g.num_devices);
  const auto O = static_cast<Eigen::Index>(g.num_options);
  const auto E = static_cast<Eigen::Index>(g.num_edges());
  const int H = p.shape.mlp_hidden;

  Mat dp = Mat::Zero(U, H), dq = Mat::Zero(O, H);
  for (Eigen::Index k = 0; k < E; ++k) {
    const auto [u, o] = g.edges[static_cast<std::size_t>(k)];
    const double dz = dlogits(k);
    if (dz == 0.0) continue;
    grad.c2 += dz;
    const RowVec a = c.e1.row(k).cwiseMax(0.0);
    grad.m2 += dz * a.transpose();
    RowVec de = dz * p.m2.transpose();
    for (int j = 0; j < H; ++j) {
      if (c.e1(k, j) <= 0.0) de(j) = 0.0;
    }
    grad.c1 += de;
    dp.row(static_cast<Eigen::Index>(u)) += de;
    dq.row(static_cast<Eigen::Index>(o)) += de;
  }
  grad.m1_src += c.h2.topRows(U).transpose() * dp;
  grad.m1_dst += c.h2.bottomRows(O).transpose() * dq;

  Mat dh2(U + O, p.shape.hidden2);
  dh2.topRows(U) = dp * p.m1_src.transpose();
  dh2.bottomRows(O) = dq * p.m1_dst.transpose();
  const Mat dz2 = dh2.cwiseProduct((c.z2.array() > 0.0).cast<double>().matrix());
  grad.w2 += c.x2.transpose() * dz2;
  grad.b2 += dz2.colwise().sum();
  const Mat dx2 = dz2 * p.w2.transpose();
  const int H1 = p.shape.hidden1;
  const Mat dh1 = dx2.leftCols(H1) + g.aggregation.transpose() * dx2.rightCols(H1);
  const Mat dz1 = dh1.cwiseProduct((c.z1.array() > 0.0).cast<double>().matrix());
  grad.w1 += c.x1.transpose() * dz1;
  grad.b1 += dz1.colwise().sum();
}

// Mean-BCE loss and its gradient over a batch of (graph, labels) pairs.
inline double gcn_loss_and_grad(const std::vector<const MecGraph*>& graphs,
                                const std::vector<const Vec*>& labels, const GcnParams& p,
                                GcnParams& grad) {
  grad = GcnParams::zeros(p.shape);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    const GcnCache c = gcn_forward(*graphs[i], p);
    loss += bce_from_logits(c.logits, *labels[i]);
    const double inv_e = inv_b / static_cast<double>(c.logits.size());
    Vec dlogits(c.logits.size());
    for (Eigen::Index k = 0; k < dlogits.size(); ++k) {
      dlogits(k) = (c.scores(k) - (*labels[i])(k)) * inv_e;
    }
    gcn_backward(*graphs[i], p, c, dlogits, grad);
  }
  return loss * inv_b;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Works on any parameter struct exposing for_each(name, data, size).
template <typename Params>
class Adam {
 public:
  Adam(const Params& like, AdamConfig cfg = {}) : cfg_(cfg) {
    Params tmp = like;
    tmp.for_each([&](const char*, double*, Eigen::Index n) {
      m_.emplace_back(std::vector<double>(static_cast<std::size_t>(n), 0.0));
      v_.emplace_back(std::vector<double>(static_cast<std::size_t>(n), 0.0));
    });
  }

  void step(Params& params, Params& grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    std::vector<double*> gptr;
    grad.for_each([&](const char*, double* d, Eigen::Index) { gptr.push_back(d); });
    std::size_t ti = 0;
    params.for_each([&](const char*, double* w, Eigen::Index n) {
      auto& m = m_[ti];
      auto& v = v_[ti];
      const double* g = gptr[ti];
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g[i];
        v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g[i] * g[i];
        w[i] -= cfg_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + cfg_.eps);
      }
      ++ti;
    });
  }

  long steps() const noexcept { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace mecsim
