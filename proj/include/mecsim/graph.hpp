#pragma once

// Per-slot bipartite graph: one node per device, one node per offloading
// option (ES, split, ratio) plus a shared local-computing node. Every device
// is linked to every option.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mecsim/sim_core.hpp"
#include "mecsim/units.hpp"

namespace mecsim {

inline constexpr int kFeatureDim = 8;
inline constexpr std::size_t kPerEsSlots = 2;  // device slots 5..6, option slots 6..7

// Divisors and ranges that keep node features in a small range.
struct FeatureConfig {
  double task_bytes_scale = 0.0;   // 0 -> scenario d_max
  double deadline_ratio_scale = 4.0;   // (sigma / tau) / this
  double local_time_scale = 10.0;      // (t_local / sigma) / this
  double gain_db_low = -120.0;         // maps to 0
  double gain_db_high = -80.0;         // maps to 1
  double backlog_cap = 2.0;            // backlog / sigma is clipped here
  double relative_gain_floor = -1.0;   // per-ES gain minus the best, clipped here
};

struct MecGraph {
  std::size_t num_devices = 0;
  std::size_t num_options = 0;
  Eigen::MatrixXd features;      // (U + O) x kFeatureDim; devices first
  Eigen::MatrixXd aggregation;   // row-normalized adjacency (mean over neighbours)
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (device, option), device-major

  std::size_t num_nodes() const noexcept { return num_devices + num_options; }
  std::size_t num_edges() const noexcept { return edges.size(); }
};

inline double map_gain_db(double g, const FeatureConfig& fc) {
  return (units::linear_to_db(g) - fc.gain_db_low) / (fc.gain_db_high - fc.gain_db_low);
}

inline Eigen::MatrixXd complete_bipartite_aggregation(std::size_t U, std::size_t O) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(U + O),
                                            static_cast<Eigen::Index>(U + O));
  const auto Ui = static_cast<Eigen::Index>(U), Oi = static_cast<Eigen::Index>(O);
  a.block(0, Ui, Ui, Oi).setConstant(1.0 / static_cast<double>(O));
  a.block(Ui, 0, Oi, Ui).setConstant(1.0 / static_cast<double>(U));
  return a;
}

inline MecGraph build_graph(const SystemModel& model, const SlotState& st,
                            const SlotEvaluator& ev, const FeatureConfig& fc = {}) {
  const auto& sc = model.scenario();
  const std::size_t U = sc.num_devices, S = sc.num_ess;
  const auto& options = ev.options();
  const std::size_t O = options.size();
  const int L = model.depth();

  MecGraph g;
  g.num_devices = U;
  g.num_options = O;
  g.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(U + O), kFeatureDim);
  const double d_scale = fc.task_bytes_scale > 0.0 ? fc.task_bytes_scale : sc.task_max_bytes;
  const double t_local = model.timing().device_time_through(L);

  for (std::size_t u = 0; u < U; ++u) {
    const auto r = static_cast<Eigen::Index>(u);
    const double sigma = st.tasks[u].deadline_s;
    double gmax = -1e300, gsum = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const double v = map_gain_db(st.estimated_gains(u, s), fc);
      gmax = std::max(gmax, v);
      gsum += v;
    }
    g.features(r, 0) = st.tasks[u].bytes / d_scale;
    g.features(r, 1) = sigma / sc.timeslot_s / fc.deadline_ratio_scale;
    g.features(r, 2) = t_local / sigma / fc.local_time_scale;
    g.features(r, 3) = gmax;
    g.features(r, 4) = gsum / static_cast<double>(S);
    // Per-ES gain relative to the best server (0 for the best, negative
    // otherwise) for the first kPerEsSlots servers.
    for (std::size_t s = 0; s < std::min(S, kPerEsSlots); ++s) {
      g.features(r, static_cast<Eigen::Index>(5 + s)) =
          std::max(fc.relative_gain_floor, map_gain_db(st.estimated_gains(u, s), fc) - gmax);
    }
  }

  int max_ratio = 1;
  for (const auto& d : options) max_ratio = std::max(max_ratio, d.ratio.value_or(1));
  const double log_mmax = max_ratio > 1 ? std::log2(static_cast<double>(max_ratio)) : 1.0;
  const double sigma = sc.deadline_s;
  for (std::size_t o = 0; o < O; ++o) {
    const auto r = static_cast<Eigen::Index>(U + o);
    const auto& d = options[o];
    double codec = 0.0;
    if (d.split > 0 && d.split < L) {
      const auto& e = model.compression().entry(d.split, *d.ratio);
      codec = e.t_enc_s + e.t_dec_s;
    }
    g.features(r, 0) = static_cast<double>(d.split) / static_cast<double>(L);
    g.features(r, 1) = std::log2(static_cast<double>(d.ratio.value_or(1))) / log_mmax;
    g.features(r, 2) = decision_accuracy(model, d);
    if (d.es) {
      g.features(r, 3) = std::min(fc.backlog_cap, ev.es_backlog(*d.es) / sigma);
      g.features(r, 4) = st.availability[*d.es];
    } else {
      g.features(r, 4) = 1.0;
    }
    g.features(r, 5) = codec / sigma;
    // One-hot target server, matching the device-side gain slots.
    if (d.es && *d.es < kPerEsSlots) g.features(r, static_cast<Eigen::Index>(6 + *d.es)) = 1.0;
  }

  g.aggregation = complete_bipartite_aggregation(U, O);
  g.edges.reserve(U * O);
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t o = 0; o < O; ++o) g.edges.emplace_back(u, o);
  }
  return g;
}

}  // namespace mecsim
