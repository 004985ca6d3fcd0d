#pragma once

// Relaxed scores -> candidate one-hot decisions, reward-maximizing critic,
// and exhaustive search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "mecsim/error.hpp"
#include "mecsim/reward.hpp"
#include "mecsim/sim_core.hpp"

namespace mecsim {

// Option index per device.
using Choice = std::vector<std::size_t>;

struct Candidate {
  Choice choice;
  // The (device, option) pair flipped away from the argmax; absent for
  // candidate 0.
  std::optional<std::pair<std::size_t, std::size_t>> flipped;
};

// scores: device-major, U x O. Candidate 0 is the per-device argmax (lowest
// option on ties). Candidate j in 1..U*(O-1) moves one device to the option
// with the j-th smallest score gap below its argmax; gap ties go to the lower
// device, then the lower option. The rank shifts that follow move every
// device at once. max_candidates = 0 means no
// cap; otherwise the list is truncated from the end.
inline std::vector<Candidate> quantize(const Eigen::VectorXd& scores, std::size_t U,
                                       std::size_t O, std::size_t max_candidates = 0) {
  if (static_cast<std::size_t>(scores.size()) != U * O || O == 0) {
    throw ModelError("quantize: expected " + std::to_string(U * O) + " scores");
  }
  auto at = [&](std::size_t u, std::size_t o) {
    return scores(static_cast<Eigen::Index>(u * O + o));
  };
  Candidate base;
  base.choice.resize(U);
  for (std::size_t u = 0; u < U; ++u) {
    std::size_t best = 0;
    for (std::size_t o = 1; o < O; ++o) {
      if (at(u, o) > at(u, best)) best = o;
    }
    base.choice[u] = best;
  }
  struct Flip {
    double gap;
    std::size_t u, o;
  };
  std::vector<Flip> flips;
  flips.reserve(U * (O - 1));
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t o = 0; o < O; ++o) {
      if (o != base.choice[u]) flips.push_back({at(u, base.choice[u]) - at(u, o), u, o});
    }
  }
  std::sort(flips.begin(), flips.end(), [](const Flip& a, const Flip& b) {
    return std::tie(a.gap, a.u, a.o) < std::tie(b.gap, b.u, b.o);
  });
  // Rank shifts: every device takes its r-th highest scored option, r = 1..O-1.
  // With one device these repeat the single flips, so they are left out.
  const std::size_t shifts = U > 1 ? O - 1 : 0;
  std::size_t n = 1 + flips.size() + shifts;
  if (max_candidates > 0) n = std::min(n, max_candidates);
  std::vector<Candidate> out;
  out.reserve(n);
  out.push_back(base);
  for (std::size_t j = 1; j < n && j <= flips.size(); ++j) {
    Candidate c;
    c.choice = base.choice;
    const Flip& f = flips[j - 1];
    c.choice[f.u] = f.o;
    c.flipped = std::make_pair(f.u, f.o);
    out.push_back(std::move(c));
  }
  if (out.size() == n) return out;
  std::vector<std::vector<std::size_t>> order(U, std::vector<std::size_t>(O));
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t o = 0; o < O; ++o) order[u][o] = o;
    std::stable_sort(order[u].begin(), order[u].end(),
                     [&](std::size_t x, std::size_t y) { return at(u, x) > at(u, y); });
  }
  for (std::size_t r = 1; out.size() < n; ++r) {
    Candidate c;
    c.choice.resize(U);
    for (std::size_t u = 0; u < U; ++u) c.choice[u] = order[u][r];
    out.push_back(std::move(c));
  }
  return out;
}

struct CriticResult {
  std::size_t index = 0;
  Choice choice;
  double reward = 0.0;
  std::vector<double> rewards;  // per candidate
};

// argmax of the slot reward over candidates; first maximizer wins.
inline CriticResult critic_select(const SlotEvaluator& ev, const std::vector<Candidate>& cands,
                                  double steepness = 5.0) {
  if (cands.empty()) throw ModelError("critic_select: no candidates");
  CriticResult r;
  r.rewards.reserve(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double v = slot_reward(ev.evaluate_indices(cands[i].choice), steepness);
    r.rewards.push_back(v);
    if (i == 0 || v > r.reward) {
      r.reward = v;
      r.index = i;
    }
  }
  r.choice = cands[r.index].choice;
  return r;
}

inline constexpr double kMaxOracleSpace = 1e6;

inline double joint_space_size(std::size_t U, std::size_t O) {
  return std::pow(static_cast<double>(O), static_cast<double>(U));
}

struct OracleResult {
  Choice choice;
  double reward = 0.0;
  std::size_t evaluated = 0;
};

// Enumerates all O^U joint decisions (odometer order, device 0 fastest) and
// returns the first maximizer.
inline OracleResult exhaustive_oracle(const SlotEvaluator& ev, std::size_t U,
                                      double steepness = 5.0) {
  const std::size_t O = ev.num_options();
  const double size = joint_space_size(U, O);
  if (size > kMaxOracleSpace) {
    throw SearchSpaceError("exhaustive search over " + std::to_string(O) + "^" +
                               std::to_string(U) + " = " + std::to_string(size) +
                               " joint decisions exceeds the limit of 1e6",
                           size);
  }
  OracleResult best;
  Choice c(U, 0);
  bool first = true;
  while (true) {
    const double v = slot_reward(ev.evaluate_indices(c), steepness);
    ++best.evaluated;
    if (first || v > best.reward) {
      best.reward = v;
      best.choice = c;
      first = false;
    }
    std::size_t u = 0;
    while (u < U && ++c[u] == O) c[u++] = 0;
    if (u == U) break;
  }
  return best;
}

inline JointDecision to_decision(const SlotEvaluator& ev, const Choice& c) {
  JointDecision a;
  a.reserve(c.size());
  for (std::size_t o : c) a.push_back(ev.options().at(o));
  return a;
}

// Per-edge one-hot labels for a choice, device-major.
inline Eigen::VectorXd edge_labels(const Choice& c, std::size_t O) {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.size() * O));
  for (std::size_t u = 0; u < c.size(); ++u) y(static_cast<Eigen::Index>(u * O + c[u])) = 1.0;
  return y;
}

}  // namespace mecsim
