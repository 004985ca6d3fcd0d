#pragma once

// Completion-time penalty, per-slot reward and the run-level metrics
// (service success probability, average accuracy, throughput).

#include <cmath>
#include <cstddef>
#include <deque>
#include <optional>
#include <vector>

#include "mecsim/error.hpp"
#include "mecsim/sim_core.hpp"

namespace mecsim {

// psi(t) = 2 (1 - sigmoid(k t / sigma)), k = 5 by default
inline double psi(double t, double sigma, double steepness = 5.0) {
  // 1 - sigmoid(x) = 1 / (1 + e^x), evaluated without cancellation.
  return 2.0 / (1.0 + std::exp(steepness * t / sigma));
}

inline double task_reward(const TaskOutcome& o, double steepness = 5.0) {
  return o.eta * psi(o.t_total, o.deadline_s, steepness);
}

// Sum over devices of eta * psi(t_total).
inline double slot_reward(const SlotOutcome& out, double steepness = 5.0) {
  double r = 0.0;
  for (const auto& o : out) r += task_reward(o, steepness);
  return r;
}

struct NormalizedReward {
  std::optional<double> value;  // missing when the oracle reward is 0
  bool exceeds_oracle = false;  // reward > oracle + 1e-9: oracle bug
};

inline NormalizedReward normalized_reward(double reward, double oracle_reward) {
  NormalizedReward n;
  if (!(oracle_reward > 0.0)) return n;
  n.exceeds_oracle = reward > oracle_reward + 1e-9;
  n.value = reward / oracle_reward;
  return n;
}

class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window = 50) : window_(window) {
    if (window == 0) throw ConfigError("moving average window must be >= 1");
  }
  double push(double x) {
    buf_.push_back(x);
    sum_ += x;
    if (buf_.size() > window_) {
      sum_ -= buf_.front();
      buf_.pop_front();
    }
    // Re-sum occasionally so rounding drift cannot accumulate.
    if (++since_resum_ >= 4096) {
      sum_ = 0.0;
      for (double v : buf_) sum_ += v;
      since_resum_ = 0;
    }
    return value();
  }
  double value() const { return buf_.empty() ? 0.0 : sum_ / static_cast<double>(buf_.size()); }
  std::size_t size() const noexcept { return buf_.size(); }

 private:
  std::size_t window_;
  std::deque<double> buf_;
  double sum_ = 0.0;
  std::size_t since_resum_ = 0;
};

struct MetricsReport {
  double ssp = 0.0;
  double avg_accuracy = 0.0;
  double avg_throughput = 0.0;
  std::size_t tasks = 0;
  std::size_t successes = 0;
  std::size_t slots = 0;
};

class MetricsAccumulator {
 public:
  void add(const TaskOutcome& o) {
    ++tasks_;
    if (o.success) {
      ++successes_;
      eta_sum_ += o.achieved_eta;
    }
  }
  void add(const std::vector<TaskOutcome>& os) {
    for (const auto& o : os) add(o);
  }
  void set_slots(std::size_t k) { slots_ = k; }

  MetricsReport report() const {
    MetricsReport r;
    r.tasks = tasks_;
    r.successes = successes_;
    r.slots = slots_;
    if (tasks_ > 0) {
      r.ssp = static_cast<double>(successes_) / static_cast<double>(tasks_);
      r.avg_accuracy = eta_sum_ / static_cast<double>(tasks_);
    }
    if (slots_ > 0) r.avg_throughput = static_cast<double>(successes_) / static_cast<double>(slots_);
    return r;
  }

 private:
  std::size_t tasks_ = 0, successes_ = 0, slots_ = 0;
  double eta_sum_ = 0.0;
};

inline MetricsReport accumulate_metrics(const std::vector<TaskOutcome>& outcomes,
                                        std::size_t slots) {
  MetricsAccumulator acc;
  acc.add(outcomes);
  acc.set_slots(slots);
  return acc.report();
}

}  // namespace mecsim
