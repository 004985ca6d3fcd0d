#pragma once

// Discrete-event engine for one MEC run: transmission, queuing, computation,
// completion time and energy of every task under a joint offloading decision.
//
// ES queues are served FIFO in arrival order. Because a task committed in
// slot k may still be in flight when slot k+1 is decided, and a later task can
// overtake it on the air, ES jobs stay "pending" in the QueueSnapshot until no
// future arrival can precede them. Only then are their queue delays final.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "mecsim/error.hpp"
#include "mecsim/profiles.hpp"
#include "mecsim/scenario.hpp"

namespace mecsim {

// ---------------------------------------------------------------------------
// Decisions

struct OffloadDecision {
  int split = 0;                   // l in 0..L
  std::optional<std::size_t> es;   // absent iff l == L
  std::optional<int> ratio;        // present iff 0 < l < L

  static OffloadDecision local(int depth) { return {depth, std::nullopt, std::nullopt}; }
  static OffloadDecision full(std::size_t s) { return {0, s, std::nullopt}; }
  static OffloadDecision partial(int l, std::size_t s, int m) { return {l, s, m}; }

  bool is_local(int depth) const noexcept { return split == depth; }
  bool operator==(const OffloadDecision&) const = default;
};

using JointDecision = std::vector<OffloadDecision>;

inline std::string describe(const OffloadDecision& d) {
  std::string out = "l=" + std::to_string(d.split);
  if (d.es) out += " s=" + std::to_string(*d.es);
  if (d.ratio) out += " m=" + std::to_string(*d.ratio);
  return out;
}

// ---------------------------------------------------------------------------
// Model bundle

enum class PowerMode { max, min };

struct SimOptions {
  CompressionMethod method = CompressionMethod::aecnn;
  bool entropy_coding = true;
  PowerMode power_mode = PowerMode::max;
};

class SystemModel {
 public:
  SystemModel(Scenario sc, TimingProfile tp, CompressionProfile cp, SimOptions opts = {})
      : scenario_(std::move(sc)), timing_(std::move(tp)), compression_(std::move(cp)),
        options_(opts) {
    scenario_.validate();
    check_profiles_compatible(timing_, compression_);
  }

  const Scenario& scenario() const noexcept { return scenario_; }
  const TimingProfile& timing() const noexcept { return timing_; }
  const CompressionProfile& compression() const noexcept { return compression_; }
  const SimOptions& options() const noexcept { return options_; }
  int depth() const noexcept { return timing_.depth(); }

  void set_options(SimOptions o) { options_ = o; }
  Scenario& mutable_scenario() { return scenario_; }

  void validate(const OffloadDecision& d) const {
    const int L = depth();
    if (d.split < 0 || d.split > L) {
      throw ModelError("decision " + describe(d) + ": split outside 0.." + std::to_string(L));
    }
    if (d.split == L) {
      if (d.es || d.ratio) throw ModelError("decision " + describe(d) + ": local computing takes no ES or ratio");
      return;
    }
    if (!d.es || *d.es >= scenario_.num_ess) {
      throw ModelError("decision " + describe(d) + ": offloading needs exactly one valid ES");
    }
    if (d.split == 0) {
      if (d.ratio) throw ModelError("decision " + describe(d) + ": full offloading takes no ratio");
      return;
    }
    if (!d.ratio || !compression_.has(d.split, *d.ratio)) {
      throw ModelError("decision " + describe(d) + ": (l, m) not in compression profile");
    }
  }

  void validate(const JointDecision& a) const {
    if (a.size() != scenario_.num_devices) {
      throw ModelError("joint decision has " + std::to_string(a.size()) + " entries for " +
                       std::to_string(scenario_.num_devices) + " devices");
    }
    for (const auto& d : a) validate(d);
  }

  double local_energy() const { return device_compute_energy(timing_, depth()); }

 private:
  Scenario scenario_;
  TimingProfile timing_;
  CompressionProfile compression_;
  SimOptions options_;
};

// Allowed split layers and ratios for the decision layer.
struct OptionSet {
  std::vector<int> splits;  // may include 0 and L
  std::vector<int> ratios;
};

// Every split/ratio the compression profile supports, plus 0 and L.
inline OptionSet full_option_set(const SystemModel& model) {
  OptionSet os;
  os.splits.push_back(0);
  std::vector<int> ratios;
  for (const auto& sp : model.compression().split_points()) {
    os.splits.push_back(sp.layer);
    for (const auto& e : sp.entries) ratios.push_back(e.ratio);
  }
  os.splits.push_back(model.depth());
  std::sort(ratios.begin(), ratios.end());
  ratios.erase(std::unique(ratios.begin(), ratios.end()), ratios.end());
  os.ratios = ratios;
  return os;
}

// Per-device option list: for each ES, full offload once (ratio is meaningless
// at l = 0) and every (l, m) split, then a single local-computing option last.
inline std::vector<OffloadDecision> enumerate_options(const SystemModel& model,
                                                      const OptionSet& os) {
  const int L = model.depth();
  std::vector<OffloadDecision> out;
  for (std::size_t s = 0; s < model.scenario().num_ess; ++s) {
    for (int l : os.splits) {
      if (l == 0) {
        out.push_back(OffloadDecision::full(s));
      } else if (l > 0 && l < L) {
        for (int m : os.ratios) {
          if (!model.compression().has(l, m)) {
            throw ConfigError("option set: (l=" + std::to_string(l) + ", m=" +
                              std::to_string(m) + ") not in compression profile");
          }
          out.push_back(OffloadDecision::partial(l, s, m));
        }
      } else if (l != L) {
        throw ConfigError("option set: split " + std::to_string(l) + " outside 0.." +
                          std::to_string(L));
      }
    }
  }
  out.push_back(OffloadDecision::local(L));
  return out;
}

// ---------------------------------------------------------------------------
// Per-task physics

// R = B log2(1 + p g / (n0 B))
inline double uplink_rate(double gain, double power_w, double bandwidth_hz, double n0) {
  return bandwidth_hz * std::log1p(power_w * gain / (n0 * bandwidth_hz)) / std::numbers::ln2;
}

inline double transmit_bytes(const SystemModel& model, const OffloadDecision& d,
                             double task_bytes) {
  return transmit_bytes(model.compression(), d.split, d.ratio.value_or(1),
                        model.options().entropy_coding, task_bytes);
}

inline double device_compute_time(const SystemModel& model, const OffloadDecision& d) {
  const int L = model.depth();
  if (d.split == 0) return 0.0;
  if (d.split == L) return model.timing().device_time_through(L);
  return model.timing().device_time_through(d.split) +
         model.compression().entry(d.split, d.ratio.value()).t_enc_s;
}

// Base ES time scaled by jitter c_s and availability a_s.
inline double es_compute_time(const SystemModel& model, const OffloadDecision& d,
                              const SlotState& st) {
  const int L = model.depth();
  if (d.split == L) return 0.0;
  double base = model.timing().es_time_after(d.split);
  if (d.split > 0) base += model.compression().entry(d.split, d.ratio.value()).t_dec_s;
  const std::size_t s = d.es.value();
  return base * st.compute_scale.at(s) / st.availability.at(s);
}

inline double decision_accuracy(const SystemModel& model, const OffloadDecision& d) {
  return model.compression().accuracy(d.split, d.ratio.value_or(1), model.options().method);
}

// ---------------------------------------------------------------------------
// Power selection

enum class PowerFailure { none, deadline, energy };

inline const char* to_string(PowerFailure f) {
  switch (f) {
    case PowerFailure::none: return "none";
    case PowerFailure::deadline: return "deadline";
    case PowerFailure::energy: return "energy";
  }
  return "?";
}

// One transmitting task as seen by the planner. Times are relative to the
// start of the task's slot.
struct PowerProblem {
  double gain = 0.0;          // planning gain (estimated)
  double bandwidth_hz = 0.0;
  double n0 = 0.0;
  double max_power_w = 0.0;
  double bytes = 0.0;
  double tx_start = 0.0;      // max(tx free, t_cmp_dev)
  double es_free = 0.0;       // projected ES backlog end
  double es_time = 0.0;
  double deadline = 0.0;
  double compute_energy = 0.0;
  double local_energy = 0.0;

  double t_com(double p) const {
    return bytes * 8.0 / uplink_rate(gain, p, bandwidth_hz, n0);
  }
  double projected_total(double p) const {
    return std::max(tx_start + t_com(p), es_free) + es_time;
  }
};

struct PowerChoice {
  double power_w = 0.0;
  PowerFailure failure = PowerFailure::none;
  double projected_total = 0.0;
  bool feasible() const noexcept { return failure == PowerFailure::none; }
};

inline PowerChoice select_power(const PowerProblem& pp, PowerMode mode) {
  PowerChoice out;
  out.power_w = pp.max_power_w;
  if (mode == PowerMode::min) {
    if (pp.projected_total(pp.max_power_w) > pp.deadline) {
      out.failure = PowerFailure::deadline;
    } else {
      double lo = 0.0, hi = pp.max_power_w;
      for (int it = 0; it < 40 && hi - lo >= 1e-6; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pp.projected_total(mid) <= pp.deadline) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
      out.power_w = hi;
    }
  }
  out.projected_total = pp.projected_total(out.power_w);
  if (out.failure == PowerFailure::none &&
      pp.compute_energy + pp.t_com(out.power_w) * out.power_w > pp.local_energy) {
    out.failure = PowerFailure::energy;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outcomes and queue state

struct TaskOutcome {
  std::size_t slot = 0;
  std::size_t device = 0;
  OffloadDecision decision;
  double tx_bytes = 0.0;
  double power_w = 0.0;
  double rate_bps = 0.0;
  double t_cmp_dev = 0.0;
  double t_com = 0.0;
  double t_que = 0.0;   // transmitter wait + ES wait
  double t_cmp_es = 0.0;
  double t_total = 0.0;
  double energy_j = 0.0;
  double deadline_s = 0.0;
  double eta = 0.0;           // profile accuracy; 0 when hard-infeasible
  PowerFailure failure = PowerFailure::none;
  bool success = false;
  double achieved_eta = 0.0;  // eta if success else 0
  bool final = true;          // false while an ES queue delay may still change

  bool operator==(const TaskOutcome&) const = default;
};

using SlotOutcome = std::vector<TaskOutcome>;

inline void settle(TaskOutcome& o) {
  o.t_total = o.t_cmp_dev + o.t_com + o.t_que + o.t_cmp_es;
  o.success = o.failure == PowerFailure::none && o.t_total <= o.deadline_s;
  o.achieved_eta = o.success ? o.eta : 0.0;
}

struct EsJob {
  double arrival = 0.0;   // absolute seconds
  std::size_t slot = 0;
  std::size_t device = 0;
  double service = 0.0;
  TaskOutcome outcome;    // t_que holds the transmitter wait only

  auto key() const { return std::tie(arrival, slot, device); }
};

struct EsQueue {
  double free_at = 0.0;          // end of the finalized schedule
  std::vector<EsJob> pending;    // sorted by key()
};

struct QueueSnapshot {
  std::vector<double> tx_free_at;  // per device, absolute seconds
  std::vector<EsQueue> es;

  static QueueSnapshot empty(std::size_t devices, std::size_t ess) {
    QueueSnapshot q;
    q.tx_free_at.assign(devices, 0.0);
    q.es.assign(ess, EsQueue{});
    return q;
  }

  // End of every job known to ES s, served in arrival order.
  double projected_free_at(std::size_t s) const {
    double t = es.at(s).free_at;
    for (const auto& j : es.at(s).pending) t = std::max(t, j.arrival) + j.service;
    return t;
  }
};

// Transmitter serialization: a device sends one task at a time.
inline double arrival_time(double tx_free_at, double slot_start, double t_cmp_dev,
                           double t_com) {
  return std::max(tx_free_at, slot_start + t_cmp_dev) + t_com;
}

// FIFO wait of a job arriving at `arrival` behind the finalized schedule and
// every pending job that precedes it.
inline double queue_delay(double arrival, const EsQueue& q) {
  double t = q.free_at;
  for (const auto& j : q.pending) {
    if (j.arrival >= arrival) break;
    t = std::max(t, j.arrival) + j.service;
  }
  return std::max(0.0, t - arrival);
}

// ---------------------------------------------------------------------------
// Slot evaluation

enum class GainView {
  actual,    // power from estimated gains, rates from true gains (execution)
  estimated  // both from estimated gains (what the planner believes)
};

// Per-device quantities that do not depend on other devices' choices.
struct TaskLeg {
  OffloadDecision decision;
  double tx_bytes = 0.0;
  double power_w = 0.0;
  double rate_bps = 0.0;
  double t_cmp_dev = 0.0;
  double t_com = 0.0;
  double tx_wait = 0.0;
  double t_cmp_es = 0.0;
  double energy_j = 0.0;
  double eta = 0.0;
  PowerFailure failure = PowerFailure::none;
  bool transmits = false;
  double arrival = 0.0;  // absolute
};

// Precomputes per-(device, option) legs for one slot; candidate joint
// decisions then only need the ES FIFO merge.
class SlotEvaluator {
 public:
  SlotEvaluator(const SystemModel& model, const SlotState& st, const QueueSnapshot& q,
                GainView view, std::vector<OffloadDecision> options = {})
      : model_(&model), st_(&st), q_(&q), view_(view), options_(std::move(options)) {
    const auto& sc = model.scenario();
    if (st.tasks.size() != sc.num_devices || q.tx_free_at.size() != sc.num_devices ||
        q.es.size() != sc.num_ess) {
      throw ModelError("slot evaluator: state/queue dimensions do not match scenario");
    }
    slot_start_ = st.slot_start(sc.timeslot_s);
    es_free_.resize(sc.num_ess);
    for (std::size_t s = 0; s < sc.num_ess; ++s) es_free_[s] = q.projected_free_at(s);
    legs_.resize(sc.num_devices * options_.size());
    for (std::size_t u = 0; u < sc.num_devices; ++u) {
      for (std::size_t o = 0; o < options_.size(); ++o) {
        legs_[u * options_.size() + o] = make_leg(u, options_[o]);
      }
    }
  }

  const std::vector<OffloadDecision>& options() const noexcept { return options_; }
  std::size_t num_options() const noexcept { return options_.size(); }
  const TaskLeg& leg(std::size_t u, std::size_t o) const {
    return legs_.at(u * options_.size() + o);
  }
  double slot_start() const noexcept { return slot_start_; }
  double es_backlog(std::size_t s) const { return std::max(0.0, es_free_.at(s) - slot_start_); }

  TaskLeg make_leg(std::size_t u, const OffloadDecision& d) const {
    const auto& model = *model_;
    const auto& sc = model.scenario();
    model.validate(d);
    TaskLeg leg;
    leg.decision = d;
    const Task& task = st_->tasks.at(u);
    leg.t_cmp_dev = device_compute_time(model, d);
    leg.eta = decision_accuracy(model, d);
    const double e_cmp = device_compute_energy(model.timing(), d.split);
    leg.energy_j = e_cmp;
    if (d.is_local(model.depth())) return leg;

    const std::size_t s = *d.es;
    leg.transmits = true;
    leg.tx_bytes = transmit_bytes(model, d, task.bytes);
    leg.t_cmp_es = es_compute_time(model, d, *st_);
    const double tx_start_abs = std::max(q_->tx_free_at[u], slot_start_ + leg.t_cmp_dev);
    leg.tx_wait = tx_start_abs - (slot_start_ + leg.t_cmp_dev);

    PowerProblem pp;
    pp.gain = st_->estimated_gains(u, s);
    pp.bandwidth_hz = sc.bandwidth_hz;
    pp.n0 = sc.noise_psd_w_per_hz;
    pp.max_power_w = sc.max_tx_power_w;
    pp.bytes = leg.tx_bytes;
    pp.tx_start = tx_start_abs - slot_start_;
    pp.es_free = es_free_[s] - slot_start_;
    pp.es_time = leg.t_cmp_es;
    pp.deadline = task.deadline_s;
    pp.compute_energy = e_cmp;
    pp.local_energy = model.local_energy();
    const PowerChoice pc = select_power(pp, model.options().power_mode);
    leg.power_w = pc.power_w;
    leg.failure = pc.failure;
    if (!pc.feasible()) leg.eta = 0.0;

    const double g = view_ == GainView::actual ? st_->gains(u, s) : st_->estimated_gains(u, s);
    leg.rate_bps = uplink_rate(g, leg.power_w, sc.bandwidth_hz, sc.noise_psd_w_per_hz);
    leg.t_com = leg.tx_bytes * 8.0 / leg.rate_bps;
    leg.energy_j = e_cmp + leg.t_com * leg.power_w;
    leg.arrival = tx_start_abs + leg.t_com;
    return leg;
  }

  // Outcomes for this slot's tasks given one leg per device.
  SlotOutcome evaluate(const std::vector<const TaskLeg*>& legs) const {
    SlotOutcome out;
    std::vector<EsJob> fresh;
    resolve(legs, out, fresh, nullptr);
    return out;
  }

  SlotOutcome evaluate_indices(const std::vector<std::size_t>& choice) const {
    std::vector<const TaskLeg*> legs(choice.size());
    for (std::size_t u = 0; u < choice.size(); ++u) legs[u] = &leg(u, choice[u]);
    return evaluate(legs);
  }

  SlotOutcome evaluate(const JointDecision& a) const {
    model_->validate(a);
    std::vector<TaskLeg> owned(a.size());
    std::vector<const TaskLeg*> legs(a.size());
    for (std::size_t u = 0; u < a.size(); ++u) {
      owned[u] = make_leg(u, a[u]);
      legs[u] = &owned[u];
    }
    return evaluate(legs);
  }

  // Outcome of device u alone against the current queue, ignoring the other
  // devices of this slot.
  TaskOutcome solo(std::size_t u, std::size_t o) const {
    const TaskLeg& lg = leg(u, o);
    TaskOutcome out = base_outcome(u, lg);
    if (lg.transmits) out.t_que += queue_delay(lg.arrival, q_->es[*lg.decision.es]);
    settle(out);
    return out;
  }

  TaskOutcome base_outcome(std::size_t u, const TaskLeg& lg) const {
    TaskOutcome o;
    o.slot = st_->slot;
    o.device = u;
    o.decision = lg.decision;
    o.tx_bytes = lg.tx_bytes;
    o.power_w = lg.power_w;
    o.rate_bps = lg.rate_bps;
    o.t_cmp_dev = lg.t_cmp_dev;
    o.t_com = lg.t_com;
    o.t_que = lg.tx_wait;
    o.t_cmp_es = lg.t_cmp_es;
    o.energy_j = lg.energy_j;
    o.deadline_s = st_->tasks[u].deadline_s;
    o.eta = lg.eta;
    o.failure = lg.failure;
    o.final = !lg.transmits;
    return o;
  }

  // Shared by evaluate and commit. When `next` is given it receives the queue
  // after appending this slot's jobs (before finalization).
  void resolve(const std::vector<const TaskLeg*>& legs, SlotOutcome& out,
               std::vector<EsJob>& fresh, QueueSnapshot* next) const {
    const auto& sc = model_->scenario();
    out.assign(legs.size(), TaskOutcome{});
    fresh.clear();
    for (std::size_t u = 0; u < legs.size(); ++u) {
      const TaskLeg& lg = *legs[u];
      out[u] = base_outcome(u, lg);
      if (lg.transmits) {
        EsJob j;
        j.arrival = lg.arrival;
        j.slot = st_->slot;
        j.device = u;
        j.service = lg.t_cmp_es;
        fresh.push_back(j);
      }
    }
    if (next) {
      *next = *q_;
      for (std::size_t u = 0; u < legs.size(); ++u) {
        if (legs[u]->transmits) next->tx_free_at[u] = legs[u]->arrival;
      }
    }
    // Merge per ES and replay FIFO.
    std::sort(fresh.begin(), fresh.end(),
              [](const EsJob& a, const EsJob& b) { return a.key() < b.key(); });
    for (std::size_t s = 0; s < sc.num_ess; ++s) {
      const EsQueue& q = q_->es[s];
      double t = q.free_at;
      auto p = q.pending.begin();
      std::vector<EsJob> merged;
      if (next) merged.reserve(q.pending.size() + fresh.size());
      for (const EsJob& f : fresh) {
        if (*legs[f.device]->decision.es != s) continue;
        while (p != q.pending.end() && p->key() < f.key()) {
          t = std::max(t, p->arrival) + p->service;
          if (next) merged.push_back(*p);
          ++p;
        }
        const double start = std::max(t, f.arrival);
        TaskOutcome& o = out[f.device];
        o.t_que += start - f.arrival;
        t = start + f.service;
        if (next) {
          EsJob j = f;
          j.outcome = o;
          j.outcome.t_que = legs[f.device]->tx_wait;
          merged.push_back(j);
        }
      }
      if (next) {
        for (; p != q.pending.end(); ++p) merged.push_back(*p);
        next->es[s].pending = std::move(merged);
      }
    }
    for (auto& o : out) settle(o);
  }

 private:
  const SystemModel* model_;
  const SlotState* st_;
  const QueueSnapshot* q_;
  GainView view_;
  std::vector<OffloadDecision> options_;
  double slot_start_ = 0.0;
  std::vector<double> es_free_;
  std::vector<TaskLeg> legs_;
};

// Pure what-if evaluation; the queue snapshot is not modified.
inline SlotOutcome evaluate_decision(const SystemModel& model, const SlotState& st,
                                     const JointDecision& a, const QueueSnapshot& q,
                                     GainView view = GainView::actual) {
  return SlotEvaluator(model, st, q, view).evaluate(a);
}

// Settles pending ES jobs whose position in the FIFO order can no longer
// change (arrival not later than `horizon_time`) and returns their outcomes.
inline std::vector<TaskOutcome> finalize_until(QueueSnapshot& q, double horizon_time) {
  std::vector<TaskOutcome> done;
  for (auto& es : q.es) {
    std::size_t n = 0;
    for (; n < es.pending.size() && es.pending[n].arrival <= horizon_time; ++n) {
      EsJob& j = es.pending[n];
      const double start = std::max(es.free_at, j.arrival);
      j.outcome.t_que += start - j.arrival;
      j.outcome.final = true;
      settle(j.outcome);
      es.free_at = start + j.service;
      done.push_back(j.outcome);
    }
    es.pending.erase(es.pending.begin(), es.pending.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return done;
}

inline std::vector<TaskOutcome> drain(QueueSnapshot& q) {
  return finalize_until(q, std::numeric_limits<double>::infinity());
}

struct CommitResult {
  SlotOutcome outcome;                 // as projected now (equals evaluate_decision)
  QueueSnapshot queue;
  std::vector<TaskOutcome> finalized;  // tasks (this or earlier slots) now settled
};

// Executes a decision: advances the queue snapshot. Local tasks are final
// immediately; offloaded tasks are reported again in `finalized` once their
// queue delay is settled.
inline CommitResult commit_decision(const SystemModel& model, const SlotState& st,
                                    const JointDecision& a, const QueueSnapshot& q) {
  model.validate(a);
  SlotEvaluator ev(model, st, q, GainView::actual);
  std::vector<TaskLeg> owned(a.size());
  std::vector<const TaskLeg*> legs(a.size());
  for (std::size_t u = 0; u < a.size(); ++u) {
    owned[u] = ev.make_leg(u, a[u]);
    legs[u] = &owned[u];
  }
  CommitResult r;
  std::vector<EsJob> fresh;
  ev.resolve(legs, r.outcome, fresh, &r.queue);
  for (const auto& o : r.outcome) {
    if (o.final) r.finalized.push_back(o);
  }
  // Every later task arrives strictly after the next slot starts.
  const double next_start = static_cast<double>(st.slot) * model.scenario().timeslot_s;
  auto settled = finalize_until(r.queue, next_start);
  r.finalized.insert(r.finalized.end(), settled.begin(), settled.end());
  return r;
}

}  // namespace mecsim
