#pragma once

// Offloading policies. Every policy maps one slot (through a SlotEvaluator
// built on the estimated channel) to an option index per device.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mecsim/error.hpp"
#include "mecsim/gcn.hpp"
#include "mecsim/graph.hpp"
#include "mecsim/mlp.hpp"
#include "mecsim/quantize.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/sim_core.hpp"

namespace mecsim {

struct PolicyContext {
  const SystemModel& model;
  const SlotState& state;
  const QueueSnapshot& queue;
  const SlotEvaluator& evaluator;  // estimated-gain view
};

struct PolicyStep {
  Choice choice;
  double planned_reward = 0.0;
  std::optional<double> loss;  // set on slots where a training step ran
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual PolicyStep step(const PolicyContext& ctx) = 0;
};

inline double planned_reward(const SlotEvaluator& ev, const Choice& c) {
  return slot_reward(ev.evaluate_indices(c));
}

inline std::size_t index_below(Engine& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform(rng, 0.0, static_cast<double>(n))) % n;
}

// ---------------------------------------------------------------------------
// Baselines

class RandomPolicy : public Policy {
 public:
  explicit RandomPolicy(std::uint64_t seed) : rng_(make_stream(seed, "policy-random")) {}
  std::string name() const override { return "random"; }
  PolicyStep step(const PolicyContext& ctx) override {
    PolicyStep s;
    const std::size_t U = ctx.model.scenario().num_devices;
    s.choice.resize(U);
    for (auto& c : s.choice) c = index_below(rng_, ctx.evaluator.num_options());
    s.planned_reward = planned_reward(ctx.evaluator, s.choice);
    return s;
  }

 private:
  Engine rng_;
};

inline std::size_t find_option(const SlotEvaluator& ev, const OffloadDecision& d) {
  const auto& opts = ev.options();
  auto it = std::find(opts.begin(), opts.end(), d);
  if (it == opts.end()) throw ConfigError("option set lacks " + describe(d));
  return static_cast<std::size_t>(it - opts.begin());
}

class AllLocalPolicy : public Policy {
 public:
  std::string name() const override { return "all-local"; }
  PolicyStep step(const PolicyContext& ctx) override {
    PolicyStep s;
    const std::size_t o = find_option(ctx.evaluator, OffloadDecision::local(ctx.model.depth()));
    s.choice.assign(ctx.model.scenario().num_devices, o);
    s.planned_reward = planned_reward(ctx.evaluator, s.choice);
    return s;
  }
};

// Full offloading to the ES with the strongest estimated channel.
class FullOffloadPolicy : public Policy {
 public:
  std::string name() const override { return "full-offload"; }
  PolicyStep step(const PolicyContext& ctx) override {
    PolicyStep s;
    const auto& sc = ctx.model.scenario();
    s.choice.resize(sc.num_devices);
    for (std::size_t u = 0; u < sc.num_devices; ++u) {
      std::size_t best = 0;
      for (std::size_t e = 1; e < sc.num_ess; ++e) {
        if (ctx.state.estimated_gains(u, e) > ctx.state.estimated_gains(u, best)) best = e;
      }
      s.choice[u] = find_option(ctx.evaluator, OffloadDecision::full(best));
    }
    s.planned_reward = planned_reward(ctx.evaluator, s.choice);
    return s;
  }
};

// Each device picks its best option as if it were alone this slot.
class GreedyPolicy : public Policy {
 public:
  std::string name() const override { return "greedy"; }
  PolicyStep step(const PolicyContext& ctx) override {
    PolicyStep s;
    const std::size_t U = ctx.model.scenario().num_devices;
    const std::size_t O = ctx.evaluator.num_options();
    s.choice.resize(U);
    for (std::size_t u = 0; u < U; ++u) {
      double best = -1.0;
      for (std::size_t o = 0; o < O; ++o) {
        const double v = task_reward(ctx.evaluator.solo(u, o));
        if (v > best) {
          best = v;
          s.choice[u] = o;
        }
      }
    }
    s.planned_reward = planned_reward(ctx.evaluator, s.choice);
    return s;
  }
};

class OraclePolicy : public Policy {
 public:
  std::string name() const override { return "oracle"; }
  PolicyStep step(const PolicyContext& ctx) override {
    const auto r = exhaustive_oracle(ctx.evaluator, ctx.model.scenario().num_devices);
    return {r.choice, r.reward, std::nullopt};
  }
};

// ---------------------------------------------------------------------------
// Learning policies

template <typename Sample>
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be >= 1");
    data_.reserve(capacity);
  }
  void push(Sample s) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(s));
    } else {
      data_[cursor_] = std::move(s);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Sample& operator[](std::size_t i) const { return data_.at(i); }

  // n distinct entries, uniformly at random (partial Fisher-Yates).
  std::vector<std::size_t> sample(std::size_t n, Engine& rng) const {
    if (n > data_.size()) throw ModelError("replay buffer: batch larger than buffer");
    std::vector<std::size_t> idx(data_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + index_below(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(n);
    return idx;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Sample> data_;
};

struct LearnerConfig {
  GcnShape gcn;
  int mlp_hidden = 128;  // channel-only actor
  AdamConfig adam;
  std::size_t buffer_size = 128;
  std::size_t batch_size = 64;
  std::size_t train_interval = 10;
  std::size_t max_candidates = 0;  // 0: no cap
  FeatureConfig features;
  bool learning = true;
};

struct TrainSignal {
  bool ran = false;
  double loss = 0.0;
};

class GrlPolicy : public Policy {
 public:
  struct Sample {
    MecGraph graph;
    Eigen::VectorXd labels;
  };

  GrlPolicy(const LearnerConfig& cfg, std::uint64_t seed, std::string label = "grl")
      : cfg_(cfg),
        label_(std::move(label)),
        init_rng_(make_stream(seed, "policy-init")),
        replay_rng_(make_stream(seed, "policy-replay")),
        params_(glorot_init(cfg.gcn, init_rng_)),
        adam_(params_, cfg.adam),
        buffer_(cfg.buffer_size) {}

  std::string name() const override { return label_; }
  const GcnParams& params() const noexcept { return params_; }
  void set_params(GcnParams p) {
    params_ = std::move(p);
    adam_ = Adam<GcnParams>(params_, cfg_.adam);
  }
  const ReplayBuffer<Sample>& buffer() const noexcept { return buffer_; }
  void set_learning(bool on) { cfg_.learning = on; }

  PolicyStep step(const PolicyContext& ctx) override {
    const std::size_t U = ctx.model.scenario().num_devices;
    const std::size_t O = ctx.evaluator.num_options();
    MecGraph g = build_graph(ctx.model, ctx.state, ctx.evaluator, cfg_.features);
    const GcnCache c = gcn_forward(g, params_);
    const auto cands = quantize(c.scores, U, O, cfg_.max_candidates);
    const CriticResult best = critic_select(ctx.evaluator, cands);
    PolicyStep s{best.choice, best.reward, std::nullopt};
    if (!cfg_.learning) return s;
    buffer_.push({std::move(g), edge_labels(best.choice, O)});
    ++slots_;
    if (slots_ % cfg_.train_interval == 0) {
      const TrainSignal t = train_step();
      if (t.ran) s.loss = t.loss;
    }
    return s;
  }

  // One Adam step on a uniformly sampled mini-batch; no-op when the buffer
  // holds fewer samples than the batch size.
  TrainSignal train_step() {
    TrainSignal t;
    if (buffer_.size() < cfg_.batch_size) return t;
    const auto idx = buffer_.sample(cfg_.batch_size, replay_rng_);
    std::vector<const MecGraph*> gs;
    std::vector<const Eigen::VectorXd*> ys;
    for (std::size_t i : idx) {
      gs.push_back(&buffer_[i].graph);
      ys.push_back(&buffer_[i].labels);
    }
    GcnParams grad;
    t.loss = gcn_loss_and_grad(gs, ys, params_, grad);
    adam_.step(params_, grad);
    t.ran = true;
    return t;
  }

 private:
  LearnerConfig cfg_;
  std::string label_;
  Engine init_rng_, replay_rng_;
  GcnParams params_;
  Adam<GcnParams> adam_;
  ReplayBuffer<Sample> buffer_;
  std::size_t slots_ = 0;
};

inline Eigen::RowVectorXd channel_input(const SlotState& st, const FeatureConfig& fc) {
  const auto& g = st.estimated_gains;
  Eigen::RowVectorXd x(static_cast<Eigen::Index>(g.values().size()));
  for (std::size_t i = 0; i < g.values().size(); ++i) {
    x(static_cast<Eigen::Index>(i)) = map_gain_db(g.values()[i], fc);
  }
  return x;
}

// Sees only the estimated channel matrix.
class MlpPolicy : public Policy {
 public:
  struct Sample {
    Eigen::RowVectorXd input;
    Eigen::VectorXd labels;
  };

  MlpPolicy(const LearnerConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        init_rng_(make_stream(seed, "policy-init")),
        replay_rng_(make_stream(seed, "policy-replay")),
        buffer_(cfg.buffer_size) {}

  std::string name() const override { return "mlp"; }
  const std::optional<MlpParams>& params() const noexcept { return params_; }
  void set_params(MlpParams p) {
    params_ = std::move(p);
    adam_.emplace(*params_, cfg_.adam);
  }
  void set_learning(bool on) { cfg_.learning = on; }

  PolicyStep step(const PolicyContext& ctx) override {
    const std::size_t U = ctx.model.scenario().num_devices;
    const std::size_t O = ctx.evaluator.num_options();
    Eigen::RowVectorXd x = channel_input(ctx.state, cfg_.features);
    if (!params_) {
      params_ = mlp_glorot_init(x.size(), cfg_.mlp_hidden, static_cast<Eigen::Index>(U * O),
                                init_rng_);
      adam_.emplace(*params_, cfg_.adam);
    }
    const MlpCache c = mlp_forward(x, *params_);
    const auto cands = quantize(c.scores.transpose(), U, O, cfg_.max_candidates);
    const CriticResult best = critic_select(ctx.evaluator, cands);
    PolicyStep s{best.choice, best.reward, std::nullopt};
    if (!cfg_.learning) return s;
    buffer_.push({std::move(x), edge_labels(best.choice, O)});
    ++slots_;
    if (slots_ % cfg_.train_interval == 0 && buffer_.size() >= cfg_.batch_size) {
      const auto idx = buffer_.sample(cfg_.batch_size, replay_rng_);
      std::vector<const Eigen::RowVectorXd*> xs;
      std::vector<const Eigen::VectorXd*> ys;
      for (std::size_t i : idx) {
        xs.push_back(&buffer_[i].input);
        ys.push_back(&buffer_[i].labels);
      }
      MlpParams grad;
      s.loss = mlp_loss_and_grad(xs, ys, *params_, grad);
      adam_->step(*params_, grad);
    }
    return s;
  }

 private:
  LearnerConfig cfg_;
  Engine init_rng_, replay_rng_;
  std::optional<MlpParams> params_;
  std::optional<Adam<MlpParams>> adam_;
  ReplayBuffer<Sample> buffer_;
  std::size_t slots_ = 0;
};

// ---------------------------------------------------------------------------
// Policy ids

struct PolicySpec {
  std::string id;
  std::string kind;  // grl, mlp, random, greedy, all-local, full-offload, oracle
  CompressionMethod method = CompressionMethod::aecnn;
};

inline PolicySpec parse_policy(const std::string& id) {
  if (id == "grl" || id == "mlp" || id == "random" || id == "greedy" || id == "all-local" ||
      id == "full-offload" || id == "oracle") {
    return {id, id, CompressionMethod::aecnn};
  }
  if (id == "grl-bottlenet++") return {id, "grl", CompressionMethod::bottlenet_pp};
  if (id == "grl-deepjscc") return {id, "grl", CompressionMethod::deepjscc};
  throw ConfigError("unknown policy '" + id + "'");
}

inline std::unique_ptr<Policy> make_policy(const PolicySpec& spec, const LearnerConfig& cfg,
                                           std::uint64_t seed) {
  if (spec.kind == "grl") return std::make_unique<GrlPolicy>(cfg, seed, spec.id);
  if (spec.kind == "mlp") return std::make_unique<MlpPolicy>(cfg, seed);
  if (spec.kind == "random") return std::make_unique<RandomPolicy>(seed);
  if (spec.kind == "greedy") return std::make_unique<GreedyPolicy>();
  if (spec.kind == "all-local") return std::make_unique<AllLocalPolicy>();
  if (spec.kind == "full-offload") return std::make_unique<FullOffloadPolicy>();
  if (spec.kind == "oracle") return std::make_unique<OraclePolicy>();
  throw ConfigError("unknown policy kind '" + spec.kind + "'");
}

}  // namespace mecsim
