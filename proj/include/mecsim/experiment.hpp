#pragma once

// Experiment configuration, the slot loop, sweeps and their CSV/JSON output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "mecsim/checkpoint.hpp"
#include "mecsim/error.hpp"
#include "mecsim/io.hpp"
#include "mecsim/policies.hpp"
#include "mecsim/profiles.hpp"
#include "mecsim/reward.hpp"
#include "mecsim/scenario.hpp"
#include "mecsim/sim_core.hpp"

namespace mecsim {

namespace fs = std::filesystem;

struct SweepConfig {
  std::string axis;  // num_devices, tau, lambda, jitter, epsilon
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> policies;
  // Learning policies train this many slots on a derived seed first and are
  // then measured frozen; 0 measures the online training run itself.
  std::size_t train_slots = 0;
};

struct ExperimentConfig {
  Scenario scenario;
  fs::path timing_profile;
  fs::path compression_profile;
  // Split layers; -1 stands for L (local computing). Empty: all profile splits.
  std::vector<int> splits;
  std::vector<int> ratios;
  std::string policy = "grl";
  SimOptions sim;
  LearnerConfig learner;
  SweepConfig sweep;
  std::size_t moving_window = 50;
  unsigned jobs = 0;  // 0: hardware concurrency
};

namespace detail {

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& known,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!known.contains(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

inline PowerMode parse_power_mode(const std::string& s) {
  if (s == "max") return PowerMode::max;
  if (s == "min") return PowerMode::min;
  throw ConfigError("power mode must be 'max' or 'min', got '" + s + "'");
}

}  // namespace detail

inline ExperimentConfig experiment_from_json(const nlohmann::json& j, const fs::path& base) {
  detail::check_keys(j,
                     {"scenario", "timing_profile", "compression_profile", "splits", "ratios",
                      "policy", "power_mode", "entropy_coding", "learner", "features", "sweep",
                      "moving_window", "jobs", "provenance", "_comment"},
                     "experiment config");
  ExperimentConfig c;
  try {
    const auto& sj = j.at("scenario");
    c.scenario = sj.is_string() ? load_scenario(detail::resolve(base, sj.get<std::string>()).string())
                                : scenario_from_json(sj);
    c.timing_profile = detail::resolve(base, j.at("timing_profile").get<std::string>());
    c.compression_profile = detail::resolve(base, j.at("compression_profile").get<std::string>());
    if (j.contains("splits")) {
      for (const auto& v : j["splits"]) {
        c.splits.push_back(v.is_string() && v.get<std::string>() == "L" ? -1 : v.get<int>());
      }
    }
    if (j.contains("ratios")) c.ratios = j["ratios"].get<std::vector<int>>();
    c.policy = j.value("policy", c.policy);
    c.sim.power_mode = detail::parse_power_mode(j.value("power_mode", std::string("max")));
    c.sim.entropy_coding = j.value("entropy_coding", true);
    c.moving_window = j.value("moving_window", c.moving_window);
    c.jobs = j.value("jobs", 0u);
    if (j.contains("learner")) {
      const auto& l = j["learner"];
      detail::check_keys(l,
                         {"gcn_hidden", "mlp_hidden", "edge_mlp_hidden", "learning_rate",
                          "buffer_size", "batch_size", "train_interval", "max_candidates",
                          "provenance", "_comment"},
                         "learner");
      if (l.contains("gcn_hidden")) {
        const auto h = l["gcn_hidden"].get<std::vector<int>>();
        if (h.size() != 2) throw ConfigError("learner: gcn_hidden must list two sizes");
        c.learner.gcn.hidden1 = h[0];
        c.learner.gcn.hidden2 = h[1];
      }
      c.learner.gcn.mlp_hidden = l.value("edge_mlp_hidden", c.learner.gcn.mlp_hidden);
      c.learner.mlp_hidden = l.value("mlp_hidden", c.learner.mlp_hidden);
      c.learner.adam.lr = l.value("learning_rate", c.learner.adam.lr);
      c.learner.buffer_size = l.value("buffer_size", c.learner.buffer_size);
      c.learner.batch_size = l.value("batch_size", c.learner.batch_size);
      c.learner.train_interval = l.value("train_interval", c.learner.train_interval);
      c.learner.max_candidates = l.value("max_candidates", c.learner.max_candidates);
      if (c.learner.batch_size == 0 || c.learner.train_interval == 0 ||
          c.learner.batch_size > c.learner.buffer_size) {
        throw ConfigError("learner: need 1 <= batch_size <= buffer_size and train_interval >= 1");
      }
    }
    if (j.contains("features")) {
      const auto& f = j["features"];
      detail::check_keys(f,
                         {"task_bytes_scale", "deadline_ratio_scale", "local_time_scale",
                          "gain_db_low", "gain_db_high", "backlog_cap", "relative_gain_floor",
                          "_comment"},
                         "features");
      auto& fc = c.learner.features;
      fc.task_bytes_scale = f.value("task_bytes_scale", fc.task_bytes_scale);
      fc.deadline_ratio_scale = f.value("deadline_ratio_scale", fc.deadline_ratio_scale);
      fc.local_time_scale = f.value("local_time_scale", fc.local_time_scale);
      fc.gain_db_low = f.value("gain_db_low", fc.gain_db_low);
      fc.gain_db_high = f.value("gain_db_high", fc.gain_db_high);
      fc.backlog_cap = f.value("backlog_cap", fc.backlog_cap);
      fc.relative_gain_floor = f.value("relative_gain_floor", fc.relative_gain_floor);
      if (!(fc.gain_db_high > fc.gain_db_low)) throw ConfigError("features: gain_db_high must exceed gain_db_low");
    }
    if (j.contains("sweep")) {
      const auto& s = j["sweep"];
      detail::check_keys(s, {"axis", "values", "seeds", "policies", "train_slots", "_comment"},
                         "sweep");
      c.sweep.axis = s.at("axis").get<std::string>();
      c.sweep.values = s.at("values").get<std::vector<double>>();
      c.sweep.seeds = s.value("seeds", std::vector<std::uint64_t>{c.scenario.seed});
      c.sweep.policies = s.value("policies", std::vector<std::string>{c.policy});
      c.sweep.train_slots = s.value("train_slots", c.sweep.train_slots);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_experiment(const fs::path& path) {
  return experiment_from_json(read_json_file(path.string()), path.parent_path());
}

struct Profiles {
  TimingProfile timing;
  CompressionProfile compression;
};

inline Profiles load_profiles(const ExperimentConfig& c) {
  return {load_timing_profile(c.timing_profile.string()),
          load_compression_profile(c.compression_profile.string())};
}

inline OptionSet option_set_for(const ExperimentConfig& c, const SystemModel& model) {
  OptionSet os = full_option_set(model);
  if (!c.splits.empty()) {
    os.splits.clear();
    for (int l : c.splits) os.splits.push_back(l < 0 ? model.depth() : l);
  }
  if (!c.ratios.empty()) os.ratios = c.ratios;
  return os;
}

// ---------------------------------------------------------------------------
// Single run

struct SlotRecord {
  std::size_t k = 0;
  double planned_reward = 0.0;   // critic's view when deciding
  double reward = 0.0;           // from final outcomes
  std::optional<double> oracle_reward;
  std::optional<double> normalized;
  bool exceeds_oracle = false;
  std::optional<double> loss;
  double moving_avg = 0.0;
  double ssp_so_far = 0.0, acc_so_far = 0.0, thr_so_far = 0.0;
};

struct RunResult {
  std::string policy;
  std::uint64_t seed = 0;
  std::vector<TaskOutcome> tasks;  // final outcomes, ordered by (slot, device)
  std::vector<SlotRecord> slots;
  MetricsReport metrics;
  double mean_reward = 0.0;
  double mean_planned_reward = 0.0;
  std::optional<double> mean_normalized;
  std::optional<nlohmann::json> checkpoint;
  bool oracle_violation = false;
};

struct RunOptions {
  std::string policy;
  std::uint64_t seed = 0;
  bool oracle = false;
  std::optional<nlohmann::json> load_checkpoint;  // evaluation with frozen actor
  bool keep_checkpoint = false;
};

inline SystemModel make_model(const ExperimentConfig& c, const Profiles& p,
                              const PolicySpec& spec, std::uint64_t seed) {
  Scenario sc = c.scenario;
  sc.seed = seed;
  SimOptions so = c.sim;
  so.method = spec.method;
  return SystemModel(std::move(sc), p.timing, p.compression, so);
}

inline RunResult run_experiment(const ExperimentConfig& c, const Profiles& prof,
                                const RunOptions& ro) {
  const PolicySpec spec = parse_policy(ro.policy);
  const SystemModel model = make_model(c, prof, spec, ro.seed);
  const OptionSet os = option_set_for(c, model);
  const auto options = enumerate_options(model, os);
  const auto& sc = model.scenario();
  const std::size_t U = sc.num_devices;
  if (ro.oracle && joint_space_size(U, options.size()) > kMaxOracleSpace) {
    const double size = joint_space_size(U, options.size());
    throw SearchSpaceError("oracle requested but " + std::to_string(options.size()) + "^" +
                               std::to_string(U) + " = " + std::to_string(size) +
                               " joint decisions exceeds the limit of 1e6",
                           size);
  }

  auto policy = make_policy(spec, c.learner, ro.seed);
  if (ro.load_checkpoint) {
    if (auto* g = dynamic_cast<GrlPolicy*>(policy.get())) {
      g->set_params(gcn_from_json(*ro.load_checkpoint));
      g->set_learning(false);
    } else if (auto* m = dynamic_cast<MlpPolicy*>(policy.get())) {
      m->set_params(mlp_from_json(*ro.load_checkpoint));
      m->set_learning(false);
    } else {
      throw ConfigError("--checkpoint applies only to grl and mlp policies");
    }
  }

  RunResult r;
  r.policy = ro.policy;
  r.seed = ro.seed;
  SlotSampler sampler(sc);
  QueueSnapshot q = QueueSnapshot::empty(U, sc.num_ess);
  r.slots.resize(sc.horizon);
  std::vector<TaskOutcome> done;
  done.reserve(sc.horizon * U);

  for (std::size_t k = 1; k <= sc.horizon; ++k) {
    const SlotState st = sampler.next();
    SlotEvaluator ev(model, st, q, GainView::estimated, options);
    PolicyContext ctx{model, st, q, ev};
    const PolicyStep step = policy->step(ctx);
    SlotRecord& rec = r.slots[k - 1];
    rec.k = k;
    rec.planned_reward = step.planned_reward;
    rec.loss = step.loss;
    if (ro.oracle) {
      const OracleResult o = exhaustive_oracle(ev, U);
      rec.oracle_reward = o.reward;
      const NormalizedReward n = normalized_reward(step.planned_reward, o.reward);
      rec.normalized = n.value;
      rec.exceeds_oracle = n.exceeds_oracle;
      r.oracle_violation = r.oracle_violation || n.exceeds_oracle;
    }
    CommitResult cr = commit_decision(model, st, to_decision(ev, step.choice), q);
    q = std::move(cr.queue);
    for (auto& t : cr.finalized) done.push_back(std::move(t));
  }
  for (auto& t : drain(q)) done.push_back(std::move(t));
  std::sort(done.begin(), done.end(), [](const TaskOutcome& a, const TaskOutcome& b) {
    return std::tie(a.slot, a.device) < std::tie(b.slot, b.device);
  });
  r.tasks = std::move(done);

  MetricsAccumulator acc;
  MovingAverage ma(c.moving_window);
  double norm_sum = 0.0;
  std::size_t norm_n = 0;
  std::size_t ti = 0;
  for (auto& rec : r.slots) {
    rec.reward = 0.0;
    for (; ti < r.tasks.size() && r.tasks[ti].slot == rec.k; ++ti) {
      rec.reward += task_reward(r.tasks[ti]);
      acc.add(r.tasks[ti]);
    }
    acc.set_slots(rec.k);
    const MetricsReport m = acc.report();
    rec.ssp_so_far = m.ssp;
    rec.acc_so_far = m.avg_accuracy;
    rec.thr_so_far = m.avg_throughput;
    if (ro.oracle) {
      if (rec.normalized) {
        rec.moving_avg = ma.push(*rec.normalized);
        norm_sum += *rec.normalized;
        ++norm_n;
      } else {
        rec.moving_avg = ma.value();
      }
    } else {
      rec.moving_avg = ma.push(rec.reward);
    }
    r.mean_reward += rec.reward;
    r.mean_planned_reward += rec.planned_reward;
  }
  r.metrics = acc.report();
  r.mean_reward /= static_cast<double>(r.slots.size());
  r.mean_planned_reward /= static_cast<double>(r.slots.size());
  if (norm_n > 0) r.mean_normalized = norm_sum / static_cast<double>(norm_n);

  if (ro.keep_checkpoint) {
    if (auto* g = dynamic_cast<GrlPolicy*>(policy.get())) r.checkpoint = gcn_to_json(g->params());
    if (auto* m = dynamic_cast<MlpPolicy*>(policy.get()); m && m->params()) {
      r.checkpoint = mlp_to_json(*m->params());
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Artifacts

inline CsvWriter metrics_csv(const RunResult& r) {
  CsvWriter w({"k", "reward", "normalized_reward", "moving_avg", "ssp_so_far", "acc_so_far",
               "thr_so_far"});
  for (const auto& s : r.slots) {
    w.row(s.k, s.reward, s.normalized, s.moving_avg, s.ssp_so_far, s.acc_so_far, s.thr_so_far);
  }
  return w;
}

// The loss column carries the most recent training loss forward; it changes
// only on slots where a training step ran.
inline CsvWriter convergence_csv(const RunResult& r) {
  CsvWriter w({"k", "loss", "reward", "normalized", "moving_avg"});
  std::optional<double> loss;
  for (const auto& s : r.slots) {
    if (s.loss) loss = s.loss;
    w.row(s.k, loss, s.planned_reward, s.normalized, s.moving_avg);
  }
  return w;
}

inline nlohmann::json summary_json(const RunResult& r) {
  nlohmann::json j = {{"policy", r.policy},
                      {"seed", r.seed},
                      {"slots", r.metrics.slots},
                      {"tasks", r.metrics.tasks},
                      {"successes", r.metrics.successes},
                      {"ssp", r.metrics.ssp},
                      {"avg_accuracy", r.metrics.avg_accuracy},
                      {"avg_throughput", r.metrics.avg_throughput},
                      {"mean_reward", r.mean_reward},
                      {"mean_planned_reward", r.mean_planned_reward}};
  if (r.mean_normalized) j["mean_normalized_reward"] = *r.mean_normalized;
  if (!r.slots.empty()) j["final_moving_avg"] = r.slots.back().moving_avg;
  return j;
}

inline void write_run_artifacts(const RunResult& r, const fs::path& out) {
  trace_csv(r.tasks).save(out / "trace.csv");
  metrics_csv(r).save(out / "metrics.csv");
  write_file_atomic(out / "summary.json", summary_json(r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Sweeps

inline void apply_axis(ExperimentConfig& c, const std::string& axis, double v) {
  Scenario& sc = c.scenario;
  if (axis == "num_devices") {
    if (v < 1.0 || v != std::floor(v)) throw ConfigError("sweep: num_devices values must be positive integers");
    sc.num_devices = static_cast<std::size_t>(v);
    if (!sc.device_positions.empty()) {
      if (sc.device_positions.size() < sc.num_devices) {
        throw ConfigError("sweep: fewer explicit device positions than num_devices");
      }
      sc.device_positions.resize(sc.num_devices);
    }
  } else if (axis == "tau") {
    sc.timeslot_s = v;
  } else if (axis == "lambda") {
    sc.availability_floor = v;
  } else if (axis == "jitter") {
    sc.compute_jitter = v;
  } else if (axis == "epsilon") {
    sc.csi_bound_db = v;
  } else {
    throw ConfigError("sweep: unknown axis '" + axis + "'");
  }
  sc.validate();
}

struct SweepRun {
  double value = 0.0;
  std::uint64_t seed = 0;
  std::string policy;
  RunResult result;
};

struct AggregateRow {
  double value = 0.0;
  std::string policy;
  std::size_t runs = 0;
  double ssp_mean = 0, ssp_std = 0, acc_mean = 0, acc_std = 0, thr_mean = 0, thr_std = 0,
         reward_mean = 0, reward_std = 0;
};

inline void validate_sweep(const SweepConfig& s) {
  if (s.values.empty()) throw ConfigError("sweep: values list is empty");
  if (s.seeds.empty()) throw ConfigError("sweep: seeds list is empty");
  if (s.policies.empty()) throw ConfigError("sweep: policies list is empty");
  auto seeds = s.seeds;
  std::sort(seeds.begin(), seeds.end());
  if (std::adjacent_find(seeds.begin(), seeds.end()) != seeds.end()) {
    throw ConfigError("sweep: seeds must be distinct");
  }
  for (const auto& p : s.policies) parse_policy(p);
}

// One sweep point. With train_slots > 0 a learning policy is trained on a
// scenario drawn from a derived seed, then evaluated frozen with `seed`.
inline RunResult run_sweep_point(const ExperimentConfig& c, const Profiles& prof,
                                 const std::string& policy, std::uint64_t seed,
                                 std::size_t train_slots) {
  const PolicySpec spec = parse_policy(policy);
  if (train_slots == 0 || (spec.kind != "grl" && spec.kind != "mlp")) {
    return run_experiment(c, prof, {policy, seed});
  }
  ExperimentConfig t = c;
  t.scenario.horizon = train_slots;
  RunOptions train{policy, derive_seed(seed, "training")};
  train.keep_checkpoint = true;
  const RunResult trained = run_experiment(t, prof, train);
  RunOptions eval{policy, seed};
  eval.load_checkpoint = trained.checkpoint;
  return run_experiment(c, prof, eval);
}

// Runs every (value, seed, policy) triple on a small thread pool. Results are
// stored by index, so output does not depend on scheduling.
inline std::vector<SweepRun> run_sweep(const ExperimentConfig& base, const Profiles& prof) {
  validate_sweep(base.sweep);
  std::vector<SweepRun> runs;
  for (double v : base.sweep.values)
    for (const auto& p : base.sweep.policies)
      for (auto seed : base.sweep.seeds) runs.push_back({v, seed, p, {}});
  // Reject bad axis values before any run starts.
  for (const auto& r : runs) {
    ExperimentConfig c = base;
    apply_axis(c, base.sweep.axis, r.value);
  }
  unsigned jobs = base.jobs ? base.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min<unsigned>(jobs, static_cast<unsigned>(runs.size()));
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(jobs);
  auto worker = [&](unsigned w) {
    try {
      for (std::size_t i; (i = next++) < runs.size();) {
        ExperimentConfig c = base;
        apply_axis(c, base.sweep.axis, runs[i].value);
        runs[i].result =
            run_sweep_point(c, prof, runs[i].policy, runs[i].seed, base.sweep.train_slots);
      }
    } catch (...) {
      errors[w] = std::current_exception();
      next = runs.size();
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < jobs; ++w) pool.emplace_back(worker, w);
  worker(0);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return runs;
}

inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  const double sd = xs.size() > 1 ? std::sqrt(v / static_cast<double>(xs.size() - 1)) : 0.0;
  return {m, sd};
}

// Mean and sample standard deviation over seeds, per (value, policy), in
// the order values x policies of the config.
inline std::vector<AggregateRow> aggregate(const SweepConfig& s, const std::vector<SweepRun>& runs) {
  std::vector<AggregateRow> rows;
  for (double v : s.values) {
    for (const auto& p : s.policies) {
      std::vector<double> ssp, acc, thr, rew;
      for (const auto& r : runs) {
        if (r.value != v || r.policy != p) continue;
        ssp.push_back(r.result.metrics.ssp);
        acc.push_back(r.result.metrics.avg_accuracy);
        thr.push_back(r.result.metrics.avg_throughput);
        rew.push_back(r.result.mean_reward);
      }
      AggregateRow a;
      a.value = v;
      a.policy = p;
      a.runs = ssp.size();
      std::tie(a.ssp_mean, a.ssp_std) = mean_std(ssp);
      std::tie(a.acc_mean, a.acc_std) = mean_std(acc);
      std::tie(a.thr_mean, a.thr_std) = mean_std(thr);
      std::tie(a.reward_mean, a.reward_std) = mean_std(rew);
      rows.push_back(a);
    }
  }
  return rows;
}

inline CsvWriter sweep_runs_csv(const std::string& axis, const std::vector<SweepRun>& runs) {
  CsvWriter w({"axis", "value", "policy", "seed", "ssp", "avg_accuracy", "avg_throughput",
               "mean_reward"});
  for (const auto& r : runs) {
    w.row(axis, r.value, r.policy, r.seed, r.result.metrics.ssp, r.result.metrics.avg_accuracy,
          r.result.metrics.avg_throughput, r.result.mean_reward);
  }
  return w;
}

inline CsvWriter aggregate_csv(const std::string& axis, const std::vector<AggregateRow>& rows) {
  CsvWriter w({"axis", "value", "policy", "runs", "ssp_mean", "ssp_std", "accuracy_mean",
               "accuracy_std", "throughput_mean", "throughput_std", "reward_mean",
               "reward_std"});
  for (const auto& a : rows) {
    w.row(axis, a.value, a.policy, a.runs, a.ssp_mean, a.ssp_std, a.acc_mean, a.acc_std,
          a.thr_mean, a.thr_std, a.reward_mean, a.reward_std);
  }
  return w;
}

inline CsvWriter oracle_compare_csv(const RunResult& r) {
  CsvWriter w({"k", "policy_reward", "oracle_reward", "ratio"});
  for (const auto& s : r.slots) w.row(s.k, s.planned_reward, s.oracle_reward, s.normalized);
  return w;
}

}  // namespace mecsim
