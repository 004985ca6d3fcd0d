#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "../support/fixtures.hpp"

using namespace mecsim;
using namespace mecsim::testing;

namespace {

nlohmann::json small_config() {
  return nlohmann::json::parse(R"({
    "scenario": {"num_devices": 2, "num_ess": 2, "es_positions_m": [[30, 30], [90, 30]],
                 "region_m": [120, 60], "timeslot_s": 0.02, "deadline_s": 0.1,
                 "horizon": 40, "seed": 7},
    "timing_profile": "data/profiles/resnet50_timing.json",
    "compression_profile": "data/profiles/resnet50_caltech101.json",
    "splits": [0, 1, "L"],
    "ratios": [4, 64],
    "policy": "grl",
    "learner": {"buffer_size": 16, "batch_size": 8, "train_interval": 5}
  })");
}

ExperimentConfig load_small(const nlohmann::json& j = small_config()) {
  return experiment_from_json(j, kSrc);
}

std::string trace_of(const RunResult& r) { return trace_csv(r.tasks).str(); }

}  // namespace

TEST(ExperimentConfig, ShippedDefaultLoads) {
  const ExperimentConfig c = load_experiment(kSrc + "/configs/default.json");
  EXPECT_EQ(c.scenario.num_devices, 14u);
  EXPECT_EQ(c.scenario.num_ess, 2u);
  EXPECT_EQ(c.policy, "grl");
  EXPECT_EQ(c.learner.adam.lr, 0.001);
  EXPECT_EQ(c.learner.buffer_size, 128u);
  EXPECT_EQ(c.learner.batch_size, 64u);
  EXPECT_EQ(c.learner.train_interval, 10u);
  EXPECT_EQ(c.learner.gcn.hidden1, 128);
  EXPECT_EQ(c.learner.gcn.hidden2, 64);
  EXPECT_TRUE(std::filesystem::exists(c.timing_profile));
  EXPECT_TRUE(std::filesystem::exists(c.compression_profile));
}

TEST(ExperimentConfig, EveryShippedConfigLoads) {
  for (const auto& e : std::filesystem::directory_iterator(kSrc + "/configs")) {
    if (e.path().extension() != ".json") continue;
    SCOPED_TRACE(e.path().string());
    const ExperimentConfig c = load_experiment(e.path());
    load_profiles(c);
    if (!c.sweep.axis.empty()) EXPECT_NO_THROW(validate_sweep(c.sweep));
  }
}

TEST(ExperimentConfig, RejectsBadInput) {
  auto j = small_config();
  j["typo"] = 1;
  EXPECT_THROW(load_small(j), ConfigError);
  j = small_config();
  j["learner"]["batch_size"] = 32;  // larger than the buffer
  EXPECT_THROW(load_small(j), ConfigError);
  j = small_config();
  j.erase("timing_profile");
  EXPECT_THROW(load_small(j), ConfigError);
  j = small_config();
  j["power_mode"] = "medium";
  EXPECT_THROW(load_small(j), ConfigError);
  EXPECT_THROW(load_experiment(kSrc + "/configs/does_not_exist.json"), std::exception);
}

TEST(Run, SameSeedIsByteIdentical) {
  const ExperimentConfig c = load_small();
  const Profiles p = load_profiles(c);
  for (const char* policy : {"grl", "mlp", "random"}) {
    SCOPED_TRACE(policy);
    const RunResult a = run_experiment(c, p, {policy, 11});
    const RunResult b = run_experiment(c, p, {policy, 11});
    EXPECT_EQ(trace_of(a), trace_of(b));
    EXPECT_EQ(metrics_csv(a).str(), metrics_csv(b).str());
    EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump());
    const RunResult other = run_experiment(c, p, {policy, 12});
    EXPECT_NE(trace_of(a), trace_of(other));
  }
}

TEST(Run, OneOutcomePerTaskInSlotOrder) {
  const ExperimentConfig c = load_small();
  const RunResult r = run_experiment(c, load_profiles(c), {"random", 3});
  ASSERT_EQ(r.tasks.size(), 80u);
  for (std::size_t i = 0; i < r.tasks.size(); ++i) {
    EXPECT_EQ(r.tasks[i].slot, 1 + i / 2);
    EXPECT_EQ(r.tasks[i].device, i % 2);
  }
  EXPECT_EQ(r.slots.size(), 40u);
}

TEST(Run, AllLocalMissesEveryDeadlineWithTheShippedProfile) {
  const ExperimentConfig c = load_small();
  const Profiles p = load_profiles(c);
  const RunResult r = run_experiment(c, p, {"all-local", 5});
  const double t_local = p.timing.device_time_through(p.timing.depth());
  ASSERT_GT(t_local, c.scenario.deadline_s);
  for (const auto& t : r.tasks) {
    EXPECT_EQ(t.decision.split, p.timing.depth());
    EXPECT_DOUBLE_EQ(t.t_total, t_local);
    EXPECT_FALSE(t.success);
  }
  EXPECT_EQ(r.metrics.ssp, 0.0);
  EXPECT_EQ(r.metrics.avg_accuracy, 0.0);
  EXPECT_EQ(r.metrics.avg_throughput, 0.0);
}

TEST(Run, OracleTrackingStaysAtOrBelowOne) {
  const ExperimentConfig c = load_small();
  const RunResult r = run_experiment(c, load_profiles(c), {"grl", 4, true});
  EXPECT_FALSE(r.oracle_violation);
  ASSERT_TRUE(r.mean_normalized);
  for (const auto& s : r.slots) {
    ASSERT_TRUE(s.oracle_reward);
    if (s.normalized) EXPECT_LE(*s.normalized, 1.0 + 1e-9);
  }
  const RunResult o = run_experiment(c, load_profiles(c), {"oracle", 4, true});
  for (const auto& s : o.slots) {
    if (s.normalized) EXPECT_NEAR(*s.normalized, 1.0, 1e-12);
  }
}

TEST(Run, OracleRefusesLargeSearchSpaces) {
  auto j = small_config();
  j["scenario"]["num_devices"] = 8;  // 11^8 joint decisions
  const ExperimentConfig c = load_small(j);
  EXPECT_THROW(run_experiment(c, load_profiles(c), {"grl", 1, true}), SearchSpaceError);
}

TEST(Checkpoint, RoundTripIsExact) {
  Engine rng(9);
  const GcnParams p = glorot_init(GcnShape{}, rng);
  const GcnParams q = gcn_from_json(nlohmann::json::parse(gcn_to_json(p).dump()));
  EXPECT_EQ(p.w1, q.w1);
  EXPECT_EQ(p.b1, q.b1);
  EXPECT_EQ(p.w2, q.w2);
  EXPECT_EQ(p.b2, q.b2);
  EXPECT_EQ(p.m1_src, q.m1_src);
  EXPECT_EQ(p.m1_dst, q.m1_dst);
  EXPECT_EQ(p.c1, q.c1);
  EXPECT_EQ(p.m2, q.m2);
  EXPECT_EQ(p.c2, q.c2);
  auto bad = gcn_to_json(p);
  bad["tensors"]["w1"]["values"] = nlohmann::json::array();
  EXPECT_THROW(gcn_from_json(bad), ConfigError);
  bad = gcn_to_json(p);
  bad["shape"]["hidden1"] = 32;
  EXPECT_THROW(gcn_from_json(bad), ConfigError);
  bad = gcn_to_json(p);
  bad["kind"] = "mlp";
  EXPECT_THROW(gcn_from_json(bad), ConfigError);
}

TEST(Checkpoint, ReloadedActorReproducesEvaluationDecisions) {
  const ExperimentConfig c = load_small();
  const Profiles p = load_profiles(c);
  for (const char* policy : {"grl", "mlp"}) {
    SCOPED_TRACE(policy);
    RunOptions train{policy, 21};
    train.keep_checkpoint = true;
    const RunResult t = run_experiment(c, p, train);
    ASSERT_TRUE(t.checkpoint);
    RunOptions eval{policy, 22};
    eval.load_checkpoint = *t.checkpoint;
    const RunResult a = run_experiment(c, p, eval);
    eval.load_checkpoint = nlohmann::json::parse(t.checkpoint->dump());
    const RunResult b = run_experiment(c, p, eval);
    EXPECT_EQ(trace_of(a), trace_of(b));
    // A frozen actor makes the same choice in the same state, so evaluating
    // over a longer horizon keeps the common prefix.
    ExperimentConfig longer = c;
    longer.scenario.horizon = 60;
    const RunResult d = run_experiment(longer, p, eval);
    for (std::size_t i = 0; i < a.tasks.size(); ++i) {
      EXPECT_EQ(a.tasks[i].decision, d.tasks[i].decision);
    }
  }
  RunOptions wrong{"random", 1};
  Engine rng(1);
  wrong.load_checkpoint = gcn_to_json(glorot_init(GcnShape{}, rng));
  EXPECT_THROW(run_experiment(c, p, wrong), ConfigError);
}

TEST(Sweep, ThirtyRunsGiveSixAggregateRows) {
  auto j = small_config();
  j["scenario"]["horizon"] = 5;
  j["sweep"] = {{"axis", "num_devices"},
                {"values", {1, 2, 3}},
                {"seeds", {1, 2, 3, 4, 5}},
                {"policies", {"random", "all-local"}}};
  j["jobs"] = 2;
  const ExperimentConfig c = load_small(j);
  const auto runs = run_sweep(c, load_profiles(c));
  ASSERT_EQ(runs.size(), 30u);
  std::set<std::tuple<double, std::uint64_t, std::string>> keys;
  for (const auto& r : runs) {
    keys.insert({r.value, r.seed, r.policy});
    EXPECT_EQ(r.result.tasks.size(), 5u * static_cast<std::size_t>(r.value));
  }
  EXPECT_EQ(keys.size(), 30u);
  const auto rows = aggregate(c.sweep, runs);
  ASSERT_EQ(rows.size(), 6u);
  for (const auto& a : rows) EXPECT_EQ(a.runs, 5u);
  EXPECT_EQ(rows[0].value, 1.0);
  EXPECT_EQ(rows[0].policy, "random");
  EXPECT_EQ(rows[1].policy, "all-local");
  EXPECT_EQ(rows[5].value, 3.0);
}

TEST(Sweep, AggregateMatchesBruteForce) {
  auto j = small_config();
  j["scenario"]["horizon"] = 30;
  j["sweep"] = {{"axis", "lambda"},
                {"values", {1.0, 0.5}},
                {"seeds", {3, 1, 2}},
                {"policies", {"random"}}};
  const ExperimentConfig c = load_small(j);
  const auto runs = run_sweep(c, load_profiles(c));
  const auto rows = aggregate(c.sweep, runs);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& a : rows) {
    std::vector<double> xs;
    for (const auto& r : runs) {
      if (r.value == a.value) xs.push_back(r.result.metrics.avg_accuracy);
    }
    ASSERT_EQ(xs.size(), 3u);
    const double m = (xs[0] + xs[1] + xs[2]) / 3.0;
    const double sd = std::sqrt(((xs[0] - m) * (xs[0] - m) + (xs[1] - m) * (xs[1] - m) +
                                 (xs[2] - m) * (xs[2] - m)) / 2.0);
    EXPECT_NEAR(a.acc_mean, m, 1e-15);
    EXPECT_NEAR(a.acc_std, sd, 1e-15);
  }
  // Each sweep run equals the standalone run with the axis applied.
  for (const auto& r : runs) {
    ExperimentConfig one = c;
    apply_axis(one, "lambda", r.value);
    EXPECT_EQ(trace_of(r.result), trace_of(run_experiment(one, load_profiles(c), {r.policy, r.seed})));
  }
}

TEST(Sweep, TrainSlotsTrainOnADerivedSeedThenEvaluateFrozen) {
  auto j = small_config();
  j["scenario"]["horizon"] = 20;
  j["sweep"] = {{"axis", "lambda"},
                {"values", {1.0}},
                {"seeds", {4}},
                {"policies", {"grl", "random"}},
                {"train_slots", 30}};
  const ExperimentConfig c = load_small(j);
  ASSERT_EQ(c.sweep.train_slots, 30u);
  const Profiles p = load_profiles(c);
  const auto runs = run_sweep(c, p);
  ASSERT_EQ(runs.size(), 2u);

  ExperimentConfig t = c;
  t.scenario.horizon = 30;
  RunOptions train{"grl", derive_seed(4, "training")};
  train.keep_checkpoint = true;
  const RunResult trained = run_experiment(t, p, train);
  RunOptions eval{"grl", 4};
  eval.load_checkpoint = trained.checkpoint;
  const RunResult frozen = run_experiment(c, p, eval);
  for (const auto& r : runs) {
    // Non-learning policies ignore train_slots.
    const RunResult& want = r.policy == "grl" ? frozen : run_experiment(c, p, {r.policy, 4});
    EXPECT_EQ(trace_of(r.result), trace_of(want)) << r.policy;
  }
}

TEST(Sweep, RejectsBadSweeps) {
  SweepConfig s{"num_devices", {}, {1}, {"random"}};
  EXPECT_THROW(validate_sweep(s), ConfigError);
  s.values = {2};
  s.seeds = {1, 1};
  EXPECT_THROW(validate_sweep(s), ConfigError);
  s.seeds = {1};
  s.policies = {"nope"};
  EXPECT_THROW(validate_sweep(s), ConfigError);
  ExperimentConfig c = load_small();
  EXPECT_THROW(apply_axis(c, "bandwidth", 1.0), ConfigError);
  EXPECT_THROW(apply_axis(c, "num_devices", 2.5), ConfigError);
  EXPECT_THROW(apply_axis(c, "lambda", 1.5), ConfigError);
}
