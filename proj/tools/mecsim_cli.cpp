// mecsim: run, train, sweep and oracle-compare front end.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mecsim/mecsim.hpp"

namespace fs = std::filesystem;
using namespace mecsim;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string policy;
  std::string out = "out";
  bool oracle = false;
  std::string entropy;
  std::string power;
  std::string checkpoint;
  unsigned jobs = 0;
};

ExperimentConfig load_config(const CommonArgs& a) {
  ExperimentConfig c = load_experiment(a.config);
  if (a.seed) c.scenario.seed = *a.seed;
  if (!a.policy.empty()) {
    parse_policy(a.policy);
    c.policy = a.policy;
  }
  if (!a.entropy.empty()) c.sim.entropy_coding = a.entropy == "on";
  if (!a.power.empty()) c.sim.power_mode = a.power == "min" ? PowerMode::min : PowerMode::max;
  if (a.jobs) c.jobs = a.jobs;
  return c;
}

void print_summary(const RunResult& r) {
  std::cout << summary_json(r).dump(2) << "\n";
}

int cmd_run(const CommonArgs& a) {
  const ExperimentConfig c = load_config(a);
  const Profiles prof = load_profiles(c);
  RunOptions ro{c.policy, c.scenario.seed, a.oracle, std::nullopt, false};
  if (!a.checkpoint.empty()) ro.load_checkpoint = read_json_file(a.checkpoint);
  const RunResult r = run_experiment(c, prof, ro);
  write_run_artifacts(r, a.out);
  print_summary(r);
  if (r.oracle_violation) {
    std::cerr << "error: policy reward exceeded the exhaustive-search reward\n";
    return 1;
  }
  return 0;
}

int cmd_train(const CommonArgs& a) {
  const ExperimentConfig c = load_config(a);
  const PolicySpec spec = parse_policy(c.policy);
  if (spec.kind != "grl" && spec.kind != "mlp") {
    throw ConfigError("train needs a learning policy (grl, mlp, grl-bottlenet++, grl-deepjscc)");
  }
  const Profiles prof = load_profiles(c);
  RunOptions ro{c.policy, c.scenario.seed, a.oracle, std::nullopt, true};
  const RunResult r = run_experiment(c, prof, ro);
  write_run_artifacts(r, a.out);
  convergence_csv(r).save(fs::path(a.out) / "convergence.csv");
  const fs::path ckpt = a.checkpoint.empty() ? fs::path(a.out) / "checkpoint.json" : fs::path(a.checkpoint);
  if (r.checkpoint) write_file_atomic(ckpt, r.checkpoint->dump() + "\n");
  print_summary(r);
  return r.oracle_violation ? 1 : 0;
}

int cmd_sweep(const CommonArgs& a) {
  ExperimentConfig c = load_config(a);
  if (c.sweep.axis.empty()) throw ConfigError("sweep: config has no \"sweep\" section");
  if (!a.policy.empty()) c.sweep.policies = {a.policy};
  if (a.seed) c.sweep.seeds = {*a.seed};
  const Profiles prof = load_profiles(c);
  const auto runs = run_sweep(c, prof);
  const auto rows = aggregate(c.sweep, runs);
  sweep_runs_csv(c.sweep.axis, runs).save(fs::path(a.out) / "sweep_runs.csv");
  const auto agg = aggregate_csv(c.sweep.axis, rows);
  agg.save(fs::path(a.out) / "sweep_aggregate.csv");
  std::cout << agg.str();
  return 0;
}

int cmd_oracle_compare(const CommonArgs& a) {
  const ExperimentConfig c = load_config(a);
  const Profiles prof = load_profiles(c);
  const RunResult r = run_experiment(c, prof, {c.policy, c.scenario.seed, true, std::nullopt, false});
  oracle_compare_csv(r).save(fs::path(a.out) / "oracle_compare.csv");
  print_summary(r);
  if (r.oracle_violation) {
    std::cerr << "error: policy reward exceeded the exhaustive-search reward by more than 1e-9\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MEC CNN-inference offloading simulator"};
  app.require_subcommand(1);
  CommonArgs a;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", a.seed, "master seed (overrides the config)");
    sub->add_option("--policy", a.policy, "policy id")
        ->check(CLI::IsMember({"grl", "mlp", "random", "greedy", "all-local", "full-offload",
                               "oracle", "grl-bottlenet++", "grl-deepjscc"}));
    sub->add_option("--out", a.out, "output directory");
    sub->add_option("--entropy-coding", a.entropy, "entropy-code split tensors")
        ->check(CLI::IsMember({"on", "off"}));
    sub->add_option("--power-mode", a.power, "transmit power selection")
        ->check(CLI::IsMember({"max", "min"}));
  };
  auto* run = app.add_subcommand("run", "simulate K slots with one policy");
  add_common(run);
  run->add_flag("--oracle", a.oracle, "also compute the exhaustive-search reward per slot");
  run->add_option("--checkpoint", a.checkpoint, "evaluate a trained actor (frozen)");
  auto* train = app.add_subcommand("train", "train a learning policy over K slots");
  add_common(train);
  train->add_flag("--oracle", a.oracle, "track the normalized reward against exhaustive search");
  train->add_option("--checkpoint", a.checkpoint, "where to write the trained actor");
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep over seeds and policies");
  add_common(sweep);
  sweep->add_option("--jobs", a.jobs, "worker threads (default: hardware concurrency)");
  auto* cmp = app.add_subcommand("oracle-compare", "per-slot policy vs exhaustive-search reward");
  add_common(cmp);

  // CLI11 reports a missing --config file as a validation error; map it to 2.
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(a);
    if (*train) return cmd_train(a);
    if (*sweep) return cmd_sweep(a);
    if (*cmp) return cmd_oracle_compare(a);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const SearchSpaceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
