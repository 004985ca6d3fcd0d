#pragma once

// Small hand-checkable model used across the test suites.

#include <string>
#include <vector>

#include "mecsim/mecsim.hpp"

namespace mecsim::testing {

inline const std::string kSrc = MECSIM_SOURCE_DIR;

// Three points, 10 ms on the device and 1 ms on the ES each. 12800 FLOPs in
// total, so the default efficiency puts local energy at 1.28 J.
inline TimingProfile toy_timing(double rho = 1e4) {
  auto j = nlohmann::json::parse(R"({
    "schema_version": 1, "flops_per_watt_second": 1e9, "points": [
      {"index": 1, "output": [4, 8, 8], "device_s": 0.010, "es_s": 0.001,
       "layers": [{"kind": "conv", "in_channels": 3, "out_channels": 4, "kernel": 3, "out_height": 8, "out_width": 8}]},
      {"index": 2, "output": [8, 4, 4], "device_s": 0.010, "es_s": 0.001,
       "layers": [{"kind": "conv", "in_channels": 4, "out_channels": 8, "kernel": 3, "out_height": 4, "out_width": 4}]},
      {"index": 3, "output": [1, 1, 10], "device_s": 0.010, "es_s": 0.001,
       "layers": [{"kind": "fc", "in_dim": 128, "out_dim": 10}]}]
  })");
  j["flops_per_watt_second"] = rho;
  return timing_profile_from_json(j);
}

// Splits at 1 and 2 with ratios 1, 2, 4.
inline CompressionProfile toy_compression() {
  return compression_profile_from_json(nlohmann::json::parse(R"({
    "schema_version": 1, "provenance": "test", "num_split_points": 3, "base_accuracy": 0.9,
    "split_points": [
      {"layer": 1, "shape": [4, 8, 8], "entries": [
        {"ratio": 1, "retained_channels": 4, "entropy_bits": 32, "t_enc_ms": 0, "t_dec_ms": 0,
         "accuracy": {"aecnn": 0.9, "bottlenet++": 0.9}},
        {"ratio": 2, "retained_channels": 2, "entropy_bits": 8, "t_enc_ms": 2, "t_dec_ms": 1,
         "accuracy": {"aecnn": 0.85, "bottlenet++": 0.8}},
        {"ratio": 4, "retained_channels": 1, "entropy_bits": 6, "t_enc_ms": 1, "t_dec_ms": 0.5,
         "accuracy": {"aecnn": 0.8, "bottlenet++": 0.7}}]},
      {"layer": 2, "shape": [8, 4, 4], "entries": [
        {"ratio": 1, "retained_channels": 8, "entropy_bits": 32, "t_enc_ms": 0, "t_dec_ms": 0,
         "accuracy": {"aecnn": 0.9, "bottlenet++": 0.9}},
        {"ratio": 2, "retained_channels": 4, "entropy_bits": 8, "t_enc_ms": 2, "t_dec_ms": 1,
         "accuracy": {"aecnn": 0.88, "bottlenet++": 0.84}},
        {"ratio": 4, "retained_channels": 2, "entropy_bits": 6, "t_enc_ms": 1, "t_dec_ms": 0.5,
         "accuracy": {"aecnn": 0.86, "bottlenet++": 0.8}}]}]
  })"));
}

inline Scenario toy_scenario(std::size_t U = 3, std::size_t S = 2) {
  Scenario sc;
  sc.num_devices = U;
  sc.num_ess = S;
  sc.es_positions.clear();
  for (std::size_t s = 0; s < S; ++s) {
    sc.es_positions.push_back({30.0 + 60.0 * static_cast<double>(s), 30.0});
  }
  sc.horizon = 20;
  sc.timeslot_s = 0.02;
  sc.deadline_s = 0.1;
  sc.task_min_bytes = 2e3;
  sc.task_max_bytes = 20e3;
  // A coarse link so transmission times are a few milliseconds.
  sc.bandwidth_hz = 1e6;
  return sc;
}

inline SystemModel toy_model(std::size_t U = 3, std::size_t S = 2, SimOptions o = {}) {
  return SystemModel(toy_scenario(U, S), toy_timing(), toy_compression(), o);
}

inline TimingProfile shipped_timing() {
  return load_timing_profile(kSrc + "/data/profiles/resnet50_timing.json");
}

inline CompressionProfile shipped_compression() {
  return load_compression_profile(kSrc + "/data/profiles/resnet50_caltech101.json");
}

// Independent closed form of the arrival and queueing recursions: each
// device's transmissions are serialized, then each ES serves tasks in
// arrival order (ties: earlier slot, then lower device), and a task waits
// until every earlier arrival has completed.
struct ClosedFormTask {
  std::size_t slot, device, es;
  double slot_start, t_dev, t_com, service;
  double arrival = 0.0, tx_wait = 0.0, es_wait = 0.0;
  double t_total() const { return t_dev + t_com + tx_wait + es_wait + service; }
};

inline void closed_form_queue(std::vector<ClosedFormTask>& tasks, std::size_t U, std::size_t S) {
  // Transmissions serialized per device, in slot order.
  std::vector<double> tx_done(U, 0.0);
  std::vector<std::size_t> order(tasks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::tie(tasks[a].slot, tasks[a].device) < std::tie(tasks[b].slot, tasks[b].device);
  });
  for (auto i : order) {
    auto& t = tasks[i];
    const double ready = t.slot_start + t.t_dev;
    const double start = t.slot == 1 ? ready : std::max(tx_done[t.device], ready);
    t.tx_wait = start - ready;
    t.arrival = start + t.t_com;
    tx_done[t.device] = t.arrival;
  }
  // Per ES: wait = max(0, max over earlier arrivals of their completion - arrival).
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<std::size_t> at;
    for (std::size_t i = 0; i < tasks.size(); ++i)
      if (tasks[i].es == s) at.push_back(i);
    std::sort(at.begin(), at.end(), [&](auto a, auto b) {
      return std::tie(tasks[a].arrival, tasks[a].slot, tasks[a].device) <
             std::tie(tasks[b].arrival, tasks[b].slot, tasks[b].device);
    });
    for (std::size_t x = 0; x < at.size(); ++x) {
      auto& t = tasks[at[x]];
      double latest = 0.0;
      for (std::size_t y = 0; y < x; ++y) {
        const auto& p = tasks[at[y]];
        latest = std::max(latest, p.arrival + p.es_wait + p.service);
      }
      t.es_wait = std::max(0.0, latest - t.arrival);
    }
  }
}

}  // namespace mecsim::testing
