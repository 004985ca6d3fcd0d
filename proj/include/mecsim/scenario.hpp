#pragma once

// World model and per-slot random dynamics: geometry, path loss, Rayleigh
// fading, task sizes, ES availability, compute jitter and CSI error.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mecsim/error.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/units.hpp"

namespace mecsim {

struct Position {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(const Position& a, const Position& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

// Dense device x ES matrix, row-major.
template <typename T>
class LinkMatrix {
 public:
  LinkMatrix() = default;
  LinkMatrix(std::size_t devices, std::size_t ess, T init = T{})
      : devices_(devices), ess_(ess), data_(devices * ess, init) {}

  T& operator()(std::size_t u, std::size_t s) { return data_[u * ess_ + s]; }
  const T& operator()(std::size_t u, std::size_t s) const {
    return data_[u * ess_ + s];
  }
  std::size_t devices() const noexcept { return devices_; }
  std::size_t ess() const noexcept { return ess_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool operator==(const LinkMatrix&) const = default;

 private:
  std::size_t devices_ = 0;
  std::size_t ess_ = 0;
  std::vector<T> data_;
};

struct Scenario {
  std::size_t num_devices = 14;
  std::size_t num_ess = 2;
  std::vector<Position> device_positions;  // empty -> random placement
  std::vector<Position> es_positions{{30.0, 30.0}, {90.0, 30.0}};
  Position region{120.0, 60.0};

  double bandwidth_hz = 20e6;
  double noise_psd_w_per_hz = units::dbm_to_watts(-174.0);
  double max_tx_power_w = units::dbm_to_watts(20.0);
  double timeslot_s = 0.03;
  std::size_t horizon = 1000;
  double carrier_freq_hz = 2.4e9;
  double antenna_gain = 2.0;
  double pathloss_exponent = 2.8;
  double task_min_bytes = 20e3;
  double task_max_bytes = 100e3;
  double deadline_s = 0.1;
  double availability_floor = 1.0;  // lambda
  double compute_jitter = 0.0;
  double csi_bound_db = 0.0;        // epsilon
  std::uint64_t seed = 42;

  void validate() const {
    auto require = [](bool ok, const char* msg) {
      if (!ok) throw ConfigError(std::string("scenario: ") + msg);
    };
    require(num_devices >= 1, "num_devices must be >= 1");
    require(num_ess >= 1, "num_ess must be >= 1");
    require(es_positions.size() == num_ess,
            "es_positions must list one position per ES");
    require(device_positions.empty() || device_positions.size() == num_devices,
            "device_positions must be empty or list one position per device");
    require(timeslot_s > 0.0, "timeslot_s must be > 0");
    require(horizon >= 1, "horizon must be >= 1");
    require(deadline_s > 0.0, "deadline_s must be > 0");
    require(availability_floor > 0.0 && availability_floor <= 1.0,
            "availability_floor must lie in (0, 1]");
    require(compute_jitter >= 0.0 && compute_jitter < 1.0,
            "compute_jitter must lie in [0, 1)");
    require(csi_bound_db >= 0.0, "csi_bound_db must be >= 0");
    require(task_min_bytes > 0.0 && task_min_bytes <= task_max_bytes,
            "task size range must satisfy 0 < min <= max");
    require(bandwidth_hz > 0.0 && noise_psd_w_per_hz > 0.0 &&
                max_tx_power_w > 0.0 && carrier_freq_hz > 0.0 &&
                antenna_gain > 0.0 && pathloss_exponent > 0.0,
            "powers, bandwidths and frequencies must be strictly positive");
    require(region.x > 0.0 && region.y > 0.0, "region must be positive");
  }
};

// Free-space average gain g_a * (c / (4 pi f_c d))^d_e.
inline double free_space_gain(double distance_m, double carrier_hz,
                              double antenna_gain, double exponent) {
  if (!(distance_m > 0.0)) {
    throw ModelError("mean_channel_gain: zero device-ES distance");
  }
  const double base =
      units::kSpeedOfLight / (4.0 * std::numbers::pi * carrier_hz * distance_m);
  return antenna_gain * std::pow(base, exponent);
}

// Device positions after placement (explicit or seeded uniform in region).
inline std::vector<Position> place_devices(const Scenario& sc) {
  if (!sc.device_positions.empty()) return sc.device_positions;
  Engine rng = make_stream(sc.seed, "placement");
  std::vector<Position> out(sc.num_devices);
  for (auto& p : out) {
    p.x = uniform(rng, 0.0, sc.region.x);
    p.y = uniform(rng, 0.0, sc.region.y);
  }
  return out;
}

inline double mean_channel_gain(const Scenario& sc,
                                const std::vector<Position>& devices,
                                std::size_t device, std::size_t es) {
  return free_space_gain(distance(devices.at(device), sc.es_positions.at(es)),
                         sc.carrier_freq_hz, sc.antenna_gain,
                         sc.pathloss_exponent);
}

struct Task {
  double bytes = 0.0;
  double deadline_s = 0.0;
  bool operator==(const Task&) const = default;
};

struct SlotState {
  std::size_t slot = 1;  // 1-based
  LinkMatrix<double> gains;
  LinkMatrix<double> estimated_gains;
  std::vector<Task> tasks;
  std::vector<double> availability;   // a_s in [lambda, 1]
  std::vector<double> compute_scale;  // c_s in [1-jitter, 1+jitter]

  double slot_start(double timeslot_s) const {
    return static_cast<double>(slot - 1) * timeslot_s;
  }
  bool operator==(const SlotState&) const = default;
};

// Sequential per-slot sampler. One engine per stochastic source.
class SlotSampler {
 public:
  explicit SlotSampler(const Scenario& sc)
      : sc_(sc),
        positions_(place_devices(sc)),
        mean_gain_(sc.num_devices, sc.num_ess),
        channels_(make_stream(sc.seed, "channels")),
        tasks_(make_stream(sc.seed, "tasks")),
        availability_(make_stream(sc.seed, "availability")),
        jitter_(make_stream(sc.seed, "jitter")),
        csi_(make_stream(sc.seed, "csi")) {
    sc_.validate();
    for (std::size_t u = 0; u < sc.num_devices; ++u) {
      for (std::size_t s = 0; s < sc.num_ess; ++s) {
        mean_gain_(u, s) = mean_channel_gain(sc_, positions_, u, s);
      }
    }
  }

  const Scenario& scenario() const noexcept { return sc_; }
  const std::vector<Position>& positions() const noexcept { return positions_; }
  const LinkMatrix<double>& mean_gains() const noexcept { return mean_gain_; }

  SlotState next() {
    SlotState st;
    st.slot = ++slot_;
    const std::size_t U = sc_.num_devices, S = sc_.num_ess;
    st.gains = LinkMatrix<double>(U, S);
    st.estimated_gains = LinkMatrix<double>(U, S);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t u = 0; u < U; ++u) {
      for (std::size_t s = 0; s < S; ++s) {
        // g_r ~ CN(0, 1): |g_r|^2 = (x^2 + y^2) / 2 is unit-mean exponential.
        const double re = normal(channels_);
        const double im = normal(channels_);
        double fading = 0.5 * (re * re + im * im);
        if (fading <= 0.0) fading = std::numeric_limits<double>::min();
        st.gains(u, s) = mean_gain_(u, s) * fading;
        const double err_db =
            uniform(csi_, -sc_.csi_bound_db, sc_.csi_bound_db);
        st.estimated_gains(u, s) =
            sc_.csi_bound_db == 0.0 ? st.gains(u, s)
                                    : st.gains(u, s) * units::db_to_linear(err_db);
      }
    }
    st.tasks.resize(U);
    for (auto& t : st.tasks) {
      t.bytes = uniform(tasks_, sc_.task_min_bytes, sc_.task_max_bytes);
      t.deadline_s = sc_.deadline_s;
    }
    st.availability.resize(S);
    st.compute_scale.resize(S);
    for (std::size_t s = 0; s < S; ++s) {
      st.availability[s] = uniform(availability_, sc_.availability_floor, 1.0);
      st.compute_scale[s] =
          uniform(jitter_, 1.0 - sc_.compute_jitter, 1.0 + sc_.compute_jitter);
    }
    return st;
  }

 private:
  Scenario sc_;
  std::vector<Position> positions_;
  LinkMatrix<double> mean_gain_;
  std::size_t slot_ = 0;
  Engine channels_, tasks_, availability_, jitter_, csi_;
};

// ---------------------------------------------------------------------------
// JSON loading. SI units; *_dbm / *_db variants are converted on load.

namespace detail {

inline Position parse_position(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) {
    throw ConfigError(std::string("scenario: ") + what +
                      " entries must be [x, y] pairs");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<Position> parse_positions(const nlohmann::json& j,
                                             const char* what) {
  if (!j.is_array()) {
    throw ConfigError(std::string("scenario: ") + what + " must be an array");
  }
  std::vector<Position> out;
  for (const auto& e : j) out.push_back(parse_position(e, what));
  return out;
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "num_devices", "num_ess", "device_positions_m", "es_positions_m",
      "region_m", "bandwidth_hz", "noise_psd_w_per_hz", "noise_psd_dbm_per_hz",
      "max_tx_power_w", "max_tx_power_dbm", "timeslot_s", "horizon",
      "carrier_freq_hz", "antenna_gain", "antenna_gain_db", "pathloss_exponent",
      "task_size_bytes", "deadline_s", "availability_floor", "compute_jitter",
      "csi_bound_db", "seed", "provenance", "_comment"};
  if (!j.is_object()) throw ConfigError("scenario: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) {
      throw ConfigError("scenario: unknown key '" + key + "'");
    }
  }
  Scenario sc;
  try {
    if (j.contains("num_devices")) sc.num_devices = j["num_devices"].get<std::size_t>();
    if (j.contains("es_positions_m")) {
      sc.es_positions = detail::parse_positions(j["es_positions_m"], "es_positions_m");
    }
    sc.num_ess = j.value("num_ess", sc.es_positions.size());
    if (j.contains("device_positions_m")) {
      sc.device_positions =
          detail::parse_positions(j["device_positions_m"], "device_positions_m");
    }
    if (j.contains("region_m")) sc.region = detail::parse_position(j["region_m"], "region_m");
    sc.bandwidth_hz = j.value("bandwidth_hz", sc.bandwidth_hz);
    if (j.contains("noise_psd_dbm_per_hz")) {
      sc.noise_psd_w_per_hz = units::dbm_to_watts(j["noise_psd_dbm_per_hz"].get<double>());
    }
    sc.noise_psd_w_per_hz = j.value("noise_psd_w_per_hz", sc.noise_psd_w_per_hz);
    if (j.contains("max_tx_power_dbm")) {
      sc.max_tx_power_w = units::dbm_to_watts(j["max_tx_power_dbm"].get<double>());
    }
    sc.max_tx_power_w = j.value("max_tx_power_w", sc.max_tx_power_w);
    sc.timeslot_s = j.value("timeslot_s", sc.timeslot_s);
    sc.horizon = j.value("horizon", sc.horizon);
    sc.carrier_freq_hz = j.value("carrier_freq_hz", sc.carrier_freq_hz);
    if (j.contains("antenna_gain_db")) {
      sc.antenna_gain = units::db_to_linear(j["antenna_gain_db"].get<double>());
    }
    sc.antenna_gain = j.value("antenna_gain", sc.antenna_gain);
    sc.pathloss_exponent = j.value("pathloss_exponent", sc.pathloss_exponent);
    if (j.contains("task_size_bytes")) {
      const auto& r = j["task_size_bytes"];
      if (!r.is_array() || r.size() != 2) {
        throw ConfigError("scenario: task_size_bytes must be [min, max]");
      }
      sc.task_min_bytes = r[0].get<double>();
      sc.task_max_bytes = r[1].get<double>();
    }
    sc.deadline_s = j.value("deadline_s", sc.deadline_s);
    sc.availability_floor = j.value("availability_floor", sc.availability_floor);
    sc.compute_jitter = j.value("compute_jitter", sc.compute_jitter);
    sc.csi_bound_db = j.value("csi_bound_db", sc.csi_bound_db);
    sc.seed = j.value("seed", sc.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  sc.validate();
  return sc;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("JSON parse error in " + path + ": " + e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  return scenario_from_json(read_json_file(path));
}

}  // namespace mecsim
