#pragma once

// Layer timing profiles, compression profiles and FLOPs-based energy.
//
// Split layer l ranges over 0..L where L = depth(): l = 0 is full offloading,
// l = L is local computing and 0 < l < L is split computing.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mecsim/error.hpp"
#include "mecsim/scenario.hpp"

namespace mecsim {

// ---------------------------------------------------------------------------
// FLOPs

enum class LayerKind { conv, fc };

struct LayerSpec {
  LayerKind kind = LayerKind::conv;
  std::uint64_t in_channels = 0;
  std::uint64_t out_channels = 0;
  std::uint64_t kernel = 0;
  std::uint64_t out_height = 0;
  std::uint64_t out_width = 0;
  std::uint64_t in_dim = 0;
  std::uint64_t out_dim = 0;

  static LayerSpec conv(std::uint64_t cin, std::uint64_t cout, std::uint64_t k,
                        std::uint64_t h, std::uint64_t w) {
    return {LayerKind::conv, cin, cout, k, h, w, 0, 0};
  }
  static LayerSpec fc(std::uint64_t din, std::uint64_t dout) {
    return {LayerKind::fc, 0, 0, 0, 0, 0, din, dout};
  }
};

namespace detail {

inline std::uint64_t checked_product(std::initializer_list<std::uint64_t> xs,
                                     const char* what) {
  std::uint64_t acc = 1;
  for (auto x : xs) {
    if (x == 0) throw ModelError(std::string(what) + ": dimensions must be >= 1");
    if (__builtin_mul_overflow(acc, x, &acc)) {
      throw ModelError(std::string(what) + ": FLOP count overflows 64 bits");
    }
  }
  return acc;
}

}  // namespace detail

// xi = C_{l-1} * C_l * f^2 * H * W
inline std::uint64_t conv_flops(const LayerSpec& l) {
  if (l.kind != LayerKind::conv) throw ModelError("conv_flops: layer is not conv");
  return detail::checked_product(
      {l.in_channels, l.out_channels, l.kernel, l.kernel, l.out_height, l.out_width},
      "conv_flops");
}

// xi = D_in * D_out
inline std::uint64_t fc_flops(const LayerSpec& l) {
  if (l.kind != LayerKind::fc) throw ModelError("fc_flops: layer is not fc");
  return detail::checked_product({l.in_dim, l.out_dim}, "fc_flops");
}

inline std::uint64_t layer_flops(const LayerSpec& l) {
  return l.kind == LayerKind::conv ? conv_flops(l) : fc_flops(l);
}

// ---------------------------------------------------------------------------
// Timing profile

struct TensorShape {
  std::uint64_t channels = 0, height = 0, width = 0;
  std::uint64_t elements() const { return channels * height * width; }
};

class TimingProfile {
 public:
  struct Point {
    std::string name;
    TensorShape output;
    std::vector<LayerSpec> layers;
    double device_s = 0.0;
    double es_s = 0.0;
  };

  TimingProfile() = default;
  TimingProfile(std::vector<Point> points, double flops_per_watt_second)
      : points_(std::move(points)), rho_(flops_per_watt_second) {
    if (points_.empty()) throw ConfigError("timing profile: no points");
    if (!(rho_ > 0.0)) throw ConfigError("timing profile: flops_per_watt_second must be > 0");
    device_prefix_.assign(1, 0.0);
    es_prefix_.assign(1, 0.0);
    flops_prefix_.assign(1, 0);
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (p.device_s < 0.0 || p.es_s < 0.0) {
        throw ConfigError("timing profile: negative time at point " +
                          std::to_string(i + 1));
      }
      device_prefix_.push_back(device_prefix_.back() + p.device_s);
      es_prefix_.push_back(es_prefix_.back() + p.es_s);
      std::uint64_t f = 0;
      for (const auto& l : p.layers) {
        if (__builtin_add_overflow(f, layer_flops(l), &f)) {
          throw ModelError("timing profile: FLOP sum overflows");
        }
      }
      flops_prefix_.push_back(flops_prefix_.back() + f);
    }
  }

  int depth() const noexcept { return static_cast<int>(points_.size()); }
  double flops_per_watt_second() const noexcept { return rho_; }
  const std::vector<Point>& points() const noexcept { return points_; }

  // t_{u,0,l}
  double device_time_through(int l) const { return device_prefix_.at(check(l)); }
  // t_{s,l+1,L}
  double es_time_after(int l) const {
    return es_prefix_.back() - es_prefix_.at(check(l));
  }
  std::uint64_t flops_through(int l) const { return flops_prefix_.at(check(l)); }
  const TensorShape& output_shape(int l) const { return points_.at(check(l) - 1).output; }

 private:
  std::size_t check(int l) const {
    if (l < 0 || l > depth()) {
      throw ModelError("timing profile: layer " + std::to_string(l) +
                       " outside 0.." + std::to_string(depth()));
    }
    return static_cast<std::size_t>(l);
  }

  std::vector<Point> points_;
  double rho_ = 1.0;
  std::vector<double> device_prefix_, es_prefix_;
  std::vector<std::uint64_t> flops_prefix_;
};

// E = sum_{i <= l} xi_i / rho
inline double device_compute_energy(const TimingProfile& tp, int l) {
  return static_cast<double>(tp.flops_through(l)) / tp.flops_per_watt_second();
}

namespace detail {

inline LayerSpec parse_layer(const nlohmann::json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "conv") {
    return LayerSpec::conv(j.at("in_channels").get<std::uint64_t>(),
                           j.at("out_channels").get<std::uint64_t>(),
                           j.at("kernel").get<std::uint64_t>(),
                           j.at("out_height").get<std::uint64_t>(),
                           j.at("out_width").get<std::uint64_t>());
  }
  if (kind == "fc") {
    return LayerSpec::fc(j.at("in_dim").get<std::uint64_t>(),
                         j.at("out_dim").get<std::uint64_t>());
  }
  throw ConfigError("unknown layer kind '" + kind + "'");
}

inline TensorShape parse_shape(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("shape must be [C, H, W]");
  return {j[0].get<std::uint64_t>(), j[1].get<std::uint64_t>(), j[2].get<std::uint64_t>()};
}

}  // namespace detail

inline TimingProfile timing_profile_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema_version").get<int>() != 1) {
      throw ConfigError("timing profile: unsupported schema_version");
    }
    std::vector<TimingProfile::Point> points;
    int expected = 1;
    for (const auto& p : j.at("points")) {
      if (p.at("index").get<int>() != expected) {
        throw ConfigError("timing profile: points must be indexed 1..L in order");
      }
      TimingProfile::Point pt;
      pt.name = p.value("name", "");
      pt.output = detail::parse_shape(p.at("output"));
      pt.device_s = p.at("device_s").get<double>();
      pt.es_s = p.at("es_s").get<double>();
      for (const auto& l : p.at("layers")) pt.layers.push_back(detail::parse_layer(l));
      points.push_back(std::move(pt));
      ++expected;
    }
    return TimingProfile(std::move(points), j.at("flops_per_watt_second").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("timing profile: ") + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(std::string("timing profile: ") + e.what());
  }
}

inline TimingProfile load_timing_profile(const std::string& path) {
  return timing_profile_from_json(read_json_file(path));
}

// ---------------------------------------------------------------------------
// Compression profile

enum class CompressionMethod { aecnn, ca_pruned, bottlenet_pp, deepjscc };

inline std::string to_string(CompressionMethod m) {
  switch (m) {
    case CompressionMethod::aecnn: return "aecnn";
    case CompressionMethod::ca_pruned: return "ca_pruned";
    case CompressionMethod::bottlenet_pp: return "bottlenet++";
    case CompressionMethod::deepjscc: return "deepjscc";
  }
  return "?";
}

inline CompressionMethod parse_method(const std::string& s) {
  if (s == "aecnn") return CompressionMethod::aecnn;
  if (s == "ca_pruned") return CompressionMethod::ca_pruned;
  if (s == "bottlenet++") return CompressionMethod::bottlenet_pp;
  if (s == "deepjscc") return CompressionMethod::deepjscc;
  throw ConfigError("unknown compression method '" + s + "'");
}

struct CompressionEntry {
  int ratio = 1;
  std::uint64_t retained_channels = 0;
  double entropy_bits = 32.0;
  double t_enc_s = 0.0;
  double t_dec_s = 0.0;
  std::map<CompressionMethod, double> accuracy;

  double eta(CompressionMethod m) const {
    auto it = accuracy.find(m);
    if (it == accuracy.end()) {
      throw ModelError("compression entry (m=" + std::to_string(ratio) +
                       ") has no accuracy for method " + to_string(m));
    }
    return it->second;
  }
};

struct SplitPointProfile {
  int layer = 0;
  TensorShape shape;
  std::vector<CompressionEntry> entries;  // ascending ratio
};

class CompressionProfile {
 public:
  int depth() const noexcept { return depth_; }
  double base_accuracy() const noexcept { return base_accuracy_; }
  const std::string& provenance() const noexcept { return provenance_; }
  const std::vector<SplitPointProfile>& split_points() const noexcept { return points_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  const SplitPointProfile& point(int l) const {
    for (const auto& p : points_) {
      if (p.layer == l) return p;
    }
    throw ModelError("compression profile: no split point l=" + std::to_string(l));
  }

  const CompressionEntry& entry(int l, int m) const {
    for (const auto& e : point(l).entries) {
      if (e.ratio == m) return e;
    }
    throw ModelError("compression profile: unknown (l=" + std::to_string(l) +
                     ", m=" + std::to_string(m) + ") pair");
  }

  bool has(int l, int m) const {
    for (const auto& p : points_) {
      if (p.layer != l) continue;
      for (const auto& e : p.entries) {
        if (e.ratio == m) return true;
      }
    }
    return false;
  }

  // Inference accuracy of a decision; full offload and local computing run
  // the unmodified model.
  double accuracy(int l, int m, CompressionMethod method) const {
    if (l == 0 || l == depth_) return base_accuracy_;
    return entry(l, m).eta(method);
  }

 private:
  friend CompressionProfile compression_profile_from_json(const nlohmann::json&);

  int depth_ = 0;
  double base_accuracy_ = 0.0;
  std::string provenance_;
  std::vector<SplitPointProfile> points_;
  std::vector<std::string> warnings_;
};

// Validates the schema and the per-entry invariants. Monotonicity of
// accuracy/entropy in m is enforced for files with provenance "paper" and
// reported as a warning otherwise.
inline CompressionProfile compression_profile_from_json(const nlohmann::json& j) {
  CompressionProfile cp;
  auto where = [](int l, int m) {
    return "(l=" + std::to_string(l) + ", m=" + std::to_string(m) + ")";
  };
  try {
    if (j.at("schema_version").get<int>() != 1) {
      throw ConfigError("compression profile: unsupported schema_version");
    }
    cp.depth_ = j.at("num_split_points").get<int>();
    cp.base_accuracy_ = j.at("base_accuracy").get<double>();
    cp.provenance_ = j.value("provenance", "unknown");
    if (cp.depth_ < 2) throw ConfigError("compression profile: num_split_points must be >= 2");
    if (cp.base_accuracy_ < 0.0 || cp.base_accuracy_ > 1.0) {
      throw ConfigError("compression profile: base_accuracy outside [0, 1]");
    }
    const bool strict = cp.provenance_ == "paper";
    for (const auto& pj : j.at("split_points")) {
      SplitPointProfile sp;
      sp.layer = pj.at("layer").get<int>();
      if (sp.layer <= 0 || sp.layer >= cp.depth_) {
        throw ConfigError("compression profile: split layer " + std::to_string(sp.layer) +
                          " must lie strictly between 0 and num_split_points");
      }
      sp.shape = detail::parse_shape(pj.at("shape"));
      for (const auto& ej : pj.at("entries")) {
        CompressionEntry e;
        e.ratio = ej.at("ratio").get<int>();
        const std::string at = where(sp.layer, e.ratio);
        if (e.ratio < 1) throw ConfigError("compression profile " + at + ": ratio must be >= 1");
        e.retained_channels = ej.at("retained_channels").get<std::uint64_t>();
        if (sp.shape.channels % static_cast<std::uint64_t>(e.ratio) != 0 ||
            e.retained_channels * static_cast<std::uint64_t>(e.ratio) != sp.shape.channels) {
          throw ConfigError("compression profile " + at +
                            ": retained_channels must equal C_l / m exactly");
        }
        e.entropy_bits = ej.at("entropy_bits").get<double>();
        if (!(e.entropy_bits > 0.0 && e.entropy_bits <= 32.0)) {
          throw ConfigError("compression profile " + at + ": entropy_bits must lie in (0, 32]");
        }
        e.t_enc_s = ej.at("t_enc_ms").get<double>() * 1e-3;
        e.t_dec_s = ej.at("t_dec_ms").get<double>() * 1e-3;
        if (e.t_enc_s < 0.0 || e.t_dec_s < 0.0) {
          throw ConfigError("compression profile " + at + ": negative encode/decode time");
        }
        for (const auto& [name, val] : ej.at("accuracy").items()) {
          const double eta = val.get<double>();
          if (eta < 0.0 || eta > 1.0) {
            throw ConfigError("compression profile " + at + ": accuracy for " + name +
                              " outside [0, 1]");
          }
          e.accuracy[parse_method(name)] = eta;
        }
        if (e.ratio == 1) {
          for (const auto& [m, eta] : e.accuracy) {
            if (eta != cp.base_accuracy_) {
              throw ConfigError("compression profile " + at +
                                ": uncompressed entry must carry the base accuracy");
            }
          }
          if (e.t_enc_s != 0.0 || e.t_dec_s != 0.0) {
            throw ConfigError("compression profile " + at +
                              ": uncompressed entry must have zero encode/decode time");
          }
        }
        sp.entries.push_back(std::move(e));
      }
      std::sort(sp.entries.begin(), sp.entries.end(),
                [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
      for (std::size_t i = 1; i < sp.entries.size(); ++i) {
        const auto& prev = sp.entries[i - 1];
        const auto& cur = sp.entries[i];
        const std::string at = where(sp.layer, cur.ratio);
        if (prev.ratio == cur.ratio) {
          throw ConfigError("compression profile " + at + ": duplicate ratio");
        }
        std::vector<std::string> issues;
        if (cur.entropy_bits > prev.entropy_bits) issues.push_back("entropy_bits increases with m");
        for (const auto& [m, eta] : cur.accuracy) {
          auto it = prev.accuracy.find(m);
          if (it != prev.accuracy.end() && eta > it->second) {
            issues.push_back(to_string(m) + " accuracy increases with m");
          }
        }
        for (const auto& issue : issues) {
          if (strict) throw ConfigError("compression profile " + at + ": " + issue);
          cp.warnings_.push_back("compression profile " + at + ": " + issue);
        }
      }
      cp.points_.push_back(std::move(sp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("compression profile: ") + e.what());
  }
  return cp;
}

inline CompressionProfile load_compression_profile(const std::string& path) {
  return compression_profile_from_json(read_json_file(path));
}

// Uplink payload in bytes (float32 tensors; downlink result ignored).
inline double transmit_bytes(const CompressionProfile& cp, int l, int m,
                             bool use_entropy, double task_bytes) {
  if (l == 0) return task_bytes;
  if (l == cp.depth()) return 0.0;
  const auto& sp = cp.point(l);
  const auto& e = cp.entry(l, m);
  const double hw = static_cast<double>(sp.shape.height * sp.shape.width);
  if (!use_entropy) {
    return 4.0 * static_cast<double>(sp.shape.channels) * hw / static_cast<double>(m);
  }
  return static_cast<double>(e.retained_channels) * hw * e.entropy_bits / 8.0;
}

// Both profiles must describe the same model depth.
inline void check_profiles_compatible(const TimingProfile& tp, const CompressionProfile& cp) {
  if (tp.depth() != cp.depth()) {
    throw ConfigError("timing profile depth " + std::to_string(tp.depth()) +
                      " does not match compression profile depth " +
                      std::to_string(cp.depth()));
  }
  for (const auto& sp : cp.split_points()) {
    const auto& shp = tp.output_shape(sp.layer);
    if (shp.channels != sp.shape.channels || shp.height != sp.shape.height ||
        shp.width != sp.shape.width) {
      throw ConfigError("split point l=" + std::to_string(sp.layer) +
                        " has different tensor shapes in timing and compression profiles");
    }
  }
}

}  // namespace mecsim
