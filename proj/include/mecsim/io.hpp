#pragma once

// CSV/JSON output with write-to-temp-then-rename, and the per-task trace.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mecsim/error.hpp"
#include "mecsim/sim_core.hpp"

namespace mecsim {

inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + tmp.string());
    out << content;
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// Shortest decimal that round-trips.
inline std::string fmt_num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  for (int prec = 6; prec < 17; ++prec) {
    char b2[64];
    std::snprintf(b2, sizeof b2, "%.*g", prec, x);
    if (std::strtod(b2, nullptr) == x) return b2;
  }
  return buf;
}

inline std::string fmt_opt(const std::optional<double>& x) { return x ? fmt_num(*x) : ""; }

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    row_strings(header);
  }
  template <typename... Ts>
  void row(const Ts&... cols) {
    std::vector<std::string> v{cell(cols)...};
    row_strings(v);
  }
  void row_strings(const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i) out_ << ',';
      out_ << cols[i];
    }
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }
  void save(const std::filesystem::path& p) const { write_file_atomic(p, out_.str()); }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double x) { return fmt_num(x); }
  static std::string cell(const std::optional<double>& x) { return fmt_opt(x); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I i) { return std::to_string(i); }

  std::ostringstream out_;
};

// One row per task: k, u, l, s, m, D, R, t_com, t_que, t_cmp_es, t_total, E, success, eta.
inline CsvWriter trace_csv(const std::vector<TaskOutcome>& tasks) {
  CsvWriter w({"k", "u", "l", "s", "m", "D", "R", "p", "t_cmp_dev", "t_com", "t_que",
               "t_cmp_es", "t_total", "E", "success", "eta", "failure"});
  for (const auto& t : tasks) {
    w.row(t.slot, t.device, t.decision.split,
          t.decision.es ? std::to_string(*t.decision.es) : std::string(),
          t.decision.ratio ? std::to_string(*t.decision.ratio) : std::string(), t.tx_bytes,
          t.rate_bps, t.power_w, t.t_cmp_dev, t.t_com, t.t_que, t.t_cmp_es, t.t_total,
          t.energy_j, t.success, t.achieved_eta, std::string(to_string(t.failure)));
  }
  return w;
}

}  // namespace mecsim
