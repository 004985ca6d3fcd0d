// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
//   acceptance            all criteria
//   acceptance 3 5        selected criteria

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/gradcheck.hpp"
#include "../support/instances.hpp"

using namespace mecsim;
using namespace mecsim::testing;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

std::string num(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

// ---------------------------------------------------------------------------

void psi_endpoints(Verdict& v) {
  const double sigma = 0.1;
  const double at0 = psi(0.0, sigma), at_sigma = psi(sigma, sigma);
  v.check(at0 == 1.0, "psi(0) == 1");
  v.check(std::abs(at_sigma - 0.013387) < 1e-6, "|psi(sigma) - 0.013387| < 1e-6");
  bool decreasing = true;
  double prev = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    const double x = psi(3.0 * sigma * i / 9999.0, sigma);
    decreasing = decreasing && x < prev;
    prev = x;
  }
  v.check(decreasing, "strictly decreasing on 1e4 points");
  v.detail << "psi(0)=" << num(at0, 17) << " psi(sigma)=" << num(at_sigma, 10)
           << " |psi(sigma)-0.013387|=" << num(std::abs(at_sigma - 0.013387), 3)
           << " decreasing=" << (decreasing ? "yes" : "no");
}

void queue_equivalence(Verdict& v) {
  std::mt19937_64 rng(20240601);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) worst = std::max(worst, queue_discrepancy(rng));
  v.check(worst < 1e-9, "max discrepancy < 1e-9 s");
  v.detail << "1000 instances, max |event-driven - closed form| = " << num(worst, 3) << " s";
}

void gradients(Verdict& v) {
  double gcn = 0.0, mlp = 0.0;
  std::size_t checked = 0, one_sided = 0, skipped = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const GradReport g = check_gcn_gradients(seed);
    const GradReport m = check_mlp_gradients(seed);
    gcn = std::max(gcn, g.max_rel_err);
    mlp = std::max(mlp, m.max_rel_err);
    checked += g.checked + m.checked;
    one_sided += g.one_sided + m.one_sided;
    skipped += g.skipped + m.skipped;
  }
  v.check(gcn < 1e-4, "GCN max relative error < 1e-4");
  v.check(mlp < 1e-4, "MLP max relative error < 1e-4");
  v.detail << "10 fixtures, GCN " << num(gcn, 3) << ", MLP " << num(mlp, 3) << " max rel err; "
           << checked << " coordinates (" << one_sided << " one-sided at a ReLU kink, "
           << skipped << " skipped)";
}

void critic_dominance(Verdict& v) {
  std::size_t not_max = 0, above_oracle = 0, oracle_evals = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    Engine rng(seed * 7919);
    const std::size_t U = 1 + index_below(rng, 4), S = 1 + index_below(rng, 2);
    const Slot s = random_slot(seed, U, S);
    const SlotEvaluator ev(s.model, s.state, s.queue, GainView::estimated, s.options);
    const GcnParams p = glorot_init(GcnShape{}, rng);
    const auto cands = quantize(gcn_forward(build_graph(s.model, s.state, ev), p).scores, U,
                                s.options.size());
    const CriticResult r = critic_select(ev, cands);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t first = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const double x = slot_reward(ev.evaluate_indices(cands[i].choice));
      if (x > best) {
        best = x;
        first = i;
      }
    }
    if (r.reward != best || r.index != first) ++not_max;
    const OracleResult o = exhaustive_oracle(ev, U);
    oracle_evals += o.evaluated;
    worst_excess = std::max(worst_excess, r.reward - o.reward);
    if (r.reward > o.reward + 1e-9) ++above_oracle;
  }
  v.check(not_max == 0, "selected reward equals the candidate max");
  v.check(above_oracle == 0, "selected reward <= oracle + 1e-9");
  v.detail << "1000 slots: " << not_max << " not at candidate max, " << above_oracle
           << " above oracle (max selected - oracle = " << num(worst_excess, 3) << ", "
           << oracle_evals << " oracle evaluations)";
}

void desk_convergence(Verdict& v) {
  const ExperimentConfig c = load_experiment(kSrc + "/configs/desk_convergence.json");
  const RunResult r = run_experiment(c, load_profiles(c), {c.policy, c.scenario.seed, true});
  std::size_t first = 0;
  for (const auto& s : r.slots) {
    if (s.k >= c.moving_window && s.k <= 5000 && s.moving_avg >= 0.9) {
      first = s.k;
      break;
    }
  }
  // Loss trend: mean over the training steps of the first and last 500 slots.
  double head = 0.0, tail = 0.0;
  std::size_t nh = 0, nt = 0;
  for (const auto& s : r.slots) {
    if (!s.loss) continue;
    if (s.k <= 500) {
      head += *s.loss;
      ++nh;
    }
    if (s.k + 500 > r.slots.size()) {
      tail += *s.loss;
      ++nt;
    }
  }
  head = nh ? head / static_cast<double>(nh) : NAN;
  tail = nt ? tail / static_cast<double>(nt) : NAN;
  v.check(first > 0, "50-slot moving average >= 0.90 within 5000 slots");
  v.check(nt > 0 && tail < 0.1, "mean training loss over the last 500 slots < 0.1");
  v.check(nh > 0 && nt > 0 && tail < head, "training loss decreases");
  v.check(!r.oracle_violation, "normalized reward <= 1");
  v.detail << "U=3 S=2, " << r.slots.size() << " slots: moving average first >= 0.90 at slot "
           << first << ", final " << num(r.slots.back().moving_avg, 4) << ", mean normalized "
           << num(r.mean_normalized.value_or(NAN), 4) << "; loss first 500 slots "
           << num(head, 4) << ", last 500 slots " << num(tail, 4);
}

struct SweepTable {
  std::vector<double> values;
  // (value, policy) -> seed means
  std::map<std::pair<double, std::string>, AggregateRow> rows;
};

SweepTable run_sweep_config(const std::string& name) {
  const ExperimentConfig c = load_experiment(kSrc + "/configs/" + name);
  const auto runs = run_sweep(c, load_profiles(c));
  SweepTable t;
  t.values = c.sweep.values;
  for (const auto& a : aggregate(c.sweep, runs)) t.rows[{a.value, a.policy}] = a;
  return t;
}

void check_trend(Verdict& v, const SweepTable& t, const std::string& axis) {
  for (std::size_t i = 0; i + 1 < t.values.size(); ++i) {
    const auto& a = t.rows.at({t.values[i], "grl"});
    const auto& b = t.rows.at({t.values[i + 1], "grl"});
    const std::string pair = axis + " " + num(t.values[i]) + " -> " + num(t.values[i + 1]);
    v.check(b.acc_mean <= a.acc_mean, "accuracy non-increasing, " + pair);
    v.check(b.ssp_mean <= a.ssp_mean, "SSP non-increasing, " + pair);
  }
  for (double x : t.values) {
    const double g = t.rows.at({x, "grl"}).reward_mean;
    const std::string at = axis + "=" + num(x);
    v.check(g >= t.rows.at({x, "random"}).reward_mean, "grl reward >= random at " + at);
    v.check(g >= t.rows.at({x, "all-local"}).reward_mean, "grl reward >= all-local at " + at);
  }
  v.detail << axis << ":";
  for (double x : t.values) {
    v.detail << " " << num(x) << "(acc " << num(t.rows.at({x, "grl"}).acc_mean, 3) << ", ssp "
             << num(t.rows.at({x, "grl"}).ssp_mean, 3) << ", reward grl/random/local "
             << num(t.rows.at({x, "grl"}).reward_mean, 3) << "/"
             << num(t.rows.at({x, "random"}).reward_mean, 3) << "/"
             << num(t.rows.at({x, "all-local"}).reward_mean, 3) << ")";
  }
  v.detail << "; ";
}

void trends(Verdict& v) {
  check_trend(v, run_sweep_config("sweep_devices.json"), "U");
  check_trend(v, run_sweep_config("sweep_lambda.json"), "lambda");
}

void csi_robustness(Verdict& v) {
  const SweepTable t = run_sweep_config("sweep_csi.json");
  auto degradation = [&](const std::string& p) {
    const double a0 = t.rows.at({0.0, p}).acc_mean, a5 = t.rows.at({5.0, p}).acc_mean;
    return (a0 - a5) / a0;
  };
  const double grl = degradation("grl"), mlp = degradation("mlp");
  v.check(grl < mlp, "grl relative degradation < mlp relative degradation");
  v.detail << "accuracy eps 0 -> 5: grl " << num(t.rows.at({0.0, "grl"}).acc_mean, 4) << " -> "
           << num(t.rows.at({5.0, "grl"}).acc_mean, 4) << " (" << num(100 * grl, 3)
           << "%), mlp " << num(t.rows.at({0.0, "mlp"}).acc_mean, 4) << " -> "
           << num(t.rows.at({5.0, "mlp"}).acc_mean, 4) << " (" << num(100 * mlp, 3) << "%)";
}

void profile_fidelity(Verdict& v) {
  const std::string path = kSrc + "/data/profiles/resnet50_caltech101.json";
  const CompressionProfile cp = load_compression_profile(path);
  const auto raw = read_json_file(path);
  double enc_ms = NAN;
  for (const auto& sp : raw.at("split_points")) {
    if (sp.at("layer") != 1) continue;
    for (const auto& e : sp.at("entries")) {
      if (e.at("ratio") == 64) enc_ms = e.at("t_enc_ms").get<double>();
    }
  }
  const double a14 = cp.entry(1, 4).eta(CompressionMethod::aecnn);
  const double h164 = cp.entry(1, 64).entropy_bits;
  const double enc = cp.entry(1, 64).t_enc_s;
  const double a264 = cp.entry(2, 64).eta(CompressionMethod::aecnn);
  const double raw14 = transmit_bytes(cp, 1, 4, false, 0.0);
  const double coded164 = transmit_bytes(cp, 1, 64, true, 0.0);
  v.check(a14 == 0.9530, "(l=1, m=4, aecnn) eta == 0.9530");
  v.check(h164 == 7.73, "(l=1, m=64) entropy == 7.73 bits");
  v.check(enc_ms == 0.62 && enc == 0.62 * 1e-3, "(l=1, m=64) enc == 0.62 ms");
  v.check(a264 == 0.9378, "(l=2, m=64, aecnn) eta == 0.9378");
  v.check(raw14 == 200704.0, "raw bytes (l=1, m=4) == 200704");
  v.check(std::abs(coded164 - 3030.16) < 1e-6, "coded bytes (l=1, m=64) ~ 3030.16");
  v.detail << "eta(1,4)=" << num(a14) << " H(1,64)=" << num(h164) << " enc(1,64)="
           << num(enc * 1e3) << " ms eta(2,64)=" << num(a264) << " bytes raw(1,4)="
           << num(raw14, 10) << " coded(1,64)=" << num(coded164, 10);
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<void(Verdict&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "psi endpoints", 1.0, psi_endpoints},
      {2, "queue model equivalence", 30.0, queue_equivalence},
      {3, "gradient correctness", 60.0, gradients},
      {4, "critic and oracle dominance", 300.0, critic_dominance},
      {5, "desk-scale convergence", 600.0, desk_convergence},
      {6, "trend reproduction", 1800.0, trends},
      {7, "imperfect-CSI robustness", 900.0, csi_robustness},
      {8, "profile fidelity", 1.0, profile_fidelity},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.run(v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail << "[exception: " << e.what() << "] ";
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs >= c.limit_s) {
      v.pass = false;
      v.detail << " [failed: runtime over " << num(c.limit_s) << " s]";
    }
    if (!v.pass) ++failed;
    std::cout << "criterion " << c.id << " (" << c.name << "): " << (v.pass ? "PASS" : "FAIL")
              << "  " << v.detail.str() << "  [" << num(secs, 3) << " s, limit "
              << num(c.limit_s) << " s]" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
