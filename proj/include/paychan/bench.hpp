#pragma once

#include <cmath>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "paychan/simnet.hpp"

namespace paychan {

/// Closed-form message count of one source-ordered broadcast between n
/// processes, self-messages excluded: n-1 INITs, then n(n-1) ECHOs and
/// n(n-1) READYs.
inline std::uint64_t brb_closed_form(std::uint64_t n) { return (n - 1) * (2 * n + 1); }

inline std::size_t max_faults(std::size_t n) { return n == 0 ? 0 : (n - 1) / 3; }

/// Fault-free run: one ledger transfer, one read, then a channel open, one
/// pay and the target's close.
inline WorldConfig bench_scenario(std::size_t n, std::uint64_t seed) {
  WorldConfig cfg;
  cfg.n = n;
  cfg.f = max_faults(n);
  cfg.seed = seed;
  AccountId src("src"), dst("dst");
  cfg.accounts = {{src, 0, Amount(100)}, {dst, 1, Amount(0)}};
  ChannelId ch{src, dst};
  cfg.script.push_back({0, 0, Invocation::transfer(src, {{dst, Amount(5)}})});
  cfg.script.push_back({0, 0, Invocation::read(src)});
  cfg.script.push_back({0, 0, Invocation::open(ch, Amount(10))});
  cfg.script.push_back({0, 0, Invocation::pay(ch, Amount(1))});
  cfg.script.push_back({cfg.step_cap, 1, Invocation::target_close(ch)});
  return cfg;
}

struct BenchRow {
  std::size_t n = 0;
  std::size_t f = 0;
  std::size_t reps = 0;
  std::map<OpKind, double> mean;  // mean msgs_correct per operation kind
  std::uint64_t transfer_min = 0;
  std::uint64_t transfer_max = 0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  double exponent = 0;  // least-squares slope of log(transfer msgs) on log(n)
  std::vector<std::string> problems;  // closed-form mismatches, floor breaches, invariant breaches
  std::size_t runs = 0;
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double k = static_cast<double>(x.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  double den = k * sxx - sx * sx;
  return den == 0 ? 0 : (k * sxy - sx * sy) / den;
}

inline BenchResult run_bench(const std::vector<std::size_t>& ns, std::size_t reps, std::uint64_t seed) {
  BenchResult out;
  std::vector<double> xs, ys;
  for (auto n : ns) {
    BenchRow row;
    row.n = n;
    row.f = max_faults(n);
    row.reps = reps;
    std::map<OpKind, double> sum;
    std::map<OpKind, std::size_t> cnt;
    row.transfer_min = UINT64_MAX;
    for (std::size_t r = 0; r < reps; ++r) {
      World w(bench_scenario(n, seed + r));
      auto res = w.run();
      ++out.runs;
      auto tag = "n=" + std::to_string(n) + " seed=" + std::to_string(seed + r) + ": ";
      for (const auto& b : check_invariants(w)) out.problems.push_back(tag + b);
      if (res.unfinished_ops) out.problems.push_back(tag + "unfinished operations");
      for (const auto& m : res.metrics) {
        if (m.op == 0) continue;
        sum[m.kind] += static_cast<double>(m.msgs_correct);
        ++cnt[m.kind];
        if (m.kind != OpKind::kTransfer) continue;
        row.transfer_min = std::min(row.transfer_min, m.msgs_correct);
        row.transfer_max = std::max(row.transfer_max, m.msgs_correct);
        if (m.msgs_correct != brb_closed_form(n))
          out.problems.push_back(tag + "transfer sent " + std::to_string(m.msgs_correct) + ", closed form " +
                                 std::to_string(brb_closed_form(n)));
        double floor = (row.f / 2.0) * (row.f / 2.0);
        if (static_cast<double>(m.msgs_correct) < floor)
          out.problems.push_back(tag + "transfer below the (f/2)^2 floor");
      }
    }
    for (const auto& [k, s] : sum) row.mean[k] = s / static_cast<double>(cnt[k]);
    xs.push_back(static_cast<double>(n));
    ys.push_back(row.mean[OpKind::kTransfer]);
    out.rows.push_back(std::move(row));
  }
  out.exponent = loglog_slope(xs, ys);
  return out;
}

inline void write_bench_csv(std::ostream& os, const BenchResult& r) {
  os << "n,f,reps,transfer,pay,read,open,target_close\n";
  for (const auto& row : r.rows) {
    os << row.n << ',' << row.f << ',' << row.reps;
    for (auto k : {OpKind::kTransfer, OpKind::kPay, OpKind::kRead, OpKind::kOpen, OpKind::kTargetClose}) {
      auto it = row.mean.find(k);
      os << ',' << (it == row.mean.end() ? 0.0 : it->second);
    }
    os << '\n';
  }
  os << "# transfer_exponent," << r.exponent << '\n';
}

}  // namespace paychan
