#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "paychan/bench.hpp"
#include "paychan/checker.hpp"
#include "paychan/consensus.hpp"
#include "paychan/scenario.hpp"

using namespace paychan;

namespace {

int run_simulate(const std::string& config, std::optional<std::uint64_t> seed, const std::string& trace_out,
                 const std::string& metrics_out, const std::string& byz_flag) {
  WorldConfig cfg;
  try {
    cfg = load_scenario(config);
    if (seed) cfg.seed = *seed;
    if (!byz_flag.empty()) {
      cfg.byzantine = parse_byzantine_flag(byz_flag);
      validate(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }

  World w(cfg);
  RunResult r;
  try {
    r = w.run();
  } catch (const StepCapExceeded& e) {
    std::cerr << "step cap exceeded: " << e.what() << '\n';
    return 3;
  }

  if (!trace_out.empty()) {
    std::ofstream os(trace_out);
    write_trace(os, r.history);
  }
  if (!metrics_out.empty()) {
    std::ofstream os(metrics_out);
    write_metrics_csv(os, r.metrics, cfg.n, cfg.f);
  }

  std::map<OpKind, std::uint64_t> per_kind;
  for (const auto& m : r.metrics)
    if (m.op != 0) per_kind[m.kind] += m.msgs_correct;
  std::cout << "steps: " << r.steps << '\n'
            << "operations: " << r.metrics.size() << '\n'
            << "unfinished: " << r.unfinished_ops << '\n';
  for (const auto& [k, v] : per_kind) std::cout << "msgs_correct." << to_string(k) << ": " << v << '\n';

  auto breaches = check_invariants(w);
  std::cout << "invariants: " << (breaches.empty() ? "ok" : "BREACHED") << '\n';
  for (const auto& b : breaches) std::cout << "  " << b << '\n';
  return breaches.empty() ? 0 : 1;
}

std::vector<std::size_t> parse_n_list(const std::vector<std::string>& raw) {
  std::vector<std::size_t> out;
  for (const auto& item : raw) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) out.push_back(std::stoul(tok));
  }
  return out;
}

int run_bench_cmd(const std::vector<std::string>& n_raw, std::size_t reps, std::uint64_t seed) {
  std::vector<std::size_t> ns;
  try {
    ns = parse_n_list(n_raw);
  } catch (const std::exception&) {
    std::cerr << "bad --n list\n";
    return 2;
  }
  for (auto n : ns)
    if (n < 4) {
      std::cerr << "each n must be at least 4\n";
      return 2;
    }
  auto r = run_bench(ns, reps, seed);
  write_bench_csv(std::cout, r);
  for (const auto& p : r.problems) std::cerr << p << '\n';
  return r.problems.empty() ? 0 : 1;
}

int run_check(const std::string& trace, const std::string& byz_flag, std::uint64_t budget) {
  History h;
  try {
    std::ifstream in(trace);
    if (!in) throw TraceParseError("cannot open " + trace);
    h = read_trace(in);
  } catch (const std::exception& e) {
    std::cerr << "trace error: " << e.what() << '\n';
    return 2;
  }
  auto byz = h.byzantine;
  if (!byz_flag.empty()) {
    byz.clear();
    std::stringstream ss(byz_flag);
    std::string tok;
    try {
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) byz.insert(static_cast<ProcessId>(std::stoul(tok.substr(0, tok.find(':')))));
    } catch (const std::exception&) {
      std::cerr << "bad --byzantine list\n";
      return 2;
    }
  }
  CheckOptions opts;
  opts.budget = budget;
  auto rep = check_bsc(h, byz, opts);
  std::cout << "verdict: " << to_string(rep.verdict) << '\n' << "states: " << rep.states << '\n';
  switch (rep.verdict) {
    case Verdict::kConsistent:
      std::cout << "witness:\n";
      for (const auto& w : rep.witness) std::cout << "  " << w << '\n';
      return 0;
    case Verdict::kViolation:
      std::cout << "evidence:\n" << rep.evidence << '\n';
      return 1;
    case Verdict::kUnknown:
      std::cout << "note: search budget of " << budget << " states exhausted\n";
      return 4;
  }
  return 4;
}

int run_consensus(const std::string& object) {
  using namespace consensus;
  std::vector<Report> reports;
  if (object == "bidirectional" || object == "all") reports.push_back(explore(ObjectKind::kBidirectional));
  if (object == "source-close" || object == "all") reports.push_back(explore(ObjectKind::kUnidirectionalSourceClose));
  if (object == "mutant" || object == "all") reports.push_back(explore(ObjectKind::kBidirectional, {true}));
  bool ok = true;
  for (const auto& r : reports) {
    std::cout << r.str() << '\n';
    // the mutated object is expected to break consensus
    ok = ok && (r.mutated ? !r.ok() : r.ok());
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"payment channel simulator, benchmark and history checker"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a scenario");
  std::string config, trace_out, metrics_out, sim_byz;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--config", config, "scenario file (JSON)")->required();
  sim->add_option("--seed", sim_seed, "override the scenario seed");
  sim->add_option("--trace-out", trace_out, "write the history trace (JSONL)");
  sim->add_option("--metrics-out", metrics_out, "write per-operation message counts (CSV)");
  sim->add_option("--byzantine", sim_byz, "replace Byzantine set, e.g. 3:overspender,5:message_dropper:0");

  auto* bench = app.add_subcommand("bench", "message counts per operation across n");
  std::vector<std::string> n_list{"4,7,10,13,16"};
  std::size_t reps = 20;
  std::uint64_t bench_seed = 1;
  bench->add_option("--n", n_list, "process counts, comma separated");
  bench->add_option("--reps", reps, "seeds per n");
  bench->add_option("--seed", bench_seed, "first seed");

  auto* check = app.add_subcommand("check", "check a history trace for Byzantine sequential consistency");
  std::string trace, check_byz;
  std::uint64_t budget = 1'000'000;
  check->add_option("trace", trace, "trace file (JSONL)")->required();
  check->add_option("--byzantine", check_byz, "Byzantine process ids, comma separated (default: from trace)");
  check->add_option("--budget", budget, "explored-state budget");

  auto* demo = app.add_subcommand("consensus-demo", "explore two-process consensus over atomic channel objects");
  std::string object = "all";
  demo->add_option("--object", object, "bidirectional, source-close, mutant or all")
      ->check(CLI::IsMember({"bidirectional", "source-close", "mutant", "all"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    auto code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*sim) return run_simulate(config, sim_seed, trace_out, metrics_out, sim_byz);
  if (*bench) return run_bench_cmd(n_list, reps, bench_seed);
  if (*check) return run_check(trace, check_byz, budget);
  if (*demo) return run_consensus(object);
  return 2;
}
