#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "paychan/history.hpp"
#include "paychan/spec_machine.hpp"

namespace paychan {

enum class Verdict { kConsistent, kViolation, kUnknown };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kConsistent: return "consistent";
    case Verdict::kViolation: return "violation";
    case Verdict::kUnknown: return "unknown";
  }
  return "?";
}

/// One operation as the checker sees it. `expected` is empty for pending
/// operations; `checked` is false for synthetic Byzantine operations whose
/// result nobody observed.
struct CheckOp {
  spec::SpecOp op;
  std::optional<spec::SpecResult> expected;
  bool checked = true;
  OpId op_id = 0;
  std::string label;
};

/// Operations that must run in the listed order: one per correct process,
/// plus one per synthetic Byzantine contribution.
struct CheckThread {
  std::string name;
  std::vector<CheckOp> ops;
};

struct CheckOptions {
  std::uint64_t budget = 1'000'000;  // explored states before giving up
};

struct CheckReport {
  Verdict verdict = Verdict::kUnknown;
  std::vector<std::string> witness;  // legal order, when consistent
  std::string evidence;              // why no order works, when violated
  std::uint64_t states = 0;
};

namespace detail {

inline spec::SpecResult to_spec(const OpResult& r) {
  switch (r.kind) {
    case OpResult::Kind::kVoid: return {spec::SpecResult::Kind::kVoid, 0};
    case OpResult::Kind::kSuccess: return {spec::SpecResult::Kind::kSuccess, 0};
    case OpResult::Kind::kFail: return {spec::SpecResult::Kind::kFail, 0};
    case OpResult::Kind::kValue: return {spec::SpecResult::Kind::kValue, r.value.units()};
  }
  return {};
}

inline std::string to_string(const spec::SpecResult& r) {
  switch (r.kind) {
    case spec::SpecResult::Kind::kVoid: return "void";
    case spec::SpecResult::Kind::kSuccess: return "success";
    case spec::SpecResult::Kind::kFail: return "fail";
    case spec::SpecResult::Kind::kValue: return std::to_string(r.value);
  }
  return "?";
}

inline spec::SpecOp to_spec(ProcessId p, const Invocation& inv) {
  spec::SpecOp s;
  s.process = p;
  switch (inv.kind) {
    case OpKind::kRead:
      s.kind = spec::SpecOp::Kind::kRead;
      s.account = inv.account.str();
      break;
    case OpKind::kTransfer:
      s.kind = spec::SpecOp::Kind::kTransfer;
      s.account = inv.account.str();
      for (const auto& o : inv.outputs) s.outputs.emplace_back(o.dest.str(), o.amount.units());
      break;
    case OpKind::kOpen:
    case OpKind::kPay:
    case OpKind::kTargetClose:
      s.kind = inv.kind == OpKind::kOpen  ? spec::SpecOp::Kind::kOpen
               : inv.kind == OpKind::kPay ? spec::SpecOp::Kind::kPay
                                          : spec::SpecOp::Kind::kTargetClose;
      s.a = inv.channel.a.str();
      s.b = inv.channel.b.str();
      s.amt = inv.amt ? inv.amt->units() : 0;
      break;
  }
  return s;
}

inline std::string describe(ProcessId p, const Invocation& inv) {
  return "p" + std::to_string(p) + "." + std::string(to_string(inv.kind)) + to_json(inv).dump();
}

}  // namespace detail

/// Per-process operation sequences of `h` restricted to processes not in
/// `skip`, each response matched to its invocation by op id.
inline std::vector<CheckThread> process_threads(const History& h, const std::set<ProcessId>& skip = {}) {
  std::map<ProcessId, CheckThread> threads;
  std::map<OpId, std::pair<ProcessId, std::size_t>> where;
  for (const auto& e : h.events) {
    if (skip.contains(e.process) || e.kind == EventKind::kEffect) continue;
    auto& t = threads[e.process];
    if (e.kind == EventKind::kInvocation) {
      if (!t.ops.empty() && !t.ops.back().expected)
        throw TraceParseError("process " + std::to_string(e.process) + " invoked op " + std::to_string(e.op_id) +
                              " while another was pending");
      t.name = "p" + std::to_string(e.process);
      t.ops.push_back({detail::to_spec(e.process, e.inv), std::nullopt, true, e.op_id, detail::describe(e.process, e.inv)});
      where[e.op_id] = {e.process, t.ops.size() - 1};
    } else {
      auto it = where.find(e.op_id);
      if (it == where.end() || it->second.first != e.process)
        throw TraceParseError("response to unknown op " + std::to_string(e.op_id));
      auto& op = threads[e.process].ops[it->second.second];
      if (op.expected) throw TraceParseError("second response to op " + std::to_string(e.op_id));
      op.expected = detail::to_spec(e.result);
    }
  }
  std::vector<CheckThread> out;
  for (auto& [p, t] : threads) out.push_back(std::move(t));
  return out;
}

inline std::map<std::string, spec::Pid> owner_map(const History& h) {
  std::map<std::string, spec::Pid> owners;
  for (const auto& a : h.accounts) owners[a.id.str()] = a.owner;
  return owners;
}

inline std::map<std::string, std::int64_t> genesis_map(const History& h) {
  std::map<std::string, std::int64_t> g;
  for (const auto& a : h.accounts) g[a.id.str()] = a.balance.units();
  return g;
}

/// Depth-first search for a legal interleaving of `threads`, memoized on
/// (per-thread progress, machine state). Pending operations may either be
/// dropped or take effect with an unobserved result.
class OrderSearch {
 public:
  OrderSearch(std::vector<CheckThread> threads, spec::SpecMachine init, CheckOptions opts)
      : threads_(std::move(threads)), init_(std::move(init)), opts_(opts) {}

  CheckReport run() {
    CheckReport rep;
    std::vector<std::size_t> frontier(threads_.size(), 0);
    try {
      if (dfs(frontier, init_)) {
        rep.verdict = Verdict::kConsistent;
        rep.witness.assign(path_.begin(), path_.end());
      } else {
        rep.verdict = Verdict::kViolation;
        rep.evidence = evidence();
      }
    } catch (const BudgetExceeded&) {
      rep.verdict = Verdict::kUnknown;
      rep.evidence = "search budget of " + std::to_string(opts_.budget) + " states exhausted";
    }
    rep.states = states_;
    return rep;
  }

 private:
  struct BudgetExceeded {};

  bool dfs(std::vector<std::size_t>& frontier, const spec::SpecMachine& m) {
    bool done = true;
    for (std::size_t t = 0; t < threads_.size(); ++t)
      if (frontier[t] < threads_[t].ops.size()) done = false;
    if (done) return true;

    std::string key;
    for (auto i : frontier) key += std::to_string(i) + ',';
    key += m.key();
    if (failed_.contains(key)) return false;
    if (++states_ > opts_.budget) throw BudgetExceeded{};

    std::size_t depth = path_.size();
    for (std::size_t t = 0; t < threads_.size(); ++t) {
      if (frontier[t] >= threads_[t].ops.size()) continue;
      const auto& c = threads_[t].ops[frontier[t]];
      ++frontier[t];
      if (!c.expected) {
        path_.push_back(c.label + " (pending, dropped)");
        if (dfs(frontier, m)) return true;
        path_.pop_back();
      }
      auto next = m;
      auto got = next.apply(c.op);
      bool ok = !c.checked || !c.expected || m.matches(c.op, got, *c.expected);
      if (ok) {
        path_.push_back(c.label + " -> " + detail::to_string(got));
        if (dfs(frontier, next)) return true;
        path_.pop_back();
      } else if (depth >= best_depth_) {
        if (depth > best_depth_) blocked_.clear();
        best_depth_ = depth;
        best_prefix_.assign(path_.begin(), path_.end());
        blocked_.push_back(c.label + " returned " + detail::to_string(*c.expected) + ", specification gives " +
                           detail::to_string(got));
      }
      --frontier[t];
    }
    failed_.insert(std::move(key));
    return false;
  }

  std::string evidence() const {
    std::ostringstream os;
    os << "no legal sequential order exists (" << states_ << " states explored)\n";
    os << "longest legal prefix (" << best_prefix_.size() << " ops):\n";
    for (const auto& s : best_prefix_) os << "  " << s << '\n';
    os << "every continuation fails:\n";
    for (const auto& s : blocked_) os << "  " << s << '\n';
    return os.str();
  }

  std::vector<CheckThread> threads_;
  spec::SpecMachine init_;
  CheckOptions opts_;
  std::unordered_set<std::string> failed_;
  std::vector<std::string> path_;
  std::vector<std::string> best_prefix_;
  std::vector<std::string> blocked_;
  std::size_t best_depth_ = 0;
  std::uint64_t states_ = 0;
};

/// Sequential consistency of every process's operations in `h`.
inline CheckReport check_sc(const History& h, CheckOptions opts = {}) {
  return OrderSearch(process_threads(h), spec::SpecMachine(owner_map(h), genesis_map(h)), opts).run();
}

/// The synthetic Byzantine operations added before searching: for each
/// successful correct target_close on a channel whose source is Byzantine,
/// an open then a transfer of bal_b by the source; for each Byzantine ledger
/// transaction applied at a correct replica, its effect on the balances of
/// correct processes.
inline std::vector<CheckThread> byzantine_threads(const History& h, const std::set<ProcessId>& byz) {
  auto owners = owner_map(h);
  auto owned_by_byz = [&](const std::string& acct) {
    auto it = owners.find(acct);
    return it != owners.end() && byz.contains(it->second);
  };
  auto correct_account = [&](const std::string& acct) {
    auto it = owners.find(acct);
    return it != owners.end() && !byz.contains(it->second);
  };

  std::vector<CheckThread> out;
  std::map<OpId, const HistoryEvent*> invocations;
  for (const auto& e : h.events) {
    if (e.kind == EventKind::kInvocation) invocations[e.op_id] = &e;
    if (e.kind == EventKind::kResponse && !byz.contains(e.process) && e.inv.kind == OpKind::kTargetClose &&
        e.result == OpResult::success()) {
      const auto& ch = e.inv.channel;
      if (!owned_by_byz(ch.a.str())) continue;
      auto src = owners.at(ch.a.str());
      auto bal_b = e.inv.amt.value_or(Amount{});
      CheckThread t;
      t.name = "aug" + std::to_string(e.op_id);
      auto open = Invocation::open(ch, bal_b);
      auto pay = Invocation::pay(ch, bal_b);
      t.ops.push_back({detail::to_spec(src, open), std::nullopt, false, 0, "byz " + detail::describe(src, open)});
      t.ops.push_back({detail::to_spec(src, pay), std::nullopt, false, 0, "byz " + detail::describe(src, pay)});
      for (auto& op : t.ops) op.expected = spec::SpecResult{};
      out.push_back(std::move(t));
    }
    if (e.kind == EventKind::kEffect && byz.contains(e.process)) {
      const auto& inv = e.inv;
      CheckOp c;
      c.checked = false;
      c.expected = spec::SpecResult{};
      if (!inv.account.is_multi()) {
        bool touches_correct = false;
        for (const auto& o : inv.outputs) touches_correct |= correct_account(o.dest.str());
        if (!touches_correct) continue;
        c.op = detail::to_spec(e.process, inv);
        c.op.kind = spec::SpecOp::Kind::kEffect;
        c.label = "byz effect " + detail::describe(e.process, inv);
      } else {
        // An escrow spend submitted by a Byzantine target of a correct
        // source is that target's close.
        if (inv.outputs.size() != 2) continue;
        ChannelId ch{inv.outputs[0].dest, inv.outputs[1].dest};
        if (!correct_account(ch.a.str()) || !owned_by_byz(ch.b.str())) continue;
        auto close = Invocation::target_close(ch, inv.outputs[1].amount);
        auto tgt = owners.at(ch.b.str());
        c.op = detail::to_spec(tgt, close);
        c.label = "byz " + detail::describe(tgt, close);
      }
      out.push_back({"effect" + std::to_string(e.event_id), {std::move(c)}});
    }
  }
  return out;
}

/// Byzantine sequential consistency: Byzantine processes' own events are
/// dropped, the synthetic operations above are added, and some legal order
/// must exist for the result.
inline CheckReport check_bsc(const History& h, const std::set<ProcessId>& byz, CheckOptions opts = {}) {
  auto threads = process_threads(h, byz);
  for (auto& t : byzantine_threads(h, byz)) threads.push_back(std::move(t));
  return OrderSearch(std::move(threads), spec::SpecMachine(owner_map(h), genesis_map(h), byz), opts).run();
}

struct ReplayResult {
  bool legal = true;
  std::optional<OpId> first_illegal;
  std::string detail;
};

/// Runs the operations of `h` in the given op-id order against the
/// specification. The order must contain every completed operation once and
/// respect each process's order.
inline ReplayResult replay(const History& h, const std::vector<OpId>& order) {
  auto threads = process_threads(h);
  std::map<OpId, std::pair<std::size_t, std::size_t>> pos;
  for (std::size_t t = 0; t < threads.size(); ++t)
    for (std::size_t i = 0; i < threads[t].ops.size(); ++i) pos[threads[t].ops[i].op_id] = {t, i};
  std::vector<std::size_t> next(threads.size(), 0);
  spec::SpecMachine m(owner_map(h), genesis_map(h));
  for (auto id : order) {
    auto it = pos.find(id);
    if (it == pos.end()) throw std::invalid_argument("op " + std::to_string(id) + " is not in the history");
    auto [t, i] = it->second;
    if (next[t] != i) throw std::invalid_argument("order breaks the program order of " + threads[t].name);
    ++next[t];
    const auto& c = threads[t].ops[i];
    auto got = m.apply(c.op);
    if (c.expected && !m.matches(c.op, got, *c.expected))
      return {false, id,
              c.label + " returned " + detail::to_string(*c.expected) + ", specification gives " +
                  detail::to_string(got)};
  }
  return {};
}

}  // namespace paychan
