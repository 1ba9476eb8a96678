#pragma once

#include <deque>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "paychan/byzantine.hpp"
#include "paychan/history.hpp"
#include "paychan/node.hpp"

namespace paychan {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct StepCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScriptedOp {
  std::uint64_t at = 0;  // earliest step at which the invocation is enabled
  ProcessId process = 0;
  Invocation inv;
};

/// Holds back messages into `victim` from every sender outside `except`
/// until step `until`, or until nothing else can happen.
struct StarveRule {
  ProcessId victim = 0;
  std::set<ProcessId> except;
  std::uint64_t until = 0;
};

struct WorldConfig {
  std::size_t n = 4;
  std::size_t f = 1;
  std::uint64_t seed = 1;
  std::vector<AccountInfo> accounts;
  std::vector<ByzantineSpec> byzantine;
  std::vector<ScriptedOp> script;
  LedgerOptions ledger;
  ChannelMutations channel;
  std::vector<StarveRule> starve;
  std::uint64_t step_cap = 1'000'000;
};

struct OpMetrics {
  OpId op = 0;
  OpKind kind = OpKind::kRead;
  ProcessId process = 0;
  bool correct = true;
  std::uint64_t msgs_correct = 0;  // network messages sent by correct processes
  std::uint64_t msgs_total = 0;    // network messages sent by anyone
  std::uint64_t self_msgs = 0;
  std::uint64_t brb_instances = 0;
  std::uint64_t channel_msgs = 0;
};

struct Envelope {
  ProcessId src = 0;
  ProcessId dst = 0;
  Message msg;
  OpId tag = 0;  // top-level operation this message is charged to
  bool sent_by_correct = true;
};

struct RunResult {
  History history;
  std::vector<OpMetrics> metrics;
  std::uint64_t steps = 0;
  std::size_t unfinished_ops = 0;  // correct-process ops not invoked or not answered
};

/// Throws ConfigError unless the configuration is runnable.
inline void validate(const WorldConfig& cfg) {
  if (cfg.n == 0) throw ConfigError("n must be positive");
  if (3 * cfg.f >= cfg.n) throw ConfigError("need f < n/3");
  if (cfg.byzantine.size() > cfg.f) throw ConfigError("more Byzantine processes than f");
  std::set<ProcessId> byz;
  for (const auto& b : cfg.byzantine) {
    if (b.process >= cfg.n) throw ConfigError("Byzantine process out of range");
    if (!byz.insert(b.process).second) throw ConfigError("process listed as Byzantine twice");
  }
  std::set<AccountId> seen;
  for (const auto& a : cfg.accounts) {
    if (a.owner >= cfg.n) throw ConfigError("account owner out of range: " + a.id.str());
    if (a.id.empty() || a.id.is_multi() || a.id.str().find('+') != std::string::npos)
      throw ConfigError("bad account id: " + a.id.str());
    if (a.balance.is_negative()) throw ConfigError("negative genesis balance: " + a.id.str());
    if (!seen.insert(a.id).second) throw ConfigError("duplicate account: " + a.id.str());
  }
  for (const auto& s : cfg.script)
    if (s.process >= cfg.n) throw ConfigError("scripted process out of range");
}

/// Deterministic asynchronous network: reliable FIFO links between every
/// ordered pair (self-links included), a seeded uniform scheduler over the
/// enabled events, and per-operation message accounting.
class World {
 public:
  explicit World(WorldConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    validate(cfg_);
    std::map<ProcessId, std::map<AccountId, crypto::KeyPair>> keys;
    for (const auto& a : cfg_.accounts) {
      auto kp = crypto::derive_keypair(a.id.str(), cfg_.seed);
      dir_.add_account(kp, a.owner);
      keys[a.owner].emplace(a.id, kp);
      genesis_[a.id] = a.balance;
      initial_total_ += a.balance;
    }
    NodeConfig nc{cfg_.n, cfg_.f, cfg_.ledger, cfg_.channel};
    std::map<ProcessId, ByzantineSpec> byz;
    for (const auto& b : cfg_.byzantine) byz[b.process] = b;
    for (ProcessId p = 0; p < cfg_.n; ++p) {
      auto node = std::make_unique<Node>(p, dir_, genesis_, keys[p], nc);
      if (auto it = byz.find(p); it != byz.end()) {
        procs_.push_back(std::make_unique<ByzantineNode>(std::move(node), it->second, cfg_.seed ^ (0x9e37ull * (p + 1))));
        history_.byzantine.insert(p);
      } else {
        correct_.push_back(node.get());
        procs_.push_back(std::move(node));
      }
    }
    history_.n = cfg_.n;
    history_.f = cfg_.f;
    history_.seed = cfg_.seed;
    history_.accounts = cfg_.accounts;
    scripts_.resize(cfg_.n);
    for (std::size_t i = 0; i < cfg_.script.size(); ++i)
      scripts_[cfg_.script[i].process].push_back({static_cast<OpId>(i + 1), cfg_.script[i]});
  }

  World(const World&) = delete;
  World& operator=(const World&) = delete;

  /// Executes one enabled event; false when quiescent.
  bool step() {
    std::vector<Event> enabled = collect(true);
    if (enabled.empty()) enabled = collect(false);
    if (enabled.empty()) return false;
    auto ev = enabled[rng_() % enabled.size()];
    ++steps_;
    if (ev.is_invocation) invoke(ev.process);
    else deliver(ev.link);
    return true;
  }

  RunResult run() {
    while (step())
      if (steps_ >= cfg_.step_cap) throw StepCapExceeded("not quiescent after " + std::to_string(steps_) + " steps");
    return result();
  }

  RunResult result() const {
    RunResult r;
    r.history = history_;
    for (const auto& [op, m] : metrics_) r.metrics.push_back(m);
    r.steps = steps_;
    r.unfinished_ops = unfinished_ops();
    return r;
  }

  std::size_t unfinished_ops() const {
    std::size_t k = 0;
    for (ProcessId p = 0; p < cfg_.n; ++p) {
      if (!procs_[p]->is_correct()) continue;
      k += scripts_[p].size();
      if (procs_[p]->busy()) ++k;
    }
    return k;
  }

  const WorldConfig& config() const { return cfg_; }
  const Directory& directory() const { return dir_; }
  const History& history() const { return history_; }
  std::uint64_t steps() const { return steps_; }
  Amount initial_total() const { return initial_total_; }
  const std::vector<Node*>& correct_nodes() const { return correct_; }
  Process& process(ProcessId p) { return *procs_[p]; }
  std::size_t in_flight() const {
    std::size_t k = 0;
    for (const auto& [l, q] : links_) k += q.size();
    return k;
  }
  const std::map<OpId, OpMetrics>& metrics() const { return metrics_; }

 private:
  using Link = std::pair<ProcessId, ProcessId>;

  struct Event {
    bool is_invocation = false;
    ProcessId process = 0;
    Link link{};
  };

  struct QueuedOp {
    OpId id;
    ScriptedOp op;
  };

  bool starved(const Link& l) const {
    for (const auto& r : cfg_.starve)
      if (l.second == r.victim && !r.except.contains(l.first) && steps_ < r.until) return true;
    return false;
  }

  std::vector<Event> collect(bool strict) const {
    std::vector<Event> out;
    for (const auto& [link, q] : links_)
      if (!q.empty() && !(strict && starved(link))) out.push_back({false, 0, link});
    for (ProcessId p = 0; p < cfg_.n; ++p) {
      if (scripts_[p].empty() || procs_[p]->busy()) continue;
      if (strict && scripts_[p].front().op.at > steps_) continue;
      out.push_back({true, p, {}});
    }
    return out;
  }

  void invoke(ProcessId p) {
    auto q = std::move(scripts_[p].front());
    scripts_[p].pop_front();
    auto& proc = *procs_[p];
    auto inv = proc.resolve(q.op.inv);
    bool correct = proc.is_correct();
    auto& m = metrics_[q.id];
    m.op = q.id;
    m.kind = inv.kind;
    m.process = p;
    m.correct = correct;
    record({0, p, EventKind::kInvocation, q.id, inv, {}, correct});
    open_ops_[q.id] = inv;
    NodeOutput out;
    proc.invoke(q.id, inv, out);
    absorb(p, q.id, out);
  }

  void deliver(const Link& l) {
    auto& queue = links_[l];
    auto env = std::move(queue.front());
    queue.pop_front();
    NodeOutput out;
    procs_[env.dst]->receive(env.src, env.msg, out);
    absorb(env.dst, env.tag, out);
  }

  void absorb(ProcessId p, OpId tag, NodeOutput& out) {
    bool correct = procs_[p]->is_correct();
    auto& m = metrics_[tag];
    m.brb_instances += out.broadcasts;
    for (auto& s : out.sends) {
      if (s.to == p) {
        ++m.self_msgs;
      } else {
        ++m.msgs_total;
        if (correct) ++m.msgs_correct;
        if (std::holds_alternative<ChannelMsg>(s.msg)) ++m.channel_msgs;
      }
      links_[{p, s.to}].push_back({p, s.to, std::move(s.msg), tag, correct});
    }
    for (const auto& [op, res] : out.responses) {
      auto it = open_ops_.find(op);
      if (it == open_ops_.end()) continue;
      record({0, p, EventKind::kResponse, op, it->second, res, correct});
      open_ops_.erase(it);
    }
    if (!correct) return;
    for (const auto& ev : out.ledger_events) {
      if (ev.kind != LedgerEvent::Kind::kApplied || procs_[ev.origin]->is_correct()) continue;
      if (!effects_seen_.insert(ev.tx.ref()).second) continue;
      record({0, ev.origin, EventKind::kEffect, 0, Invocation::transfer(ev.tx.source, ev.tx.outputs), {}, false});
    }
  }

  void record(HistoryEvent e) {
    e.event_id = history_.events.size();
    history_.events.push_back(std::move(e));
  }

  WorldConfig cfg_;
  std::mt19937_64 rng_;
  Directory dir_;
  std::map<AccountId, Amount> genesis_;
  Amount initial_total_;
  std::vector<std::unique_ptr<Process>> procs_;
  std::vector<Node*> correct_;
  std::vector<std::deque<QueuedOp>> scripts_;
  std::map<Link, std::deque<Envelope>> links_;
  std::map<OpId, OpMetrics> metrics_;
  std::map<OpId, Invocation> open_ops_;
  std::set<TxRef> effects_seen_;
  History history_;
  std::uint64_t steps_ = 0;
};

/// Safety conditions every run must satisfy; returns a description of each
/// breach (empty when all hold). Replica equality is only required when the
/// network has drained.
inline std::vector<std::string> check_invariants(const World& w) {
  std::vector<std::string> breaches;
  const auto& nodes = w.correct_nodes();
  for (const auto* n : nodes) {
    const auto& l = n->ledger();
    auto who = "process " + std::to_string(n->id());
    if (l.total() != w.initial_total())
      breaches.push_back(who + ": total " + l.total().to_string() + " != " + w.initial_total().to_string());
    if (l.any_negative()) breaches.push_back(who + ": negative balance");
    if (n->endpoint().stats().target_regressions)
      breaches.push_back(who + ": accepted a channel tx that lowered the target balance");
    if (n->close_ledger_failures()) breaches.push_back(who + ": target_close ledger invocation failed");
    if (n->stored_close_refusals()) breaches.push_back(who + ": target_close at its stored balance refused");
  }
  if (w.in_flight() == 0 && !nodes.empty()) {
    auto ref = nodes.front()->ledger().snapshot();
    for (const auto* n : nodes)
      if (n->ledger().snapshot() != ref)
        breaches.push_back("replica " + std::to_string(n->id()) + " diverges from replica " +
                           std::to_string(nodes.front()->id()));
  }
  return breaches;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<OpMetrics>& metrics, std::size_t n, std::size_t f) {
  os << "op_id,op_kind,n,f,msgs_correct,msgs_total\n";
  for (const auto& m : metrics)
    if (m.op != 0) os << m.op << ',' << to_string(m.kind) << ',' << n << ',' << f << ',' << m.msgs_correct << ','
                      << m.msgs_total << '\n';
}

}  // namespace paychan
