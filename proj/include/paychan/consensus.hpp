#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Two-process consensus from a payment channel object, run over
// atomic shared-memory objects and explored over every interleaving and
// every single-crash prefix.
namespace paychan::consensus {

enum class ObjectKind { kBidirectional, kUnidirectionalSourceClose };

inline std::string_view to_string(ObjectKind k) {
  return k == ObjectKind::kBidirectional ? "bidirectional" : "unidirectional-source-close";
}

struct ObjectMutation {
  bool close_ignores_closed = false;  // close acts on the last open balances even after the channel closed
};

/// Shared objects of the protocol: asset accounts A(a), A(b), the channel (a,b),
/// and registers R1, R2. Each member function is one atomic step.
struct SharedState {
  std::int64_t acct_a = 0;
  std::int64_t acct_b = 0;
  std::optional<std::pair<std::int64_t, std::int64_t>> channel{{1, 1}};
  std::pair<std::int64_t, std::int64_t> last_open{1, 1};
  std::array<std::optional<int>, 2> reg{};
  int successful_closes = 0;
};

enum class Side { kA, kB };

/// Channel operations with the object's sequential semantics.
class ChannelObject {
 public:
  ChannelObject(ObjectKind kind, ObjectMutation mut) : kind_(kind), mut_(mut) {}

  ObjectKind kind() const { return kind_; }

  void transfer(SharedState& s, Side caller, std::int64_t amt) const {
    if (!s.channel) return;
    auto& [bal_a, bal_b] = *s.channel;
    if (caller == Side::kA && bal_a >= amt) {
      bal_a -= amt;
      bal_b += amt;
    } else if (caller == Side::kB && kind_ == ObjectKind::kBidirectional && bal_b >= amt) {
      bal_a += amt;
      bal_b -= amt;
    }
    s.last_open = *s.channel;
  }

  /// close for the bidirectional object; source_close / target_close for
  /// the unidirectional one. Same guard shape: the caller may not claim
  /// more than its own side.
  bool close(SharedState& s, Side caller, std::int64_t bal) const {
    std::pair<std::int64_t, std::int64_t> curr;
    if (s.channel) curr = *s.channel;
    else if (mut_.close_ignores_closed) curr = s.last_open;
    else return false;
    auto own = caller == Side::kA ? curr.first : curr.second;
    if (bal > own) return false;
    auto other = curr.first + curr.second - bal;
    auto [amt_a, amt_b] = caller == Side::kA ? std::pair{bal, other} : std::pair{other, bal};
    s.acct_a += amt_a;
    s.acct_b += amt_b;
    s.channel.reset();
    ++s.successful_closes;
    return true;
  }

 private:
  ObjectKind kind_;
  ObjectMutation mut_;
};

enum class Step { kWriteReg, kTransfer, kClose, kWait, kReadB, kDecide, kDone };

/// Program for p1 = owner(a) (index 0) and p2 = owner(b) (index 1). With the
/// unidirectional object p1 closes through source_close and p2 through
/// target_close; the calls are otherwise identical.
struct ProcState {
  std::size_t pc = 0;
  std::int64_t seen_b = 0;
  std::optional<int> decision;
  bool crashed = false;
};

inline const std::vector<Step>& program(int who) {
  static const std::vector<Step> p1{Step::kWriteReg, Step::kTransfer, Step::kClose, Step::kWait, Step::kReadB,
                                    Step::kDecide, Step::kDone};
  static const std::vector<Step> p2{Step::kWriteReg, Step::kClose, Step::kWait, Step::kReadB, Step::kDecide,
                                    Step::kDone};
  return who == 0 ? p1 : p2;
}

struct Report {
  ObjectKind kind = ObjectKind::kBidirectional;
  bool mutated = false;
  std::uint64_t schedules = 0;
  std::uint64_t completed = 0;   // no crash, both decided
  std::uint64_t with_crash = 0;
  std::uint64_t decided_v1 = 0;  // completed schedules deciding p1's value
  std::uint64_t decided_v2 = 0;
  std::uint64_t final_b_1 = 0;  // completed schedules with A(b) = 1
  std::uint64_t final_b_2 = 0;
  std::vector<std::string> violations;  // first few, each with its schedule

  std::uint64_t total_violations = 0;

  bool ok() const { return total_violations == 0; }

  std::string str() const {
    std::ostringstream os;
    os << "object: " << to_string(kind) << (mutated ? " (mutated close)" : "") << '\n'
       << "schedules: " << schedules << '\n'
       << "completed: " << completed << '\n'
       << "with_crash: " << with_crash << '\n'
       << "decided_p1_value: " << decided_v1 << '\n'
       << "decided_p2_value: " << decided_v2 << '\n'
       << "final_A_b_1: " << final_b_1 << '\n'
       << "final_A_b_2: " << final_b_2 << '\n'
       << "violations: " << total_violations << '\n';
    for (const auto& v : violations) os << "  " << v << '\n';
    return os.str();
  }
};

class Explorer {
 public:
  static constexpr std::array<int, 2> kProposal{101, 202};
  static constexpr int kBottom = -1;

  Explorer(ObjectKind kind, ObjectMutation mut = {}) : obj_(kind, mut) {
    rep_.kind = kind;
    rep_.mutated = mut.close_ignores_closed;
  }

  Report run() {
    SharedState s;
    std::array<ProcState, 2> ps{};
    std::string sched;
    dfs(s, ps, false, sched);
    return rep_;
  }

 private:
  static bool finished(const ProcState& p, int who) { return program(who)[p.pc] == Step::kDone; }

  bool enabled(const SharedState& s, const ProcState& p, int who) const {
    if (p.crashed || finished(p, who)) return false;
    if (program(who)[p.pc] == Step::kWait) return s.acct_b != 0;
    return true;
  }

  void exec(SharedState& s, ProcState& p, int who) const {
    auto side = who == 0 ? Side::kA : Side::kB;
    switch (program(who)[p.pc]) {
      case Step::kWriteReg:
        s.reg[who] = kProposal[who];
        break;
      case Step::kTransfer:
        obj_.transfer(s, side, 1);
        break;
      case Step::kClose:
        obj_.close(s, side, who == 0 ? 0 : 1);
        break;
      case Step::kWait:
        break;
      case Step::kReadB:
        p.seen_b = s.acct_b;
        break;
      case Step::kDecide:
        // an unwritten register decides a value no process proposed
        p.decision = (p.seen_b == 2 ? s.reg[0] : s.reg[1]).value_or(kBottom);
        break;
      case Step::kDone:
        return;
    }
    ++p.pc;
  }

  void dfs(const SharedState& s, const std::array<ProcState, 2>& ps, bool crash_used, std::string& sched) {
    bool any = false;
    for (int who = 0; who < 2; ++who) {
      if (!enabled(s, ps[who], who)) continue;
      any = true;
      auto s2 = s;
      auto ps2 = ps;
      exec(s2, ps2[who], who);
      auto len = sched.size();
      sched += who == 0 ? "1" : "2";
      dfs(s2, ps2, crash_used, sched);
      sched.resize(len);
    }
    if (!crash_used) {
      for (int who = 0; who < 2; ++who) {
        if (ps[who].crashed || finished(ps[who], who)) continue;
        any = true;
        auto ps2 = ps;
        ps2[who].crashed = true;
        auto len = sched.size();
        sched += who == 0 ? "x1" : "x2";
        dfs(s, ps2, true, sched);
        sched.resize(len);
      }
    }
    if (!any) leaf(s, ps, crash_used, sched);
  }

  void leaf(const SharedState& s, const std::array<ProcState, 2>& ps, bool crashed, const std::string& sched) {
    ++rep_.schedules;
    std::vector<std::string> bad;
    std::optional<int> agreed;
    for (int who = 0; who < 2; ++who) {
      const auto& p = ps[who];
      if (p.crashed) continue;
      if (!p.decision) {
        bad.push_back("p" + std::to_string(who + 1) + " blocked");
        continue;
      }
      if (*p.decision == kBottom) bad.push_back("p" + std::to_string(who + 1) + " decided an unwritten register");
      else if (*p.decision != kProposal[0] && *p.decision != kProposal[1]) bad.push_back("invalid decision");
      if (agreed && *agreed != *p.decision) bad.push_back("disagreement");
      agreed = p.decision;
    }
    if (s.successful_closes > 1) bad.push_back("channel closed twice");
    if (crashed) {
      ++rep_.with_crash;
    } else {
      ++rep_.completed;
      if (s.acct_b == 1) ++rep_.final_b_1;
      else if (s.acct_b == 2) ++rep_.final_b_2;
      else bad.push_back("final A(b) = " + std::to_string(s.acct_b));
      if (agreed == kProposal[0]) ++rep_.decided_v1;
      if (agreed == kProposal[1]) ++rep_.decided_v2;
    }
    if (bad.empty()) return;
    ++rep_.total_violations;
    if (rep_.violations.size() < 5) {
      std::string msg = "schedule " + sched + ":";
      for (const auto& b : bad) msg += " " + b + ";";
      rep_.violations.push_back(msg);
    }
  }

  ChannelObject obj_;
  Report rep_;
};

inline Report explore(ObjectKind kind, ObjectMutation mut = {}) { return Explorer(kind, mut).run(); }

}  // namespace paychan::consensus
