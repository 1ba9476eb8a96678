#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

// Sequential specification of the asset-transfer object and the
// unidirectional channel object (with target close only), written directly
// from the operation definitions. Deliberately self-contained: plain strings
// and integers, nothing from the protocol modules.
namespace paychan::spec {

using Pid = std::uint32_t;

struct SpecOp {
  enum class Kind : std::uint8_t { kRead, kTransfer, kOpen, kPay, kTargetClose, kEffect };
  Kind kind = Kind::kRead;
  Pid process = 0;
  std::string account;                                   // read, transfer and effect source
  std::vector<std::pair<std::string, std::int64_t>> outputs;  // transfer, effect
  std::string a, b;                                      // channel
  std::int64_t amt = 0;                                  // open/pay amount, target_close bal_b
};

struct SpecResult {
  enum class Kind : std::uint8_t { kVoid, kSuccess, kFail, kValue };
  Kind kind = Kind::kVoid;
  std::int64_t value = 0;
  friend bool operator==(const SpecResult&, const SpecResult&) = default;
};

class SpecMachine {
 public:
  /// `owners` maps each single-key account to its owner. Accounts owned by a
  /// process in `byzantine` are unconstrained: their balance never blocks an
  /// operation and any read of them is acceptable.
  SpecMachine(std::map<std::string, Pid> owners, const std::map<std::string, std::int64_t>& genesis,
              std::set<Pid> byzantine = {})
      : owners_(std::move(owners)), byzantine_(std::move(byzantine)) {
    for (const auto& [acct, v] : genesis)
      if (v != 0) a_[acct] = v;
  }

  SpecResult apply(const SpecOp& op) {
    switch (op.kind) {
      case SpecOp::Kind::kRead:
        return {SpecResult::Kind::kValue, balance(op.account)};
      case SpecOp::Kind::kTransfer: {
        if (!is_owner(op.process, op.account) || op.outputs.empty()) return fail();
        std::int64_t total = 0;
        for (const auto& [d, v] : op.outputs) {
          if (v < 0) return fail();
          total += v;
        }
        if (!covers(op.account, total)) return fail();
        move_out(op.account, op.outputs, total);
        return success();
      }
      case SpecOp::Kind::kEffect: {
        std::int64_t total = 0;
        for (const auto& [d, v] : op.outputs) total += v;
        move_out(op.account, op.outputs, total);
        return {};
      }
      case SpecOp::Kind::kOpen: {
        auto key = std::make_pair(op.a, op.b);
        if (!is_owner(op.process, op.a) || b_.contains(key) || op.amt < 0 || !covers(op.a, op.amt)) return fail();
        add(op.a, -op.amt);
        b_[key] = {op.amt, 0};
        return success();
      }
      case SpecOp::Kind::kPay: {
        auto it = b_.find({op.a, op.b});
        if (!is_owner(op.process, op.a) || it == b_.end() || op.amt < 0) return {};
        auto& [bal_a, bal_b] = it->second;
        if (bal_a < op.amt) return {};
        bal_a -= op.amt;
        bal_b += op.amt;
        return {};
      }
      case SpecOp::Kind::kTargetClose: {
        auto it = b_.find({op.a, op.b});
        if (!is_owner(op.process, op.b) || it == b_.end()) return fail();
        auto [curr_a, curr_b] = it->second;
        if (op.amt > curr_b || op.amt < 0) return fail();
        add(op.a, curr_a + curr_b - op.amt);
        add(op.b, op.amt);
        b_.erase(it);
        return success();
      }
    }
    return fail();
  }

  /// Whether `observed` is an acceptable response for `op` given the
  /// machine's `computed` one.
  bool matches(const SpecOp& op, const SpecResult& computed, const SpecResult& observed) const {
    if (op.kind == SpecOp::Kind::kRead && unconstrained(op.account)) return observed.kind == SpecResult::Kind::kValue;
    if (op.kind == SpecOp::Kind::kPay) return true;  // no meaningful response
    return computed == observed;
  }

  std::int64_t balance(const std::string& acct) const {
    auto it = a_.find(acct);
    return it == a_.end() ? 0 : it->second;
  }

  bool channel_open(const std::string& a, const std::string& b) const { return b_.contains({a, b}); }

  /// Canonical encoding of the state, for memoization.
  std::string key() const {
    std::string k;
    for (const auto& [acct, v] : a_) k += acct + '=' + std::to_string(v) + ';';
    k += '|';
    for (const auto& [ch, bal] : b_)
      k += ch.first + '>' + ch.second + '=' + std::to_string(bal.first) + ',' + std::to_string(bal.second) + ';';
    return k;
  }

 private:
  static SpecResult success() { return {SpecResult::Kind::kSuccess, 0}; }
  static SpecResult fail() { return {SpecResult::Kind::kFail, 0}; }

  bool is_owner(Pid p, const std::string& acct) const {
    auto it = owners_.find(acct);
    return it != owners_.end() && it->second == p;
  }

  bool unconstrained(const std::string& acct) const {
    auto it = owners_.find(acct);
    return it != owners_.end() && byzantine_.contains(it->second);
  }

  bool covers(const std::string& acct, std::int64_t amt) const { return unconstrained(acct) || balance(acct) >= amt; }

  void add(const std::string& acct, std::int64_t v) {
    auto& slot = a_[acct];
    slot += v;
    if (slot == 0) a_.erase(acct);
  }

  void move_out(const std::string& src, const std::vector<std::pair<std::string, std::int64_t>>& outs,
                std::int64_t total) {
    add(src, -total);
    for (const auto& [d, v] : outs) add(d, v);
  }

  std::map<std::string, Pid> owners_;
  std::set<Pid> byzantine_;
  std::map<std::string, std::int64_t> a_;
  std::map<std::pair<std::string, std::string>, std::pair<std::int64_t, std::int64_t>> b_;
};

}  // namespace paychan::spec
