#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "paychan/transaction.hpp"

namespace paychan {

enum class DropReason {
  kUndecodable,
  kMalformed,
  kBadOrigin,
  kUnauthorized,
  kStaleNonce,
  kBadDependency,
  kInsufficientFunds,
};

inline std::string_view to_string(DropReason r) {
  switch (r) {
    case DropReason::kUndecodable: return "undecodable";
    case DropReason::kMalformed: return "malformed";
    case DropReason::kBadOrigin: return "bad_origin";
    case DropReason::kUnauthorized: return "unauthorized";
    case DropReason::kStaleNonce: return "stale_nonce";
    case DropReason::kBadDependency: return "bad_dependency";
    case DropReason::kInsufficientFunds: return "insufficient_funds";
  }
  return "unknown";
}

struct LedgerEvent {
  enum class Kind { kApplied, kDropped };
  Kind kind;
  ProcessId origin;
  TransferTx tx;
  DropReason reason = DropReason::kMalformed;  // meaningful for kDropped
};

struct LedgerOptions {
  bool require_complete_multisig = true;
};

/// Balances and nonces of one replica. Equality of snapshots is what replica
/// convergence tests compare.
struct LedgerSnapshot {
  std::map<AccountId, Amount> balances;  // zero balances omitted
  std::map<AccountId, std::uint64_t> nonces;
  friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

/// One replica of the asset-transfer object.
///
/// A delivered transaction from account s with nonce k is
///   - held while k > nonce(s) + 1 or some dependency is not applied yet,
///   - dropped if it is malformed, not broadcast by an owner of s, not
///     authorized, stale (k <= nonce(s)), claims a dependency that is not an
///     unclaimed credit to s, or overspends s,
///   - applied otherwise.
/// Funds are checked against spendable(s) = genesis + claimed credits - debits
/// plus the credits the transaction itself claims. Both terms depend only on
/// s's own ordered history and on the contents of the dependencies, so every
/// correct replica reaches the same verdict for the same transaction.
class LedgerReplica {
 public:
  LedgerReplica(const Directory& dir, const std::map<AccountId, Amount>& genesis, LedgerOptions opts = {})
      : dir_(&dir), opts_(opts) {
    for (const auto& [a, amt] : genesis) {
      balances_[a] = amt;
      spendable_[a] = amt;
    }
  }

  /// O(1)-ish local read; unknown accounts read as zero.
  Amount read(const AccountId& a) const {
    auto it = balances_.find(a);
    return it == balances_.end() ? Amount{} : it->second;
  }

  std::uint64_t nonce(const AccountId& a) const {
    auto it = nonces_.find(a);
    return it == nonces_.end() ? 0 : it->second;
  }

  bool is_applied(const TxRef& r) const { return applied_.contains(r); }

  /// Amount that applied transaction `r` credited to `to`.
  std::optional<Amount> credit_of(const TxRef& r, const AccountId& to) const {
    auto it = applied_.find(r);
    if (it == applied_.end()) return std::nullopt;
    auto c = it->second.find(to);
    if (c == it->second.end()) return std::nullopt;
    return c->second;
  }

  std::vector<TxRef> unclaimed_credits(const AccountId& a) const {
    auto it = unclaimed_.find(a);
    if (it == unclaimed_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

  /// Builds an unsigned transfer from `source` that claims every credit this
  /// replica has applied to it, so it can spend up to read(source).
  TransferTx prepare_transfer(const AccountId& source, std::vector<Output> outputs) const {
    TransferTx tx;
    tx.source = source;
    tx.outputs = std::move(outputs);
    tx.nonce = nonce(source) + 1;
    tx.deps = unclaimed_credits(source);
    return tx;
  }

  /// Local admission: nullopt iff `tx`, broadcast by `origin`, would apply
  /// immediately on this replica.
  std::optional<DropReason> admission(const TransferTx& tx, ProcessId origin) const {
    auto [verdict, reason] = evaluate(tx, origin);
    if (verdict == Verdict::kApply) return std::nullopt;
    if (verdict == Verdict::kHold) return tx.nonce > nonce(tx.source) + 1 ? DropReason::kStaleNonce
                                                                          : DropReason::kBadDependency;
    return reason;
  }

  std::vector<LedgerEvent> deliver(ProcessId origin, const TransferTx& tx) {
    std::vector<LedgerEvent> events;
    auto [verdict, reason] = evaluate(tx, origin);
    switch (verdict) {
      case Verdict::kApply:
        apply(tx);
        events.push_back({LedgerEvent::Kind::kApplied, origin, tx});
        drain_held(events);
        break;
      case Verdict::kHold:
        held_.emplace_back(origin, tx);
        break;
      case Verdict::kDrop:
        ++drops_[reason];
        events.push_back({LedgerEvent::Kind::kDropped, origin, tx, reason});
        break;
    }
    return events;
  }

  std::vector<LedgerEvent> deliver_bytes(ProcessId origin, std::span<const std::uint8_t> payload) {
    TransferTx tx;
    try {
      tx = decode_tx(payload);
    } catch (const DecodeError&) {
      ++drops_[DropReason::kUndecodable];
      return {};
    }
    return deliver(origin, tx);
  }

  Amount total() const {
    Amount sum;
    for (const auto& [a, b] : balances_) sum += b;
    return sum;
  }

  bool any_negative() const {
    for (const auto& [a, b] : balances_)
      if (b.is_negative()) return true;
    return false;
  }

  LedgerSnapshot snapshot() const {
    LedgerSnapshot s;
    for (const auto& [a, b] : balances_)
      if (b != Amount{}) s.balances.emplace(a, b);
    s.nonces = nonces_;
    return s;
  }

  const std::map<DropReason, std::uint64_t>& drops() const { return drops_; }
  std::size_t held() const { return held_.size(); }

 private:
  enum class Verdict { kApply, kHold, kDrop };

  std::pair<Verdict, DropReason> evaluate(const TransferTx& tx, ProcessId origin) const {
    if (!is_well_formed(tx)) return {Verdict::kDrop, DropReason::kMalformed};
    if (!dir_->is_owner(origin, tx.source)) return {Verdict::kDrop, DropReason::kBadOrigin};
    if (!is_authorized(tx, *dir_, opts_.require_complete_multisig))
      return {Verdict::kDrop, DropReason::kUnauthorized};
    auto last = nonce(tx.source);
    if (tx.nonce <= last) return {Verdict::kDrop, DropReason::kStaleNonce};

    bool waiting = tx.nonce > last + 1;
    Amount claimed;
    auto unclaimed = unclaimed_.find(tx.source);
    for (const auto& dep : tx.deps) {
      if (!applied_.contains(dep)) {
        waiting = true;
        continue;
      }
      if (unclaimed == unclaimed_.end() || !unclaimed->second.contains(dep))
        return {Verdict::kDrop, DropReason::kBadDependency};
      claimed += *credit_of(dep, tx.source);
    }
    if (waiting) return {Verdict::kHold, DropReason::kMalformed};
    if (spendable(tx.source) + claimed < tx.total()) return {Verdict::kDrop, DropReason::kInsufficientFunds};
    return {Verdict::kApply, DropReason::kMalformed};
  }

  Amount spendable(const AccountId& a) const {
    auto it = spendable_.find(a);
    return it == spendable_.end() ? Amount{} : it->second;
  }

  void apply(const TransferTx& tx) {
    auto& unclaimed = unclaimed_[tx.source];
    Amount claimed;
    for (const auto& dep : tx.deps) {
      claimed += *credit_of(dep, tx.source);
      unclaimed.erase(dep);
    }
    auto total = tx.total();
    spendable_[tx.source] += claimed - total;
    balances_[tx.source] -= total;
    nonces_[tx.source] = tx.nonce;

    auto& credits = applied_[tx.ref()];
    for (const auto& o : tx.outputs) {
      balances_[o.dest] += o.amount;
      credits[o.dest] += o.amount;
      unclaimed_[o.dest].insert(tx.ref());
    }
  }

  void drain_held(std::vector<LedgerEvent>& events) {
    bool progress = true;
    while (progress) {
      progress = false;
      for (auto it = held_.begin(); it != held_.end();) {
        auto [verdict, reason] = evaluate(it->second, it->first);
        if (verdict == Verdict::kHold) {
          ++it;
          continue;
        }
        auto [origin, tx] = std::move(*it);
        it = held_.erase(it);
        if (verdict == Verdict::kApply) {
          apply(tx);
          events.push_back({LedgerEvent::Kind::kApplied, origin, std::move(tx)});
          progress = true;
        } else {
          ++drops_[reason];
          events.push_back({LedgerEvent::Kind::kDropped, origin, std::move(tx), reason});
        }
      }
    }
  }

  const Directory* dir_;
  LedgerOptions opts_;
  std::map<AccountId, Amount> balances_;
  std::map<AccountId, Amount> spendable_;
  std::map<AccountId, std::uint64_t> nonces_;
  std::map<TxRef, std::map<AccountId, Amount>> applied_;
  std::map<AccountId, std::set<TxRef>> unclaimed_;
  std::vector<std::pair<ProcessId, TransferTx>> held_;
  std::map<DropReason, std::uint64_t> drops_;
};

}  // namespace paychan
