#pragma once

#include <deque>
#include <map>
#include <optional>
#include <vector>

#include "paychan/ledger.hpp"
#include "paychan/transaction.hpp"

namespace paychan {

/// Unidirectional channel from source account `a` to target account `b`.
struct ChannelId {
  AccountId a;
  AccountId b;
  friend auto operator<=>(const ChannelId&, const ChannelId&) = default;
};

/// The 2-of-2 escrow account "ab". Derivable by either endpoint from (a, b)
/// alone; matches MultisigKey's canonical id for the two account keys.
inline AccountId escrow_of(const ChannelId& ch) {
  const auto& lo = std::min(ch.a.str(), ch.b.str());
  const auto& hi = std::max(ch.a.str(), ch.b.str());
  return AccountId(std::string(crypto::MultisigKey::kPrefix) + lo + "+" + hi);
}

enum class ChannelMsgKind : std::uint8_t { kOpen, kTransfer, kClose };

struct ChannelMsg {
  ChannelMsgKind kind = ChannelMsgKind::kOpen;
  TransferTx tx;
  Amount amt;
  std::uint64_t link_seq = 0;
};

/// Channel named by a closing transaction: outputs are [(a, .), (b, .)].
inline std::optional<ChannelId> channel_of(const TransferTx& tx) {
  if (tx.outputs.size() != 2) return std::nullopt;
  return ChannelId{tx.outputs[0].dest, tx.outputs[1].dest};
}

/// A well-formed spend of ch's escrow: outputs [(a, x), (b, y)] with
/// x + y = deposit, a single dependency on a deposit made by `a`, and a valid
/// partial signature from `signer`'s key.
inline bool validate_tx(const TransferTx& tx, const ChannelId& ch, const AccountId& signer, Amount deposit,
                        const Directory& dir) {
  if (ch.a == ch.b || tx.source != escrow_of(ch) || !is_well_formed(tx)) return false;
  if (tx.outputs.size() != 2 || tx.outputs[0].dest != ch.a || tx.outputs[1].dest != ch.b) return false;
  if (tx.deps.size() != 1 || tx.deps[0].source != ch.a) return false;
  if (tx.total() != deposit) return false;
  const auto* ms = std::get_if<crypto::PartialMultisig>(&tx.auth);
  auto pk = dir.public_key(signer);
  auto mk = dir.multisig(tx.source);
  if (!ms || !pk || !mk || !mk->is_member(*pk) || ms->message != tx.signing_bytes()) return false;
  return crypto::has_valid_partial(*ms, *pk, dir.keys());
}

struct ChannelMutations {
  bool skip_open_gate = false;       // target stores the open tx without waiting for the escrow deposit
  bool accept_nonmonotonic = false;  // target skips the consistency check against its stored tx
};

struct ChannelStats {
  std::uint64_t dropped_messages = 0;
  std::uint64_t accepted_transfers = 0;
  std::uint64_t target_regressions = 0;  // accepted tx lowered b's side
};

/// Source-side state of an open channel.
struct SourceView {
  Amount bal_a;
  Amount bal_b;
  TxRef deposit;
  std::uint64_t epoch = 0;  // escrow nonce of this channel instance
};

/// One process's side of every channel it is an endpoint of. The endpoint is
/// a plain state machine: ledger calls and message sends are performed by the
/// owning node, which feeds results back in.
class ChannelEndpoint {
 public:
  ChannelEndpoint(ProcessId self, const Directory& dir, const std::map<AccountId, crypto::KeyPair>& keys,
                  ChannelMutations mut = {})
      : self_(self), dir_(&dir), keys_(&keys), mut_(mut) {}

  bool owns(const AccountId& a) const { return keys_->contains(a); }

  /// Guard of open: owner of a, no open channel here, enough balance.
  bool can_open(const ChannelId& ch, Amount amt, const LedgerReplica& ledger) const {
    return valid_pair(ch) && owns(ch.a) && !source_.contains(ch) && !amt.is_negative() && ledger.read(ch.a) >= amt;
  }

  /// Second half of open, after the deposit `deposit` has been applied
  /// locally: builds the source-signed refund transaction.
  ChannelMsg complete_open(const ChannelId& ch, Amount amt, const TxRef& deposit, const LedgerReplica& ledger) {
    auto escrow = escrow_of(ch);
    TransferTx tx;
    tx.source = escrow;
    tx.outputs = {{ch.a, amt}, {ch.b, Amount{}}};
    tx.nonce = ledger.nonce(escrow) + 1;
    tx.deps = {deposit};
    tx = add_multisig_partial(std::move(tx), *dir_->multisig(escrow), keys_->at(ch.a));
    source_[ch] = SourceView{amt, Amount{}, deposit, tx.nonce};
    return {ChannelMsgKind::kOpen, std::move(tx), amt};
  }

  /// Off-chain payment. nullopt means the call was a no-op.
  std::optional<ChannelMsg> transfer(const ChannelId& ch, Amount amt) {
    auto it = source_.find(ch);
    if (!owns(ch.a) || it == source_.end() || amt.is_negative()) return std::nullopt;
    auto& view = it->second;
    if (view.bal_a < amt) return std::nullopt;
    view.bal_a -= amt;
    view.bal_b += amt;
    TransferTx tx;
    tx.source = escrow_of(ch);
    tx.outputs = {{ch.a, view.bal_a}, {ch.b, view.bal_b}};
    tx.nonce = view.epoch;
    tx.deps = {view.deposit};
    tx = add_multisig_partial(std::move(tx), *dir_->multisig(tx.source), keys_->at(ch.a));
    return ChannelMsg{ChannelMsgKind::kTransfer, std::move(tx), amt};
  }

  /// Guard and signing step of target_close. On success the target view is
  /// cleared and the completed transaction is returned for submission.
  std::optional<TransferTx> begin_target_close(const ChannelId& ch, std::optional<Amount> bal_b) {
    auto it = target_.find(ch);
    if (!owns(ch.b) || it == target_.end()) return std::nullopt;
    if (bal_b && it->second.outputs[1].amount != *bal_b) return std::nullopt;
    auto tx = add_multisig_partial(std::move(it->second), *dir_->multisig(escrow_of(ch)), keys_->at(ch.b));
    target_.erase(it);
    return tx;
  }

  /// b's side of the stored closing transaction, if any.
  std::optional<Amount> target_balance(const ChannelId& ch) const {
    auto it = target_.find(ch);
    if (it == target_.end()) return std::nullopt;
    return it->second.outputs[1].amount;
  }

  std::uint64_t next_link_seq(ProcessId to) { return ++out_seq_[to]; }

  void receive(ProcessId from, ChannelMsg msg) {
    auto& last = in_seq_[from];
    if (msg.link_seq <= last) {
      ++stats_.dropped_messages;
      return;
    }
    last = msg.link_seq;
    inbox_[from].push_back(std::move(msg));
  }

  /// Handles queued messages in per-link FIFO order. A message whose ledger
  /// condition does not hold yet blocks its link until a later call.
  void process_inbox(const LedgerReplica& ledger) {
    for (auto& [from, queue] : inbox_) {
      while (!queue.empty()) {
        auto outcome = handle(from, queue.front(), ledger);
        if (outcome == Outcome::kWait) break;
        if (outcome == Outcome::kDropped) ++stats_.dropped_messages;
        queue.pop_front();
      }
    }
  }

  std::size_t pending_messages() const {
    std::size_t k = 0;
    for (const auto& [p, q] : inbox_) k += q.size();
    return k;
  }

  const std::map<ChannelId, SourceView>& source_views() const { return source_; }
  const std::map<ChannelId, TransferTx>& target_views() const { return target_; }
  const ChannelStats& stats() const { return stats_; }

 private:
  enum class Outcome { kDone, kDropped, kWait };

  bool valid_pair(const ChannelId& ch) const {
    return ch.a != ch.b && !ch.a.is_multi() && !ch.b.is_multi() && dir_->known(ch.a) && dir_->known(ch.b);
  }

  bool sent_by_owner(ProcessId from, const AccountId& acct) const { return dir_->is_owner(from, acct); }

  Outcome handle(ProcessId from, const ChannelMsg& m, const LedgerReplica& ledger) {
    auto ch = channel_of(m.tx);
    if (!ch || !valid_pair(*ch)) return Outcome::kDropped;
    auto escrow = escrow_of(*ch);
    switch (m.kind) {
      case ChannelMsgKind::kOpen: {
        if (!owns(ch->b) || !sent_by_owner(from, ch->a)) return Outcome::kDropped;
        if (!validate_tx(m.tx, *ch, ch->a, m.amt, *dir_) || m.tx.outputs[0].amount != m.amt)
          return Outcome::kDropped;
        if (!mut_.skip_open_gate) {
          if (ledger.read(escrow) != m.amt) return Outcome::kWait;
          if (ledger.credit_of(m.tx.deps[0], escrow) != m.amt || m.tx.nonce != ledger.nonce(escrow) + 1)
            return Outcome::kDropped;
        }
        if (target_.contains(*ch)) return Outcome::kDropped;
        target_.emplace(*ch, m.tx);
        return Outcome::kDone;
      }
      case ChannelMsgKind::kTransfer: {
        if (!owns(ch->b) || !sent_by_owner(from, ch->a)) return Outcome::kDropped;
        auto it = target_.find(*ch);
        if (it == target_.end()) return Outcome::kDropped;
        const auto& stored = it->second;
        if (!validate_tx(m.tx, *ch, ch->a, stored.total(), *dir_)) return Outcome::kDropped;
        const auto& next = m.tx.outputs;
        const auto& curr = stored.outputs;
        bool consistent = m.tx.nonce == stored.nonce && m.tx.deps == stored.deps && !m.amt.is_negative() &&
                          next[0].amount == curr[0].amount - m.amt && next[1].amount == curr[1].amount + m.amt;
        if (!consistent && !mut_.accept_nonmonotonic) return Outcome::kDropped;
        if (next[1].amount < curr[1].amount) ++stats_.target_regressions;
        ++stats_.accepted_transfers;
        it->second = m.tx;
        return Outcome::kDone;
      }
      case ChannelMsgKind::kClose: {
        if (!owns(ch->a) || !sent_by_owner(from, ch->b)) return Outcome::kDropped;
        auto it = source_.find(*ch);
        if (it == source_.end()) return Outcome::kDropped;
        if (!validate_tx(m.tx, *ch, ch->b, it->second.bal_a + it->second.bal_b, *dir_) ||
            m.tx.nonce != it->second.epoch)
          return Outcome::kDropped;
        if (ledger.read(escrow) != Amount{}) return Outcome::kWait;
        source_.erase(it);
        return Outcome::kDone;
      }
    }
    return Outcome::kDropped;
  }

  ProcessId self_;
  const Directory* dir_;
  const std::map<AccountId, crypto::KeyPair>* keys_;
  ChannelMutations mut_;
  std::map<ChannelId, SourceView> source_;
  std::map<ChannelId, TransferTx> target_;
  std::map<ProcessId, std::deque<ChannelMsg>> inbox_;
  std::map<ProcessId, std::uint64_t> in_seq_;
  std::map<ProcessId, std::uint64_t> out_seq_;
  ChannelStats stats_;
};

}  // namespace paychan
