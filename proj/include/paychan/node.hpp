#pragma once

#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "paychan/broadcast.hpp"
#include "paychan/channel.hpp"
#include "paychan/ledger.hpp"
#include "paychan/ops.hpp"

namespace paychan {

using Message = std::variant<BrbMessage, ChannelMsg>;

struct Send {
  ProcessId to;
  Message msg;
};

/// Everything one event at a process produced.
struct NodeOutput {
  std::vector<Send> sends;
  std::vector<std::pair<OpId, OpResult>> responses;
  std::vector<LedgerEvent> ledger_events;
  std::uint32_t broadcasts = 0;  // broadcast instances originated

  void respond(OpId op, OpResult r) { responses.emplace_back(op, r); }
};

class Process {
 public:
  virtual ~Process() = default;
  virtual void invoke(OpId op, const Invocation& inv, NodeOutput& out) = 0;
  virtual void receive(ProcessId from, const Message& m, NodeOutput& out) = 0;
  /// Fills in arguments the caller left open (target_close's bal_b).
  virtual Invocation resolve(const Invocation& inv) const { return inv; }
  /// An invocation is outstanding; the scheduler will not invoke again.
  virtual bool busy() const = 0;
  virtual bool is_correct() const = 0;
};

struct NodeConfig {
  std::size_t n = 4;
  std::size_t f = 1;
  LedgerOptions ledger;
  ChannelMutations channel;
};

/// A correct process: broadcast engine, ledger replica and channel endpoint
/// wired together.
class Node : public Process {
 public:
  Node(ProcessId self, const Directory& dir, const std::map<AccountId, Amount>& genesis,
       std::map<AccountId, crypto::KeyPair> keys, NodeConfig cfg)
      : self_(self),
        cfg_(cfg),
        dir_(&dir),
        keys_(std::move(keys)),
        engine_(self, cfg.n, cfg.f),
        ledger_(dir, genesis, cfg.ledger),
        endpoint_(self, dir, keys_, cfg.channel) {}

  Node(const Node&) = delete;
  Node& operator=(const Node&) = delete;

  bool busy() const override { return pending_.has_value(); }
  bool is_correct() const override { return true; }

  Invocation resolve(const Invocation& inv) const override {
    if (inv.kind != OpKind::kTargetClose || inv.amt) return inv;
    auto r = inv;
    r.amt = endpoint_.target_balance(inv.channel).value_or(Amount{});
    return r;
  }

  void invoke(OpId op, const Invocation& raw, NodeOutput& out) override {
    auto inv = resolve(raw);
    switch (inv.kind) {
      case OpKind::kRead:
        out.respond(op, OpResult::of(ledger_.read(inv.account)));
        return;
      case OpKind::kTransfer: {
        auto tx = signed_transfer(inv.account, inv.outputs);
        if (!tx) {
          out.respond(op, OpResult::fail());
          return;
        }
        start(op, inv, *tx, out);
        return;
      }
      case OpKind::kOpen: {
        const auto& ch = inv.channel;
        if (!endpoint_.can_open(ch, *inv.amt, ledger_)) {
          out.respond(op, OpResult::fail());
          return;
        }
        auto tx = signed_transfer(ch.a, {{escrow_of(ch), *inv.amt}});
        if (!tx) {
          out.respond(op, OpResult::fail());
          return;
        }
        start(op, inv, *tx, out);
        return;
      }
      case OpKind::kPay:
        if (auto m = endpoint_.transfer(inv.channel, *inv.amt)) send_channel(owner_of(inv.channel.b), *m, out);
        out.respond(op, OpResult::none());
        return;
      case OpKind::kTargetClose: {
        auto stored = endpoint_.target_balance(inv.channel);
        if (stored && inv.amt == stored) ++stored_closes_;
        auto tx = endpoint_.begin_target_close(inv.channel, inv.amt);
        if (!tx) {
          if (stored && inv.amt == stored) ++stored_close_refusals_;
          out.respond(op, OpResult::fail());
          return;
        }
        if (ledger_.admission(*tx, self_)) {
          // the ledger call fails locally; the close still reports success
          ++close_ledger_failures_;
          finish_close(op, inv.channel, *tx, out);
          return;
        }
        start(op, inv, *tx, out);
        return;
      }
    }
  }

  void receive(ProcessId from, const Message& m, NodeOutput& out) override {
    if (const auto* b = std::get_if<BrbMessage>(&m)) {
      auto r = engine_.on_message(from, *b);
      for (auto& mm : r.to_all) send_all(mm, out);
      for (const auto& d : r.deliveries) on_ledger_events(ledger_.deliver_bytes(d.origin, d.payload), out);
    } else {
      endpoint_.receive(from, std::get<ChannelMsg>(m));
    }
    endpoint_.process_inbox(ledger_);
  }

  /// Broadcasts `tx` as a ledger invocation without any local checks.
  void submit(const TransferTx& tx, NodeOutput& out) {
    ++out.broadcasts;
    send_all(engine_.broadcast(encode(tx)), out);
  }

  void send_all(const BrbMessage& m, NodeOutput& out) const {
    for (ProcessId q = 0; q < cfg_.n; ++q) out.sends.push_back({q, m});
  }

  void send_channel(ProcessId to, ChannelMsg m, NodeOutput& out) {
    m.link_seq = endpoint_.next_link_seq(to);
    out.sends.push_back({to, std::move(m)});
  }

  /// Builds and signs a transfer from an owned single-key account, or
  /// nullopt if the local replica would not apply it right away.
  std::optional<TransferTx> signed_transfer(const AccountId& source, std::vector<Output> outputs) const {
    if (source.is_multi() || !keys_.contains(source)) return std::nullopt;
    auto tx = ledger_.prepare_transfer(source, std::move(outputs));
    if (!is_well_formed(tx) || ledger_.read(source) < tx.total()) return std::nullopt;
    tx = sign_single(std::move(tx), keys_.at(source));
    if (ledger_.admission(tx, self_)) return std::nullopt;
    return tx;
  }

  ProcessId owner_of(const AccountId& a) const {
    auto o = dir_->owners(a);
    return o.empty() ? self_ : o.front();
  }

  ProcessId id() const { return self_; }
  const NodeConfig& config() const { return cfg_; }
  const Directory& directory() const { return *dir_; }
  const std::map<AccountId, crypto::KeyPair>& keys() const { return keys_; }
  BrbEngine& engine() { return engine_; }
  const LedgerReplica& ledger() const { return ledger_; }
  const ChannelEndpoint& endpoint() const { return endpoint_; }
  std::uint64_t close_ledger_failures() const { return close_ledger_failures_; }
  std::uint64_t stored_closes() const { return stored_closes_; }
  std::uint64_t stored_close_refusals() const { return stored_close_refusals_; }

 private:
  struct Pending {
    OpId op;
    Invocation inv;
    TransferTx tx;
  };

  void start(OpId op, const Invocation& inv, const TransferTx& tx, NodeOutput& out) {
    pending_ = Pending{op, inv, tx};
    submit(tx, out);
  }

  void on_ledger_events(std::vector<LedgerEvent> events, NodeOutput& out) {
    for (auto& ev : events) {
      if (pending_ && ev.origin == self_ && ev.tx.ref() == pending_->tx.ref() &&
          ev.tx.content_id() == pending_->tx.content_id()) {
        auto p = std::move(*pending_);
        pending_.reset();
        complete(p, ev.kind == LedgerEvent::Kind::kApplied, out);
      }
      out.ledger_events.push_back(std::move(ev));
    }
  }

  void complete(const Pending& p, bool applied, NodeOutput& out) {
    switch (p.inv.kind) {
      case OpKind::kTransfer:
        out.respond(p.op, OpResult::flag(applied));
        return;
      case OpKind::kOpen:
        if (!applied) {
          out.respond(p.op, OpResult::fail());
          return;
        }
        send_channel(owner_of(p.inv.channel.b), endpoint_.complete_open(p.inv.channel, *p.inv.amt, p.tx.ref(), ledger_),
                     out);
        out.respond(p.op, OpResult::success());
        return;
      case OpKind::kTargetClose:
        if (!applied) ++close_ledger_failures_;
        finish_close(p.op, p.inv.channel, p.tx, out);
        return;
      default:
        return;
    }
  }

  void finish_close(OpId op, const ChannelId& ch, const TransferTx& tx, NodeOutput& out) {
    send_channel(owner_of(ch.a), ChannelMsg{ChannelMsgKind::kClose, tx, tx.outputs[1].amount}, out);
    out.respond(op, OpResult::success());
  }

  ProcessId self_;
  NodeConfig cfg_;
  const Directory* dir_;
  std::map<AccountId, crypto::KeyPair> keys_;
  BrbEngine engine_;
  LedgerReplica ledger_;
  ChannelEndpoint endpoint_;
  std::optional<Pending> pending_;
  std::uint64_t close_ledger_failures_ = 0;
  std::uint64_t stored_closes_ = 0;         // closes invoked at the stored balance
  std::uint64_t stored_close_refusals_ = 0;  // of those, refused locally
};

}  // namespace paychan
