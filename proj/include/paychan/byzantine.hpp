#pragma once

#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

#include "paychan/node.hpp"

namespace paychan {

enum class Behavior : std::uint8_t { kCrashSilent, kEquivocator, kOverspender, kChannelCheater, kMessageDropper };

inline std::string_view to_string(Behavior b) {
  switch (b) {
    case Behavior::kCrashSilent: return "crash_silent";
    case Behavior::kEquivocator: return "equivocator";
    case Behavior::kOverspender: return "overspender";
    case Behavior::kChannelCheater: return "channel_cheater";
    case Behavior::kMessageDropper: return "message_dropper";
  }
  return "?";
}

inline Behavior behavior_from(std::string_view s) {
  if (s == "crash_silent") return Behavior::kCrashSilent;
  if (s == "equivocator") return Behavior::kEquivocator;
  if (s == "overspender") return Behavior::kOverspender;
  if (s == "channel_cheater") return Behavior::kChannelCheater;
  if (s == "message_dropper") return Behavior::kMessageDropper;
  throw std::invalid_argument("unknown behavior: " + std::string(s));
}

struct ByzantineSpec {
  ProcessId process = 0;
  Behavior behavior = Behavior::kCrashSilent;
  ProcessId victim = 0;  // message_dropper only
};

/// A corrupted process. It owns a correct Node and deviates from it in the
/// ways its behavior names; everything else runs the protocol normally, which
/// keeps the attacks inside otherwise plausible runs.
class ByzantineNode : public Process {
 public:
  ByzantineNode(std::unique_ptr<Node> inner, ByzantineSpec spec, std::uint64_t seed)
      : inner_(std::move(inner)), spec_(spec), rng_(seed) {}

  bool is_correct() const override { return false; }
  bool busy() const override { return spec_.behavior != Behavior::kCrashSilent && inner_->busy(); }
  Invocation resolve(const Invocation& inv) const override { return inner_->resolve(inv); }

  void invoke(OpId op, const Invocation& inv, NodeOutput& out) override {
    switch (spec_.behavior) {
      case Behavior::kCrashSilent:
        return;
      case Behavior::kEquivocator:
        if (inv.kind == OpKind::kTransfer && equivocate(inv, out)) return;
        break;
      case Behavior::kOverspender:
        if (inv.kind == OpKind::kTransfer && overspend(inv, out)) return;
        break;
      case Behavior::kChannelCheater:
        if (inv.kind == OpKind::kPay && cheat(inv, out)) return;
        break;
      case Behavior::kMessageDropper:
        break;
    }
    inner_->invoke(op, inv, out);
    filter(out);
  }

  void receive(ProcessId from, const Message& m, NodeOutput& out) override {
    if (spec_.behavior == Behavior::kCrashSilent) return;
    inner_->receive(from, m, out);
    filter(out);
  }

  const Node& inner() const { return *inner_; }
  const ByzantineSpec& spec() const { return spec_; }

 private:
  void filter(NodeOutput& out) const {
    if (spec_.behavior != Behavior::kMessageDropper) return;
    std::erase_if(out.sends, [&](const Send& s) { return s.to == spec_.victim; });
  }

  // Same sequence number, two payloads: the first half of the processes gets
  // the requested transfer, the rest a self-transfer of the same total.
  bool equivocate(const Invocation& inv, NodeOutput& out) {
    auto tx = inner_->signed_transfer(inv.account, inv.outputs);
    if (!tx) return false;
    auto alt = *tx;
    alt.outputs = {{inv.account, tx->total()}};
    alt = sign_single(std::move(alt), inner_->keys().at(inv.account));
    auto init = inner_->engine().broadcast(encode(*tx));
    auto alt_init = init;
    alt_init.payload = encode(alt);
    ++out.broadcasts;
    auto n = inner_->config().n;
    for (ProcessId q = 0; q < n; ++q) out.sends.push_back({q, q < n / 2 ? init : alt_init});
    return true;
  }

  // Two transfers with consecutive nonces, each spending the whole balance.
  bool overspend(const Invocation& inv, NodeOutput& out) {
    const auto& src = inv.account;
    if (src.is_multi() || !inner_->keys().contains(src) || inv.outputs.empty()) return false;
    const auto& ledger = inner_->ledger();
    auto all = ledger.read(src);
    auto first = ledger.prepare_transfer(src, {{inv.outputs.front().dest, all}});
    auto second = first;
    second.nonce = first.nonce + 1;
    second.outputs = {{inv.outputs.back().dest, all + Amount(1)}};
    inner_->submit(sign_single(std::move(first), inner_->keys().at(src)), out);
    inner_->submit(sign_single(std::move(second), inner_->keys().at(src)), out);
    return true;
  }

  enum class Cheat { kHonest, kReplay, kRegress, kForeignDep, kRefund };

  // As a channel source: replays the current state, shifts money back to
  // itself, swaps the deposit dependency, or pushes the opening refund to the
  // ledger with only its own signature.
  bool cheat(const Invocation& inv, NodeOutput& out) {
    const auto& ch = inv.channel;
    auto views = inner_->endpoint().source_views();
    auto it = views.find(ch);
    if (it == views.end() || !inner_->keys().contains(ch.a)) return false;
    auto kind = static_cast<Cheat>(rng_() % 5);
    const auto& v = it->second;
    auto mk = *inner_->directory().multisig(escrow_of(ch));
    const auto& key = inner_->keys().at(ch.a);
    auto build = [&](Amount x, Amount y, TxRef dep) {
      TransferTx tx;
      tx.source = escrow_of(ch);
      tx.outputs = {{ch.a, x}, {ch.b, y}};
      tx.nonce = v.epoch;
      tx.deps = {std::move(dep)};
      return add_multisig_partial(std::move(tx), mk, key);
    };
    auto amt = *inv.amt;
    auto target = inner_->owner_of(ch.b);
    switch (kind) {
      case Cheat::kHonest:
        return false;
      case Cheat::kReplay:
        inner_->send_channel(target, {ChannelMsgKind::kTransfer, build(v.bal_a, v.bal_b, v.deposit), amt}, out);
        return true;
      case Cheat::kRegress: {
        if (v.bal_b < Amount(1)) return false;
        auto x = v.bal_a + Amount(1), y = v.bal_b - Amount(1);
        inner_->send_channel(target, {ChannelMsgKind::kTransfer, build(x, y, v.deposit), Amount(1)}, out);
        return true;
      }
      case Cheat::kForeignDep: {
        if (v.bal_a < amt) return false;
        TxRef bogus{ch.a, v.deposit.nonce + 1000};
        inner_->send_channel(target, {ChannelMsgKind::kTransfer, build(v.bal_a - amt, v.bal_b + amt, bogus), amt},
                             out);
        return true;
      }
      case Cheat::kRefund:
        if (!refunded_.insert({ch, v.epoch}).second) return false;
        inner_->submit(build(v.bal_a + v.bal_b, Amount{}, v.deposit), out);
        return true;
    }
    return false;
  }

  std::unique_ptr<Node> inner_;
  ByzantineSpec spec_;
  std::mt19937_64 rng_;
  std::set<std::pair<ChannelId, std::uint64_t>> refunded_;
};

}  // namespace paychan
