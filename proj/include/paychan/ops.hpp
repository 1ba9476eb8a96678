#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "paychan/channel.hpp"
#include "paychan/transaction.hpp"

namespace paychan {

enum class OpKind : std::uint8_t { kRead, kTransfer, kOpen, kPay, kTargetClose };

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kRead: return "read";
    case OpKind::kTransfer: return "transfer";
    case OpKind::kOpen: return "open";
    case OpKind::kPay: return "pay";
    case OpKind::kTargetClose: return "target_close";
  }
  return "?";
}

inline OpKind op_kind_from(std::string_view s) {
  if (s == "read") return OpKind::kRead;
  if (s == "transfer") return OpKind::kTransfer;
  if (s == "open") return OpKind::kOpen;
  if (s == "pay") return OpKind::kPay;
  if (s == "target_close") return OpKind::kTargetClose;
  throw std::invalid_argument("unknown op kind: " + std::string(s));
}

/// One operation invocation on the asset-transfer object (read, transfer) or
/// the channel object (open, pay, target_close). `pay` is the channel's
/// transfer call.
struct Invocation {
  OpKind kind = OpKind::kRead;
  AccountId account;            // read target, or transfer source
  std::vector<Output> outputs;  // transfer
  ChannelId channel;            // channel ops
  std::optional<Amount> amt;    // open/pay amount; target_close bal_b (nullopt: the stored balance)

  static Invocation read(AccountId a) {
    Invocation i;
    i.account = std::move(a);
    return i;
  }
  static Invocation transfer(AccountId src, std::vector<Output> outs) {
    Invocation i;
    i.kind = OpKind::kTransfer;
    i.account = std::move(src);
    i.outputs = std::move(outs);
    return i;
  }
  static Invocation channel_op(OpKind kind, ChannelId ch, std::optional<Amount> amt) {
    Invocation i;
    i.kind = kind;
    i.channel = std::move(ch);
    i.amt = amt;
    return i;
  }
  static Invocation open(ChannelId ch, Amount amt) { return channel_op(OpKind::kOpen, std::move(ch), amt); }
  static Invocation pay(ChannelId ch, Amount amt) { return channel_op(OpKind::kPay, std::move(ch), amt); }
  static Invocation target_close(ChannelId ch, std::optional<Amount> bal_b = std::nullopt) {
    return channel_op(OpKind::kTargetClose, std::move(ch), bal_b);
  }

  bool is_channel_op() const { return kind == OpKind::kOpen || kind == OpKind::kPay || kind == OpKind::kTargetClose; }
  friend bool operator==(const Invocation&, const Invocation&) = default;
};

struct OpResult {
  enum class Kind : std::uint8_t { kVoid, kSuccess, kFail, kValue };
  Kind kind = Kind::kVoid;
  Amount value;

  static OpResult none() { return {Kind::kVoid, Amount{}}; }
  static OpResult success() { return {Kind::kSuccess, Amount{}}; }
  static OpResult fail() { return {Kind::kFail, Amount{}}; }
  static OpResult of(Amount v) { return {Kind::kValue, v}; }
  static OpResult flag(bool ok) { return ok ? success() : fail(); }

  friend bool operator==(const OpResult&, const OpResult&) = default;
};

inline std::string to_string(const OpResult& r) {
  switch (r.kind) {
    case OpResult::Kind::kVoid: return "void";
    case OpResult::Kind::kSuccess: return "success";
    case OpResult::Kind::kFail: return "fail";
    case OpResult::Kind::kValue: return r.value.to_string();
  }
  return "?";
}

// JSON forms used by scenario configs and history traces.

inline nlohmann::json outputs_to_json(const std::vector<Output>& outs) {
  auto arr = nlohmann::json::array();
  for (const auto& o : outs) arr.push_back({o.dest.str(), o.amount.units()});
  return arr;
}

inline std::vector<Output> outputs_from_json(const nlohmann::json& j) {
  std::vector<Output> outs;
  for (const auto& o : j) outs.push_back({AccountId(o.at(0).get<std::string>()), Amount(o.at(1).get<std::int64_t>())});
  return outs;
}

inline nlohmann::json to_json(const Invocation& inv) {
  nlohmann::json j;
  switch (inv.kind) {
    case OpKind::kRead:
      j["account"] = inv.account.str();
      break;
    case OpKind::kTransfer:
      j["source"] = inv.account.str();
      j["outputs"] = outputs_to_json(inv.outputs);
      break;
    case OpKind::kOpen:
    case OpKind::kPay:
    case OpKind::kTargetClose:
      j["source"] = inv.channel.a.str();
      j["target"] = inv.channel.b.str();
      if (inv.amt) j[inv.kind == OpKind::kTargetClose ? "bal_b" : "amt"] = inv.amt->units();
      break;
  }
  return j;
}

inline Invocation invocation_from_json(OpKind kind, const nlohmann::json& j) {
  Invocation inv;
  inv.kind = kind;
  switch (kind) {
    case OpKind::kRead:
      inv.account = AccountId(j.at("account").get<std::string>());
      break;
    case OpKind::kTransfer:
      inv.account = AccountId(j.at("source").get<std::string>());
      inv.outputs = outputs_from_json(j.at("outputs"));
      break;
    case OpKind::kOpen:
    case OpKind::kPay:
    case OpKind::kTargetClose: {
      inv.channel = {AccountId(j.at("source").get<std::string>()), AccountId(j.at("target").get<std::string>())};
      const char* key = kind == OpKind::kTargetClose ? "bal_b" : "amt";
      if (j.contains(key)) inv.amt = Amount(j.at(key).get<std::int64_t>());
      else if (kind != OpKind::kTargetClose) throw std::invalid_argument("missing amt");
      break;
    }
  }
  return inv;
}

inline nlohmann::json to_json(const OpResult& r) {
  switch (r.kind) {
    case OpResult::Kind::kVoid: return nullptr;
    case OpResult::Kind::kSuccess: return "success";
    case OpResult::Kind::kFail: return "fail";
    case OpResult::Kind::kValue: return r.value.units();
  }
  return nullptr;
}

inline OpResult op_result_from_json(const nlohmann::json& j) {
  if (j.is_null()) return OpResult::none();
  if (j.is_number_integer()) return OpResult::of(Amount(j.get<std::int64_t>()));
  auto s = j.get<std::string>();
  if (s == "success") return OpResult::success();
  if (s == "fail") return OpResult::fail();
  throw std::invalid_argument("bad result: " + s);
}

}  // namespace paychan
