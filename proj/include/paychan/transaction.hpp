#pragma once

#include <algorithm>
#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "paychan/amount.hpp"
#include "paychan/bytes.hpp"
#include "paychan/crypto.hpp"

namespace paychan {

/// Ledger account. A single-key account is named by its key id; a multisig
/// account by the canonical id of its MultisigKey ("ms:<k1>+<k2>...").
class AccountId {
 public:
  AccountId() = default;
  explicit AccountId(std::string id) : id_(std::move(id)) {}

  static AccountId single(const crypto::PublicKey& pk) { return AccountId(pk.key_id); }
  static AccountId multi(const crypto::MultisigKey& mk) { return AccountId(mk.canonical_id()); }

  const std::string& str() const { return id_; }
  bool empty() const { return id_.empty(); }
  bool is_multi() const { return std::string_view(id_).starts_with(crypto::MultisigKey::kPrefix); }

  friend auto operator<=>(const AccountId&, const AccountId&) = default;

 private:
  std::string id_;
};

inline std::ostream& operator<<(std::ostream& os, const AccountId& a) { return os << a.str(); }

struct Output {
  AccountId dest;
  Amount amount;
  friend bool operator==(const Output&, const Output&) = default;
};

/// Identifies an applied (or to-be-applied) transaction: source account and
/// its per-source nonce.
struct TxRef {
  AccountId source;
  std::uint64_t nonce = 0;
  friend auto operator<=>(const TxRef&, const TxRef&) = default;
};

using Authorization = std::variant<std::monostate, crypto::Signature, crypto::PartialMultisig>;

/// Multi-output transfer invocation. `deps` lists earlier credits to `source`
/// that this transfer spends; a replica applies the transfer only after every
/// dependency has been applied locally.
struct TransferTx {
  AccountId source;
  std::vector<Output> outputs;
  std::uint64_t nonce = 0;
  std::vector<TxRef> deps;
  Authorization auth;

  TxRef ref() const { return {source, nonce}; }

  Amount total() const {
    Amount sum;
    for (const auto& o : outputs) sum += o.amount;
    return sum;
  }

  /// Canonical bytes covered by signatures: everything except `auth`.
  Bytes signing_bytes() const {
    ByteWriter w;
    w.str("paychan.transfer.v1").str(source.str()).u64(nonce).u32(static_cast<std::uint32_t>(outputs.size()));
    for (const auto& o : outputs) w.str(o.dest.str()).i64(o.amount.units());
    w.u32(static_cast<std::uint32_t>(deps.size()));
    for (const auto& d : deps) w.str(d.source.str()).u64(d.nonce);
    return std::move(w).bytes();
  }

  /// Content id, independent of which signatures are attached.
  crypto::Digest content_id() const { return crypto::sha256(signing_bytes()); }

  friend bool operator==(const TransferTx&, const TransferTx&) = default;
};

inline bool is_well_formed(const TransferTx& tx) {
  if (tx.source.empty() || tx.outputs.empty()) return false;
  std::set<TxRef> seen;
  for (const auto& d : tx.deps)
    if (d.source.empty() || !seen.insert(d).second) return false;
  return std::all_of(tx.outputs.begin(), tx.outputs.end(),
                     [](const Output& o) { return !o.dest.empty() && !o.amount.is_negative(); });
}

// Wire encoding: signing bytes followed by the authorization.
inline Bytes encode(const TransferTx& tx) {
  ByteWriter w;
  w.blob(tx.signing_bytes());
  if (const auto* sig = std::get_if<crypto::Signature>(&tx.auth)) {
    w.u8(1).str(sig->key_id).blob(sig->tag);
  } else if (const auto* ms = std::get_if<crypto::PartialMultisig>(&tx.auth)) {
    w.u8(2).blob(ms->message).u32(static_cast<std::uint32_t>(ms->partials.size()));
    for (const auto& [id, s] : ms->partials) w.str(id).str(s.key_id).blob(s.tag);
  } else {
    w.u8(0);
  }
  return std::move(w).bytes();
}

namespace detail {
inline crypto::Digest read_digest(ByteReader& r) {
  auto b = r.blob();
  crypto::Digest d{};
  if (b.size() != d.size()) throw DecodeError("bad digest length");
  std::copy(b.begin(), b.end(), d.begin());
  return d;
}
}  // namespace detail

inline TransferTx decode_tx(std::span<const std::uint8_t> bytes) {
  ByteReader outer(bytes);
  auto body = outer.blob();
  ByteReader r(body);
  TransferTx tx;
  if (r.str() != "paychan.transfer.v1") throw DecodeError("unknown transaction tag");
  tx.source = AccountId(r.str());
  tx.nonce = r.u64();
  auto n_out = r.u32();
  for (std::uint32_t i = 0; i < n_out; ++i) {
    auto dest = AccountId(r.str());
    tx.outputs.push_back({std::move(dest), Amount(r.i64())});
  }
  auto n_deps = r.u32();
  for (std::uint32_t i = 0; i < n_deps; ++i) {
    auto src = AccountId(r.str());
    tx.deps.push_back({std::move(src), r.u64()});
  }
  if (!r.done()) throw DecodeError("trailing bytes in transaction body");
  switch (outer.u8()) {
    case 0:
      break;
    case 1: {
      crypto::Signature s;
      s.key_id = outer.str();
      s.tag = detail::read_digest(outer);
      tx.auth = std::move(s);
      break;
    }
    case 2: {
      crypto::PartialMultisig ms;
      ms.message = outer.blob();
      auto n = outer.u32();
      for (std::uint32_t i = 0; i < n; ++i) {
        auto member = outer.str();
        crypto::Signature s;
        s.key_id = outer.str();
        s.tag = detail::read_digest(outer);
        ms.partials.emplace(std::move(member), std::move(s));
      }
      tx.auth = std::move(ms);
      break;
    }
    default:
      throw DecodeError("unknown authorization tag");
  }
  if (!outer.done()) throw DecodeError("trailing bytes after transaction");
  return tx;
}

/// Public knowledge shared by all processes: the PKI and the owner of every
/// single-key account. Multisig accounts need no registration; their members
/// are recovered from the canonical id.
class Directory {
 public:
  void add_account(const crypto::KeyPair& kp, ProcessId owner) {
    keys_.add(kp);
    owners_[kp.pub.key_id] = owner;
  }

  const crypto::KeyRegistry& keys() const { return keys_; }

  std::optional<crypto::PublicKey> public_key(const AccountId& a) const {
    if (a.is_multi()) return std::nullopt;
    return keys_.find(a.str());
  }

  std::optional<crypto::MultisigKey> multisig(const AccountId& a) const {
    auto ids = crypto::MultisigKey::parse_members(a.str());
    if (!ids) return std::nullopt;
    std::vector<crypto::PublicKey> members;
    for (const auto& id : *ids) {
      auto pk = keys_.find(id);
      if (!pk) return std::nullopt;
      members.push_back(*pk);
    }
    return crypto::MultisigKey(std::move(members));
  }

  /// Owning processes; empty for unknown accounts.
  std::vector<ProcessId> owners(const AccountId& a) const {
    std::vector<ProcessId> out;
    if (auto ids = crypto::MultisigKey::parse_members(a.str())) {
      for (const auto& id : *ids) {
        auto it = owners_.find(id);
        if (it == owners_.end()) return {};
        out.push_back(it->second);
      }
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
    } else if (auto it = owners_.find(a.str()); it != owners_.end()) {
      out.push_back(it->second);
    }
    return out;
  }

  bool is_owner(ProcessId p, const AccountId& a) const {
    auto o = owners(a);
    return std::find(o.begin(), o.end(), p) != o.end();
  }

  bool known(const AccountId& a) const { return !owners(a).empty(); }

  const std::map<std::string, ProcessId>& single_accounts() const { return owners_; }

 private:
  crypto::KeyRegistry keys_;
  std::map<std::string, ProcessId> owners_;
};

/// Whether `tx` carries a valid authorization for its source account. With
/// `require_complete_multisig` false, one valid member partial suffices
/// (only used to build a deliberately broken ledger for mutation tests).
inline bool is_authorized(const TransferTx& tx, const Directory& dir, bool require_complete_multisig = true) {
  auto msg = tx.signing_bytes();
  if (tx.source.is_multi()) {
    const auto* ms = std::get_if<crypto::PartialMultisig>(&tx.auth);
    auto mk = dir.multisig(tx.source);
    if (!ms || !mk || ms->message != msg) return false;
    if (require_complete_multisig) return crypto::is_complete(*ms, *mk, dir.keys());
    return std::any_of(mk->members().begin(), mk->members().end(),
                       [&](const crypto::PublicKey& m) { return crypto::has_valid_partial(*ms, m, dir.keys()); });
  }
  const auto* sig = std::get_if<crypto::Signature>(&tx.auth);
  auto pk = dir.public_key(tx.source);
  return sig && pk && dir.keys().verify(msg, *sig, *pk);
}

inline TransferTx sign_single(TransferTx tx, const crypto::KeyPair& key) {
  tx.auth = crypto::sign(tx.signing_bytes(), key);
  return tx;
}

/// Adds `key`'s partial to a multisig-source transaction, starting a fresh
/// partial set if none is attached yet.
inline TransferTx add_multisig_partial(TransferTx tx, const crypto::MultisigKey& mk, const crypto::KeyPair& key) {
  crypto::PartialMultisig p;
  if (auto* existing = std::get_if<crypto::PartialMultisig>(&tx.auth)) p = std::move(*existing);
  p.message = tx.signing_bytes();
  tx.auth = crypto::add_partial(std::move(p), mk, key);
  return tx;
}

}  // namespace paychan
