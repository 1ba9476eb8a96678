#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "paychan/bytes.hpp"

// Signature and k-of-k multisignature scheme.
//
// The reference scheme is a deterministic keyed tag: a signature is
// HMAC-SHA256(secret, key_id || message). Verification goes through a
// KeyRegistry that plays the role of the PKI: it knows every registered
// secret, while processes only ever hold their own KeyPairs. Unforgeability
// is therefore a property of the simulation model (a Byzantine process cannot
// reach another process's KeyPair), not a cryptographic one.
namespace paychan::crypto {

using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(std::span<const std::uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

inline Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> msg) {
  Digest out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(), out.data(), &len);
  return out;
}

struct PublicKey {
  std::string key_id;
  Digest fingerprint{};
  friend auto operator<=>(const PublicKey&, const PublicKey&) = default;
};

struct KeyPair {
  PublicKey pub;
  Digest secret{};
};

struct Signature {
  std::string key_id;
  Digest tag{};
  friend auto operator<=>(const Signature&, const Signature&) = default;
};

struct NonMemberError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Deterministic key generation: the same (key_id, seed) always yields the
/// same pair, so scenario runs are reproducible.
inline KeyPair derive_keypair(std::string_view key_id, std::uint64_t seed) {
  auto secret = sha256(ByteWriter{}.str("paychan.secret").str(key_id).u64(seed).bytes());
  KeyPair kp;
  kp.secret = secret;
  kp.pub.key_id = std::string(key_id);
  kp.pub.fingerprint = sha256(ByteWriter{}.str("paychan.public").blob(secret).bytes());
  return kp;
}

// Test instrumentation: when set, every sign() call is reported. Used to
// check that no complete multisig appears without each member signing.
using SignObserver = std::function<void(const std::string& key_id, std::span<const std::uint8_t> message)>;

inline SignObserver*& sign_observer() {
  thread_local SignObserver* observer = nullptr;
  return observer;
}

class ScopedSignObserver {
 public:
  explicit ScopedSignObserver(SignObserver fn) : fn_(std::move(fn)), prev_(sign_observer()) {
    sign_observer() = &fn_;
  }
  ~ScopedSignObserver() { sign_observer() = prev_; }
  ScopedSignObserver(const ScopedSignObserver&) = delete;
  ScopedSignObserver& operator=(const ScopedSignObserver&) = delete;

 private:
  SignObserver fn_;
  SignObserver* prev_;
};

inline Digest keyed_tag(const Digest& secret, std::string_view key_id, std::span<const std::uint8_t> message) {
  auto framed = ByteWriter{}.str(key_id).blob(message).bytes();
  return hmac_sha256(secret, framed);
}

inline Signature sign(std::span<const std::uint8_t> message, const KeyPair& key) {
  if (auto* obs = sign_observer()) (*obs)(key.pub.key_id, message);
  return Signature{key.pub.key_id, keyed_tag(key.secret, key.pub.key_id, message)};
}

class KeyRegistry {
 public:
  void add(const KeyPair& kp) { keys_[kp.pub.key_id] = kp; }

  std::optional<PublicKey> find(const std::string& key_id) const {
    auto it = keys_.find(key_id);
    if (it == keys_.end()) return std::nullopt;
    return it->second.pub;
  }

  bool verify(std::span<const std::uint8_t> message, const Signature& sig, const PublicKey& pk) const {
    if (sig.key_id != pk.key_id) return false;
    auto it = keys_.find(pk.key_id);
    if (it == keys_.end() || it->second.pub.fingerprint != pk.fingerprint) return false;
    return keyed_tag(it->second.secret, pk.key_id, message) == sig.tag;
  }

 private:
  std::map<std::string, KeyPair> keys_;
};

/// k-of-k multisignature key. Members are kept sorted by key id, so the
/// canonical id does not depend on the order the caller listed them in.
class MultisigKey {
 public:
  static constexpr std::string_view kPrefix = "ms:";

  MultisigKey() = default;
  explicit MultisigKey(std::vector<PublicKey> members) : members_(std::move(members)) {
    std::sort(members_.begin(), members_.end(),
              [](const PublicKey& a, const PublicKey& b) { return a.key_id < b.key_id; });
    members_.erase(std::unique(members_.begin(), members_.end(),
                               [](const PublicKey& a, const PublicKey& b) { return a.key_id == b.key_id; }),
                   members_.end());
    canonical_id_ = std::string(kPrefix);
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (i) canonical_id_ += '+';
      canonical_id_ += members_[i].key_id;
    }
  }

  const std::vector<PublicKey>& members() const { return members_; }
  const std::string& canonical_id() const { return canonical_id_; }

  bool is_member(const PublicKey& pk) const {
    return std::any_of(members_.begin(), members_.end(), [&](const PublicKey& m) { return m == pk; });
  }

  /// Member key ids encoded in a canonical id, or nullopt if `id` is not one.
  static std::optional<std::vector<std::string>> parse_members(std::string_view id) {
    if (!id.starts_with(kPrefix)) return std::nullopt;
    std::vector<std::string> out;
    std::string_view rest = id.substr(kPrefix.size());
    while (true) {
      auto pos = rest.find('+');
      auto part = rest.substr(0, pos);
      if (part.empty()) return std::nullopt;
      out.emplace_back(part);
      if (pos == std::string_view::npos) break;
      rest = rest.substr(pos + 1);
    }
    if (!std::is_sorted(out.begin(), out.end()) || std::adjacent_find(out.begin(), out.end()) != out.end())
      return std::nullopt;
    return out;
  }

 private:
  std::vector<PublicKey> members_;
  std::string canonical_id_;
};

struct PartialMultisig {
  Bytes message;
  std::map<std::string, Signature> partials;  // member key id -> partial
  friend bool operator==(const PartialMultisig&, const PartialMultisig&) = default;
};

inline PartialMultisig add_partial(PartialMultisig p, const MultisigKey& mk, const KeyPair& key) {
  if (!mk.is_member(key.pub)) throw NonMemberError("key " + key.pub.key_id + " is not in " + mk.canonical_id());
  if (!p.partials.contains(key.pub.key_id)) p.partials.emplace(key.pub.key_id, sign(p.message, key));
  return p;
}

inline bool has_valid_partial(const PartialMultisig& p, const PublicKey& member, const KeyRegistry& registry) {
  auto it = p.partials.find(member.key_id);
  return it != p.partials.end() && registry.verify(p.message, it->second, member);
}

/// True iff every member contributed exactly one partial that verifies over
/// p.message, and nothing else is attached.
inline bool is_complete(const PartialMultisig& p, const MultisigKey& mk, const KeyRegistry& registry) {
  if (mk.members().empty() || p.partials.size() != mk.members().size()) return false;
  return std::all_of(mk.members().begin(), mk.members().end(),
                     [&](const PublicKey& m) { return has_valid_partial(p, m, registry); });
}

}  // namespace paychan::crypto
