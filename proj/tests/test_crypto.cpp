#include <gtest/gtest.h>

#include <random>

#include "paychan/transaction.hpp"

using namespace paychan;
using namespace paychan::crypto;

namespace {

Bytes msg(std::string_view s) { return Bytes(s.begin(), s.end()); }

struct Keys {
  KeyPair a = derive_keypair("alice", 1);
  KeyPair b = derive_keypair("bob", 1);
  KeyPair c = derive_keypair("carol", 1);
  KeyRegistry reg;
  Keys() {
    reg.add(a);
    reg.add(b);
    reg.add(c);
  }
};

}  // namespace

TEST(Crypto, SignVerifyRoundTrip) {
  Keys k;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    Bytes m(rng() % 64);
    for (auto& x : m) x = static_cast<std::uint8_t>(rng());
    auto s = sign(m, k.a);
    EXPECT_TRUE(k.reg.verify(m, s, k.a.pub));
    EXPECT_FALSE(k.reg.verify(m, s, k.b.pub));
  }
}

TEST(Crypto, SignatureBindsMessage) {
  Keys k;
  auto s = sign(msg("pay 1"), k.a);
  EXPECT_FALSE(k.reg.verify(msg("pay 2"), s, k.a.pub));
}

TEST(Crypto, SigningIsDeterministic) {
  Keys k;
  auto s1 = sign(msg("same"), k.a);
  auto s2 = sign(msg("same"), derive_keypair("alice", 1));
  EXPECT_EQ(s1, s2);
  EXPECT_NE(sign(msg("same"), derive_keypair("alice", 2)).tag, s1.tag);
}

TEST(Crypto, UnknownOrImpostorKeyFailsVerification) {
  Keys k;
  auto mallory = derive_keypair("alice", 99);  // same id, different secret
  auto s = sign(msg("x"), mallory);
  EXPECT_FALSE(k.reg.verify(msg("x"), s, k.a.pub));
  KeyRegistry empty;
  EXPECT_FALSE(empty.verify(msg("x"), sign(msg("x"), k.a), k.a.pub));
}

TEST(Crypto, MultisigCanonicalIdIgnoresMemberOrder) {
  Keys k;
  MultisigKey m1({k.a.pub, k.b.pub});
  MultisigKey m2({k.b.pub, k.a.pub});
  EXPECT_EQ(m1.canonical_id(), m2.canonical_id());
  EXPECT_EQ(m1.canonical_id(), "ms:alice+bob");
  auto ids = MultisigKey::parse_members(m1.canonical_id());
  ASSERT_TRUE(ids);
  EXPECT_EQ(*ids, (std::vector<std::string>{"alice", "bob"}));
  EXPECT_FALSE(MultisigKey::parse_members("ms:bob+alice"));
  EXPECT_FALSE(MultisigKey::parse_members("alice"));
  EXPECT_FALSE(MultisigKey::parse_members("ms:alice+"));
}

TEST(Crypto, PartialsAccumulateToComplete) {
  Keys k;
  MultisigKey mk({k.a.pub, k.b.pub});
  PartialMultisig p;
  p.message = msg("close");
  p = add_partial(p, mk, k.a);
  EXPECT_EQ(p.partials.size(), 1u);
  EXPECT_FALSE(is_complete(p, mk, k.reg));
  p = add_partial(p, mk, k.b);
  EXPECT_TRUE(is_complete(p, mk, k.reg));
  EXPECT_THROW(add_partial(p, mk, k.c), NonMemberError);
}

TEST(Crypto, AddingSamePartialTwiceIsIdempotent) {
  Keys k;
  MultisigKey mk({k.a.pub, k.b.pub});
  PartialMultisig p;
  p.message = msg("m");
  auto once = add_partial(p, mk, k.a);
  EXPECT_EQ(add_partial(once, mk, k.a), once);
}

TEST(Crypto, CorruptedPartialIsNotComplete) {
  Keys k;
  MultisigKey mk({k.a.pub, k.b.pub});
  PartialMultisig p;
  p.message = msg("close");
  p = add_partial(add_partial(p, mk, k.a), mk, k.b);
  ASSERT_TRUE(is_complete(p, mk, k.reg));
  for (std::size_t byte = 0; byte < 32; byte += 7) {
    auto bad = p;
    bad.partials.at("bob").tag[byte] ^= 0x01;
    EXPECT_FALSE(is_complete(bad, mk, k.reg));
  }
  auto extra = p;
  extra.partials.emplace("carol", sign(p.message, k.c));
  EXPECT_FALSE(is_complete(extra, mk, k.reg));
  auto moved = p;
  moved.message = msg("other");
  EXPECT_FALSE(is_complete(moved, mk, k.reg));
}

TEST(Crypto, SignObserverSeesEverySignature) {
  Keys k;
  std::vector<std::string> seen;
  {
    ScopedSignObserver obs([&](const std::string& id, std::span<const std::uint8_t>) { seen.push_back(id); });
    sign(msg("1"), k.a);
    sign(msg("2"), k.b);
  }
  sign(msg("3"), k.c);
  EXPECT_EQ(seen, (std::vector<std::string>{"alice", "bob"}));
}

TEST(Transaction, EncodeDecodeRoundTripProperty) {
  Keys k;
  MultisigKey mk({k.a.pub, k.b.pub});
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    TransferTx tx;
    tx.nonce = rng() % 1000;
    int outs = 1 + static_cast<int>(rng() % 4);
    for (int j = 0; j < outs; ++j)
      tx.outputs.push_back({AccountId("acct" + std::to_string(rng() % 10)), Amount(static_cast<std::int64_t>(rng() % 100))});
    for (int j = 0; j < static_cast<int>(rng() % 3); ++j) tx.deps.push_back({AccountId("d" + std::to_string(j)), rng() % 50});
    switch (rng() % 3) {
      case 0:
        tx.source = AccountId("alice");
        break;
      case 1:
        tx.source = AccountId("alice");
        tx = sign_single(tx, k.a);
        break;
      default:
        tx.source = AccountId::multi(mk);
        tx = add_multisig_partial(tx, mk, k.b);
        if (rng() % 2) tx = add_multisig_partial(tx, mk, k.a);
    }
    auto bytes = encode(tx);
    EXPECT_EQ(decode_tx(bytes), tx);
  }
}

TEST(Transaction, DecodeRejectsTruncatedAndTrailingBytes) {
  Keys k;
  TransferTx tx{AccountId("alice"), {{AccountId("bob"), Amount(3)}}, 1, {}, {}};
  auto bytes = encode(sign_single(tx, k.a));
  for (std::size_t cut = 0; cut < bytes.size(); cut += 5) {
    Bytes part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_tx(part), DecodeError) << cut;
  }
  bytes.push_back(0);
  EXPECT_THROW(decode_tx(bytes), DecodeError);
}

TEST(Transaction, SignatureCoversOutputsNonceAndDeps) {
  Keys k;
  Directory dir;
  dir.add_account(k.a, 0);
  dir.add_account(k.b, 1);
  auto tx = sign_single(TransferTx{AccountId("alice"), {{AccountId("bob"), Amount(3)}}, 1, {}, {}}, k.a);
  EXPECT_TRUE(is_authorized(tx, dir));
  auto t1 = tx;
  t1.outputs[0].amount = Amount(4);
  EXPECT_FALSE(is_authorized(t1, dir));
  auto t2 = tx;
  t2.nonce = 2;
  EXPECT_FALSE(is_authorized(t2, dir));
  auto t3 = tx;
  t3.deps.push_back({AccountId("bob"), 1});
  EXPECT_FALSE(is_authorized(t3, dir));
  auto t4 = sign_single(TransferTx{AccountId("alice"), {{AccountId("bob"), Amount(3)}}, 1, {}, {}}, k.b);
  EXPECT_FALSE(is_authorized(t4, dir));
}

TEST(Transaction, MultisigSourceNeedsEveryMember) {
  Keys k;
  Directory dir;
  dir.add_account(k.a, 0);
  dir.add_account(k.b, 1);
  MultisigKey mk({k.a.pub, k.b.pub});
  TransferTx tx{AccountId::multi(mk), {{AccountId("alice"), Amount(9)}, {AccountId("bob"), Amount(2)}}, 1, {}, {}};
  auto half = add_multisig_partial(tx, mk, k.a);
  EXPECT_FALSE(is_authorized(half, dir));
  EXPECT_TRUE(is_authorized(half, dir, /*require_complete_multisig=*/false));
  auto full = add_multisig_partial(half, mk, k.b);
  EXPECT_TRUE(is_authorized(full, dir));
  EXPECT_EQ(dir.owners(tx.source), (std::vector<ProcessId>{0, 1}));
}

TEST(Transaction, WellFormedness) {
  TransferTx tx{AccountId("a"), {{AccountId("b"), Amount(1)}}, 1, {}, {}};
  EXPECT_TRUE(is_well_formed(tx));
  auto empty = tx;
  empty.outputs.clear();
  EXPECT_FALSE(is_well_formed(empty));
  auto neg = tx;
  neg.outputs[0].amount = Amount(-1);
  EXPECT_FALSE(is_well_formed(neg));
  auto dup = tx;
  dup.deps = {{AccountId("c"), 1}, {AccountId("c"), 1}};
  EXPECT_FALSE(is_well_formed(dup));
}
