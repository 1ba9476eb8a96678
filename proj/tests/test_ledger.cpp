#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "paychan/ledger.hpp"

using namespace paychan;

namespace {

struct Fixture {
  crypto::KeyPair a = crypto::derive_keypair("a", 1);
  crypto::KeyPair b = crypto::derive_keypair("b", 1);
  crypto::KeyPair c = crypto::derive_keypair("c", 1);
  Directory dir;
  std::map<AccountId, Amount> genesis;

  explicit Fixture(std::int64_t ga = 1, std::int64_t gb = 0, std::int64_t gc = 0) {
    dir.add_account(a, 0);
    dir.add_account(b, 1);
    dir.add_account(c, 2);
    genesis = {{AccountId("a"), Amount(ga)}, {AccountId("b"), Amount(gb)}, {AccountId("c"), Amount(gc)}};
  }

  LedgerReplica replica() const { return LedgerReplica(dir, genesis); }

  TransferTx tx(const crypto::KeyPair& k, std::uint64_t nonce, std::vector<Output> outs,
                std::vector<TxRef> deps = {}) const {
    return sign_single(TransferTx{AccountId(k.pub.key_id), std::move(outs), nonce, std::move(deps), {}}, k);
  }
};

Output out(const char* to, std::int64_t v) { return {AccountId(to), Amount(v)}; }

}  // namespace

TEST(Ledger, GenesisReadsExactly) {
  Fixture fx(7, 3, 0);
  auto r = fx.replica();
  EXPECT_EQ(r.read(AccountId("a")), Amount(7));
  EXPECT_EQ(r.read(AccountId("b")), Amount(3));
  EXPECT_EQ(r.read(AccountId("nobody")), Amount(0));
}

TEST(Ledger, TransferAppliesAndCredits) {
  Fixture fx;
  auto r = fx.replica();
  auto t = fx.tx(fx.a, 1, {out("b", 1)});
  EXPECT_FALSE(r.admission(t, 0));
  auto ev = r.deliver(0, t);
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].kind, LedgerEvent::Kind::kApplied);
  EXPECT_EQ(r.read(AccountId("a")), Amount(0));
  EXPECT_EQ(r.read(AccountId("b")), Amount(1));
  EXPECT_EQ(r.nonce(AccountId("a")), 1u);
}

TEST(Ledger, OverspendIsRefusedAtAdmission) {
  Fixture fx;
  auto r = fx.replica();
  auto t = fx.tx(fx.a, 1, {out("b", 2)});
  EXPECT_EQ(r.admission(t, 0), DropReason::kInsufficientFunds);
}

TEST(Ledger, MultisigClosingTxCreditsBothSidesAtomically) {
  Fixture fx(0, 0, 0);
  crypto::MultisigKey mk({fx.a.pub, fx.b.pub});
  auto escrow = AccountId::multi(mk);
  fx.genesis[escrow] = Amount(11);
  auto r = fx.replica();
  TransferTx close{escrow, {out("a", 9), out("b", 2)}, 1, {}, {}};
  close = add_multisig_partial(close, mk, fx.a);
  auto half = r;
  EXPECT_EQ(half.deliver(0, close).at(0).reason, DropReason::kUnauthorized);
  close = add_multisig_partial(close, mk, fx.b);
  auto ev = r.deliver(1, close);
  ASSERT_EQ(ev.at(0).kind, LedgerEvent::Kind::kApplied);
  EXPECT_EQ(r.read(AccountId("a")), Amount(9));
  EXPECT_EQ(r.read(AccountId("b")), Amount(2));
  EXPECT_EQ(r.read(escrow), Amount(0));
}

TEST(Ledger, IncompleteMultisigAcceptedOnlyByMutatedLedger) {
  Fixture fx(0, 0, 0);
  crypto::MultisigKey mk({fx.a.pub, fx.b.pub});
  auto escrow = AccountId::multi(mk);
  fx.genesis[escrow] = Amount(5);
  TransferTx t = add_multisig_partial(TransferTx{escrow, {out("a", 5)}, 1, {}, {}}, mk, fx.a);
  LedgerReplica strict(fx.dir, fx.genesis);
  LedgerReplica broken(fx.dir, fx.genesis, {.require_complete_multisig = false});
  EXPECT_EQ(strict.deliver(0, t).at(0).kind, LedgerEvent::Kind::kDropped);
  EXPECT_EQ(broken.deliver(0, t).at(0).kind, LedgerEvent::Kind::kApplied);
}

TEST(Ledger, DoubleSpendSecondIsDroppedEverywhere) {
  Fixture fx(5, 0, 0);
  auto t1 = fx.tx(fx.a, 1, {out("b", 5)});
  auto t2 = fx.tx(fx.a, 2, {out("c", 5)});
  for (bool reversed : {false, true}) {
    auto r = fx.replica();
    if (reversed) {
      EXPECT_TRUE(r.deliver(0, t2).empty());  // held on the nonce gap
      EXPECT_EQ(r.held(), 1u);
      auto ev = r.deliver(0, t1);
      ASSERT_EQ(ev.size(), 2u);
      EXPECT_EQ(ev[1].reason, DropReason::kInsufficientFunds);
    } else {
      r.deliver(0, t1);
      EXPECT_EQ(r.deliver(0, t2).at(0).reason, DropReason::kInsufficientFunds);
    }
    EXPECT_EQ(r.read(AccountId("b")), Amount(5));
    EXPECT_EQ(r.read(AccountId("c")), Amount(0));
    EXPECT_EQ(r.held(), 0u);
  }
}

TEST(Ledger, StaleReplayAndForeignOriginAreDropped) {
  Fixture fx(5, 0, 0);
  auto r = fx.replica();
  auto t = fx.tx(fx.a, 1, {out("b", 1)});
  r.deliver(0, t);
  EXPECT_EQ(r.deliver(0, t).at(0).reason, DropReason::kStaleNonce);
  EXPECT_EQ(r.deliver(2, fx.tx(fx.a, 2, {out("b", 1)})).at(0).reason, DropReason::kBadOrigin);
  auto forged = fx.tx(fx.a, 2, {out("b", 1)});
  forged.outputs[0].amount = Amount(2);
  EXPECT_EQ(r.deliver(0, forged).at(0).reason, DropReason::kUnauthorized);
  EXPECT_EQ(r.deliver(0, fx.tx(fx.a, 2, {})).at(0).reason, DropReason::kMalformed);
  EXPECT_EQ(r.deliver_bytes(0, Bytes{1, 2, 3}).size(), 0u);
  EXPECT_EQ(r.drops().at(DropReason::kUndecodable), 1u);
}

TEST(Ledger, DependenciesGateSpendingOfCredits) {
  Fixture fx(4, 0, 0);
  auto credit = fx.tx(fx.a, 1, {out("b", 4)});
  auto spend = fx.tx(fx.b, 1, {out("c", 3)}, {{AccountId("a"), 1}});
  auto r = fx.replica();
  EXPECT_TRUE(r.deliver(1, spend).empty());  // dep not applied yet: held
  auto ev = r.deliver(0, credit);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[1].kind, LedgerEvent::Kind::kApplied);
  EXPECT_EQ(r.read(AccountId("c")), Amount(3));
  EXPECT_EQ(r.read(AccountId("b")), Amount(1));

  // claiming the same credit again, or a credit to someone else, is refused
  auto again = fx.tx(fx.b, 2, {out("c", 1)}, {{AccountId("a"), 1}});
  EXPECT_EQ(r.deliver(1, again).at(0).reason, DropReason::kBadDependency);
}

TEST(Ledger, SpendingUnclaimedCreditIsInsufficient) {
  Fixture fx(4, 0, 0);
  auto r = fx.replica();
  r.deliver(0, fx.tx(fx.a, 1, {out("b", 4)}));
  EXPECT_EQ(r.read(AccountId("b")), Amount(4));
  EXPECT_EQ(r.admission(fx.tx(fx.b, 1, {out("c", 1)}), 1), DropReason::kInsufficientFunds);
  auto prepared = r.prepare_transfer(AccountId("b"), {out("c", 1)});
  EXPECT_EQ(prepared.deps, (std::vector<TxRef>{{AccountId("a"), 1}}));
  EXPECT_FALSE(r.admission(sign_single(prepared, fx.b), 1));
}

TEST(Ledger, IndependentSourcesCommute) {
  Fixture fx(5, 5, 0);
  auto ta = fx.tx(fx.a, 1, {out("c", 2)});
  auto tb = fx.tx(fx.b, 1, {out("c", 3), out("a", 1)});
  auto r1 = fx.replica();
  auto r2 = fx.replica();
  r1.deliver(0, ta);
  r1.deliver(1, tb);
  r2.deliver(1, tb);
  r2.deliver(0, ta);
  EXPECT_EQ(r1.snapshot(), r2.snapshot());
  EXPECT_EQ(r1.read(AccountId("c")), Amount(5));
}

// Property: random per-source streams, delivered to several replicas in
// different interleavings that keep each source's order, converge to equal
// snapshots; totals are conserved and no balance goes negative.
TEST(Ledger, RandomInterleavingsConvergeAndConserve) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::mt19937_64 rng(seed);
    Fixture fx(10, 10, 10);
    const crypto::KeyPair* keys[] = {&fx.a, &fx.b, &fx.c};
    const char* names[] = {"a", "b", "c"};
    // Each source builds its stream against its own private view, the way a
    // correct owner would, plus a few deliberately bad transactions.
    std::vector<std::vector<TransferTx>> streams(3);
    auto author = fx.replica();
    for (int step = 0; step < 12; ++step) {
      int s = static_cast<int>(rng() % 3);
      int d = static_cast<int>((s + 1 + rng() % 2) % 3);
      auto src = AccountId(names[s]);
      auto amt = static_cast<std::int64_t>(rng() % 8);
      auto tx = sign_single(author.prepare_transfer(src, {out(names[d], amt)}), *keys[s]);
      if (rng() % 5 == 0) tx = sign_single(TransferTx{src, {out(names[d], 50)}, tx.nonce, tx.deps, {}}, *keys[s]);
      auto ev = author.deliver(static_cast<ProcessId>(s), tx);
      if (!ev.empty() && ev[0].kind == LedgerEvent::Kind::kApplied) streams[s].push_back(tx);
    }
    auto total = fx.replica().total();
    LedgerSnapshot reference = author.snapshot();
    for (int rep = 0; rep < 4; ++rep) {
      auto r = fx.replica();
      std::vector<std::size_t> pos(3, 0);
      while (true) {
        std::vector<int> live;
        for (int s = 0; s < 3; ++s)
          if (pos[s] < streams[s].size()) live.push_back(s);
        if (live.empty()) break;
        int s = live[rng() % live.size()];
        r.deliver(static_cast<ProcessId>(s), streams[s][pos[s]++]);
        EXPECT_FALSE(r.any_negative());
        EXPECT_EQ(r.total(), total);
      }
      EXPECT_EQ(r.held(), 0u) << "seed " << seed;
      EXPECT_EQ(r.snapshot(), reference) << "seed " << seed;
    }
  }
}
