#include <gtest/gtest.h>

#include "paychan/channel.hpp"

using namespace paychan;

namespace {

// Two endpoints (a owned by process 0, b by process 1) sharing one ledger
// replica; the test plays the network and the broadcast.
struct Pair {
  crypto::KeyPair ka = crypto::derive_keypair("a", 3);
  crypto::KeyPair kb = crypto::derive_keypair("b", 3);
  crypto::KeyPair kc = crypto::derive_keypair("c", 3);
  Directory dir;
  std::map<AccountId, crypto::KeyPair> keys_a, keys_b;
  ChannelId ch{AccountId("a"), AccountId("b")};
  AccountId escrow = escrow_of(ch);
  std::unique_ptr<LedgerReplica> ledger;
  std::unique_ptr<ChannelEndpoint> src, tgt;

  explicit Pair(std::int64_t balance_a, ChannelMutations mut = {}) {
    dir.add_account(ka, 0);
    dir.add_account(kb, 1);
    dir.add_account(kc, 2);
    keys_a[AccountId("a")] = ka;
    keys_b[AccountId("b")] = kb;
    ledger = std::make_unique<LedgerReplica>(dir, std::map<AccountId, Amount>{{AccountId("a"), Amount(balance_a)}});
    src = std::make_unique<ChannelEndpoint>(0, dir, keys_a, mut);
    tgt = std::make_unique<ChannelEndpoint>(1, dir, keys_b, mut);
  }

  TransferTx deposit_tx(Amount amt) const {
    return sign_single(ledger->prepare_transfer(ch.a, {{escrow, amt}}), ka);
  }

  void apply(ProcessId origin, const TransferTx& tx) {
    auto ev = ledger->deliver(origin, tx);
    ASSERT_FALSE(ev.empty());
    ASSERT_EQ(ev.back().kind, LedgerEvent::Kind::kApplied);
  }

  // open with the deposit applied first; returns the open message as sent
  ChannelMsg open(Amount amt, bool deliver = true) {
    auto dep = deposit_tx(amt);
    apply(0, dep);
    auto msg = src->complete_open(ch, amt, dep.ref(), *ledger);
    if (deliver) to_target(msg);
    return msg;
  }

  void to_target(ChannelMsg m) {
    m.link_seq = src->next_link_seq(1);
    tgt->receive(0, std::move(m));
    tgt->process_inbox(*ledger);
  }

  void to_source(ChannelMsg m) {
    m.link_seq = tgt->next_link_seq(0);
    src->receive(1, std::move(m));
    src->process_inbox(*ledger);
  }

  void pay(std::int64_t amt) {
    auto m = src->transfer(ch, Amount(amt));
    ASSERT_TRUE(m);
    to_target(*m);
  }

  // closing tx with arbitrary outputs, partially signed by a
  TransferTx crafted(std::int64_t x, std::int64_t y, const TransferTx& like) const {
    TransferTx tx;
    tx.source = escrow;
    tx.outputs = {{ch.a, Amount(x)}, {ch.b, Amount(y)}};
    tx.nonce = like.nonce;
    tx.deps = like.deps;
    return add_multisig_partial(tx, *dir.multisig(escrow), ka);
  }

  std::vector<std::int64_t> stored() const {
    auto it = tgt->target_views().find(ch);
    if (it == tgt->target_views().end()) return {};
    return {it->second.outputs[0].amount.units(), it->second.outputs[1].amount.units()};
  }
};

}  // namespace

TEST(Channel, EscrowIdIsTheCanonicalMultisigId) {
  Pair p(5);
  EXPECT_EQ(p.escrow, AccountId::multi(crypto::MultisigKey({p.kb.pub, p.ka.pub})));
  EXPECT_EQ(escrow_of({AccountId("b"), AccountId("a")}), p.escrow);
}

TEST(Channel, OpenMovesDepositAndSetsSourceView) {
  Pair p(5);
  ASSERT_TRUE(p.src->can_open(p.ch, Amount(3), *p.ledger));
  p.open(Amount(3));
  EXPECT_EQ(p.ledger->read(AccountId("a")), Amount(2));
  EXPECT_EQ(p.ledger->read(p.escrow), Amount(3));
  const auto& v = p.src->source_views().at(p.ch);
  EXPECT_EQ(v.bal_a, Amount(3));
  EXPECT_EQ(v.bal_b, Amount(0));
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{3, 0}));
}

TEST(Channel, OpenGuards) {
  Pair p(1);
  EXPECT_FALSE(p.src->can_open(p.ch, Amount(2), *p.ledger));
  EXPECT_FALSE(p.tgt->can_open(p.ch, Amount(1), *p.ledger));  // not the source's owner
  EXPECT_FALSE(p.src->can_open({AccountId("a"), AccountId("a")}, Amount(1), *p.ledger));
  p.open(Amount(1));
  EXPECT_FALSE(p.src->can_open(p.ch, Amount(0), *p.ledger));  // already open
}

TEST(Channel, OpenMessageWaitsForEscrowCredit) {
  Pair p(5);
  auto dep = p.deposit_tx(Amount(4));
  // the source applied its deposit; the target's replica has not yet
  LedgerReplica source_replica(p.dir, {{AccountId("a"), Amount(5)}});
  source_replica.deliver(0, dep);
  auto msg = p.src->complete_open(p.ch, Amount(4), dep.ref(), source_replica);
  p.to_target(msg);
  EXPECT_EQ(p.tgt->pending_messages(), 1u);
  EXPECT_TRUE(p.stored().empty());
  p.apply(0, dep);
  p.tgt->process_inbox(*p.ledger);
  EXPECT_EQ(p.tgt->pending_messages(), 0u);
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{4, 0}));
}

TEST(Channel, SkippedGateStoresBeforeEscrowExists) {
  Pair p(5, {.skip_open_gate = true});
  auto dep = p.deposit_tx(Amount(4));
  LedgerReplica source_replica(p.dir, {{AccountId("a"), Amount(5)}});
  source_replica.deliver(0, dep);
  p.to_target(p.src->complete_open(p.ch, Amount(4), dep.ref(), source_replica));
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{4, 0}));
  EXPECT_EQ(p.ledger->read(p.escrow), Amount(0));
}

TEST(Channel, UnsignedOrDuplicateOpenIsDropped) {
  Pair p(5);
  auto msg = p.open(Amount(3), false);
  auto unsigned_msg = msg;
  unsigned_msg.tx.auth = std::monostate{};
  p.to_target(unsigned_msg);
  EXPECT_TRUE(p.stored().empty());
  EXPECT_EQ(p.tgt->stats().dropped_messages, 1u);
  p.to_target(msg);
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{3, 0}));
  p.to_target(msg);
  EXPECT_EQ(p.tgt->stats().dropped_messages, 2u);
}

TEST(Channel, ReplayedLinkSequenceIsDropped) {
  Pair p(5);
  auto msg = p.open(Amount(3), false);
  msg.link_seq = 1;
  p.tgt->receive(0, msg);
  p.tgt->receive(0, msg);
  EXPECT_EQ(p.tgt->stats().dropped_messages, 1u);
  EXPECT_EQ(p.tgt->pending_messages(), 1u);
}

TEST(Channel, PaymentExampleTenOne) {
  Pair p(11);
  p.open(Amount(11));
  p.pay(1);
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{10, 1}));
  auto m = p.src->transfer(p.ch, Amount(1));
  ASSERT_TRUE(m);
  EXPECT_EQ(m->tx.outputs[0].amount, Amount(9));
  EXPECT_EQ(m->tx.outputs[1].amount, Amount(2));
  const auto& v = p.src->source_views().at(p.ch);
  EXPECT_EQ(v.bal_a, Amount(9));
  EXPECT_EQ(v.bal_b, Amount(2));
  p.to_target(*m);
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{9, 2}));

  auto close = p.tgt->begin_target_close(p.ch, Amount(2));
  ASSERT_TRUE(close);
  ASSERT_TRUE(is_authorized(*close, p.dir));
  auto before_a = p.ledger->read(AccountId("a"));
  p.apply(1, *close);
  EXPECT_EQ(p.ledger->read(AccountId("a")) - before_a, Amount(9));
  EXPECT_EQ(p.ledger->read(AccountId("b")), Amount(2));
  EXPECT_EQ(p.ledger->read(p.escrow), Amount(0));
}

TEST(Channel, PayMoreThanBalanceSendsNothing) {
  Pair p(5);
  p.open(Amount(3));
  EXPECT_FALSE(p.src->transfer(p.ch, Amount(4)));
  EXPECT_FALSE(p.tgt->transfer(p.ch, Amount(1)));
  EXPECT_EQ(p.src->source_views().at(p.ch).bal_a, Amount(3));
}

TEST(Channel, KPaymentsAreKMessages) {
  Pair p(200);
  p.open(Amount(150));
  int sent = 0;
  for (int i = 0; i < 100; ++i) sent += p.src->transfer(p.ch, Amount(1)).has_value();
  EXPECT_EQ(sent, 100);
}

TEST(Channel, InconsistentTransfersAreRejected) {
  Pair p(11);
  p.open(Amount(11));
  p.pay(1);
  const auto& stored = p.tgt->target_views().at(p.ch);
  // replay of the current state with amt=1
  p.to_target({ChannelMsgKind::kTransfer, p.crafted(10, 1, stored), Amount(1)});
  // the source raising its own side
  p.to_target({ChannelMsgKind::kTransfer, p.crafted(11, 0, stored), Amount(1)});
  // right balances, wrong amt
  p.to_target({ChannelMsgKind::kTransfer, p.crafted(9, 2, stored), Amount(2)});
  // wrong total
  p.to_target({ChannelMsgKind::kTransfer, p.crafted(9, 3, stored), Amount(2)});
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{10, 1}));
  EXPECT_EQ(p.tgt->stats().dropped_messages, 4u);
  EXPECT_EQ(p.tgt->stats().target_regressions, 0u);
}

TEST(Channel, NonmonotonicMutantAcceptsRegression) {
  Pair p(11, {.accept_nonmonotonic = true});
  p.open(Amount(11));
  p.pay(2);
  const auto& stored = p.tgt->target_views().at(p.ch);
  p.to_target({ChannelMsgKind::kTransfer, p.crafted(11, 0, stored), Amount(1)});
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{11, 0}));
  EXPECT_EQ(p.tgt->stats().target_regressions, 1u);
}

TEST(Channel, TargetCloseGuards) {
  Pair p(5);
  EXPECT_FALSE(p.tgt->begin_target_close(p.ch, std::nullopt));  // nothing stored
  p.open(Amount(3));
  p.pay(1);
  EXPECT_FALSE(p.tgt->begin_target_close(p.ch, Amount(2)));
  EXPECT_FALSE(p.src->begin_target_close(p.ch, Amount(1)));
  EXPECT_TRUE(p.tgt->begin_target_close(p.ch, Amount(1)));
  EXPECT_FALSE(p.tgt->begin_target_close(p.ch, Amount(1)));
}

TEST(Channel, CloseMessageClearsSourceAfterDrainAndAllowsReopen) {
  Pair p(10);
  p.open(Amount(4));
  p.pay(1);
  auto tx = *p.tgt->begin_target_close(p.ch, std::nullopt);
  ChannelMsg close{ChannelMsgKind::kClose, tx, tx.outputs[1].amount};
  // raced ahead of the ledger: held
  p.to_source(close);
  EXPECT_EQ(p.src->pending_messages(), 1u);
  EXPECT_TRUE(p.src->source_views().contains(p.ch));
  p.apply(1, tx);
  p.src->process_inbox(*p.ledger);
  EXPECT_FALSE(p.src->source_views().contains(p.ch));
  EXPECT_EQ(p.ledger->read(AccountId("a")), Amount(9));
  ASSERT_TRUE(p.src->can_open(p.ch, Amount(2), *p.ledger));
  p.open(Amount(2));
  EXPECT_EQ(p.stored(), (std::vector<std::int64_t>{2, 0}));
  EXPECT_EQ(p.src->source_views().at(p.ch).epoch, 2u);
}

TEST(Channel, ForgedCloseIsDropped) {
  Pair p(10);
  p.open(Amount(4));
  const auto& stored = p.tgt->target_views().at(p.ch);
  auto forged = p.crafted(0, 4, stored);  // only a's own partial
  p.to_source({ChannelMsgKind::kClose, forged, Amount(4)});
  EXPECT_TRUE(p.src->source_views().contains(p.ch));
  EXPECT_EQ(p.src->stats().dropped_messages, 1u);
}

TEST(Channel, ValidateTx) {
  Pair p(10);
  auto msg = p.open(Amount(4), false);
  EXPECT_TRUE(validate_tx(msg.tx, p.ch, p.ch.a, Amount(4), p.dir));
  EXPECT_FALSE(validate_tx(msg.tx, p.ch, p.ch.b, Amount(4), p.dir));  // no partial from b
  EXPECT_FALSE(validate_tx(msg.tx, p.ch, p.ch.a, Amount(5), p.dir));  // sum mismatch

  auto wrong_escrow = msg.tx;
  wrong_escrow.source = escrow_of({AccountId("a"), AccountId("c")});
  EXPECT_FALSE(validate_tx(wrong_escrow, p.ch, p.ch.a, Amount(4), p.dir));

  // a builder that mis-sums the outputs, re-signed so only the sum is wrong
  auto bad_sum = p.crafted(4, 1, msg.tx);
  EXPECT_FALSE(validate_tx(bad_sum, p.ch, p.ch.a, Amount(4), p.dir));
  EXPECT_TRUE(validate_tx(p.crafted(3, 1, msg.tx), p.ch, p.ch.a, Amount(4), p.dir));

  auto swapped = p.crafted(0, 4, msg.tx);
  std::swap(swapped.outputs[0], swapped.outputs[1]);
  EXPECT_FALSE(validate_tx(swapped, p.ch, p.ch.a, Amount(4), p.dir));
}
