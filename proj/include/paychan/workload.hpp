#pragma once

#include <algorithm>
#include <random>
#include <vector>

#include "paychan/simnet.hpp"

namespace paychan {

struct WorkloadOptions {
  std::size_t n = 7;
  std::size_t f = 2;
  std::size_t max_correct_ops = 12;
  LedgerOptions ledger;
  ChannelMutations channel;
};

/// Random mixed-fault scenario for consistency checking.
///
/// Credits between correct processes only flow from higher to lower process
/// ids (ledger transfers go down, channels go up and pay the lower source
/// back on close), and processes only read their own accounts. Local-read
/// ledgers are not sequentially consistent under cyclic credit patterns
/// (two processes each paying the other, then each reading its own stale
/// balance), so the generator stays inside the acyclic fragment.
inline WorldConfig random_bsc_scenario(std::uint64_t seed, const WorkloadOptions& opt = {}) {
  std::mt19937_64 rng(seed);
  auto pick = [&](std::uint64_t lo, std::uint64_t hi) { return lo + rng() % (hi - lo + 1); };

  WorldConfig cfg;
  cfg.n = opt.n;
  cfg.f = opt.f;
  cfg.seed = seed;
  cfg.ledger = opt.ledger;
  cfg.channel = opt.channel;
  auto acct = [](ProcessId p) { return AccountId("a" + std::to_string(p)); };
  for (ProcessId p = 0; p < opt.n; ++p) cfg.accounts.push_back({acct(p), p, Amount(static_cast<std::int64_t>(pick(10, 20)))});

  std::vector<ProcessId> ids(opt.n);
  for (ProcessId p = 0; p < opt.n; ++p) ids[p] = p;
  std::shuffle(ids.begin(), ids.end(), rng);
  std::vector<Behavior> kinds{Behavior::kEquivocator, Behavior::kOverspender, Behavior::kChannelCheater};
  std::shuffle(kinds.begin(), kinds.end(), rng);
  std::vector<ProcessId> correct;
  for (std::size_t i = 0; i < opt.n; ++i) {
    if (i < opt.f) cfg.byzantine.push_back({ids[i], kinds[i % kinds.size()], 0});
    else correct.push_back(ids[i]);
  }
  std::sort(correct.begin(), correct.end());
  auto any_correct = [&] { return correct[rng() % correct.size()]; };

  std::size_t budget = opt.max_correct_ops;
  auto add = [&](ProcessId p, Invocation inv, std::uint64_t at = 0) { cfg.script.push_back({at, p, std::move(inv)}); };
  auto add_correct = [&](ProcessId p, Invocation inv, std::uint64_t at = 0) {
    if (budget == 0) return false;
    --budget;
    add(p, std::move(inv), at);
    return true;
  };

  for (const auto& b : cfg.byzantine) {
    auto me = acct(b.process);
    auto victim = any_correct();
    switch (b.behavior) {
      case Behavior::kChannelCheater: {
        ChannelId ch{me, acct(victim)};
        add(b.process, Invocation::open(ch, Amount(static_cast<std::int64_t>(pick(5, 8)))));
        for (int i = 0; i < 4; ++i) add(b.process, Invocation::pay(ch, Amount(1)));
        add_correct(victim, Invocation::target_close(ch), pick(150, 700));
        add_correct(victim, Invocation::read(acct(victim)));
        break;
      }
      case Behavior::kEquivocator:
      case Behavior::kOverspender: {
        auto other = any_correct();
        add(b.process, Invocation::transfer(me, {{acct(victim), Amount(static_cast<std::int64_t>(pick(1, 3)))},
                                                 {acct(other), Amount(1)}}));
        add_correct(victim, Invocation::read(acct(victim)), pick(0, 400));
        break;
      }
      default:
        break;
    }
  }

  // One channel between correct processes, sometimes with the target's
  // inbound traffic held back so the open message can overtake the deposit.
  if (correct.size() >= 2 && budget >= 4) {
    auto i = pick(0, correct.size() - 2);
    auto j = pick(i + 1, correct.size() - 1);
    auto src = correct[i], tgt = correct[j];
    ChannelId ch{acct(src), acct(tgt)};
    add_correct(src, Invocation::open(ch, Amount(static_cast<std::int64_t>(pick(3, 8)))));
    auto pays = pick(1, 3);
    for (std::uint64_t k = 0; k < pays && budget > 2; ++k) add_correct(src, Invocation::pay(ch, Amount(1)));
    add_correct(tgt, Invocation::target_close(ch), pick(100, 800));
    add_correct(tgt, Invocation::read(acct(tgt)));
    if (rng() % 2) cfg.starve.push_back({tgt, {src}, 2000});
  }

  while (budget > 0) {
    auto p = any_correct();
    std::vector<ProcessId> lower;
    for (auto q : correct)
      if (q < p) lower.push_back(q);
    if (!lower.empty() && rng() % 2) {
      auto q = lower[rng() % lower.size()];
      add_correct(p, Invocation::transfer(acct(p), {{acct(q), Amount(static_cast<std::int64_t>(pick(1, 4)))}}),
                  pick(0, 600));
    } else {
      add_correct(p, Invocation::read(acct(p)), pick(0, 800));
    }
  }
  return cfg;
}

}  // namespace paychan
