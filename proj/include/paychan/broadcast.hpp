#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "paychan/amount.hpp"
#include "paychan/bytes.hpp"
#include "paychan/crypto.hpp"

namespace paychan {

enum class BrbPhase : std::uint8_t { kInit, kEcho, kReady };

struct BrbMessage {
  BrbPhase phase = BrbPhase::kInit;
  ProcessId origin = 0;  // sender of record
  std::uint64_t seq = 0;
  Bytes payload;
  friend bool operator==(const BrbMessage&, const BrbMessage&) = default;
};

/// Bracha thresholds for n processes tolerating f Byzantine ones.
struct BrbThresholds {
  std::size_t n;
  std::size_t f;

  std::size_t echo_quorum() const { return (n + f + 2) / 2; }  // ceil((n+f+1)/2)
  std::size_t ready_amplification() const { return f + 1; }
  std::size_t delivery_quorum() const { return 2 * f + 1; }
};

/// Messages a correct process sends for one broadcast in a fault-free run,
/// excluding the copies each process sends to itself: (n-1) INIT plus
/// n(n-1) ECHO plus n(n-1) READY.
constexpr std::uint64_t brb_network_messages(std::uint64_t n) { return (n - 1) * (2 * n + 1); }

/// Same count including self-addressed copies: n + 2n^2.
constexpr std::uint64_t brb_messages_with_self(std::uint64_t n) { return n * (2 * n + 1); }

struct BrbDelivery {
  ProcessId origin;
  std::uint64_t seq;
  Bytes payload;
};

struct BrbOutput {
  std::vector<BrbMessage> to_all;  // each goes to every process, self included
  std::vector<BrbDelivery> deliveries;
};

/// Source-ordered Byzantine reliable broadcast: Bracha's echo/ready protocol
/// run once per (origin, seq), with deliveries from each origin released in
/// seq order 1, 2, 3, ... with no gaps.
class BrbEngine {
 public:
  BrbEngine(ProcessId self, std::size_t n, std::size_t f) : self_(self), th_{n, f} {
    if (n == 0 || 3 * f >= n) throw std::invalid_argument("reliable broadcast requires f < n/3");
  }

  const BrbThresholds& thresholds() const { return th_; }
  ProcessId self() const { return self_; }

  /// Assigns the next local sequence number and returns the INIT to send to
  /// all n processes.
  BrbMessage broadcast(Bytes payload) { return {BrbPhase::kInit, self_, ++next_seq_, std::move(payload)}; }

  std::uint64_t next_seq() const { return next_seq_ + 1; }

  BrbOutput on_message(ProcessId from, const BrbMessage& m) {
    BrbOutput out;
    if (m.seq == 0 || m.origin >= th_.n || from >= th_.n) return out;
    auto& inst = instances_[{m.origin, m.seq}];
    auto digest = crypto::sha256(m.payload);

    switch (m.phase) {
      case BrbPhase::kInit:
        // Only the origin may start its own instance; later INITs for the
        // same (origin, seq) are equivocation and ignored.
        if (from != m.origin || inst.echoed) break;
        inst.echoed = true;
        out.to_all.push_back({BrbPhase::kEcho, m.origin, m.seq, m.payload});
        break;
      case BrbPhase::kEcho: {
        if (!inst.echo_from.insert(from).second) break;
        auto& voters = inst.echoes[digest];
        voters.insert(from);
        if (voters.size() >= th_.echo_quorum()) send_ready(inst, m, out);
        break;
      }
      case BrbPhase::kReady: {
        if (!inst.ready_from.insert(from).second) break;
        auto& voters = inst.readies[digest];
        voters.insert(from);
        if (voters.size() >= th_.ready_amplification()) send_ready(inst, m, out);
        if (voters.size() >= th_.delivery_quorum() && !inst.accepted) {
          inst.accepted = true;
          accepted_[m.origin].emplace(m.seq, m.payload);
          release(m.origin, out);
        }
        break;
      }
    }
    return out;
  }

  std::uint64_t delivered_up_to(ProcessId origin) const {
    auto it = delivered_.find(origin);
    return it == delivered_.end() ? 0 : it->second;
  }

  /// Accepted by quorum but waiting for a lower seq from the same origin.
  std::size_t buffered() const {
    std::size_t k = 0;
    for (const auto& [o, m] : accepted_) k += m.size();
    return k;
  }

 private:
  struct Instance {
    bool echoed = false;
    bool readied = false;
    bool accepted = false;
    std::set<ProcessId> echo_from;
    std::set<ProcessId> ready_from;
    std::map<crypto::Digest, std::set<ProcessId>> echoes;
    std::map<crypto::Digest, std::set<ProcessId>> readies;
  };

  void send_ready(Instance& inst, const BrbMessage& m, BrbOutput& out) {
    if (inst.readied) return;
    inst.readied = true;
    out.to_all.push_back({BrbPhase::kReady, m.origin, m.seq, m.payload});
  }

  void release(ProcessId origin, BrbOutput& out) {
    auto& queue = accepted_[origin];
    auto& upto = delivered_[origin];
    for (auto it = queue.find(upto + 1); it != queue.end(); it = queue.find(upto + 1)) {
      out.deliveries.push_back({origin, it->first, std::move(it->second)});
      ++upto;
      queue.erase(it);
    }
  }

  ProcessId self_;
  BrbThresholds th_;
  std::uint64_t next_seq_ = 0;
  std::map<std::pair<ProcessId, std::uint64_t>, Instance> instances_;
  std::map<ProcessId, std::map<std::uint64_t, Bytes>> accepted_;
  std::map<ProcessId, std::uint64_t> delivered_;
};

}  // namespace paychan
