#pragma once

#include <nlohmann/json.hpp>

#include <istream>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "paychan/ops.hpp"

namespace paychan {

struct AccountInfo {
  AccountId id;
  ProcessId owner = 0;
  Amount balance;
};

enum class EventKind : std::uint8_t { kInvocation, kResponse, kEffect };

/// One history record. Effects are ledger transactions broadcast by a
/// Byzantine process and applied at a correct replica; they carry the
/// transfer as an invocation of `transfer` by that process.
struct HistoryEvent {
  std::uint64_t event_id = 0;
  ProcessId process = 0;
  EventKind kind = EventKind::kInvocation;
  OpId op_id = 0;
  Invocation inv;
  OpResult result;  // responses only
  bool correct = true;
};

struct History {
  std::size_t n = 0;
  std::size_t f = 0;
  std::uint64_t seed = 0;
  std::vector<AccountInfo> accounts;
  std::set<ProcessId> byzantine;
  std::vector<HistoryEvent> events;

  std::size_t correct_op_count() const {
    std::size_t k = 0;
    for (const auto& e : events)
      if (e.kind == EventKind::kInvocation && e.correct) ++k;
    return k;
  }
};

struct TraceParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kInvocation: return "invocation";
    case EventKind::kResponse: return "response";
    case EventKind::kEffect: return "effect";
  }
  return "?";
}

inline nlohmann::json header_json(const History& h) {
  auto accts = nlohmann::json::array();
  for (const auto& a : h.accounts) accts.push_back({{"id", a.id.str()}, {"owner", a.owner}, {"balance", a.balance.units()}});
  return {{"type", "header"}, {"n", h.n},           {"f", h.f}, {"seed", h.seed}, {"accounts", accts},
          {"byzantine", std::vector<ProcessId>(h.byzantine.begin(), h.byzantine.end())}};
}

inline nlohmann::json event_json(const HistoryEvent& e) {
  nlohmann::json j{{"event_id", e.event_id}, {"process", e.process}, {"kind", to_string(e.kind)},
                   {"op", to_string(e.inv.kind)}, {"op_id", e.op_id},  {"args", to_json(e.inv)},
                   {"correct", e.correct}};
  if (e.kind == EventKind::kResponse) j["payload"] = to_json(e.result);
  return j;
}

/// Line-delimited trace: one header record, then one record per event.
inline void write_trace(std::ostream& os, const History& h) {
  os << header_json(h).dump() << '\n';
  for (const auto& e : h.events) os << event_json(e).dump() << '\n';
}

inline History read_trace(std::istream& is) {
  History h;
  std::string line;
  bool have_header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.value("type", "") != "header") throw TraceParseError("first record must be the header");
        h.n = j.at("n").get<std::size_t>();
        h.f = j.at("f").get<std::size_t>();
        h.seed = j.value("seed", std::uint64_t{0});
        for (const auto& a : j.at("accounts"))
          h.accounts.push_back({AccountId(a.at("id").get<std::string>()), a.at("owner").get<ProcessId>(),
                                Amount(a.at("balance").get<std::int64_t>())});
        for (const auto& p : j.at("byzantine")) h.byzantine.insert(p.get<ProcessId>());
        have_header = true;
        continue;
      }
      HistoryEvent e;
      e.event_id = j.at("event_id").get<std::uint64_t>();
      e.process = j.at("process").get<ProcessId>();
      auto kind = j.at("kind").get<std::string>();
      if (kind == "invocation") e.kind = EventKind::kInvocation;
      else if (kind == "response") e.kind = EventKind::kResponse;
      else if (kind == "effect") e.kind = EventKind::kEffect;
      else throw TraceParseError("unknown event kind " + kind);
      e.op_id = j.at("op_id").get<OpId>();
      e.inv = invocation_from_json(op_kind_from(j.at("op").get<std::string>()), j.at("args"));
      if (e.kind == EventKind::kResponse) e.result = op_result_from_json(j.at("payload"));
      e.correct = j.value("correct", !h.byzantine.contains(e.process));
      h.events.push_back(std::move(e));
    } catch (const TraceParseError& err) {
      throw TraceParseError("line " + std::to_string(lineno) + ": " + err.what());
    } catch (const std::exception& err) {
      throw TraceParseError("line " + std::to_string(lineno) + ": " + err.what());
    }
  }
  if (!have_header) throw TraceParseError("empty trace");
  return h;
}

}  // namespace paychan
