#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "paychan/simnet.hpp"

namespace paychan {

// Scenario file (JSON):
//   {"n": 4, "f": 1, "seed": 7,
//    "accounts":  [{"id": "alice", "owner": 0, "balance": 100}, ...],
//    "byzantine": [{"process": 3, "behavior": "overspender"}, ...],
//    "mutations": {"skip_open_gate": false, "accept_nonmonotonic": false,
//                  "skip_multisig_check": false},
//    "starve":    [{"victim": 1, "except": [0], "until": 500}],
//    "script":    [{"process": 0, "op": "open", "source": "alice",
//                   "target": "bob", "amt": 100, "at": 0, "repeat": 1}, ...]}
// Script entries take the same argument fields as trace records.

inline ByzantineSpec parse_byzantine(const nlohmann::json& j) {
  ByzantineSpec b;
  b.process = j.at("process").get<ProcessId>();
  b.behavior = behavior_from(j.at("behavior").get<std::string>());
  b.victim = j.value("victim", ProcessId{0});
  return b;
}

/// "3:overspender,5:message_dropper:0" as used by --byzantine.
inline std::vector<ByzantineSpec> parse_byzantine_flag(const std::string& flag) {
  std::vector<ByzantineSpec> out;
  std::stringstream ss(flag);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::vector<std::string> parts;
    std::stringstream is(item);
    std::string part;
    while (std::getline(is, part, ':')) parts.push_back(part);
    try {
      ByzantineSpec b;
      b.process = static_cast<ProcessId>(std::stoul(parts.at(0)));
      b.behavior = parts.size() > 1 ? behavior_from(parts[1]) : Behavior::kCrashSilent;
      if (parts.size() > 2) b.victim = static_cast<ProcessId>(std::stoul(parts[2]));
      out.push_back(b);
    } catch (const std::exception& e) {
      throw ConfigError("bad --byzantine entry '" + item + "': " + e.what());
    }
  }
  return out;
}

inline WorldConfig parse_scenario(const nlohmann::json& j) {
  try {
    WorldConfig cfg;
    cfg.n = j.at("n").get<std::size_t>();
    cfg.f = j.at("f").get<std::size_t>();
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.step_cap = j.value("step_cap", cfg.step_cap);
    for (const auto& a : j.at("accounts"))
      cfg.accounts.push_back({AccountId(a.at("id").get<std::string>()), a.at("owner").get<ProcessId>(),
                              Amount(a.value("balance", std::int64_t{0}))});
    for (const auto& b : j.value("byzantine", nlohmann::json::array())) cfg.byzantine.push_back(parse_byzantine(b));
    auto mut = j.value("mutations", nlohmann::json::object());
    cfg.channel.skip_open_gate = mut.value("skip_open_gate", false);
    cfg.channel.accept_nonmonotonic = mut.value("accept_nonmonotonic", false);
    cfg.ledger.require_complete_multisig = !mut.value("skip_multisig_check", false);
    for (const auto& s : j.value("starve", nlohmann::json::array())) {
      StarveRule r;
      r.victim = s.at("victim").get<ProcessId>();
      for (const auto& e : s.value("except", nlohmann::json::array())) r.except.insert(e.get<ProcessId>());
      r.until = s.at("until").get<std::uint64_t>();
      cfg.starve.push_back(std::move(r));
    }
    for (const auto& s : j.value("script", nlohmann::json::array())) {
      ScriptedOp op;
      op.process = s.at("process").get<ProcessId>();
      op.at = s.value("at", std::uint64_t{0});
      op.inv = invocation_from_json(op_kind_from(s.at("op").get<std::string>()), s);
      auto repeat = s.value("repeat", 1);
      for (int i = 0; i < repeat; ++i) cfg.script.push_back(op);
    }
    validate(cfg);
    return cfg;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

inline WorldConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_scenario(j);
}

}  // namespace paychan
