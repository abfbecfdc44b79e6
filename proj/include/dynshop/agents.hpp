#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dynshop/sim.hpp"

// Built-in dispatching policies: 24 composite priority rules (8 sequencing x
// 3 machine assignment) plus a uniform random baseline.
namespace dynshop {

enum class SequencingRule { Spt, Lpt, Fifo, Lifo, Lwkr, Mwkr, Lopnr, Mopnr };
enum class AssignmentRule { Lit, Lwl, Spt };

struct RuleKey {
  SequencingRule sequencing = SequencingRule::Spt;
  AssignmentRule assignment = AssignmentRule::Lit;
};

RuleKey rule_key_from_string(const std::string& text);  // e.g. "SPT+LIT"
std::string to_string(const RuleKey& key);
std::vector<RuleKey> all_rule_keys();  // the full 24-rule pool

struct AgentOptions {
  // LIT: "earliest" = earliest available, ties by largest busy share;
  //      "idle" = smallest cumulative idle time.
  std::string lit_mode = "earliest";
  // LWL: "assigned" = least cumulative assigned workload; "busy" = least
  //      cumulative busy time.
  std::string lwl_mode = "assigned";
};

// Both deciders consume L1 fields only; richer levels also work.
Action pdr_decide(const Observation& obs, const RuleKey& rule,
                  const AgentOptions& opts = {});
Action random_decide(const Observation& obs, std::mt19937_64& rng);

// nullopt declines the epoch.
using AgentFn = std::function<std::optional<Action>(const Observation&)>;

/// Specs: "pdr:SPT+LIT", "random", "random:seed=7".
AgentFn make_agent(const std::string& spec, const AgentOptions& opts = {});

Trajectory run_episode(const EventStream& stream, const AgentFn& agent,
                       ObsLevel level = ObsLevel::L1,
                       const std::string& agent_name = "");

}  // namespace dynshop
