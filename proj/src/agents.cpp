#include "dynshop/agents.hpp"

#include <algorithm>
#include <map>
#include <memory>

namespace dynshop {

namespace {

const std::map<std::string, SequencingRule>& sequencing_names() {
  static const std::map<std::string, SequencingRule> table = {
      {"SPT", SequencingRule::Spt},   {"LPT", SequencingRule::Lpt},
      {"FIFO", SequencingRule::Fifo}, {"LIFO", SequencingRule::Lifo},
      {"LWKR", SequencingRule::Lwkr}, {"MWKR", SequencingRule::Mwkr},
      {"LOPNR", SequencingRule::Lopnr}, {"MOPNR", SequencingRule::Mopnr},
  };
  return table;
}

const std::map<std::string, AssignmentRule>& assignment_names() {
  static const std::map<std::string, AssignmentRule> table = {
      {"LIT", AssignmentRule::Lit},
      {"LWL", AssignmentRule::Lwl},
      {"SPT", AssignmentRule::Spt},
  };
  return table;
}

std::string sequencing_name(SequencingRule r) {
  for (const auto& [name, rule] : sequencing_names())
    if (rule == r) return name;
  return "SPT";
}

std::string assignment_name(AssignmentRule r) {
  for (const auto& [name, rule] : assignment_names())
    if (rule == r) return name;
  return "LIT";
}

// Idle-and-up machines eligible for the op's group.
std::vector<const ObsMachine*> eligible_machines(const Observation& obs,
                                                 const std::string& group) {
  std::vector<const ObsMachine*> out;
  for (const auto& m : obs.machines)
    if (m.status == "idle" && m.group == group) out.push_back(&m);
  return out;
}

// Sequencing key; smaller is better after the rule's sign is applied.
double sequencing_key(const ObsReadyOp& op, SequencingRule rule) {
  switch (rule) {
    case SequencingRule::Spt: return op.mean_time;
    case SequencingRule::Lpt: return -op.mean_time;
    case SequencingRule::Fifo: return op.arrival;
    case SequencingRule::Lifo: return -op.arrival;
    case SequencingRule::Lwkr: return op.remaining_work;
    case SequencingRule::Mwkr: return -op.remaining_work;
    case SequencingRule::Lopnr: return static_cast<double>(op.remaining_ops);
    case SequencingRule::Mopnr: return -static_cast<double>(op.remaining_ops);
  }
  return op.mean_time;
}

const ObsMachine* pick_machine(const std::vector<const ObsMachine*>& machines,
                               const ObsReadyOp& op, AssignmentRule rule,
                               const AgentOptions& opts) {
  const ObsMachine* best = nullptr;
  auto better = [&](const ObsMachine* a, const ObsMachine* b) {
    if (!b) return true;
    double ka = 0.0, kb = 0.0, ta = 0.0, tb = 0.0;
    switch (rule) {
      case AssignmentRule::Lit:
        if (opts.lit_mode == "idle") {
          ka = a->idle_time;
          kb = b->idle_time;
        } else {
          ka = a->available_at;
          kb = b->available_at;
          ta = -a->busy_time;  // prefer the machine with the least idle share
          tb = -b->busy_time;
        }
        break;
      case AssignmentRule::Lwl:
        ka = opts.lwl_mode == "busy" ? a->busy_time : a->assigned_work;
        kb = opts.lwl_mode == "busy" ? b->busy_time : b->assigned_work;
        break;
      case AssignmentRule::Spt:
        ka = op.mean_time / a->speed;
        kb = op.mean_time / b->speed;
        break;
    }
    if (ka != kb) return ka < kb;
    if (ta != tb) return ta < tb;
    return a->id < b->id;
  };
  for (const auto* m : machines)
    if (better(m, best)) best = m;
  return best;
}

}  // namespace

RuleKey rule_key_from_string(const std::string& text) {
  auto plus = text.find('+');
  if (plus == std::string::npos)
    throw std::invalid_argument("rule key must look like SPT+LIT, got '" + text + "'");
  std::string seq = text.substr(0, plus);
  std::string asg = text.substr(plus + 1);
  auto s = sequencing_names().find(seq);
  if (s == sequencing_names().end())
    throw std::invalid_argument("unknown sequencing rule '" + seq + "'");
  auto a = assignment_names().find(asg);
  if (a == assignment_names().end())
    throw std::invalid_argument("unknown assignment rule '" + asg + "'");
  return {s->second, a->second};
}

std::string to_string(const RuleKey& key) {
  return sequencing_name(key.sequencing) + "+" + assignment_name(key.assignment);
}

std::vector<RuleKey> all_rule_keys() {
  std::vector<RuleKey> keys;
  for (auto s : {SequencingRule::Spt, SequencingRule::Lpt, SequencingRule::Fifo,
                 SequencingRule::Lifo, SequencingRule::Lwkr, SequencingRule::Mwkr,
                 SequencingRule::Lopnr, SequencingRule::Mopnr})
    for (auto a : {AssignmentRule::Lit, AssignmentRule::Lwl, AssignmentRule::Spt})
      keys.push_back({s, a});
  return keys;
}

Action pdr_decide(const Observation& obs, const RuleKey& rule, const AgentOptions& opts) {
  const ObsReadyOp* chosen = nullptr;
  std::vector<const ObsMachine*> chosen_machines;
  for (const auto& op : obs.ready) {
    auto machines = eligible_machines(obs, op.group);
    if (machines.empty()) continue;
    if (!chosen) {
      chosen = &op;
      chosen_machines = std::move(machines);
      continue;
    }
    double ka = sequencing_key(op, rule.sequencing);
    double kb = sequencing_key(*chosen, rule.sequencing);
    if (ka < kb || (ka == kb && op.job < chosen->job)) {
      chosen = &op;
      chosen_machines = std::move(machines);
    }
  }
  if (!chosen) throw std::invalid_argument("no admissible action to decide on");
  const ObsMachine* machine = pick_machine(chosen_machines, *chosen, rule.assignment, opts);
  return {chosen->job, chosen->op_index, machine->id};
}

Action random_decide(const Observation& obs, std::mt19937_64& rng) {
  std::vector<Action> actions;
  for (const auto& op : obs.ready)
    for (const auto* m : eligible_machines(obs, op.group))
      actions.push_back({op.job, op.op_index, m->id});
  if (actions.empty()) throw std::invalid_argument("no admissible action to decide on");
  std::sort(actions.begin(), actions.end());
  std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
  return actions[pick(rng)];
}

AgentFn make_agent(const std::string& spec, const AgentOptions& opts) {
  auto colon = spec.find(':');
  std::string kind = colon == std::string::npos ? spec : spec.substr(0, colon);
  std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);

  if (kind == "pdr") {
    RuleKey key = rule_key_from_string(arg);
    return [key, opts](const Observation& obs) -> std::optional<Action> {
      if (obs.ready.empty()) return std::nullopt;
      return pdr_decide(obs, key, opts);
    };
  }
  if (kind == "random") {
    std::uint64_t seed = 0;
    if (!arg.empty()) {
      const std::string prefix = "seed=";
      if (arg.rfind(prefix, 0) != 0)
        throw std::invalid_argument("random agent takes 'seed=N', got '" + arg + "'");
      seed = std::stoull(arg.substr(prefix.size()));
    }
    auto rng = std::make_shared<std::mt19937_64>(derive_stream(seed, RngStream::Agent));
    return [rng](const Observation& obs) -> std::optional<Action> {
      if (obs.ready.empty()) return std::nullopt;
      return random_decide(obs, *rng);
    };
  }
  throw std::invalid_argument("unknown agent spec '" + spec + "'");
}

Trajectory run_episode(const EventStream& stream, const AgentFn& agent, ObsLevel level,
                       const std::string& agent_name) {
  Simulator sim(stream);
  sim.reset();
  while (!sim.done()) {
    Observation obs = sim.observe(level);
    std::optional<Action> action = agent(obs);
    if (action)
      sim.step(*action);
    else
      sim.step_pass();
  }
  Trajectory t = sim.trajectory();
  t.agent = agent_name;
  return t;
}

}  // namespace dynshop
