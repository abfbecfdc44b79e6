#include "dynshop/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dynshop/detail/object_reader.hpp"

namespace dynshop {

namespace {

using detail::ObjectReader;

json normal_to_json(const NormalParams& n) {
  return json{{"mean", n.mean}, {"stddev", n.stddev}};
}

NormalParams normal_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  NormalParams n;
  n.mean = r.get<double>("mean");
  n.stddev = r.get<double>("stddev");
  r.finish();
  return n;
}

std::string profile_name(ModulationProfile p) {
  switch (p) {
    case ModulationProfile::Constant: return "constant";
    case ModulationProfile::Periodic: return "periodic";
    case ModulationProfile::Linear: return "linear";
  }
  return "constant";
}

ModulationProfile profile_from_name(const std::string& s, const std::string& path) {
  if (s == "constant") return ModulationProfile::Constant;
  if (s == "periodic") return ModulationProfile::Periodic;
  if (s == "linear") return ModulationProfile::Linear;
  throw ParseError(path, "unknown modulation profile '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// PlantSpec helpers

double PlantSpec::total_speed() const {
  double s = 0.0;
  for (const auto& m : machines) s += m.speed;
  return s;
}

const GroupSpec* PlantSpec::find_group(const std::string& id) const {
  for (const auto& g : groups)
    if (g.id == id) return &g;
  return nullptr;
}

const ProcessTemplate* PlantSpec::find_template(const std::string& id) const {
  for (const auto& t : templates)
    if (t.id == id) return &t;
  return nullptr;
}

const MachineSpec* PlantSpec::find_machine(int id) const {
  for (const auto& m : machines)
    if (m.id == id) return &m;
  return nullptr;
}

std::string PlantSpec::group_of_machine(int machine) const {
  for (const auto& g : groups)
    for (int m : g.machines)
      if (m == machine) return g.id;
  return {};
}

double JobSpec::total_work() const {
  double w = 0.0;
  for (double p : processing_times) w += p;
  return w;
}

// ---------------------------------------------------------------------------
// Events

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::MachineUp: return "machine_up";
    case EventKind::MachineDown: return "machine_down";
    case EventKind::PreventiveMaintenance: return "preventive_maintenance";
    case EventKind::JobArrival: return "job_arrival";
    case EventKind::Cancellation: return "cancellation";
    case EventKind::Rework: return "rework";
    case EventKind::PriorityChange: return "priority_change";
    case EventKind::RouteChange: return "route_change";
    case EventKind::DueDateChange: return "due_date_change";
  }
  return "job_arrival";
}

EventKind event_kind_from_string(const std::string& s) {
  static const std::map<std::string, EventKind> table = {
      {"machine_up", EventKind::MachineUp},
      {"machine_down", EventKind::MachineDown},
      {"preventive_maintenance", EventKind::PreventiveMaintenance},
      {"job_arrival", EventKind::JobArrival},
      {"cancellation", EventKind::Cancellation},
      {"rework", EventKind::Rework},
      {"priority_change", EventKind::PriorityChange},
      {"route_change", EventKind::RouteChange},
      {"due_date_change", EventKind::DueDateChange},
  };
  auto it = table.find(s);
  if (it == table.end()) throw ParseError("event.kind", "unknown kind '" + s + "'");
  return it->second;
}

bool event_before(const Event& a, const Event& b) {
  if (a.time != b.time) return a.time < b.time;
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  return a.id < b.id;
}

void EventStream::sort_events() {
  std::stable_sort(events.begin(), events.end(), event_before);
}

std::vector<const JobSpec*> EventStream::jobs() const {
  std::vector<const JobSpec*> out;
  for (const auto& e : events)
    if (e.kind == EventKind::JobArrival && e.job) out.push_back(&*e.job);
  return out;
}

const JobSpec* EventStream::find_job(std::int64_t id) const {
  for (const auto& e : events)
    if (e.kind == EventKind::JobArrival && e.job && e.job->id == id) return &*e.job;
  return nullptr;
}

std::int64_t EventStream::max_event_id() const {
  std::int64_t m = -1;
  for (const auto& e : events) m = std::max(m, e.id);
  return m;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void check(ValidationReport& r, bool ok, const std::string& path, const std::string& msg) {
  if (!ok) r.violations.push_back({path, msg});
}

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const auto& v : violations) os << v.path << ": " << v.message << "\n";
  return os.str();
}

ValidationReport validate_config(const InputConfig& cfg) {
  ValidationReport r;
  check(r, cfg.schema_version == kSchemaVersion, "schema_version", "unsupported schema version");
  check(r, cfg.horizon > 0.0 && std::isfinite(cfg.horizon), "horizon", "must be finite and > 0");
  if (cfg.fixed_job_count)
    check(r, *cfg.fixed_job_count >= 1, "fixed_job_count", "must be >= 1 when present");

  const PlantSpec& plant = cfg.plant;
  check(r, !plant.machines.empty(), "plant.machines", "at least one machine required");
  std::set<int> machine_ids;
  for (std::size_t i = 0; i < plant.machines.size(); ++i) {
    const auto& m = plant.machines[i];
    std::string path = "plant.machines[" + std::to_string(i) + "]";
    check(r, m.speed > 0.0 && std::isfinite(m.speed), path + ".speed", "must be > 0");
    check(r, machine_ids.insert(m.id).second, path + ".id", "duplicate machine id");
  }

  check(r, !plant.groups.empty(), "plant.groups", "at least one group required");
  std::set<std::string> group_ids;
  std::set<int> grouped;
  for (std::size_t i = 0; i < plant.groups.size(); ++i) {
    const auto& g = plant.groups[i];
    std::string path = "plant.groups[" + std::to_string(i) + "]";
    check(r, group_ids.insert(g.id).second, path + ".id", "duplicate group id");
    check(r, !g.machines.empty(), path + ".machines", "group must contain a machine");
    for (int m : g.machines) {
      check(r, machine_ids.count(m) != 0, path + ".machines", "unknown machine id " + std::to_string(m));
      check(r, grouped.insert(m).second, path + ".machines",
            "machine " + std::to_string(m) + " is in more than one group");
    }
  }

  check(r, !plant.templates.empty(), "plant.templates", "at least one template required");
  std::set<std::string> template_ids;
  for (std::size_t i = 0; i < plant.templates.size(); ++i) {
    const auto& t = plant.templates[i];
    std::string path = "plant.templates[" + std::to_string(i) + "]";
    check(r, template_ids.insert(t.id).second, path + ".id", "duplicate template id");
    check(r, !t.operations.empty(), path + ".operations", "route must be non-empty");
    for (std::size_t o = 0; o < t.operations.size(); ++o) {
      const auto& op = t.operations[o];
      std::string opath = path + ".operations[" + std::to_string(o) + "]";
      check(r, op.mean > 0.0 && std::isfinite(op.mean), opath + ".mean", "must be > 0");
      check(r, group_ids.count(op.group) != 0, opath + ".group", "unknown group '" + op.group + "'");
    }
  }

  check(r, plant.job_mix.size() == plant.templates.size(), "plant.job_mix",
        "needs one weight per template");
  double mix_sum = 0.0;
  bool mix_nonneg = true;
  for (double w : plant.job_mix) {
    mix_sum += w;
    if (w < 0.0) mix_nonneg = false;
  }
  check(r, mix_nonneg, "plant.job_mix", "weights must be >= 0");
  if (!plant.job_mix.empty())
    check(r, std::abs(mix_sum - 1.0) <= 1e-9, "plant.job_mix", "weights must sum to 1");

  const TargetMetrics& t = cfg.targets;
  check(r, t.rho_global > 0.0 && t.rho_global < 1.0, "targets.rho_global", "must lie in (0, 1)");
  check(r, t.c_a2 > 0.0, "targets.c_a2", "must be > 0");
  check(r, t.c_p2 >= 0.0, "targets.c_p2", "must be >= 0");
  check(r, t.tau > 0.0, "targets.tau", "must be > 0");
  check(r, t.chi_load >= 0.0, "targets.chi_load", "must be >= 0");
  check(r, t.delta >= 0.0 && t.delta < 1.0, "targets.delta", "must lie in [0, 1)");
  for (std::size_t i = 0; i < t.bottlenecks.size(); ++i) {
    const auto& b = t.bottlenecks[i];
    std::string path = "targets.bottlenecks[" + std::to_string(i) + "]";
    check(r, group_ids.count(b.group) != 0, path + ".group", "unknown group '" + b.group + "'");
    check(r, b.start >= 0.0 && b.start < b.end, path, "window must satisfy 0 <= start < end");
    check(r, b.end <= cfg.horizon + 1e-9, path + ".end", "window must end within the horizon");
    check(r, b.rho > 0.0 && b.rho < 1.0, path + ".rho", "must lie in (0, 1)");
  }

  const DistributionParams& d = cfg.distributions;
  if (d.arrival_shape) check(r, *d.arrival_shape > 0.0, "distributions.arrival_shape", "must be > 0");
  if (d.arrival_scale) check(r, *d.arrival_scale > 0.0, "distributions.arrival_scale", "must be > 0");
  if (d.processing_shape)
    check(r, *d.processing_shape > 0.0, "distributions.processing_shape", "must be > 0");
  check(r, d.arrival_shape_log2_bias >= -1.0 && d.arrival_shape_log2_bias <= 1.0,
        "distributions.arrival_shape_log2_bias", "must lie in [-1, 1]");
  check(r, d.processing_shape_log2_bias >= -1.0 && d.processing_shape_log2_bias <= 1.0,
        "distributions.processing_shape_log2_bias", "must lie in [-1, 1]");
  check(r, d.rate_scale > 0.0, "distributions.rate_scale", "must be > 0");
  check(r, d.pm_duration.stddev >= 0.0, "distributions.pm_duration.stddev", "must be >= 0");
  check(r, d.batch.stddev >= 0.0, "distributions.batch.stddev", "must be >= 0");
  check(r, d.modulation.amplitude >= 0.0 && d.modulation.amplitude <= 1.0,
        "distributions.modulation.amplitude", "must lie in [0, 1]");
  if (d.modulation.profile == ModulationProfile::Periodic)
    check(r, d.modulation.period > 0.0, "distributions.modulation.period", "must be > 0");

  const DynamicScenario& dyn = cfg.dynamics;
  check(r, is_prob(dyn.p_cancel), "dynamics.p_cancel", "must lie in [0, 1]");
  check(r, is_prob(dyn.p_rework), "dynamics.p_rework", "must lie in [0, 1]");
  check(r, is_prob(dyn.p_priority), "dynamics.p_priority", "must lie in [0, 1]");
  check(r, is_prob(dyn.p_route), "dynamics.p_route", "must lie in [0, 1]");
  check(r, is_prob(dyn.p_due_change), "dynamics.p_due_change", "must lie in [0, 1]");
  check(r, is_prob(dyn.p_batch), "dynamics.p_batch", "must lie in [0, 1]");
  check(r, is_prob(dyn.p_ptime), "dynamics.p_ptime", "must lie in [0, 1]");
  check(r, dyn.pm_interval >= 0.0, "dynamics.pm_interval", "must be >= 0");
  if (dyn.p_ptime > 0.0)
    check(r, !dyn.ptime_multipliers.empty(), "dynamics.ptime_multipliers",
          "required when p_ptime > 0");
  for (double m : dyn.ptime_multipliers)
    check(r, m > 0.0, "dynamics.ptime_multipliers", "multipliers must be > 0");
  check(r, dyn.due_tightening_ratio > 0.0 && dyn.due_tightening_ratio <= 1.0,
        "dynamics.due_tightening_ratio", "must lie in (0, 1]");
  check(r, dyn.warm_start_jobs >= 0, "dynamics.warm_start_jobs", "must be >= 0");

  return r;
}

ValidationReport validate_stream(const EventStream& stream) {
  ValidationReport r;
  check(r, stream.schema_version == kSchemaVersion, "schema_version", "unsupported schema version");
  check(r, stream.horizon > 0.0, "horizon", "must be > 0");

  std::set<std::int64_t> event_ids;
  std::set<std::int64_t> job_ids;
  for (std::size_t i = 0; i + 1 < stream.events.size(); ++i) {
    if (!event_before(stream.events[i], stream.events[i + 1]) &&
        event_before(stream.events[i + 1], stream.events[i])) {
      r.violations.push_back({"events[" + std::to_string(i + 1) + "]",
                              "events not in canonical (time, kind, id) order"});
      break;
    }
  }
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    std::string path = "events[" + std::to_string(i) + "]";
    check(r, event_ids.insert(e.id).second, path + ".id", "duplicate event id");
    check(r, e.time >= 0.0 && e.time <= stream.horizon + 1e-9, path + ".time",
          "timestamp outside [0, horizon]");
    switch (e.kind) {
      case EventKind::JobArrival: {
        if (!e.job) {
          r.violations.push_back({path + ".job", "arrival without job payload"});
          break;
        }
        check(r, job_ids.insert(e.job->id).second, path + ".job.id", "duplicate job id");
        check(r, std::abs(e.job->arrival - e.time) <= 1e-9, path + ".job.arrival",
              "job arrival differs from event time");
        const ProcessTemplate* t = stream.config.plant.find_template(e.job->template_id);
        check(r, t != nullptr, path + ".job.template", "unknown template '" + e.job->template_id + "'");
        if (t)
          check(r, e.job->processing_times.size() == t->operations.size(),
                path + ".job.processing_times", "length must match template route");
        for (double p : e.job->processing_times)
          check(r, p > 0.0, path + ".job.processing_times", "durations must be > 0");
        check(r, e.job->due >= e.job->arrival, path + ".job.due", "due before arrival");
        break;
      }
      case EventKind::MachineDown:
      case EventKind::PreventiveMaintenance:
        check(r, stream.config.plant.find_machine(e.machine) != nullptr, path + ".machine",
              "unknown machine id");
        check(r, e.duration >= 0.0, path + ".duration", "lost duration must be >= 0");
        break;
      case EventKind::MachineUp:
        check(r, stream.config.plant.find_machine(e.machine) != nullptr, path + ".machine",
              "unknown machine id");
        break;
      case EventKind::RouteChange: {
        const ProcessTemplate* t = stream.config.plant.find_template(e.new_template);
        check(r, t != nullptr, path + ".new_template", "unknown template '" + e.new_template + "'");
        if (t)
          check(r, e.new_times.size() == t->operations.size(), path + ".new_times",
                "length must match template route");
        break;
      }
      default:
        break;
    }
    if (e.kind != EventKind::JobArrival && e.kind != EventKind::MachineDown &&
        e.kind != EventKind::MachineUp && e.kind != EventKind::PreventiveMaintenance) {
      check(r, e.job_id >= 0, path + ".job_id", "scenario event without job reference");
    }
  }
  // Scenario events must reference arrived jobs.
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.kind == EventKind::JobArrival || e.kind == EventKind::MachineDown ||
        e.kind == EventKind::MachineUp || e.kind == EventKind::PreventiveMaintenance)
      continue;
    check(r, job_ids.count(e.job_id) != 0, "events[" + std::to_string(i) + "].job_id",
          "references unknown job " + std::to_string(e.job_id));
  }
  return r;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json plant_to_json(const PlantSpec& p) {
  json machines = json::array();
  for (const auto& m : p.machines) machines.push_back({{"id", m.id}, {"speed", m.speed}});
  json groups = json::array();
  for (const auto& g : p.groups) groups.push_back({{"id", g.id}, {"machines", g.machines}});
  json templates = json::array();
  for (const auto& t : p.templates) {
    json ops = json::array();
    for (const auto& o : t.operations)
      ops.push_back({{"id", o.id}, {"group", o.group}, {"mean", o.mean}});
    templates.push_back({{"id", t.id}, {"operations", ops}});
  }
  return json{{"machines", machines},
              {"groups", groups},
              {"templates", templates},
              {"job_mix", p.job_mix}};
}

PlantSpec plant_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  PlantSpec p;
  const json& machines = r.at("machines");
  if (!machines.is_array()) throw ParseError(r.child("machines"), "expected an array");
  for (std::size_t i = 0; i < machines.size(); ++i) {
    ObjectReader m(machines[i], r.child("machines") + "[" + std::to_string(i) + "]");
    MachineSpec ms;
    ms.id = m.get<int>("id");
    ms.speed = m.get_or<double>("speed", 1.0);
    m.finish();
    p.machines.push_back(ms);
  }
  const json& groups = r.at("groups");
  if (!groups.is_array()) throw ParseError(r.child("groups"), "expected an array");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    ObjectReader g(groups[i], r.child("groups") + "[" + std::to_string(i) + "]");
    GroupSpec gs;
    gs.id = g.get<std::string>("id");
    gs.machines = g.get<std::vector<int>>("machines");
    g.finish();
    p.groups.push_back(gs);
  }
  const json& templates = r.at("templates");
  if (!templates.is_array()) throw ParseError(r.child("templates"), "expected an array");
  for (std::size_t i = 0; i < templates.size(); ++i) {
    std::string tpath = r.child("templates") + "[" + std::to_string(i) + "]";
    ObjectReader t(templates[i], tpath);
    ProcessTemplate ts;
    ts.id = t.get<std::string>("id");
    const json& ops = t.at("operations");
    if (!ops.is_array()) throw ParseError(tpath + ".operations", "expected an array");
    for (std::size_t o = 0; o < ops.size(); ++o) {
      ObjectReader op(ops[o], tpath + ".operations[" + std::to_string(o) + "]");
      OperationSpec os;
      os.id = op.get<std::string>("id");
      os.group = op.get<std::string>("group");
      os.mean = op.get<double>("mean");
      op.finish();
      ts.operations.push_back(os);
    }
    t.finish();
    p.templates.push_back(ts);
  }
  p.job_mix = r.get<std::vector<double>>("job_mix");
  r.finish();
  return p;
}

json targets_to_json(const TargetMetrics& t) {
  json bn = json::array();
  for (const auto& b : t.bottlenecks)
    bn.push_back({{"group", b.group}, {"start", b.start}, {"end", b.end}, {"rho", b.rho}});
  return json{{"rho_global", t.rho_global}, {"c_a2", t.c_a2},   {"c_p2", t.c_p2},
              {"tau", t.tau},               {"chi_load", t.chi_load},
              {"delta", t.delta},           {"bottlenecks", bn}};
}

TargetMetrics targets_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  TargetMetrics t;
  t.rho_global = r.get<double>("rho_global");
  t.c_a2 = r.get<double>("c_a2");
  t.c_p2 = r.get<double>("c_p2");
  t.tau = r.get<double>("tau");
  t.chi_load = r.get_or<double>("chi_load", 0.0);
  t.delta = r.get_or<double>("delta", 0.0);
  if (const json* bn = r.maybe("bottlenecks")) {
    if (!bn->is_array()) throw ParseError(r.child("bottlenecks"), "expected an array");
    for (std::size_t i = 0; i < bn->size(); ++i) {
      ObjectReader b((*bn)[i], r.child("bottlenecks") + "[" + std::to_string(i) + "]");
      BottleneckWindow w;
      w.group = b.get<std::string>("group");
      w.start = b.get<double>("start");
      w.end = b.get<double>("end");
      w.rho = b.get<double>("rho");
      b.finish();
      t.bottlenecks.push_back(w);
    }
  }
  r.finish();
  return t;
}

json distributions_to_json(const DistributionParams& d) {
  json out{{"arrival_shape_log2_bias", d.arrival_shape_log2_bias},
           {"processing_shape_log2_bias", d.processing_shape_log2_bias},
           {"rate_scale", d.rate_scale},
           {"pm_duration", normal_to_json(d.pm_duration)},
           {"batch", normal_to_json(d.batch)},
           {"modulation",
            json{{"profile", profile_name(d.modulation.profile)},
                 {"amplitude", d.modulation.amplitude},
                 {"period", d.modulation.period}}}};
  if (d.arrival_shape) out["arrival_shape"] = *d.arrival_shape;
  if (d.arrival_scale) out["arrival_scale"] = *d.arrival_scale;
  if (d.processing_shape) out["processing_shape"] = *d.processing_shape;
  return out;
}

DistributionParams distributions_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  DistributionParams d;
  if (const json* v = r.maybe("arrival_shape"))
    d.arrival_shape = ObjectReader::cast<double>(*v, r.child("arrival_shape"));
  if (const json* v = r.maybe("arrival_scale"))
    d.arrival_scale = ObjectReader::cast<double>(*v, r.child("arrival_scale"));
  if (const json* v = r.maybe("processing_shape"))
    d.processing_shape = ObjectReader::cast<double>(*v, r.child("processing_shape"));
  d.arrival_shape_log2_bias = r.get_or<double>("arrival_shape_log2_bias", 0.0);
  d.processing_shape_log2_bias = r.get_or<double>("processing_shape_log2_bias", 0.0);
  d.rate_scale = r.get_or<double>("rate_scale", 1.0);
  if (const json* v = r.maybe("pm_duration"))
    d.pm_duration = normal_from_json(*v, r.child("pm_duration"));
  if (const json* v = r.maybe("batch")) d.batch = normal_from_json(*v, r.child("batch"));
  if (const json* v = r.maybe("modulation")) {
    ObjectReader m(*v, r.child("modulation"));
    d.modulation.profile =
        profile_from_name(m.get<std::string>("profile"), r.child("modulation") + ".profile");
    d.modulation.amplitude = m.get_or<double>("amplitude", 0.0);
    d.modulation.period = m.get_or<double>("period", 1.0);
    m.finish();
  }
  r.finish();
  return d;
}

json dynamics_to_json(const DynamicScenario& d) {
  return json{{"p_cancel", d.p_cancel},
              {"p_rework", d.p_rework},
              {"p_priority", d.p_priority},
              {"p_route", d.p_route},
              {"p_due_change", d.p_due_change},
              {"p_batch", d.p_batch},
              {"p_ptime", d.p_ptime},
              {"pm_interval", d.pm_interval},
              {"ptime_multipliers", d.ptime_multipliers},
              {"due_tightening_ratio", d.due_tightening_ratio},
              {"warm_start_jobs", d.warm_start_jobs}};
}

DynamicScenario dynamics_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  DynamicScenario d;
  d.p_cancel = r.get_or<double>("p_cancel", 0.0);
  d.p_rework = r.get_or<double>("p_rework", 0.0);
  d.p_priority = r.get_or<double>("p_priority", 0.0);
  d.p_route = r.get_or<double>("p_route", 0.0);
  d.p_due_change = r.get_or<double>("p_due_change", 0.0);
  d.p_batch = r.get_or<double>("p_batch", 0.0);
  d.p_ptime = r.get_or<double>("p_ptime", 0.0);
  d.pm_interval = r.get_or<double>("pm_interval", 0.0);
  d.ptime_multipliers =
      r.get_or<std::vector<double>>("ptime_multipliers", {0.7, 0.9, 1.2, 1.5});
  d.due_tightening_ratio = r.get_or<double>("due_tightening_ratio", 0.5);
  d.warm_start_jobs = r.get_or<int>("warm_start_jobs", 0);
  r.finish();
  return d;
}

json job_to_json(const JobSpec& job) {
  return json{{"id", job.id},
              {"arrival", job.arrival},
              {"template", job.template_id},
              {"processing_times", job.processing_times},
              {"due", job.due},
              {"batch_id", job.batch_id},
              {"priority", job.priority}};
}

JobSpec job_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  JobSpec job;
  job.id = r.get<std::int64_t>("id");
  job.arrival = r.get<double>("arrival");
  job.template_id = r.get<std::string>("template");
  job.processing_times = r.get<std::vector<double>>("processing_times");
  job.due = r.get<double>("due");
  job.batch_id = r.get_or<std::int64_t>("batch_id", -1);
  job.priority = r.get_or<int>("priority", 0);
  r.finish();
  return job;
}

json event_to_json(const Event& e) {
  json out{{"id", e.id}, {"time", e.time}, {"kind", to_string(e.kind)}};
  switch (e.kind) {
    case EventKind::JobArrival:
      out["job"] = job_to_json(*e.job);
      break;
    case EventKind::MachineDown:
    case EventKind::PreventiveMaintenance:
      out["machine"] = e.machine;
      out["duration"] = e.duration;
      break;
    case EventKind::MachineUp:
      out["machine"] = e.machine;
      if (e.ref_event >= 0) out["ref"] = e.ref_event;
      break;
    case EventKind::Cancellation:
      out["job_id"] = e.job_id;
      break;
    case EventKind::Rework:
      out["job_id"] = e.job_id;
      out["op_index"] = e.op_index;
      break;
    case EventKind::PriorityChange:
      out["job_id"] = e.job_id;
      out["new_priority"] = e.new_priority;
      break;
    case EventKind::RouteChange:
      out["job_id"] = e.job_id;
      out["new_template"] = e.new_template;
      out["new_times"] = e.new_times;
      break;
    case EventKind::DueDateChange:
      out["job_id"] = e.job_id;
      out["new_due"] = e.new_due;
      break;
  }
  return out;
}

Event event_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  Event e;
  e.id = r.get<std::int64_t>("id");
  e.time = r.get<double>("time");
  e.kind = event_kind_from_string(r.get<std::string>("kind"));
  switch (e.kind) {
    case EventKind::JobArrival:
      e.job = job_from_json(r.at("job"), r.child("job"));
      break;
    case EventKind::MachineDown:
    case EventKind::PreventiveMaintenance:
      e.machine = r.get<int>("machine");
      e.duration = r.get<double>("duration");
      break;
    case EventKind::MachineUp:
      e.machine = r.get<int>("machine");
      e.ref_event = r.get_or<std::int64_t>("ref", -1);
      break;
    case EventKind::Cancellation:
      e.job_id = r.get<std::int64_t>("job_id");
      break;
    case EventKind::Rework:
      e.job_id = r.get<std::int64_t>("job_id");
      e.op_index = r.get<int>("op_index");
      break;
    case EventKind::PriorityChange:
      e.job_id = r.get<std::int64_t>("job_id");
      e.new_priority = r.get<int>("new_priority");
      break;
    case EventKind::RouteChange:
      e.job_id = r.get<std::int64_t>("job_id");
      e.new_template = r.get<std::string>("new_template");
      e.new_times = r.get<std::vector<double>>("new_times");
      break;
    case EventKind::DueDateChange:
      e.job_id = r.get<std::int64_t>("job_id");
      e.new_due = r.get<double>("new_due");
      break;
  }
  r.finish();
  return e;
}

}  // namespace

json config_to_json(const InputConfig& cfg) {
  json out{{"schema_version", cfg.schema_version},
           {"horizon", cfg.horizon},
           {"master_seed", cfg.master_seed},
           {"plant", plant_to_json(cfg.plant)},
           {"targets", targets_to_json(cfg.targets)},
           {"distributions", distributions_to_json(cfg.distributions)},
           {"dynamics", dynamics_to_json(cfg.dynamics)}};
  if (cfg.fixed_job_count) out["fixed_job_count"] = *cfg.fixed_job_count;
  return out;
}

InputConfig config_from_json(const json& j) {
  ObjectReader r(j, "config");
  InputConfig cfg;
  cfg.schema_version = r.get<int>("schema_version");
  if (cfg.schema_version != kSchemaVersion)
    throw ParseError("config.schema_version",
                     "unsupported version " + std::to_string(cfg.schema_version));
  cfg.horizon = r.get<double>("horizon");
  if (const json* v = r.maybe("fixed_job_count"))
    cfg.fixed_job_count = ObjectReader::cast<int>(*v, r.child("fixed_job_count"));
  cfg.master_seed = r.get_or<std::uint64_t>("master_seed", 0);
  cfg.plant = plant_from_json(r.at("plant"), "config.plant");
  cfg.targets = targets_from_json(r.at("targets"), "config.targets");
  if (const json* v = r.maybe("distributions"))
    cfg.distributions = distributions_from_json(*v, "config.distributions");
  if (const json* v = r.maybe("dynamics"))
    cfg.dynamics = dynamics_from_json(*v, "config.dynamics");
  r.finish();
  return cfg;
}

json stream_to_json(const EventStream& stream) {
  json events = json::array();
  for (const auto& e : stream.events) events.push_back(event_to_json(e));
  return json{{"schema_version", stream.schema_version},
              {"horizon", stream.horizon},
              {"config", config_to_json(stream.config)},
              {"events", events}};
}

EventStream stream_from_json(const json& j) {
  ObjectReader r(j, "instance");
  EventStream s;
  s.schema_version = r.get<int>("schema_version");
  if (s.schema_version != kSchemaVersion)
    throw ParseError("instance.schema_version",
                     "unsupported version " + std::to_string(s.schema_version));
  s.horizon = r.get<double>("horizon");
  s.config = config_from_json(r.at("config"));
  const json& events = r.at("events");
  if (!events.is_array()) throw ParseError("instance.events", "expected an array");
  for (std::size_t i = 0; i < events.size(); ++i)
    s.events.push_back(event_from_json(events[i], "instance.events[" + std::to_string(i) + "]"));
  r.finish();
  return s;
}

std::string canonical_dump(const json& j) { return j.dump(2) + "\n"; }

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void save_config(const InputConfig& cfg, const std::string& path) {
  write_text_file(path, canonical_dump(config_to_json(cfg)));
}

InputConfig load_config(const std::string& path) {
  json j = json::parse(read_text_file(path));
  return config_from_json(j);
}

void save_stream(const EventStream& stream, const std::string& path) {
  write_text_file(path, canonical_dump(stream_to_json(stream)));
}

EventStream load_stream(const std::string& path) {
  json j = json::parse(read_text_file(path));
  return stream_from_json(j);
}

// ---------------------------------------------------------------------------
// RNG streams

namespace {

const char* stream_name(RngStream s) {
  switch (s) {
    case RngStream::Arrivals: return "arrivals";
    case RngStream::Processing: return "processing";
    case RngStream::Batch: return "batch";
    case RngStream::Disturbance: return "disturbance";
    case RngStream::Scenario: return "scenario";
    case RngStream::Calibrator: return "calibrator";
    case RngStream::Moo: return "moo";
    case RngStream::Agent: return "agent";
  }
  return "arrivals";
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) { return fnv1a64(text.data(), text.size()); }

RngStream rng_stream_from_string(const std::string& name) {
  static const std::map<std::string, RngStream> table = {
      {"arrivals", RngStream::Arrivals},     {"processing", RngStream::Processing},
      {"batch", RngStream::Batch},           {"disturbance", RngStream::Disturbance},
      {"scenario", RngStream::Scenario},     {"calibrator", RngStream::Calibrator},
      {"moo", RngStream::Moo},               {"agent", RngStream::Agent},
  };
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown rng stream '" + name + "'");
  return it->second;
}

std::uint64_t derive_stream_seed(std::uint64_t master_seed, RngStream name) {
  std::uint64_t h = fnv1a64(std::string(stream_name(name)));
  return splitmix64(splitmix64(master_seed) ^ h);
}

std::mt19937_64 derive_stream(std::uint64_t master_seed, RngStream name) {
  return std::mt19937_64(derive_stream_seed(master_seed, name));
}

std::mt19937_64 derive_stream(std::uint64_t master_seed, const std::string& name) {
  return derive_stream(master_seed, rng_stream_from_string(name));
}

std::uint64_t derive_tagged_seed(std::uint64_t master_seed, const std::string& tag) {
  return splitmix64(splitmix64(master_seed) ^ fnv1a64(tag));
}

}  // namespace dynshop
