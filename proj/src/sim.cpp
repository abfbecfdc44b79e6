#include "dynshop/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dynshop {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWorkEps = 1e-9;
}  // namespace

bool operator==(const Action& a, const Action& b) {
  return a.job == b.job && a.op_index == b.op_index && a.machine == b.machine;
}

bool operator<(const Action& a, const Action& b) {
  if (a.job != b.job) return a.job < b.job;
  if (a.op_index != b.op_index) return a.op_index < b.op_index;
  return a.machine < b.machine;
}

std::vector<Action> admissible_actions(const Snapshot& snapshot) {
  return snapshot.admissible;
}

ObsLevel obs_level_from_int(int level) {
  switch (level) {
    case 1: return ObsLevel::L1;
    case 2: return ObsLevel::L2;
    case 3: return ObsLevel::L3;
    default: throw std::invalid_argument("observation level must be 1, 2 or 3");
  }
}

// ---------------------------------------------------------------------------
// Simulator

Simulator::Simulator(const EventStream& stream) : stream_(stream) {
  stream_.sort_events();
  ValidationReport report = validate_stream(stream_);
  if (!report.ok())
    throw std::invalid_argument("invalid event stream: " + report.summary());
  for (const auto& m : stream_.config.plant.machines)
    machine_group_[m.id] = stream_.config.plant.group_of_machine(m.id);
}

const Snapshot& Simulator::reset() {
  bool has_arrival = false;
  for (const auto& ev : stream_.events)
    if (ev.kind == EventKind::JobArrival) {
      has_arrival = true;
      break;
    }
  if (!has_arrival) throw std::invalid_argument("stream has no job arrivals");

  machines_.clear();
  for (const auto& m : stream_.config.plant.machines) {
    MachineRt rt;
    rt.id = m.id;
    rt.speed = m.speed;
    rt.group = machine_group_[m.id];
    machines_.push_back(std::move(rt));
  }
  std::sort(machines_.begin(), machines_.end(),
            [](const MachineRt& a, const MachineRt& b) { return a.id < b.id; });
  jobs_.clear();
  records_.clear();
  applied_.clear();
  event_counts_.clear();
  cursor_ = 0;
  clock_ = 0.0;
  done_ = false;
  started_ = true;
  epoch_ = 0;

  advance_to_epoch();
  rebuild_snapshot();
  return snapshot_;
}

Simulator::JobRt* Simulator::find_job(std::int64_t id) {
  auto it = jobs_.find(id);
  return it == jobs_.end() ? nullptr : &it->second;
}

double Simulator::next_activity_time() const {
  double t = cursor_ < stream_.events.size() ? stream_.events[cursor_].time : kInf;
  for (const auto& m : machines_) {
    if (m.job >= 0) {
      double resume = std::max(clock_, m.down_until);
      t = std::min(t, resume + m.remaining / m.speed);
    } else if (m.down_until > clock_) {
      t = std::min(t, m.down_until);
    }
  }
  return t;
}

void Simulator::move_clock(double t) {
  double dt = t - clock_;
  if (dt <= 0.0) return;
  for (auto& m : machines_) {
    if (clock_ < m.down_until) {
      m.down_time += dt;  // activity points never fall inside a downtime
    } else if (m.job >= 0) {
      m.busy_time += dt;
      m.remaining = std::max(0.0, m.remaining - dt * m.speed);
    } else {
      m.idle_time += dt;
    }
  }
  clock_ = t;
}

void Simulator::complete_op(MachineRt& m) {
  TrajectoryRecord rec;
  rec.job = m.job;
  rec.op_index = m.op_index;
  rec.machine = m.id;
  rec.group = m.group;
  rec.start = m.op_start;
  rec.end = clock_;
  rec.workload = m.op_workload;
  rec.busy = m.op_workload / m.speed;
  records_.push_back(rec);

  JobRt* job = find_job(m.job);
  if (job) {
    job->running = false;
    if (job->next_op >= static_cast<int>(job->route.size())) job->complete = true;
  }
  m.job = -1;
  m.op_index = -1;
  m.remaining = 0.0;
  m.op_workload = 0.0;
}

bool Simulator::complete_due() {
  bool any = false;
  for (auto& m : machines_) {
    if (m.job >= 0 && machine_up(m) &&
        m.remaining <= kWorkEps * std::max(1.0, m.op_workload)) {
      complete_op(m);
      any = true;
    }
  }
  return any;
}

void Simulator::apply_event(const Event& ev) {
  AppliedEvent log;
  log.event_id = ev.id;
  log.kind = to_string(ev.kind);
  log.time = ev.time;
  log.applied = true;

  switch (ev.kind) {
    case EventKind::MachineUp:
      // Recovery is driven by down_until; the marker carries no state change.
      break;
    case EventKind::MachineDown:
    case EventKind::PreventiveMaintenance:
      for (auto& m : machines_)
        if (m.id == ev.machine) m.down_until = std::max(m.down_until, ev.time + ev.duration);
      break;
    case EventKind::JobArrival: {
      const JobSpec& spec = *ev.job;
      log.job_id = spec.id;
      JobRt job;
      job.id = spec.id;
      job.arrival = spec.arrival;
      job.due = spec.due;
      job.priority = spec.priority;
      job.template_id = spec.template_id;
      const ProcessTemplate* t = stream_.config.plant.find_template(spec.template_id);
      for (std::size_t o = 0; o < spec.processing_times.size(); ++o)
        job.route.push_back({t->operations[o].group, t->operations[o].mean,
                             spec.processing_times[o]});
      jobs_.emplace(job.id, std::move(job));
      break;
    }
    case EventKind::Cancellation: {
      log.job_id = ev.job_id;
      JobRt* job = find_job(ev.job_id);
      if (!job) {
        log.applied = false;
        log.note = "job not arrived";
        break;
      }
      if (job->complete) {
        log.applied = false;
        log.note = "job already complete";
        break;
      }
      job->route.resize(job->next_op);  // the running op, if any, finishes
      job->cancelled = true;
      if (!job->running) job->complete = true;
      break;
    }
    case EventKind::Rework: {
      log.job_id = ev.job_id;
      JobRt* job = find_job(ev.job_id);
      if (!job) {
        log.applied = false;
        log.note = "job not arrived";
        break;
      }
      if (job->cancelled) {
        log.applied = false;
        log.note = "job cancelled";
        break;
      }
      int completed = job->next_op - (job->running ? 1 : 0);
      if (ev.op_index < 0 || ev.op_index >= completed) {
        log.applied = false;
        log.note = "referenced operation not completed";
        break;
      }
      if (job->complete) {
        job->complete = false;
        log.note = "job reopened";
      }
      job->route.insert(job->route.begin() + job->next_op, job->route[ev.op_index]);
      break;
    }
    case EventKind::PriorityChange: {
      log.job_id = ev.job_id;
      JobRt* job = find_job(ev.job_id);
      if (!job || job->cancelled || job->complete) {
        log.applied = false;
        log.note = !job ? "job not arrived" : "job inactive";
        break;
      }
      job->priority = ev.new_priority;
      break;
    }
    case EventKind::RouteChange: {
      log.job_id = ev.job_id;
      JobRt* job = find_job(ev.job_id);
      if (!job || job->cancelled || job->complete) {
        log.applied = false;
        log.note = !job ? "job not arrived" : "job inactive";
        break;
      }
      const ProcessTemplate* t = stream_.config.plant.find_template(ev.new_template);
      int cut = job->next_op;
      job->route.resize(cut);
      for (std::size_t o = cut; o < t->operations.size(); ++o)
        job->route.push_back({t->operations[o].group, t->operations[o].mean,
                              ev.new_times[o]});
      job->template_id = ev.new_template;
      if (static_cast<int>(job->route.size()) <= job->next_op) {
        log.note = "route truncated at cut";
        if (!job->running) job->complete = true;
      }
      break;
    }
    case EventKind::DueDateChange: {
      log.job_id = ev.job_id;
      JobRt* job = find_job(ev.job_id);
      if (!job) {
        log.applied = false;
        log.note = "job not arrived";
        break;
      }
      job->due = ev.new_due;
      break;
    }
  }
  if (log.applied) ++event_counts_[log.kind];
  applied_.push_back(std::move(log));
}

bool Simulator::settle() {
  bool any = false;
  for (;;) {
    bool progress = complete_due();
    while (cursor_ < stream_.events.size() && stream_.events[cursor_].time <= clock_) {
      apply_event(stream_.events[cursor_]);
      ++cursor_;
      progress = true;
    }
    if (!progress) return any;
    any = true;
  }
}

bool Simulator::all_work_done() const {
  if (cursor_ < stream_.events.size()) return false;
  for (const auto& m : machines_)
    if (m.job >= 0) return false;
  for (const auto& [id, job] : jobs_) {
    (void)id;
    if (!job.complete) return false;
  }
  return true;
}

std::vector<Action> Simulator::collect_admissible() const {
  std::vector<Action> actions;
  for (const auto& [id, job] : jobs_) {
    if (job.running || job.complete) continue;
    if (job.next_op >= static_cast<int>(job.route.size())) continue;
    const OpRt& op = job.route[job.next_op];
    for (const auto& m : machines_) {
      if (m.job >= 0 || !machine_up(m)) continue;
      if (m.group != op.group) continue;
      actions.push_back({id, job.next_op, m.id});
    }
  }
  std::sort(actions.begin(), actions.end());
  return actions;
}

void Simulator::advance_to_epoch() {
  for (;;) {
    settle();
    if (!collect_admissible().empty()) return;
    if (all_work_done()) {
      done_ = true;
      return;
    }
    double t = next_activity_time();
    if (!std::isfinite(t))
      throw std::runtime_error("simulation stalled: pending work but no activity");
    move_clock(t);
  }
}

void Simulator::rebuild_snapshot() {
  Snapshot s;
  s.clock = clock_;
  s.done = done_;
  s.epoch = ++epoch_;
  s.pending_events = stream_.events.size() - cursor_;
  s.event_counts = event_counts_;

  for (const auto& m : machines_) {
    SnapshotMachine sm;
    sm.id = m.id;
    sm.speed = m.speed;
    sm.group = m.group;
    sm.job = m.job;
    sm.op_index = m.op_index;
    sm.down_until = m.down_until;
    sm.remaining = m.remaining;
    sm.busy_time = m.busy_time;
    sm.idle_time = m.idle_time;
    sm.down_time = m.down_time;
    sm.assigned_work = m.assigned_work;
    if (!machine_up(m)) {
      sm.status = "down";
      sm.available_at = m.job >= 0 ? m.down_until + m.remaining / m.speed : m.down_until;
    } else if (m.job >= 0) {
      sm.status = "busy";
      sm.available_at = clock_ + m.remaining / m.speed;
    } else {
      sm.status = "idle";
      sm.available_at = clock_;
    }
    s.machines.push_back(std::move(sm));
  }

  for (const auto& [id, job] : jobs_) {
    SnapshotJob sj;
    sj.id = id;
    sj.arrival = job.arrival;
    sj.due = job.due;
    sj.priority = job.priority;
    sj.template_id = job.template_id;
    sj.cancelled = job.cancelled;
    sj.complete = job.complete;
    sj.running = job.running;
    sj.next_op = job.next_op;
    sj.route_length = static_cast<int>(job.route.size());
    for (int o = job.next_op; o < sj.route_length; ++o) {
      sj.pending.push_back({o, job.route[o].group, job.route[o].mean, job.route[o].p});
      sj.remaining_work_nominal += job.route[o].mean;
      sj.remaining_work_realized += job.route[o].p;
    }
    s.jobs.push_back(std::move(sj));
  }

  s.admissible = collect_admissible();
  snapshot_ = std::move(s);
}

const Snapshot& Simulator::step(const Action& action) {
  if (!started_) throw std::logic_error("step before reset");
  if (done_) throw std::logic_error("step after episode end");

  JobRt* job = find_job(action.job);
  if (!job) throw std::invalid_argument("action references unknown job");
  if (job->running || job->complete || action.op_index != job->next_op ||
      job->next_op >= static_cast<int>(job->route.size()))
    throw std::invalid_argument("action operation is not ready");
  MachineRt* machine = nullptr;
  for (auto& m : machines_)
    if (m.id == action.machine) machine = &m;
  if (!machine) throw std::invalid_argument("action references unknown machine");
  if (machine->job >= 0 || !machine_up(*machine))
    throw std::invalid_argument("machine is not available");
  const OpRt& op = job->route[job->next_op];
  if (machine->group != op.group)
    throw std::invalid_argument("machine is not eligible for the operation");

  machine->job = job->id;
  machine->op_index = job->next_op;
  machine->remaining = op.p;
  machine->op_start = clock_;
  machine->op_workload = op.p;
  machine->assigned_work += op.p;
  job->running = true;
  job->next_op += 1;

  if (collect_admissible().empty()) advance_to_epoch();
  rebuild_snapshot();
  return snapshot_;
}

const Snapshot& Simulator::step_pass() {
  if (!started_) throw std::logic_error("step before reset");
  if (done_) throw std::logic_error("step after episode end");
  double t = next_activity_time();
  if (!std::isfinite(t)) {
    if (all_work_done()) {
      done_ = true;
      rebuild_snapshot();
      return snapshot_;
    }
    throw std::runtime_error("pass with pending work but no future activity");
  }
  move_clock(t);
  advance_to_epoch();
  rebuild_snapshot();
  return snapshot_;
}

double Simulator::makespan() const {
  double m = 0.0;
  for (const auto& r : records_) m = std::max(m, r.end);
  return m;
}

Trajectory Simulator::trajectory() const {
  Trajectory t;
  t.makespan = makespan();
  t.records = records_;
  t.applied_events = applied_;
  t.sort_records();
  return t;
}

Observation Simulator::observe(ObsLevel level) const {
  return encode_observation(snapshot_, level, &stream_.config);
}

// ---------------------------------------------------------------------------
// Observation encoding

Observation encode_observation(const Snapshot& snapshot, ObsLevel level,
                               const InputConfig* context) {
  if (level == ObsLevel::L3 && context == nullptr)
    throw std::invalid_argument("L3 observation requires the generating config");

  Observation obs;
  obs.level = level;
  obs.clock = snapshot.clock;
  obs.done = snapshot.done;
  obs.epoch = snapshot.epoch;

  for (const auto& m : snapshot.machines)
    obs.machines.push_back({m.id, m.group, m.speed, m.status, m.available_at,
                            m.busy_time, m.idle_time, m.assigned_work});

  for (const auto& j : snapshot.jobs) {
    if (j.running || j.complete || j.pending.empty()) continue;
    const SnapshotOp& op = j.pending.front();
    obs.ready.push_back({j.id, op.index, op.group, op.mean, j.remaining_work_nominal,
                         static_cast<int>(j.pending.size()), j.arrival});
  }

  if (level == ObsLevel::L1) return obs;

  for (const auto& r : obs.ready) obs.queue_lengths[r.group] += 1;
  for (const auto& j : snapshot.jobs) {
    if (j.complete || j.cancelled) continue;
    double work = std::max(j.remaining_work_nominal, 1e-9);
    obs.job_stats.push_back({j.id, j.due, j.priority, (j.due - snapshot.clock) / work});
  }
  obs.event_counts = snapshot.event_counts;

  if (level == ObsLevel::L2) return obs;

  const TargetMetrics& t = context->targets;
  json windows = json::array();
  for (const auto& b : t.bottlenecks)
    windows.push_back({{"group", b.group},
                       {"start", b.start},
                       {"end", b.end},
                       {"rho", b.rho},
                       {"score", b.rho * (b.end - b.start) / std::max(context->horizon, 1e-12)}});
  obs.priors = json{{"targets",
                     {{"rho_global", t.rho_global},
                      {"c_a2", t.c_a2},
                      {"c_p2", t.c_p2},
                      {"tau", t.tau},
                      {"chi_load", t.chi_load},
                      {"delta", t.delta}}},
                    {"windows", windows},
                    {"horizon", context->horizon}};
  return obs;
}

json observation_to_json(const Observation& obs) {
  json machines = json::array();
  for (const auto& m : obs.machines)
    machines.push_back({{"id", m.id},
                        {"group", m.group},
                        {"speed", m.speed},
                        {"status", m.status},
                        {"available_at", m.available_at},
                        {"busy_time", m.busy_time},
                        {"idle_time", m.idle_time},
                        {"assigned_work", m.assigned_work}});
  json ready = json::array();
  for (const auto& r : obs.ready)
    ready.push_back({{"job", r.job},
                     {"op_index", r.op_index},
                     {"group", r.group},
                     {"mean_time", r.mean_time},
                     {"remaining_work", r.remaining_work},
                     {"remaining_ops", r.remaining_ops},
                     {"arrival", r.arrival}});
  json j{{"level", static_cast<int>(obs.level)},
         {"clock", obs.clock},
         {"done", obs.done},
         {"epoch", obs.epoch},
         {"machines", machines},
         {"ready", ready}};
  if (obs.level == ObsLevel::L1) return j;

  j["queue_lengths"] = obs.queue_lengths;
  json stats = json::array();
  for (const auto& s : obs.job_stats)
    stats.push_back({{"id", s.id},
                     {"due", s.due},
                     {"priority", s.priority},
                     {"slack_factor", s.slack_factor}});
  j["jobs"] = stats;
  j["event_counts"] = obs.event_counts;
  if (obs.level == ObsLevel::L2) return j;

  j["priors"] = obs.priors;
  return j;
}

}  // namespace dynshop
