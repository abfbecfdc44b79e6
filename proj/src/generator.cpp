#include "dynshop/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dynshop {

namespace {

constexpr double kMaxShape = 1e6;
constexpr double kMinShape = 1e-6;

double clamp_shape(double s) { return std::min(std::max(s, kMinShape), kMaxShape); }

}  // namespace

double gamma_by_mean_scv(double mean, double scv, std::mt19937_64& rng) {
  if (mean <= 0.0) throw std::invalid_argument("gamma_by_mean_scv: mean must be > 0");
  if (scv < 0.0) throw std::invalid_argument("gamma_by_mean_scv: scv must be >= 0");
  double shape = clamp_shape(scv <= 1.0 / kMaxShape ? kMaxShape : 1.0 / scv);
  std::gamma_distribution<double> dist(shape, mean / shape);
  double x = dist(rng);
  // Guards the zero-probability degenerate draw so downstream durations stay positive.
  return std::max(x, mean * 1e-12);
}

GammaParams interarrival_params(double lambda, double scv) {
  if (lambda <= 0.0) throw std::invalid_argument("interarrival_params: lambda must be > 0");
  if (scv <= 0.0) throw std::invalid_argument("interarrival_params: scv must be > 0");
  GammaParams p;
  p.shape = clamp_shape(1.0 / scv);
  p.scale = 1.0 / (p.shape * lambda);
  return p;
}

double mean_work_per_job(const PlantSpec& plant) {
  double mean = 0.0;
  for (std::size_t f = 0; f < plant.templates.size(); ++f) {
    double route = 0.0;
    for (const auto& op : plant.templates[f].operations) route += op.mean;
    mean += plant.job_mix[f] * route;
  }
  return mean;
}

double between_op_scv(const PlantSpec& plant) {
  // Ops pooled across jobs: template f contributes w_f * |route_f| op mass.
  double mass = 0.0, m1 = 0.0, m2 = 0.0;
  for (std::size_t f = 0; f < plant.templates.size(); ++f) {
    double w = plant.job_mix[f];
    for (const auto& op : plant.templates[f].operations) {
      mass += w;
      m1 += w * op.mean;
      m2 += w * op.mean * op.mean;
    }
  }
  if (mass <= 0.0 || m1 <= 0.0) return 0.0;
  m1 /= mass;
  m2 /= mass;
  double var = std::max(0.0, m2 - m1 * m1);
  return var / (m1 * m1);
}

double pooled_scv_to_draw_scv(double target, double between) {
  // pooled = draw * (1 + between) + between
  return std::max(0.0, (target - between) / (1.0 + between));
}

double compute_base_rate(const InputConfig& cfg) {
  double scale = cfg.distributions.rate_scale;
  if (cfg.fixed_job_count) {
    int n = std::max<int>(1, static_cast<int>(std::llround(*cfg.fixed_job_count * scale)));
    return static_cast<double>(n) / cfg.horizon;
  }
  double mean_p = mean_work_per_job(cfg.plant);
  if (mean_p <= 0.0)
    throw std::invalid_argument("compute_base_rate: mean work per job must be > 0");
  return scale * cfg.targets.rho_global * cfg.plant.total_speed() / mean_p;
}

std::vector<double> sample_arrivals(double lambda, double c_a2, double horizon,
                                    std::optional<int> fixed_count,
                                    const DistributionParams& dist, std::mt19937_64& rng) {
  if (lambda <= 0.0) throw std::invalid_argument("sample_arrivals: lambda must be > 0");
  if (horizon <= 0.0) throw std::invalid_argument("sample_arrivals: horizon must be > 0");

  GammaParams p;
  if (dist.arrival_shape && dist.arrival_scale) {
    p.shape = *dist.arrival_shape;
    p.scale = *dist.arrival_scale;
  } else {
    p = interarrival_params(lambda, c_a2);
    p.shape = clamp_shape(p.shape * std::exp2(dist.arrival_shape_log2_bias));
    p.scale = 1.0 / (p.shape * lambda);
  }
  std::gamma_distribution<double> gap(p.shape, p.scale);

  std::vector<double> out;
  if (fixed_count) {
    int n = *fixed_count;
    if (n < 1) throw std::invalid_argument("sample_arrivals: fixed count must be >= 1");
    out.reserve(n);
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
      t += gap(rng);
      out.push_back(t);
    }
    double scale = horizon * (1.0 - 1e-9) / out.back();
    for (double& x : out) x *= scale;
  } else {
    double t = 0.0;
    for (;;) {
      t += gap(rng);
      if (t > horizon) break;
      out.push_back(t);
    }
  }
  return out;
}

double modulation_g(const Modulation& mod, double t, double horizon) {
  switch (mod.profile) {
    case ModulationProfile::Constant:
      return 1.0;
    case ModulationProfile::Periodic:
      return 1.0 + mod.amplitude * std::sin(2.0 * M_PI * t / mod.period);
    case ModulationProfile::Linear:
      return 1.0 + mod.amplitude * (2.0 * t / horizon - 1.0);
  }
  return 1.0;
}

double modulation_integral(const Modulation& mod, double t, double horizon) {
  switch (mod.profile) {
    case ModulationProfile::Constant:
      return t;
    case ModulationProfile::Periodic: {
      double w = 2.0 * M_PI / mod.period;
      return t + mod.amplitude / w * (1.0 - std::cos(w * t));
    }
    case ModulationProfile::Linear:
      return t + mod.amplitude * (t * t / horizon - t);
  }
  return t;
}

double warp_time(const Modulation& mod, double raw, double horizon) {
  if (mod.profile == ModulationProfile::Constant || mod.amplitude == 0.0)
    return std::min(std::max(raw, 0.0), horizon);
  double lo = 0.0;
  double hi = horizon * (1.0 + mod.amplitude);
  while (modulation_integral(mod, hi, horizon) < raw) hi *= 1.5;
  while (hi - lo > 1e-9) {
    double mid = 0.5 * (lo + hi);
    if (modulation_integral(mod, mid, horizon) < raw)
      lo = mid;
    else
      hi = mid;
  }
  return std::min(std::max(0.5 * (lo + hi), 0.0), horizon);
}

std::vector<double> warp_times(const Modulation& mod, const std::vector<double>& raw,
                               double horizon) {
  std::vector<double> out;
  out.reserve(raw.size());
  for (double t : raw) out.push_back(warp_time(mod, t, horizon));
  return out;
}

void assign_due_dates(std::vector<JobSpec>& jobs, double tau, double horizon) {
  for (auto& j : jobs) j.due = std::min(j.arrival + tau * j.total_work(), horizon);
}

// ---------------------------------------------------------------------------
// Disturbances

namespace {

using IntervalList = std::vector<std::pair<double, double>>;  // sorted, disjoint

// Inserts [start, start+dur) if it does not overlap existing intervals.
bool try_claim(IntervalList& busy, double start, double dur) {
  double end = start + dur;
  for (const auto& [a, b] : busy)
    if (start < b && a < end) return false;
  busy.emplace_back(start, end);
  std::sort(busy.begin(), busy.end());
  return true;
}

// Largest free gap within [0, horizon].
std::pair<double, double> largest_gap(const IntervalList& busy, double horizon) {
  double best_start = 0.0, best_len = horizon;
  double cursor = 0.0;
  if (!busy.empty()) {
    best_len = -1.0;
    for (const auto& [a, b] : busy) {
      if (a - cursor > best_len) {
        best_len = a - cursor;
        best_start = cursor;
      }
      cursor = std::max(cursor, b);
    }
    if (horizon - cursor > best_len) {
      best_len = horizon - cursor;
      best_start = cursor;
    }
  }
  return {best_start, std::max(best_len, 0.0)};
}

}  // namespace

DisturbancePlan plan_disturbances(const InputConfig& cfg, const std::vector<JobSpec>& jobs,
                                  std::mt19937_64& rng) {
  DisturbancePlan plan;
  const double horizon = cfg.horizon;
  const double total_speed = cfg.plant.total_speed();
  const double c_tot = horizon * total_speed;
  plan.requested_capacity_loss = cfg.targets.delta * c_tot;

  std::map<int, IntervalList> busy;  // machine -> claimed downtime
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  double planned = 0.0;

  // Bottleneck windows consume their budget first.
  for (const auto& bn : cfg.targets.bottlenecks) {
    const GroupSpec* group = cfg.plant.find_group(bn.group);
    double h_b = bn.end - bn.start;
    double v_sum = 0.0;
    for (int m : group->machines) v_sum += cfg.plant.find_machine(m)->speed;
    double c_b = h_b * v_sum;

    double w_b = 0.0;  // nominal workload released to the group inside the window
    for (const auto& job : jobs) {
      if (job.arrival < bn.start || job.arrival > bn.end) continue;
      const ProcessTemplate* t = cfg.plant.find_template(job.template_id);
      for (std::size_t o = 0; o < t->operations.size(); ++o)
        if (t->operations[o].group == bn.group) w_b += job.processing_times[o];
    }

    double budget = std::max(0.0, c_b - w_b / bn.rho);
    if (budget > 0.95 * c_b) {
      plan.notes.push_back("bottleneck window on group " + bn.group +
                           ": budget infeasible, capped at 0.95 of window capacity");
      budget = 0.95 * c_b;
    }
    plan.window_budgets.push_back(budget);
    if (budget <= 0.0) continue;

    // Equal per-machine duration keeps the v-weighted loss exactly on budget.
    double dur = budget / v_sum;
    for (int m : group->machines) {
      double slack = h_b - dur;
      double start = bn.start + unit(rng) * std::max(slack, 0.0);
      busy[m].emplace_back(start, start + dur);
      std::sort(busy[m].begin(), busy[m].end());
      plan.outages.push_back({m, start, dur, false});
      planned += cfg.plant.find_machine(m)->speed * dur;
    }
  }

  // Preventive maintenance, counted against the global budget.
  if (cfg.dynamics.pm_interval > 0.0) {
    std::normal_distribution<double> pm_dur(cfg.distributions.pm_duration.mean,
                                            std::max(cfg.distributions.pm_duration.stddev, 0.0));
    for (const auto& mach : cfg.plant.machines) {
      for (double t = cfg.dynamics.pm_interval; t < horizon; t += cfg.dynamics.pm_interval) {
        double dur = std::max(0.0, pm_dur(rng));
        dur = std::min(dur, horizon - t);
        if (dur <= 0.0) continue;
        if (!try_claim(busy[mach.id], t, dur)) continue;
        plan.outages.push_back({mach.id, t, dur, true});
        planned += mach.speed * dur;
      }
    }
  }

  // Global remainder spread uniformly over machines and horizon.
  double remaining = plan.requested_capacity_loss - planned;
  if (remaining < -0.01 * std::max(plan.requested_capacity_loss, 1.0) &&
      plan.requested_capacity_loss > 0.0) {
    plan.notes.push_back("window and maintenance downtime already exceed the global budget");
  }
  if (remaining > 1e-9) {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.plant.machines.size() - 1);
    int stall = 0;
    while (remaining > 1e-6 * std::max(plan.requested_capacity_loss, 1.0) && stall < 10000) {
      ++stall;
      const MachineSpec& mach = cfg.plant.machines[pick(rng)];
      double dur = std::min(remaining / mach.speed, horizon / 20.0 * (0.5 + unit(rng)));
      if (dur <= 0.0) break;
      double placed_at = -1.0;
      for (int attempt = 0; attempt < 20 && placed_at < 0.0; ++attempt) {
        double start = unit(rng) * (horizon - dur);
        if (try_claim(busy[mach.id], start, dur)) placed_at = start;
      }
      if (placed_at < 0.0) {
        auto [gap_start, gap_len] = largest_gap(busy[mach.id], horizon);
        if (gap_len < dur) dur = gap_len * 0.95;
        if (dur <= 1e-9) continue;
        if (!try_claim(busy[mach.id], gap_start, dur)) continue;
        placed_at = gap_start;
      }
      plan.outages.push_back({mach.id, placed_at, dur, false});
      planned += mach.speed * dur;
      remaining -= mach.speed * dur;
      stall = 0;
    }
    if (remaining > 0.01 * std::max(plan.requested_capacity_loss, 1.0))
      plan.notes.push_back("could not place the full global outage budget");
  }

  plan.planned_capacity_loss = planned;
  std::sort(plan.outages.begin(), plan.outages.end(), [](const Outage& a, const Outage& b) {
    if (a.start != b.start) return a.start < b.start;
    return a.machine < b.machine;
  });
  return plan;
}

// ---------------------------------------------------------------------------
// Jobs

namespace {

std::size_t pick_index(const std::vector<double>& weights, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return weights.size() - 1;
}

double effective_processing_scv(const InputConfig& cfg) {
  double draw;
  if (cfg.distributions.processing_shape) {
    draw = 1.0 / clamp_shape(*cfg.distributions.processing_shape);
  } else {
    draw = pooled_scv_to_draw_scv(cfg.targets.c_p2, between_op_scv(cfg.plant));
  }
  double shape = clamp_shape((draw <= 1.0 / kMaxShape ? kMaxShape : 1.0 / draw) *
                             std::exp2(cfg.distributions.processing_shape_log2_bias));
  return 1.0 / shape;
}

}  // namespace

std::vector<JobSpec> sample_jobs(const InputConfig& cfg, const std::vector<double>& arrivals,
                                 std::mt19937_64& processing_rng, std::mt19937_64& batch_rng) {
  std::vector<JobSpec> jobs;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> batch_size(cfg.distributions.batch.mean,
                                              std::max(cfg.distributions.batch.stddev, 0.0));
  const double scv = effective_processing_scv(cfg);
  std::int64_t next_id = 0;
  std::int64_t next_batch = 0;

  for (double t : arrivals) {
    std::size_t f = pick_index(cfg.plant.job_mix, unit(batch_rng));
    int count = 1;
    std::int64_t batch_id = -1;
    if (cfg.dynamics.p_batch > 0.0 && unit(batch_rng) < cfg.dynamics.p_batch) {
      count = std::max(1, static_cast<int>(std::ceil(batch_size(batch_rng))));
      if (count > 1) batch_id = next_batch++;
    }
    const ProcessTemplate& tmpl = cfg.plant.templates[f];
    for (int b = 0; b < count; ++b) {
      JobSpec job;
      job.id = next_id++;
      job.arrival = t;
      job.template_id = tmpl.id;
      job.batch_id = batch_id;
      job.processing_times.reserve(tmpl.operations.size());
      for (const auto& op : tmpl.operations)
        job.processing_times.push_back(gamma_by_mean_scv(op.mean, scv, processing_rng));
      jobs.push_back(std::move(job));
    }
  }
  return jobs;
}

// ---------------------------------------------------------------------------
// Full pipeline

EventStream generate_instance(const InputConfig& cfg) {
  ValidationReport vr = validate_config(cfg);
  if (!vr.ok()) throw std::invalid_argument("invalid config:\n" + vr.summary());

  auto arrivals_rng = derive_stream(cfg.master_seed, RngStream::Arrivals);
  auto processing_rng = derive_stream(cfg.master_seed, RngStream::Processing);
  auto batch_rng = derive_stream(cfg.master_seed, RngStream::Batch);
  auto disturbance_rng = derive_stream(cfg.master_seed, RngStream::Disturbance);
  auto scenario_rng = derive_stream(cfg.master_seed, RngStream::Scenario);

  double lambda = compute_base_rate(cfg);
  std::optional<int> fixed;
  if (cfg.fixed_job_count)
    fixed = std::max<int>(
        1, static_cast<int>(std::llround(*cfg.fixed_job_count * cfg.distributions.rate_scale)));

  std::vector<double> raw =
      sample_arrivals(lambda, cfg.targets.c_a2, cfg.horizon, fixed, cfg.distributions, arrivals_rng);
  std::vector<double> warped = warp_times(cfg.distributions.modulation, raw, cfg.horizon);

  if (cfg.dynamics.warm_start_jobs > 0)
    warped.insert(warped.begin(), cfg.dynamics.warm_start_jobs, 0.0);

  std::vector<JobSpec> jobs = sample_jobs(cfg, warped, processing_rng, batch_rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Processing-time shifts are realized at generation time: every job
  // arriving after a trigger has its durations rescaled.
  if (cfg.dynamics.p_ptime > 0.0 && !cfg.dynamics.ptime_multipliers.empty()) {
    std::vector<std::pair<double, double>> triggers;  // (time, multiplier)
    for (const auto& job : jobs) {
      if (unit(scenario_rng) >= cfg.dynamics.p_ptime) continue;
      double when = job.arrival + unit(scenario_rng) * (cfg.horizon - job.arrival);
      std::size_t k = std::min<std::size_t>(
          cfg.dynamics.ptime_multipliers.size() - 1,
          static_cast<std::size_t>(unit(scenario_rng) * cfg.dynamics.ptime_multipliers.size()));
      triggers.emplace_back(when, cfg.dynamics.ptime_multipliers[k]);
    }
    for (auto& job : jobs)
      for (const auto& [when, mult] : triggers)
        if (job.arrival > when)
          for (double& p : job.processing_times) p *= mult;
  }

  assign_due_dates(jobs, cfg.targets.tau, cfg.horizon);

  DisturbancePlan plan = plan_disturbances(cfg, jobs, disturbance_rng);

  EventStream stream;
  stream.horizon = cfg.horizon;
  stream.config = cfg;

  std::int64_t next_event = 0;
  for (const auto& job : jobs) {
    Event e;
    e.id = next_event++;
    e.time = job.arrival;
    e.kind = EventKind::JobArrival;
    e.job = job;
    stream.events.push_back(std::move(e));
  }

  for (const auto& o : plan.outages) {
    if (o.preventive) {
      Event pm;
      pm.id = next_event++;
      pm.time = o.start;
      pm.kind = EventKind::PreventiveMaintenance;
      pm.machine = o.machine;
      pm.duration = o.duration;
      stream.events.push_back(std::move(pm));
    } else {
      Event down;
      down.id = next_event++;
      down.time = o.start;
      down.kind = EventKind::MachineDown;
      down.machine = o.machine;
      down.duration = o.duration;
      std::int64_t down_id = down.id;
      stream.events.push_back(std::move(down));
      Event up;
      up.id = next_event++;
      up.time = std::min(o.start + o.duration, cfg.horizon);
      up.kind = EventKind::MachineUp;
      up.machine = o.machine;
      up.ref_event = down_id;
      stream.events.push_back(std::move(up));
    }
  }

  // Per-job Bernoulli scenario events, timestamped within [arrival, due].
  if (cfg.dynamics.any_job_event() || cfg.dynamics.p_route > 0.0) {
    for (const auto& job : jobs) {
      double span = std::max(job.due - job.arrival, 0.0);
      auto stamp = [&]() { return job.arrival + unit(scenario_rng) * span; };

      if (cfg.dynamics.p_cancel > 0.0 && unit(scenario_rng) < cfg.dynamics.p_cancel) {
        Event e;
        e.id = next_event++;
        e.time = stamp();
        e.kind = EventKind::Cancellation;
        e.job_id = job.id;
        stream.events.push_back(std::move(e));
      }
      if (cfg.dynamics.p_rework > 0.0 && unit(scenario_rng) < cfg.dynamics.p_rework) {
        Event e;
        e.id = next_event++;
        e.time = stamp();
        e.kind = EventKind::Rework;
        e.job_id = job.id;
        e.op_index = static_cast<int>(
            std::min<std::size_t>(job.processing_times.size() - 1,
                                  static_cast<std::size_t>(unit(scenario_rng) *
                                                           job.processing_times.size())));
        stream.events.push_back(std::move(e));
      }
      if (cfg.dynamics.p_priority > 0.0 && unit(scenario_rng) < cfg.dynamics.p_priority) {
        Event e;
        e.id = next_event++;
        e.time = stamp();
        e.kind = EventKind::PriorityChange;
        e.job_id = job.id;
        e.new_priority = job.priority + 1;
        stream.events.push_back(std::move(e));
      }
      if (cfg.dynamics.p_route > 0.0 && unit(scenario_rng) < cfg.dynamics.p_route) {
        Event e;
        e.id = next_event++;
        e.time = stamp();
        e.kind = EventKind::RouteChange;
        e.job_id = job.id;
        std::size_t f = pick_index(cfg.plant.job_mix, unit(scenario_rng));
        const ProcessTemplate& tmpl = cfg.plant.templates[f];
        e.new_template = tmpl.id;
        double scv = effective_processing_scv(cfg);
        for (const auto& op : tmpl.operations)
          e.new_times.push_back(gamma_by_mean_scv(op.mean, scv, scenario_rng));
        stream.events.push_back(std::move(e));
      }
      if (cfg.dynamics.p_due_change > 0.0 && unit(scenario_rng) < cfg.dynamics.p_due_change) {
        Event e;
        e.id = next_event++;
        e.time = stamp();
        e.kind = EventKind::DueDateChange;
        e.job_id = job.id;
        e.new_due = job.arrival + cfg.dynamics.due_tightening_ratio * (job.due - job.arrival);
        stream.events.push_back(std::move(e));
      }
    }
  }

  stream.sort_events();
  return stream;
}

}  // namespace dynshop
