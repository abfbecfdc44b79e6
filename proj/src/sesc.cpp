#include "dynshop/sesc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dynshop/generator.hpp"

namespace dynshop {

double l2_norm(const ErrorVector& e) {
  double s = 0.0;
  for (double x : e) s += x * x;
  return std::sqrt(s);
}

double max_abs(const ErrorVector& e) {
  double m = 0.0;
  for (double x : e) m = std::max(m, std::abs(x));
  return m;
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::ArrivalStructure: return "arrival_structure";
    case Strategy::SlackScaling: return "slack_scaling";
    case Strategy::ProcessingResample: return "processing_resample";
    case Strategy::BottleneckEngineering: return "bottleneck_engineering";
  }
  return "arrival_structure";
}

std::map<Strategy, ImpactVector> CalibratorConfig::impacts() const {
  std::map<Strategy, ImpactVector> m;
  //                                  rho   ca2   cp2   tau   chi  delta eps_bn
  m[Strategy::ArrivalStructure] = {0.9, 0.8, 0.0, -0.2, -0.1, 0.0, 0.0};
  m[Strategy::SlackScaling] = {0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0};
  m[Strategy::ProcessingResample] = {0.0, 0.0, 0.9, 0.0, 0.0, 0.0, 0.0};
  m[Strategy::BottleneckEngineering] = {-0.1, 0.0, 0.0, 0.0, 0.0, 0.3, 0.9};
  return m;
}

ErrorVector error_vector(const ObservedMetrics& m, const TargetMetrics& targets, double eps) {
  auto rel = [eps](double obs, double tgt) {
    if (std::abs(tgt) > 0.0) return std::abs(obs - tgt) / (std::abs(tgt) + eps);
    return std::abs(obs - tgt);
  };
  ErrorVector e{};
  e[kRho] = rel(m.rho_global, targets.rho_global);
  e[kCa2] = rel(m.c_a2, targets.c_a2);
  e[kCp2] = rel(m.c_p2, targets.c_p2);
  e[kTau] = rel(m.tau, targets.tau);
  e[kChi] = rel(m.chi_load, targets.chi_load);
  e[kDelta] = rel(m.delta, targets.delta);
  e[kEpsBn] = m.eps_bn;  // deviation against an implicit zero target
  return e;
}

double strategy_score(const ImpactVector& impact, const ErrorVector& e,
                      const CalibratorConfig& cfg) {
  double score = 0.0;
  for (int i = 0; i < kMetricCount; ++i) {
    double a = impact[i];
    if (a > 0.0) {
      score += a * e[i];
    } else if (a < 0.0) {
      double lambda = e[i] < cfg.eps_tol ? cfg.lambda_soft : cfg.lambda_hard;
      score -= lambda * e[i] * std::abs(a);
    }
  }
  return score;
}

ErrorVector strict_thresholds(const CalibratorConfig& cfg) {
  ErrorVector t{};
  t[kRho] = cfg.eps_tol;
  t[kTau] = cfg.eps_tol;
  t[kDelta] = 2.0 * cfg.eps_tol;
  t[kCa2] = 3.0 * cfg.eps_tol;
  t[kChi] = 3.0 * cfg.eps_tol;
  t[kCp2] = 4.0 * cfg.eps_tol;
  t[kEpsBn] = 2.0 * cfg.eps_tol;  // only consulted by target-count selection
  return t;
}

SuccessFlags success_flags(const ErrorVector& e, double l2, const CalibratorConfig& cfg) {
  SuccessFlags f;
  f.relaxed = l2 <= cfg.eps_tol;
  ErrorVector t = strict_thresholds(cfg);
  bool drivers = true;
  for (int i = 0; i < kMetricCount; ++i) {
    if (i == kEpsBn) continue;
    drivers = drivers && e[i] <= t[i];
  }
  f.strict = f.relaxed && drivers;
  return f;
}

// ---------------------------------------------------------------------------
// Operator helpers

namespace {

double empirical_scv(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  if (mean == 0.0) return 0.0;
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= xs.size();
  return var / (mean * mean);
}

double stream_rho(const EventStream& stream) {
  double work = 0.0;
  for (const auto* j : stream.jobs()) work += j->total_work();
  double cap = stream.horizon * stream.config.plant.total_speed();
  return cap > 0.0 ? work / cap : 0.0;
}

// Draw `count` positive gaps whose empirical SCV (excluding the first gap,
// which only offsets the sequence) lands near `target`.
std::vector<double> draw_gaps_matching_scv(std::size_t count, double target,
                                           const CalibratorConfig& cfg, std::mt19937_64& rng) {
  double shape = std::min(std::max(1.0 / std::max(target, 1e-9), 1e-6), 1e6);
  std::gamma_distribution<double> gamma(shape, 1.0);
  std::vector<double> best, cur(count);
  double best_err = std::numeric_limits<double>::infinity();
  double tolerance = cfg.resample_rel_target * std::max(target, 0.05);
  int tries = count >= 3 ? cfg.resample_max_tries : 1;
  for (int t = 0; t < tries; ++t) {
    for (auto& g : cur) g = std::max(gamma(rng), 1e-12);
    std::vector<double> observed(cur.begin() + 1, cur.end());
    double err = std::abs(empirical_scv(observed) - target);
    if (err < best_err) {
      best_err = err;
      best = cur;
      if (best_err <= tolerance) break;
    }
  }
  return best;
}

// Replaces every arrival epoch with a fresh renewal sequence matched to the
// target SCV. Jobs keep their order, slack and relative event offsets.
void redraw_epochs(EventStream& out, const TargetMetrics& targets,
                   const CalibratorConfig& cfg, std::mt19937_64& rng) {
  std::vector<const JobSpec*> jobs = out.jobs();
  std::vector<double> epochs;
  for (const auto* j : jobs) epochs.push_back(j->arrival);
  std::sort(epochs.begin(), epochs.end());
  epochs.erase(std::unique(epochs.begin(), epochs.end()), epochs.end());
  if (epochs.size() < 2) return;

  std::vector<double> gaps = draw_gaps_matching_scv(epochs.size(), targets.c_a2, cfg, rng);
  std::vector<double> fresh(epochs.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    acc += gaps[i];
    fresh[i] = acc;
  }
  double scale = 0.999 * out.horizon / fresh.back();
  for (double& t : fresh) t *= scale;

  std::map<double, double> shift;  // old epoch -> delta
  for (std::size_t i = 0; i < epochs.size(); ++i) shift[epochs[i]] = fresh[i] - epochs[i];

  std::map<std::int64_t, double> job_shift;
  for (auto& ev : out.events) {
    if (ev.kind == EventKind::JobArrival && ev.job) {
      double d = shift[ev.job->arrival];
      job_shift[ev.job->id] = d;
      ev.job->arrival += d;
      ev.job->due = std::min(ev.job->due + d, out.horizon);
      ev.time = ev.job->arrival;
    }
  }
  for (auto& ev : out.events) {
    if (ev.kind == EventKind::JobArrival || ev.kind == EventKind::MachineDown ||
        ev.kind == EventKind::MachineUp || ev.kind == EventKind::PreventiveMaintenance)
      continue;
    auto it = job_shift.find(ev.job_id);
    if (it == job_shift.end()) continue;
    ev.time = std::min(std::max(ev.time + it->second, 0.0), out.horizon);
    if (ev.kind == EventKind::DueDateChange)
      ev.new_due = std::min(std::max(ev.new_due + it->second, 0.0), out.horizon);
  }
  out.sort_events();
}

}  // namespace

EventStream adjust_arrival_structure(const EventStream& stream, const TargetMetrics& targets,
                                     const ErrorVector& e, const CalibratorConfig& cfg,
                                     std::mt19937_64& rng) {
  EventStream out = stream;
  std::vector<const JobSpec*> jobs = out.jobs();
  if (jobs.empty()) return out;

  const bool rate_mode = e[kRho] >= 2.0 * e[kCa2] && e[kRho] >= 0.5 * cfg.eps_tol;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  if (rate_mode) {
    std::size_t n = jobs.size();
    std::size_t k = static_cast<std::size_t>(
        std::llround(std::min(e[kRho], cfg.job_change_cap) * static_cast<double>(n)));
    k = std::max<std::size_t>(k, 1);
    double rho_obs = stream_rho(out);

    if (rho_obs > targets.rho_global) {
      if (n - std::min(k, n) < 1)
        throw std::invalid_argument("arrival adjustment would delete every job");
      std::vector<std::int64_t> ids;
      for (const auto* j : jobs) ids.push_back(j->id);
      std::shuffle(ids.begin(), ids.end(), rng);
      std::set<std::int64_t> doomed(ids.begin(), ids.begin() + k);
      std::vector<Event> kept;
      for (auto& ev : out.events) {
        std::int64_t ref = ev.kind == EventKind::JobArrival && ev.job ? ev.job->id : ev.job_id;
        if (doomed.count(ref)) continue;
        kept.push_back(std::move(ev));
      }
      out.events = std::move(kept);
    } else {
      std::int64_t next_job = 0;
      for (const auto* j : jobs) next_job = std::max(next_job, j->id + 1);
      std::int64_t next_event = out.max_event_id() + 1;
      // Appending arrivals reallocates the event list, so the source jobs
      // must be snapshotted by value first.
      std::vector<JobSpec> pool;
      pool.reserve(jobs.size());
      for (const auto* j : jobs) pool.push_back(*j);
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t i = 0; i < k; ++i) {
        JobSpec copy = pool[pick(rng)];
        double slack = copy.due - copy.arrival;
        double jitter = (unit(rng) * 2.0 - 1.0) * 0.02 * out.horizon;
        copy.id = next_job++;
        copy.batch_id = -1;
        copy.arrival = std::min(std::max(copy.arrival + jitter, 0.0), 0.999 * out.horizon);
        copy.due = std::min(copy.arrival + slack, out.horizon);
        Event ev;
        ev.id = next_event++;
        ev.time = copy.arrival;
        ev.kind = EventKind::JobArrival;
        ev.job = std::move(copy);
        out.events.push_back(std::move(ev));
      }
    }
    out.sort_events();
    // A rate change keeps the renewal structure: fresh epochs for the new
    // job count, so the interarrival SCV stays on target.
    redraw_epochs(out, targets, cfg, rng);
    return out;
  }

  redraw_epochs(out, targets, cfg, rng);
  return out;
}

EventStream scale_slack(const EventStream& stream, const TargetMetrics& targets,
                        const ObservedMetrics& m, const CalibratorConfig& cfg,
                        SlackState& state) {
  EventStream out = stream;
  double e_tau = std::abs(m.tau - targets.tau) / (std::abs(targets.tau) + cfg.epsilon);
  double sign = m.tau > targets.tau ? 1.0 : (m.tau < targets.tau ? -1.0 : 0.0);
  state.alpha = std::min(std::max(state.alpha * (1.0 - cfg.eta_tau * sign * e_tau),
                                  cfg.alpha_min),
                         cfg.alpha_max);

  std::map<std::int64_t, double> arrival_of, work_of;
  for (auto& ev : out.events) {
    if (ev.kind != EventKind::JobArrival || !ev.job) continue;
    JobSpec& job = *ev.job;
    arrival_of[job.id] = job.arrival;
    work_of[job.id] = job.total_work();
    auto [it, fresh] = state.base_slack.try_emplace(job.id, job.due - job.arrival);
    (void)fresh;
    double scaled = state.alpha * it->second;
    double lo = work_of[job.id];
    double hi = std::max(out.horizon - job.arrival, 0.0);
    job.due = job.arrival + std::min(std::max(scaled, lo), hi);
  }
  for (auto& ev : out.events) {
    if (ev.kind != EventKind::DueDateChange) continue;
    auto arr = arrival_of.find(ev.job_id);
    if (arr == arrival_of.end()) continue;
    auto [it, fresh] = state.event_base_slack.try_emplace(ev.id, ev.new_due - arr->second);
    (void)fresh;
    double scaled = state.alpha * it->second;
    double hi = std::max(out.horizon - arr->second, 0.0);
    ev.new_due = arr->second + std::min(std::max(scaled, 0.0), hi);
  }
  return out;
}

EventStream resample_processing_times(const EventStream& stream, double c_p2_target,
                                      const CalibratorConfig& cfg, std::mt19937_64& rng) {
  EventStream out = stream;
  std::vector<JobSpec*> jobs;
  for (auto& ev : out.events)
    if (ev.kind == EventKind::JobArrival && ev.job) jobs.push_back(&*ev.job);
  if (jobs.empty()) return out;

  std::vector<double> means;
  double old_total = 0.0;
  for (const auto* j : jobs) {
    const ProcessTemplate* t = out.config.plant.find_template(j->template_id);
    for (std::size_t o = 0; o < j->processing_times.size(); ++o) {
      means.push_back(o < t->operations.size() ? t->operations[o].mean
                                               : j->processing_times[o]);
      old_total += j->processing_times[o];
    }
  }
  if (means.size() < 2 || old_total <= 0.0) return out;

  // Between-op dispersion floors the pooled SCV; solve for the per-draw SCV.
  double between = empirical_scv(means);
  double draw_scv = std::max(0.0, (c_p2_target - between) / (1.0 + between));
  double shape = std::min(std::max(draw_scv <= 1e-9 ? 1e6 : 1.0 / draw_scv, 1e-6), 1e6);

  double achievable = draw_scv * (1.0 + between) + between;
  bool reachable = std::abs(achievable - c_p2_target) <=
                   cfg.resample_rel_target * std::max(c_p2_target, 0.05);
  int tries = (reachable && draw_scv > 1e-9) ? cfg.resample_max_tries : 1;
  double tolerance = cfg.resample_rel_target * std::max(c_p2_target, 0.05);

  std::vector<double> best, cur(means.size());
  double best_err = std::numeric_limits<double>::infinity();
  for (int t = 0; t < tries; ++t) {
    for (std::size_t i = 0; i < means.size(); ++i) {
      std::gamma_distribution<double> gamma(shape, means[i] / shape);
      cur[i] = std::max(gamma(rng), means[i] * 1e-12);
    }
    double err = std::abs(empirical_scv(cur) - c_p2_target);
    if (err < best_err) {
      best_err = err;
      best = cur;
      if (best_err <= tolerance) break;
    }
  }

  double fresh_total = 0.0;
  for (double p : best) fresh_total += p;
  double gamma_scale = old_total / fresh_total;  // exact workload conservation

  std::size_t idx = 0;
  for (auto* j : jobs)
    for (double& p : j->processing_times) p = best[idx++] * gamma_scale;
  return out;
}

EventStream engineer_bottleneck(const EventStream& stream, const ObservedMetrics& m,
                                const CalibratorConfig& cfg, double* residual) {
  (void)cfg;
  if (residual) *residual = 0.0;
  EventStream out = stream;
  if (m.windows.empty()) return out;

  const WindowObserved* worst = &m.windows.front();
  for (const auto& w : m.windows)
    if (std::abs(w.rho_observed - w.rho_target) >
        std::abs(worst->rho_observed - worst->rho_target))
      worst = &w;

  const GroupSpec* group = out.config.plant.find_group(worst->group);
  if (!group) return out;
  double v_sum = 0.0;
  for (int mm : group->machines) v_sum += out.config.plant.find_machine(mm)->speed;
  if (v_sum <= 0.0) return out;

  // Loss still required so the effective capacity meets the target.
  double delta_cap = worst->effective_capacity - worst->workload / worst->rho_target;
  double delta_t = delta_cap / v_sum;
  if (std::abs(delta_t) < 1e-12) return out;

  const double lo = worst->start, hi = worst->end;
  std::set<int> members(group->machines.begin(), group->machines.end());

  // Outage events fully inside the window, plus paired recovery events.
  std::vector<Event*> in_window;
  std::map<std::int64_t, Event*> ups;
  for (auto& ev : out.events) {
    if (ev.kind == EventKind::MachineUp) ups[ev.ref_event] = &ev;
  }
  for (auto& ev : out.events) {
    if ((ev.kind == EventKind::MachineDown || ev.kind == EventKind::PreventiveMaintenance) &&
        members.count(ev.machine) && ev.time >= lo - 1e-9 &&
        ev.time + ev.duration <= hi + 1e-9)
      in_window.push_back(&ev);
  }

  auto set_duration = [&](Event* down, double dur) {
    down->duration = dur;
    auto it = ups.find(down->id);
    if (it != ups.end()) it->second->time = std::min(down->time + dur, out.horizon);
  };

  if (delta_t < 0.0) {
    double shrink = -delta_t;
    for (Event* ev : in_window) {
      if (shrink <= 1e-12) break;
      double cut = std::min(ev->duration, shrink);
      set_duration(ev, ev->duration - cut);
      shrink -= cut;
    }
    if (residual) *residual = shrink > 1e-12 ? shrink : 0.0;
    out.sort_events();
    return out;
  }

  // Per-machine downtime maps to respect when extending or inserting.
  auto downtime = downtime_by_machine(out);
  double grow = delta_t;

  for (Event* ev : in_window) {
    if (grow <= 1e-12) break;
    double end = ev->time + ev->duration;
    double limit = hi;
    auto it = downtime.find(ev->machine);
    if (it != downtime.end())
      for (const auto& iv : it->second)
        if (iv.start > end + 1e-9) {
          limit = std::min(limit, iv.start);
          break;
        }
    double room = std::max(0.0, limit - end);
    double add = std::min(room, grow);
    if (add <= 0.0) continue;
    set_duration(ev, ev->duration + add);
    downtime = downtime_by_machine(out);
    grow -= add;
  }

  std::int64_t next_event = out.max_event_id() + 1;
  for (int machine : group->machines) {
    if (grow <= 1e-12) break;
    std::vector<Interval> busy;
    auto it = downtime.find(machine);
    if (it != downtime.end()) busy = it->second;
    // Free gaps inside the window.
    double cursor = lo;
    std::vector<Interval> gaps;
    for (const auto& iv : busy) {
      if (iv.end <= lo || iv.start >= hi) continue;
      if (iv.start > cursor) gaps.push_back({cursor, std::min(iv.start, hi)});
      cursor = std::max(cursor, iv.end);
    }
    if (cursor < hi) gaps.push_back({cursor, hi});
    std::sort(gaps.begin(), gaps.end(),
              [](const Interval& a, const Interval& b) { return (a.end - a.start) > (b.end - b.start); });
    for (const auto& gap : gaps) {
      if (grow <= 1e-12) break;
      double len = gap.end - gap.start;
      if (len <= 1e-9) continue;
      double dur = std::min(len, grow);
      Event down;
      down.id = next_event++;
      down.time = gap.start;
      down.kind = EventKind::MachineDown;
      down.machine = machine;
      down.duration = dur;
      std::int64_t down_id = down.id;
      out.events.push_back(std::move(down));
      Event up;
      up.id = next_event++;
      up.time = std::min(gap.start + dur, out.horizon);
      up.kind = EventKind::MachineUp;
      up.machine = machine;
      up.ref_event = down_id;
      out.events.push_back(std::move(up));
      grow -= dur;
    }
    downtime = downtime_by_machine(out);
  }
  if (residual) *residual = grow > 1e-12 ? grow : 0.0;
  out.sort_events();
  return out;
}

// ---------------------------------------------------------------------------
// Greedy loop

std::pair<EventStream, CalibrationReport> calibrate(const EventStream& stream,
                                                    const TargetMetrics& targets,
                                                    const CalibratorConfig& cfg,
                                                    std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  auto rng = derive_stream(seed, RngStream::Calibrator);

  EventStream current = stream;
  ObservedMetrics m = observed_metrics(current);
  ErrorVector e = error_vector(m, targets, cfg.epsilon);
  double l2 = l2_norm(e);

  CalibrationReport report;
  report.initial_errors = e;
  report.initial_l2 = l2;

  SlackState slack_state;
  auto impacts = cfg.impacts();

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    if (max_abs(e) < cfg.eps_tol && l2 <= cfg.eps_tol) break;

    std::vector<std::pair<double, Strategy>> scored;
    for (const auto& [s, impact] : impacts) {
      if (cfg.disabled.count(s)) continue;
      scored.emplace_back(strategy_score(impact, e, cfg), s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return static_cast<int>(a.second) < static_cast<int>(b.second);
    });

    bool improved = false;
    for (const auto& [score, s] : scored) {
      (void)score;
      EventStream candidate;
      SlackState slack_candidate = slack_state;
      switch (s) {
        case Strategy::ArrivalStructure:
          candidate = adjust_arrival_structure(current, targets, e, cfg, rng);
          break;
        case Strategy::SlackScaling:
          candidate = scale_slack(current, targets, m, cfg, slack_candidate);
          break;
        case Strategy::ProcessingResample:
          candidate = resample_processing_times(current, targets.c_p2, cfg, rng);
          break;
        case Strategy::BottleneckEngineering:
          candidate = engineer_bottleneck(current, m, cfg);
          break;
      }
      ObservedMetrics m2 = observed_metrics(candidate);
      ErrorVector e2 = error_vector(m2, targets, cfg.epsilon);
      double l2_after = l2_norm(e2);

      IterationRecord rec;
      rec.iteration = iter;
      rec.strategy = to_string(s);
      rec.l2_before = l2;
      rec.l2_after = l2_after;
      rec.errors = e2;
      rec.accepted = l2_after < l2 - 1e-12;
      report.steps.push_back(rec);

      if (rec.accepted) {
        current = std::move(candidate);
        m = std::move(m2);
        e = e2;
        l2 = l2_after;
        slack_state = std::move(slack_candidate);
        ++report.iterations;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }

  report.converged = max_abs(e) < cfg.eps_tol && l2 <= cfg.eps_tol;
  report.final_errors = e;
  report.final_l2 = l2;
  SuccessFlags flags = success_flags(e, l2, cfg);
  report.relaxed = flags.relaxed;
  report.strict = flags.strict;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(current), std::move(report)};
}

json report_to_json(const CalibrationReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back({{"iteration", s.iteration},
                     {"strategy", s.strategy},
                     {"accepted", s.accepted},
                     {"l2_before", s.l2_before},
                     {"l2_after", s.l2_after},
                     {"errors", s.errors}});
  return json{{"schema_version", kSchemaVersion},
              {"mode", r.mode},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"relaxed", r.relaxed},
              {"strict", r.strict},
              {"initial_l2", r.initial_l2},
              {"final_l2", r.final_l2},
              {"initial_errors", r.initial_errors},
              {"final_errors", r.final_errors},
              {"wall_seconds", r.wall_seconds},
              {"steps", steps}};
}

}  // namespace dynshop
