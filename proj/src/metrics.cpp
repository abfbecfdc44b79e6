#include "dynshop/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace dynshop {

namespace {

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = xs.size();
  if (xs.empty()) return m;
  double s = 0.0;
  for (double x : xs) s += x;
  m.mean = s / xs.size();
  double v = 0.0;
  for (double x : xs) v += (x - m.mean) * (x - m.mean);
  m.stddev = std::sqrt(v / xs.size());
  return m;
}

double scv(const Moments& m) {
  if (m.mean == 0.0) return 0.0;
  return (m.stddev / m.mean) * (m.stddev / m.mean);
}

}  // namespace

std::vector<Interval> merge_intervals(std::vector<Interval> intervals) {
  intervals.erase(std::remove_if(intervals.begin(), intervals.end(),
                                 [](const Interval& i) { return i.end <= i.start; }),
                  intervals.end());
  std::sort(intervals.begin(), intervals.end(),
            [](const Interval& a, const Interval& b) { return a.start < b.start; });
  std::vector<Interval> out;
  for (const auto& i : intervals) {
    if (!out.empty() && i.start <= out.back().end)
      out.back().end = std::max(out.back().end, i.end);
    else
      out.push_back(i);
  }
  return out;
}

double overlap_length(const std::vector<Interval>& merged, double lo, double hi) {
  double total = 0.0;
  for (const auto& i : merged)
    total += std::max(0.0, std::min(i.end, hi) - std::max(i.start, lo));
  return total;
}

std::map<int, std::vector<Interval>> downtime_by_machine(const EventStream& stream) {
  std::map<int, std::vector<Interval>> raw;
  for (const auto& e : stream.events) {
    if (e.kind != EventKind::MachineDown && e.kind != EventKind::PreventiveMaintenance) continue;
    double start = std::max(0.0, e.time);
    double end = std::min(stream.horizon, e.time + e.duration);
    if (end > start) raw[e.machine].push_back({start, end});
  }
  std::map<int, std::vector<Interval>> merged;
  for (auto& [m, list] : raw) merged[m] = merge_intervals(std::move(list));
  return merged;
}

ObservedMetrics observed_metrics(const EventStream& stream, const Trajectory* trajectory) {
  const PlantSpec& plant = stream.config.plant;
  const double horizon = stream.horizon;

  ObservedMetrics out;
  out.attribution = trajectory ? "trajectory" : "nominal";
  out.n_machines = static_cast<int>(plant.machines.size());
  out.total_capacity = horizon * plant.total_speed();

  // Final due dates after due-change events (canonical order: last wins).
  std::map<std::int64_t, double> final_due;
  std::vector<const JobSpec*> jobs = stream.jobs();
  for (const auto* j : jobs) final_due[j->id] = j->due;
  for (const auto& e : stream.events)
    if (e.kind == EventKind::DueDateChange && final_due.count(e.job_id))
      final_due[e.job_id] = e.new_due;

  out.n_jobs = static_cast<int>(jobs.size());
  if (!jobs.empty()) {
    double routes = 0.0;
    for (const auto* j : jobs) routes += static_cast<double>(j->processing_times.size());
    out.mean_route_length = routes / jobs.size();
  }

  // Arrival moments over consecutive timestamp differences.
  std::vector<double> arrivals;
  arrivals.reserve(jobs.size());
  for (const auto* j : jobs) arrivals.push_back(j->arrival);
  std::sort(arrivals.begin(), arrivals.end());
  std::vector<double> gaps;
  for (std::size_t i = 1; i < arrivals.size(); ++i) gaps.push_back(arrivals[i] - arrivals[i - 1]);
  if (gaps.size() >= 1) {
    Moments m = moments(gaps);
    out.mean_interarrival = m.mean;
    out.std_interarrival = m.stddev;
    out.c_a2 = scv(m);
  }
  if (jobs.size() < 2) out.scv_degenerate = true;

  // Downtime and capacity loss.
  auto downtime = downtime_by_machine(stream);
  double lost = 0.0;
  for (const auto& mach : plant.machines) {
    auto it = downtime.find(mach.id);
    if (it == downtime.end()) continue;
    lost += mach.speed * overlap_length(it->second, 0.0, horizon);
  }
  out.delta = out.total_capacity > 0.0 ? lost / out.total_capacity : 0.0;

  // Workload per group plus pooled processing moments.
  std::map<std::string, double> group_speed;
  for (const auto& g : plant.groups) {
    double v = 0.0;
    for (int m : g.machines) v += plant.find_machine(m)->speed;
    group_speed[g.id] = v;
  }
  std::map<std::string, double> group_work;
  std::vector<double> durations;
  std::map<std::int64_t, double> job_work;

  if (!trajectory) {
    for (const auto* j : jobs) {
      const ProcessTemplate* t = plant.find_template(j->template_id);
      for (std::size_t o = 0; o < j->processing_times.size() && o < t->operations.size(); ++o) {
        double p = j->processing_times[o];
        group_work[t->operations[o].group] += p;
        durations.push_back(p);
        job_work[j->id] += p;
      }
    }
  } else {
    for (const auto& rec : trajectory->records) {
      group_work[rec.group] += rec.workload;
      durations.push_back(rec.workload);
      job_work[rec.job] += rec.workload;
    }
  }

  double total_work = 0.0;
  for (const auto& [g, w] : group_work) total_work += w;
  out.total_workload = total_work;
  out.rho_global = out.total_capacity > 0.0 ? total_work / out.total_capacity : 0.0;

  std::vector<double> group_rho;
  for (const auto& g : plant.groups) {
    double cap = horizon * group_speed[g.id];
    double rho = cap > 0.0 ? group_work[g.id] / cap : 0.0;
    out.rho_groups[g.id] = rho;
    group_rho.push_back(rho);
  }
  Moments gm = moments(group_rho);
  out.chi_load = gm.mean > 0.0 ? gm.stddev / gm.mean : 0.0;

  Moments pm = moments(durations);
  out.mean_processing = pm.mean;
  out.std_processing = pm.stddev;
  out.c_p2 = scv(pm);
  if (durations.size() < 2) out.scv_degenerate = true;

  // Due-date tightness against final dues.
  std::vector<double> tightness;
  for (const auto* j : jobs) {
    double w = job_work.count(j->id) ? job_work[j->id] : 0.0;
    if (w <= 0.0) continue;
    tightness.push_back((final_due[j->id] - j->arrival) / w);
  }
  out.tau = tightness.empty() ? 0.0 : moments(tightness).mean;

  // Bottleneck windows.
  double sq = 0.0;
  for (const auto& bn : stream.config.targets.bottlenecks) {
    WindowObserved w;
    w.group = bn.group;
    w.start = bn.start;
    w.end = bn.end;
    w.rho_target = bn.rho;

    const GroupSpec* group = plant.find_group(bn.group);
    double h_b = bn.end - bn.start;
    double cap = 0.0;
    for (int m : group->machines) {
      double down = 0.0;
      auto it = downtime.find(m);
      if (it != downtime.end()) down = overlap_length(it->second, bn.start, bn.end);
      cap += plant.find_machine(m)->speed * (h_b - down);
    }
    w.effective_capacity = cap;

    double work = 0.0;
    if (!trajectory) {
      for (const auto* j : jobs) {
        if (j->arrival < bn.start || j->arrival > bn.end) continue;
        const ProcessTemplate* t = plant.find_template(j->template_id);
        for (std::size_t o = 0; o < j->processing_times.size() && o < t->operations.size(); ++o)
          if (t->operations[o].group == bn.group) work += j->processing_times[o];
      }
    } else {
      for (const auto& rec : trajectory->records) {
        if (rec.group != bn.group) continue;
        double span = rec.end - rec.start;
        if (span <= 0.0) continue;
        double ov = std::max(0.0, std::min(rec.end, bn.end) - std::max(rec.start, bn.start));
        work += rec.workload * (ov / span);
      }
    }
    w.workload = work;
    w.rho_observed = cap > 1e-12 ? work / cap : 0.0;
    out.windows.push_back(w);
    sq += (w.rho_observed - w.rho_target) * (w.rho_observed - w.rho_target);
  }
  out.eps_bn = out.windows.empty() ? 0.0 : std::sqrt(sq / out.windows.size());

  return out;
}

json metrics_to_json(const ObservedMetrics& m) {
  json groups = json::object();
  for (const auto& [g, rho] : m.rho_groups) groups[g] = rho;
  json windows = json::array();
  for (const auto& w : m.windows)
    windows.push_back({{"group", w.group},
                       {"start", w.start},
                       {"end", w.end},
                       {"rho_target", w.rho_target},
                       {"rho_observed", w.rho_observed},
                       {"effective_capacity", w.effective_capacity},
                       {"workload", w.workload}});
  return json{{"schema_version", kSchemaVersion},
              {"rho_global", m.rho_global},
              {"c_a2", m.c_a2},
              {"c_p2", m.c_p2},
              {"tau", m.tau},
              {"chi_load", m.chi_load},
              {"delta", m.delta},
              {"eps_bn", m.eps_bn},
              {"rho_groups", groups},
              {"windows", windows},
              {"n_jobs", m.n_jobs},
              {"n_machines", m.n_machines},
              {"mean_route_length", m.mean_route_length},
              {"mean_interarrival", m.mean_interarrival},
              {"std_interarrival", m.std_interarrival},
              {"mean_processing", m.mean_processing},
              {"std_processing", m.std_processing},
              {"total_workload", m.total_workload},
              {"total_capacity", m.total_capacity},
              {"attribution", m.attribution},
              {"scv_degenerate", m.scv_degenerate}};
}

ObservedMetrics metrics_from_json(const json& j) {
  ObservedMetrics m;
  m.rho_global = j.at("rho_global").get<double>();
  m.c_a2 = j.at("c_a2").get<double>();
  m.c_p2 = j.at("c_p2").get<double>();
  m.tau = j.at("tau").get<double>();
  m.chi_load = j.at("chi_load").get<double>();
  m.delta = j.at("delta").get<double>();
  m.eps_bn = j.at("eps_bn").get<double>();
  if (j.contains("rho_groups"))
    for (auto it = j["rho_groups"].begin(); it != j["rho_groups"].end(); ++it)
      m.rho_groups[it.key()] = it.value().get<double>();
  if (j.contains("windows"))
    for (const auto& w : j["windows"]) {
      WindowObserved wo;
      wo.group = w.at("group").get<std::string>();
      wo.start = w.at("start").get<double>();
      wo.end = w.at("end").get<double>();
      wo.rho_target = w.at("rho_target").get<double>();
      wo.rho_observed = w.at("rho_observed").get<double>();
      wo.effective_capacity = w.at("effective_capacity").get<double>();
      wo.workload = w.at("workload").get<double>();
      m.windows.push_back(wo);
    }
  m.n_jobs = j.at("n_jobs").get<int>();
  m.n_machines = j.at("n_machines").get<int>();
  m.mean_route_length = j.at("mean_route_length").get<double>();
  m.mean_interarrival = j.at("mean_interarrival").get<double>();
  m.std_interarrival = j.at("std_interarrival").get<double>();
  m.mean_processing = j.at("mean_processing").get<double>();
  m.std_processing = j.at("std_processing").get<double>();
  m.total_workload = j.at("total_workload").get<double>();
  m.total_capacity = j.at("total_capacity").get<double>();
  m.attribution = j.at("attribution").get<std::string>();
  m.scv_degenerate = j.at("scv_degenerate").get<bool>();
  return m;
}

}  // namespace dynshop
