#include "dynshop/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dynshop/parallel.hpp"
#include "dynshop/stats.hpp"

namespace dynshop {

namespace {

constexpr double kTimeTol = 1e-6;  // absolute, simulation time units
constexpr double kRelTol = 1e-9;

bool close_rel(double a, double b) {
  return std::abs(a - b) <= kRelTol * std::max({1.0, std::abs(a), std::abs(b)});
}

std::string job_path(std::int64_t job, int op = -1) {
  std::ostringstream os;
  os << "job/" << job;
  if (op >= 0) os << "/op/" << op;
  return os.str();
}

// True when t lies strictly inside one of the merged intervals.
bool inside_downtime(const std::vector<Interval>& merged, double t) {
  for (const auto& iv : merged) {
    if (iv.start + kTimeTol < t && t < iv.end - kTimeTol) return true;
    if (iv.start > t) break;
  }
  return false;
}

}  // namespace

std::string VerificationReport::summary() const {
  if (violations.empty()) return "ok";
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (std::size_t i = 0; i < violations.size() && i < 5; ++i) {
    os << "\n  " << violations[i].path << ": " << violations[i].message;
  }
  if (violations.size() > 5) os << "\n  ...";
  return os.str();
}

VerificationReport verify(const Trajectory& traj, const EventStream& stream) {
  VerificationReport report;
  auto fail = [&](const std::string& path, const std::string& msg) {
    report.violations.push_back({path, msg});
  };

  const PlantSpec& plant = stream.config.plant;
  std::map<std::int64_t, const JobSpec*> payload;
  for (const auto& ev : stream.events) {
    if (ev.kind == EventKind::JobArrival && ev.job) payload[ev.job->id] = &*ev.job;
  }

  // Applied scenario events, as logged by the kernel.
  std::map<std::int64_t, double> cancel_time;
  std::set<std::int64_t> route_mutated;
  for (const auto& ae : traj.applied_events) {
    if (!ae.applied) continue;
    if (ae.kind == "cancellation") {
      auto it = cancel_time.find(ae.job_id);
      if (it == cancel_time.end() || ae.time < it->second) cancel_time[ae.job_id] = ae.time;
    } else if (ae.kind == "rework" || ae.kind == "route_change") {
      route_mutated.insert(ae.job_id);
    }
  }

  std::map<std::int64_t, std::vector<const TrajectoryRecord*>> by_job;
  std::map<int, std::vector<const TrajectoryRecord*>> by_machine;
  for (const auto& r : traj.records) {
    by_job[r.job].push_back(&r);
    by_machine[r.machine].push_back(&r);
    if (r.end < r.start - kTimeTol) {
      fail(job_path(r.job, r.op_index), "operation ends before it starts");
    }
    if (r.workload < 0.0) fail(job_path(r.job, r.op_index), "negative workload");
  }

  auto downtime = downtime_by_machine(stream);

  // Per-job precedence, payload conformance and cancellation cutoff.
  for (auto& [job, recs] : by_job) {
    std::sort(recs.begin(), recs.end(), [](const TrajectoryRecord* a, const TrajectoryRecord* b) {
      return a->start < b->start || (a->start == b->start && a->op_index < b->op_index);
    });
    auto pit = payload.find(job);
    if (pit == payload.end()) {
      fail(job_path(job), "record references a job with no arrival in the stream");
      continue;
    }
    const JobSpec& spec = *pit->second;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const auto& r = *recs[i];
      if (r.op_index != static_cast<int>(i)) {
        fail(job_path(job, r.op_index),
             "route positions are not executed consecutively from 0");
        break;
      }
      if (i > 0 && r.start < recs[i - 1]->end - kTimeTol) {
        fail(job_path(job, r.op_index), "operation starts before its predecessor finished");
      }
    }
    if (!recs.empty() && recs.front()->start < spec.arrival - kTimeTol) {
      fail(job_path(job, recs.front()->op_index), "operation starts before the job arrived");
    }

    auto cit = cancel_time.find(job);
    if (cit != cancel_time.end()) {
      for (const auto* r : recs) {
        if (r->start > cit->second + kTimeTol) {
          fail(job_path(job, r->op_index), "operation starts after the job was cancelled");
        }
      }
    }

    // Untouched routes must match the arrival payload exactly.
    if (cit == cancel_time.end() && route_mutated.count(job) == 0) {
      if (recs.size() != spec.processing_times.size()) {
        std::ostringstream os;
        os << "executed " << recs.size() << " operations, route has "
           << spec.processing_times.size();
        fail(job_path(job), os.str());
      }
      const ProcessTemplate* tmpl = plant.find_template(spec.template_id);
      for (const auto* r : recs) {
        auto o = static_cast<std::size_t>(r->op_index);
        if (o < spec.processing_times.size() && !close_rel(r->workload, spec.processing_times[o])) {
          fail(job_path(job, r->op_index), "workload disagrees with the arrival payload");
        }
        if (tmpl != nullptr && o < tmpl->operations.size() &&
            r->group != tmpl->operations[o].group) {
          fail(job_path(job, r->op_index), "operation ran on the wrong machine group");
        }
      }
    }
  }

  // Per-machine exclusivity plus downtime/duration accounting.
  for (auto& [machine, recs] : by_machine) {
    const MachineSpec* m = plant.find_machine(machine);
    std::ostringstream mp;
    mp << "machine/" << machine;
    if (m == nullptr) {
      fail(mp.str(), "record references a machine not in the plant");
      continue;
    }
    std::sort(recs.begin(), recs.end(),
              [](const TrajectoryRecord* a, const TrajectoryRecord* b) {
                return a->start < b->start;
              });
    for (std::size_t i = 1; i < recs.size(); ++i) {
      if (recs[i]->start < recs[i - 1]->end - kTimeTol) {
        std::ostringstream os;
        os << "operations overlap: " << job_path(recs[i - 1]->job, recs[i - 1]->op_index)
           << " and " << job_path(recs[i]->job, recs[i]->op_index);
        fail(mp.str(), os.str());
      }
    }
    const auto& down = downtime[machine];
    for (const auto* r : recs) {
      double expected_busy = r->workload / m->speed;
      if (!close_rel(r->busy, expected_busy)) {
        fail(job_path(r->job, r->op_index), "busy time disagrees with workload over speed");
      }
      if (inside_downtime(down, r->start)) {
        fail(job_path(r->job, r->op_index), "operation starts during machine downtime");
      }
      if (inside_downtime(down, r->end)) {
        fail(job_path(r->job, r->op_index), "operation completes during machine downtime");
      }
      double gap = overlap_length(down, r->start, r->end);
      double span = r->end - r->start;
      if (std::abs(span - (r->busy + gap)) > kTimeTol) {
        fail(job_path(r->job, r->op_index),
             "span disagrees with processing time plus downtime gaps");
      }
    }
  }

  return report;
}

Kpis kpis(const Trajectory& traj, const EventStream& stream) {
  Kpis out;

  std::map<std::int64_t, const JobSpec*> payload;
  for (const auto& ev : stream.events) {
    if (ev.kind == EventKind::JobArrival && ev.job) payload[ev.job->id] = &*ev.job;
  }
  std::map<std::int64_t, double> final_due;
  for (const auto& [id, spec] : payload) final_due[id] = spec->due;

  std::set<std::int64_t> cancelled;
  std::set<std::int64_t> route_mutated;
  for (const auto& ae : traj.applied_events) {
    if (!ae.applied) continue;
    if (ae.kind == "cancellation") cancelled.insert(ae.job_id);
    if (ae.kind == "rework" || ae.kind == "route_change") route_mutated.insert(ae.job_id);
  }
  // Due-date revisions land in the tardiness reference, cancelled or not.
  for (const auto& ev : stream.events) {
    if (ev.kind != EventKind::DueDateChange) continue;
    bool applied = false;
    for (const auto& ae : traj.applied_events) {
      if (ae.event_id == ev.id && ae.applied) { applied = true; break; }
    }
    if (applied) final_due[ev.job_id] = ev.new_due;
  }

  std::map<std::int64_t, std::pair<std::size_t, double>> executed;  // count, last end
  for (const auto& r : traj.records) {
    auto& e = executed[r.job];
    e.first += 1;
    e.second = std::max(e.second, r.end);
    out.makespan = std::max(out.makespan, r.end);
  }

  double tardiness_sum = 0.0;
  for (const auto& [id, spec] : payload) {
    if (cancelled.count(id) != 0) {
      ++out.n_cancelled;
      continue;
    }
    ++out.n_jobs;
    auto it = executed.find(id);
    bool has_records = it != executed.end() && it->second.first > 0;
    bool full = has_records && (route_mutated.count(id) != 0 ||
                                it->second.first == spec->processing_times.size());
    if (!full) {
      out.complete = false;
      continue;
    }
    ++out.n_completed;
    tardiness_sum += std::max(0.0, it->second.second - final_due[id]);
  }
  if (out.n_completed > 0) out.mean_tardiness = tardiness_sum / out.n_completed;
  return out;
}

ExperimentMatrix run_matrix(const std::vector<std::pair<std::string, EventStream>>& instances,
                            const std::vector<std::string>& agents,
                            const std::vector<std::uint64_t>& seeds, int threads,
                            ObsLevel level, const AgentOptions& opts) {
  ExperimentMatrix matrix;
  if (instances.empty() || agents.empty() || seeds.empty()) return matrix;

  struct CellPlan {
    std::size_t instance = 0;
    std::size_t agent = 0;
    std::size_t seed = 0;
  };
  std::vector<CellPlan> plan;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t a = 0; a < agents.size(); ++a) {
      for (std::size_t s = 0; s < seeds.size(); ++s) plan.push_back({i, a, s});
    }
  }
  matrix.cells.resize(plan.size());

  parallel_for(plan.size(), threads, [&](std::size_t idx) {
    const CellPlan& p = plan[idx];
    MatrixCell& cell = matrix.cells[idx];
    cell.instance = instances[p.instance].first;
    cell.agent = agents[p.agent];
    cell.seed = seeds[p.seed];

    std::string spec = cell.agent;
    // Stochastic agents draw from the cell seed; rules ignore it.
    if (spec == "random") {
      spec += ":seed=" + std::to_string(
          derive_tagged_seed(cell.seed, cell.instance + "/" + cell.agent));
    }
    auto t0 = std::chrono::steady_clock::now();
    try {
      AgentFn agent = make_agent(spec, opts);
      Trajectory traj = run_episode(instances[p.instance].second, agent, level, cell.agent);
      VerificationReport rep = verify(traj, instances[p.instance].second);
      Kpis k = kpis(traj, instances[p.instance].second);
      cell.makespan = k.makespan;
      cell.mean_tardiness = k.mean_tardiness;
      cell.violations = static_cast<int>(rep.violations.size());
      cell.verified = rep.ok() && k.complete;
      if (!rep.ok()) cell.fault = rep.summary();
      else if (!k.complete) cell.fault = "trajectory incomplete";
    } catch (const std::exception& e) {
      cell.verified = false;
      cell.violations = -1;
      cell.fault = e.what();
    }
    cell.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  for (const auto& cell : matrix.cells) {
    if (!cell.verified) continue;
    auto it = matrix.best_makespan.find(cell.instance);
    if (it == matrix.best_makespan.end() || cell.makespan < it->second) {
      matrix.best_makespan[cell.instance] = cell.makespan;
    }
  }
  for (auto& cell : matrix.cells) {
    auto it = matrix.best_makespan.find(cell.instance);
    if (cell.verified && it != matrix.best_makespan.end() && it->second > 0.0) {
      cell.gap_percent = (cell.makespan - it->second) / it->second * 100.0;
    }
  }
  return matrix;
}

json matrix_to_json(const ExperimentMatrix& matrix) {
  json cells = json::array();
  for (const auto& c : matrix.cells) {
    json j;
    j["instance"] = c.instance;
    j["agent"] = c.agent;
    j["seed"] = c.seed;
    j["makespan"] = c.makespan;
    j["mean_tardiness"] = c.mean_tardiness;
    j["verified"] = c.verified;
    j["violations"] = c.violations;
    j["gap_percent"] = c.gap_percent;
    if (!c.fault.empty()) j["fault"] = c.fault;
    cells.push_back(std::move(j));
  }
  json best = json::object();
  for (const auto& [name, value] : matrix.best_makespan) best[name] = value;
  json out;
  out["schema_version"] = kSchemaVersion;
  out["cells"] = std::move(cells);
  out["best_makespan"] = std::move(best);
  return out;
}

namespace {

// Column-standardized copy; constant columns keep unit scale.
std::vector<std::vector<double>> zscore(const std::vector<std::vector<double>>& features) {
  std::size_t n = features.size();
  std::size_t d = features.empty() ? 0 : features.front().size();
  std::vector<std::vector<double>> z(n, std::vector<double>(d, 0.0));
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (const auto& row : features) mean += row[c];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const auto& row : features) var += (row[c] - mean) * (row[c] - mean);
    var /= static_cast<double>(n);
    double sigma = var > 0.0 ? std::sqrt(var) : 1.0;
    for (std::size_t r = 0; r < n; ++r) z[r][c] = (features[r][c] - mean) / sigma;
  }
  return z;
}

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

std::vector<std::size_t> kcenter_subset(const std::vector<std::vector<double>>& features,
                                        std::size_t k) {
  std::size_t n = features.size();
  if (k == 0) return {};
  if (k > n) throw std::invalid_argument("kcenter_subset: k exceeds the candidate count");
  std::size_t d = features.front().size();
  for (const auto& row : features) {
    if (row.size() != d) throw std::invalid_argument("kcenter_subset: ragged feature matrix");
  }
  if (d == 0) throw std::invalid_argument("kcenter_subset: empty feature rows");

  auto z = zscore(features);

  // Hardest candidate first: the difficulty score is the last column.
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i) {
    if (z[i][d - 1] > z[first][d - 1]) first = i;
  }
  std::vector<std::size_t> picked{first};
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) min_d2[i] = sq_dist(z[i], z[first]);

  while (picked.size() < k) {
    std::size_t next = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (min_d2[i] > best) {
        best = min_d2[i];
        next = i;
      }
    }
    picked.push_back(next);
    for (std::size_t i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], sq_dist(z[i], z[next]));
  }
  return picked;
}

double kcenter_radius(const std::vector<std::vector<double>>& features,
                      const std::vector<std::size_t>& centers) {
  if (centers.empty()) throw std::invalid_argument("kcenter_radius: no centers");
  auto z = zscore(features);
  double radius = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : centers) best = std::min(best, sq_dist(z[i], z[c]));
    radius = std::max(radius, best);
  }
  return std::sqrt(radius);
}

SpearmanResult spearman_permutation(const std::vector<double>& x,
                                    const std::vector<double>& y, int permutations,
                                    std::uint64_t seed) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman_permutation: need matched samples of size >= 2");
  }
  if (permutations < 1) throw std::invalid_argument("spearman_permutation: permutations < 1");
  SpearmanResult out;
  out.rho = spearman_rho(x, y);

  std::mt19937_64 rng(seed);
  std::vector<double> shuffled = y;
  int hits = 0;
  double threshold = std::abs(out.rho) - 1e-12;
  for (int b = 0; b < permutations; ++b) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (std::abs(spearman_rho(x, shuffled)) >= threshold) ++hits;
  }
  out.p_value = (1.0 + hits) / (permutations + 1.0);
  return out;
}

BootstrapResult bootstrap_mean_diff(const std::vector<double>& a,
                                    const std::vector<double>& b, int resamples,
                                    std::uint64_t seed) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("bootstrap_mean_diff: empty sample");
  }
  if (resamples < 1) throw std::invalid_argument("bootstrap_mean_diff: resamples < 1");

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  BootstrapResult out;
  out.diff = mean(a) - mean(b);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pa(0, a.size() - 1);
  std::uniform_int_distribution<std::size_t> pb(0, b.size() - 1);
  std::vector<double> diffs(static_cast<std::size_t>(resamples));
  for (auto& dv : diffs) {
    double sa = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sa += a[pa(rng)];
    double sb = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) sb += b[pb(rng)];
    dv = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  }
  std::sort(diffs.begin(), diffs.end());
  auto pick = [&](double q) {
    auto idx = static_cast<std::size_t>(
        std::llround(q * static_cast<double>(diffs.size() - 1)));
    return diffs[std::min(idx, diffs.size() - 1)];
  };
  out.lo = pick(0.025);
  out.hi = pick(0.975);
  return out;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() && j < b.size()) {
    double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    double fa = static_cast<double>(i) / static_cast<double>(a.size());
    double fb = static_cast<double>(j) / static_cast<double>(b.size());
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

}  // namespace dynshop
