#include "dynshop/pcal.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "dynshop/generator.hpp"
#include "dynshop/metrics.hpp"
#include "dynshop/parallel.hpp"

namespace dynshop {

std::string to_string(MooMode mode) {
  return mode == MooMode::Extended12D ? "moo-12d" : "hybrid-5d";
}

MooMode moo_mode_from_string(const std::string& name) {
  if (name == "moo" || name == "moo-12d") return MooMode::Extended12D;
  if (name == "hybrid" || name == "hybrid-5d") return MooMode::Hybrid5D;
  throw std::invalid_argument("unknown MOO mode: " + name);
}

MooConfig::MooConfig() : thetas(strict_thresholds(CalibratorConfig{})) {}

int MooConfig::dims() const { return mode == MooMode::Extended12D ? 12 : 5; }

int MooConfig::effective_population() const {
  if (population > 0) return population + (population % 2);
  return mode == MooMode::Extended12D ? 60 : 100;
}

double MooConfig::effective_mutation_prob() const {
  return mutation_prob > 0.0 ? mutation_prob : 1.0 / dims();
}

std::vector<Bounds> MooConfig::bounds() const {
  const Bounds scale{0.25, 4.0};
  const Bounds bias{-1.0, 1.0};
  const Bounds level{0.0, 2.0};
  if (mode == MooMode::Extended12D)
    return {scale, scale, scale, scale, bias, bias,
            scale, scale, level, level, scale, level};
  return {scale, scale, scale, level, scale};
}

std::vector<double> MooConfig::identity_vector() const {
  if (mode == MooMode::Extended12D)
    return {1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1};
  return {1, 1, 1, 1, 1};
}

namespace {

double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

void apply_mix_exponent(InputConfig& cfg, double alpha) {
  double total = 0.0;
  for (double& w : cfg.plant.job_mix) {
    w = std::pow(std::max(w, 0.0), alpha);
    total += w;
  }
  if (total <= 0.0) return;
  for (double& w : cfg.plant.job_mix) w /= total;
}

}  // namespace

InputConfig decode(const std::vector<double>& x, MooMode mode, const InputConfig& base) {
  MooConfig probe;
  probe.mode = mode;
  auto bounds = probe.bounds();
  if (x.size() != bounds.size())
    throw std::invalid_argument("decision vector has wrong dimension");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < bounds[i].lo - 1e-12 || x[i] > bounds[i].hi + 1e-12)
      throw std::invalid_argument("decision component " + std::to_string(i) +
                                  " out of bounds");

  InputConfig cfg = base;
  if (mode == MooMode::Extended12D) {
    cfg.distributions.rate_scale = base.distributions.rate_scale * x[0];
    cfg.targets.c_a2 = std::min(base.targets.c_a2 * x[1], 5.0);
    cfg.targets.c_p2 = std::min(base.targets.c_p2 * x[2], 5.0);
    cfg.targets.tau = clip(base.targets.tau * x[3], 0.5, 10.0);
    cfg.distributions.arrival_shape_log2_bias =
        clip(base.distributions.arrival_shape_log2_bias + x[4], -1.0, 1.0);
    cfg.distributions.processing_shape_log2_bias =
        clip(base.distributions.processing_shape_log2_bias + x[5], -1.0, 1.0);
    cfg.targets.delta = clip(base.targets.delta * x[6], 0.0, 0.8);
    // x[7] reserved: routing balance has no defined transformation.
    cfg.distributions.batch.mean = base.distributions.batch.mean * x[8];
    cfg.dynamics.warm_start_jobs =
        static_cast<int>(std::llround(base.dynamics.warm_start_jobs * x[9]));
    apply_mix_exponent(cfg, x[10]);
    for (auto& b : cfg.targets.bottlenecks) b.rho = clip(b.rho * x[11], 0.05, 0.99);
  } else {
    cfg.targets.c_a2 = std::min(base.targets.c_a2 * x[0], 5.0);
    cfg.targets.c_p2 = std::min(base.targets.c_p2 * x[1], 5.0);
    cfg.targets.tau = clip(base.targets.tau * x[2], 0.5, 10.0);
    for (auto& b : cfg.targets.bottlenecks) b.rho = clip(b.rho * x[3], 0.05, 0.99);
    apply_mix_exponent(cfg, x[4]);
  }
  return cfg;
}

ErrorVector evaluate_objectives(const std::vector<double>& x, MooMode mode,
                                const InputConfig& base, std::uint64_t seed,
                                double penalty) {
  try {
    InputConfig cfg = decode(x, mode, base);
    cfg.master_seed = seed;
    EventStream stream = generate_instance(cfg);
    ObservedMetrics m = observed_metrics(stream);
    return error_vector(m, base.targets, 1e-6);
  } catch (const std::exception&) {
    ErrorVector e;
    e.fill(penalty);
    return e;
  }
}

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

std::vector<std::vector<std::size_t>> nondominated_sort(
    const std::vector<std::vector<double>>& objectives) {
  std::size_t n = objectives.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<int> counts(n, 0);
  std::vector<std::vector<std::size_t>> fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (p == q) continue;
      if (dominates(objectives[p], objectives[q]))
        dominated[p].push_back(q);
      else if (dominates(objectives[q], objectives[p]))
        ++counts[p];
    }
    if (counts[p] == 0) fronts[0].push_back(p);
  }
  std::size_t i = 0;
  while (i < fronts.size() && !fronts[i].empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : fronts[i])
      for (std::size_t q : dominated[p])
        if (--counts[q] == 0) next.push_back(q);
    if (!next.empty()) fronts.push_back(std::move(next));
    ++i;
  }
  return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::vector<double>>& objectives,
                                      const std::vector<std::size_t>& front) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(front.size(), 0.0);
  if (front.empty()) return dist;
  if (front.size() <= 2) {
    std::fill(dist.begin(), dist.end(), inf);
    return dist;
  }
  std::size_t k = objectives[front[0]].size();
  std::vector<std::size_t> order(front.size());
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      double fa = objectives[front[a]][m], fb = objectives[front[b]][m];
      if (fa != fb) return fa < fb;
      return front[a] < front[b];
    });
    double lo = objectives[front[order.front()]][m];
    double hi = objectives[front[order.back()]][m];
    dist[order.front()] = inf;
    dist[order.back()] = inf;
    if (hi - lo <= 0.0) continue;
    for (std::size_t i = 1; i + 1 < order.size(); ++i) {
      double prev = objectives[front[order[i - 1]]][m];
      double next = objectives[front[order[i + 1]]][m];
      dist[order[i]] += (next - prev) / (hi - lo);
    }
  }
  return dist;
}

namespace {

struct Ranked {
  int rank = 0;
  double crowding = 0.0;
};

std::vector<Ranked> rank_population(const std::vector<std::vector<double>>& objectives) {
  std::vector<Ranked> out(objectives.size());
  auto fronts = nondominated_sort(objectives);
  for (std::size_t f = 0; f < fronts.size(); ++f) {
    auto dist = crowding_distance(objectives, fronts[f]);
    for (std::size_t i = 0; i < fronts[f].size(); ++i) {
      out[fronts[f][i]].rank = static_cast<int>(f);
      out[fronts[f][i]].crowding = dist[i];
    }
  }
  return out;
}

std::size_t tournament(const std::vector<Ranked>& ranked, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, ranked.size() - 1);
  std::size_t a = pick(rng), b = pick(rng);
  if (ranked[a].rank != ranked[b].rank) return ranked[a].rank < ranked[b].rank ? a : b;
  if (ranked[a].crowding != ranked[b].crowding)
    return ranked[a].crowding > ranked[b].crowding ? a : b;
  return std::min(a, b);
}

void sbx_crossover(std::vector<double>& c1, std::vector<double>& c2,
                   const std::vector<Bounds>& bounds, double eta_c, double prob,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (unit(rng) > prob) return;
  for (std::size_t i = 0; i < c1.size(); ++i) {
    if (unit(rng) > 0.5) continue;
    double p1 = c1[i], p2 = c2[i];
    double u = unit(rng);
    double beta = u <= 0.5 ? std::pow(2.0 * u, 1.0 / (eta_c + 1.0))
                           : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta_c + 1.0));
    double v1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2);
    double v2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2);
    c1[i] = clip(v1, bounds[i].lo, bounds[i].hi);
    c2[i] = clip(v2, bounds[i].lo, bounds[i].hi);
  }
}

void polynomial_mutation(std::vector<double>& x, const std::vector<Bounds>& bounds,
                         double eta_m, double prob, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (unit(rng) > prob) continue;
    double lo = bounds[i].lo, hi = bounds[i].hi;
    double span = hi - lo;
    if (span <= 0.0) continue;
    double d1 = (x[i] - lo) / span, d2 = (hi - x[i]) / span;
    double u = unit(rng);
    double dq;
    if (u < 0.5) {
      double val = 2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta_m + 1.0);
      dq = std::pow(val, 1.0 / (eta_m + 1.0)) - 1.0;
    } else {
      double val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta_m + 1.0);
      dq = 1.0 - std::pow(val, 1.0 / (eta_m + 1.0));
    }
    x[i] = clip(x[i] + dq * span, lo, hi);
  }
}

}  // namespace

Nsga2Result nsga2(const Nsga2Problem& problem, int population, int generations,
                  double eta_c, double eta_m, double crossover_prob, double mutation_prob,
                  std::uint64_t seed) {
  if (population < 4 || population % 2 != 0)
    throw std::invalid_argument("population must be even and >= 4");
  if (problem.bounds.size() != problem.dims)
    throw std::invalid_argument("bounds size must match dims");

  auto rng = derive_stream(seed, RngStream::Moo);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> xs(population, std::vector<double>(problem.dims));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i < problem.seeds.size()) {
      xs[i] = problem.seeds[i];
      for (std::size_t d = 0; d < problem.dims; ++d)
        xs[i][d] = clip(xs[i][d], problem.bounds[d].lo, problem.bounds[d].hi);
      continue;
    }
    for (std::size_t d = 0; d < problem.dims; ++d) {
      double span = problem.bounds[d].hi - problem.bounds[d].lo;
      xs[i][d] = problem.bounds[d].lo + unit(rng) * span;
    }
  }

  auto evaluate_all = [&](const std::vector<std::vector<double>>& pop, int gen) {
    std::vector<std::vector<double>> objs(pop.size());
    parallel_for(pop.size(), problem.threads, [&](std::size_t i) {
      objs[i] = problem.evaluate(pop[i], gen, static_cast<int>(i));
    });
    return objs;
  };

  std::vector<std::vector<double>> objs = evaluate_all(xs, 0);

  for (int gen = 1; gen <= generations; ++gen) {
    auto ranked = rank_population(objs);

    std::vector<std::vector<double>> children;
    children.reserve(population);
    while (static_cast<int>(children.size()) < population) {
      std::size_t pa = tournament(ranked, rng);
      std::size_t pb = tournament(ranked, rng);
      std::vector<double> c1 = xs[pa], c2 = xs[pb];
      sbx_crossover(c1, c2, problem.bounds, eta_c, crossover_prob, rng);
      polynomial_mutation(c1, problem.bounds, eta_m, mutation_prob, rng);
      polynomial_mutation(c2, problem.bounds, eta_m, mutation_prob, rng);
      children.push_back(std::move(c1));
      if (static_cast<int>(children.size()) < population) children.push_back(std::move(c2));
    }
    auto child_objs = evaluate_all(children, gen);

    std::vector<std::vector<double>> pool_x = xs;
    std::vector<std::vector<double>> pool_f = objs;
    pool_x.insert(pool_x.end(), children.begin(), children.end());
    pool_f.insert(pool_f.end(), child_objs.begin(), child_objs.end());

    auto fronts = nondominated_sort(pool_f);
    std::vector<std::vector<double>> next_x, next_f;
    next_x.reserve(population);
    next_f.reserve(population);
    for (const auto& front : fronts) {
      if (static_cast<int>(next_x.size()) >= population) break;
      if (static_cast<int>(next_x.size() + front.size()) <= population) {
        for (std::size_t idx : front) {
          next_x.push_back(pool_x[idx]);
          next_f.push_back(pool_f[idx]);
        }
        continue;
      }
      auto dist = crowding_distance(pool_f, front);
      std::vector<std::size_t> order(front.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (dist[a] != dist[b]) return dist[a] > dist[b];
        return front[a] < front[b];
      });
      for (std::size_t i : order) {
        if (static_cast<int>(next_x.size()) >= population) break;
        next_x.push_back(pool_x[front[i]]);
        next_f.push_back(pool_f[front[i]]);
      }
    }
    xs = std::move(next_x);
    objs = std::move(next_f);
  }

  Nsga2Result result;
  auto fronts = nondominated_sort(objs);
  if (!fronts.empty()) {
    for (std::size_t idx : fronts[0]) {
      result.xs.push_back(xs[idx]);
      result.objectives.push_back(objs[idx]);
    }
  }
  return result;
}

std::size_t select_solution(const std::vector<std::vector<double>>& objectives,
                            const ErrorVector& thetas) {
  if (objectives.empty()) throw std::invalid_argument("empty archive");
  std::size_t best = 0;
  int best_sat = -1;
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < objectives.size(); ++i) {
    int sat = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < objectives[i].size(); ++k) {
      double theta = k < thetas.size() ? thetas[k] : thetas.back();
      if (objectives[i][k] <= theta) ++sat;
      sum += objectives[i][k];
    }
    if (sat > best_sat || (sat == best_sat && sum < best_sum)) {
      best = i;
      best_sat = sat;
      best_sum = sum;
    }
  }
  return best;
}

ParetoArchive moo_search(const InputConfig& base, const MooConfig& cfg, std::uint64_t seed) {
  Nsga2Problem problem;
  problem.dims = static_cast<std::size_t>(cfg.dims());
  problem.bounds = cfg.bounds();
  problem.threads = cfg.threads;
  problem.seeds = {cfg.identity_vector()};
  problem.evaluate = [&](const std::vector<double>& x, int gen, int idx) {
    std::string tag = "moo/g" + std::to_string(gen) + "/i" + std::to_string(idx);
    std::uint64_t candidate_seed = derive_tagged_seed(seed, tag);
    ErrorVector e = evaluate_objectives(x, cfg.mode, base, candidate_seed, cfg.penalty);
    return std::vector<double>(e.begin(), e.end());
  };

  Nsga2Result r = nsga2(problem, cfg.effective_population(), cfg.generations, cfg.eta_c,
                        cfg.eta_m, cfg.crossover_prob, cfg.effective_mutation_prob(), seed);

  ParetoArchive archive;
  archive.xs = std::move(r.xs);
  for (const auto& f : r.objectives) {
    ErrorVector e{};
    for (std::size_t k = 0; k < e.size() && k < f.size(); ++k) e[k] = f[k];
    archive.objectives.push_back(e);
  }
  archive.selected = select_solution(r.objectives, cfg.thetas);
  return archive;
}

std::pair<EventStream, CalibrationReport> calibrate_moo(const EventStream& stream,
                                                        const TargetMetrics& targets,
                                                        const MooConfig& moo_cfg,
                                                        const CalibratorConfig& cal_cfg,
                                                        std::uint64_t seed) {
  auto t0 = std::chrono::steady_clock::now();
  InputConfig base = stream.config;
  base.targets = targets;

  ObservedMetrics m0 = observed_metrics(stream);
  ErrorVector e0 = error_vector(m0, targets, cal_cfg.epsilon);

  ParetoArchive archive = moo_search(base, moo_cfg, seed);

  // The delivered instance is regenerated at a fresh seed so the reported
  // error reflects what a consumer of the configuration actually gets.
  InputConfig chosen = decode(archive.xs[archive.selected], moo_cfg.mode, base);
  chosen.master_seed = derive_stream_seed(seed, RngStream::Calibrator);
  EventStream delivered = generate_instance(chosen);

  ObservedMetrics m = observed_metrics(delivered);
  ErrorVector e = error_vector(m, targets, cal_cfg.epsilon);
  double l2 = l2_norm(e);

  CalibrationReport report;
  report.mode = to_string(moo_cfg.mode);
  report.iterations = moo_cfg.generations;
  report.initial_errors = e0;
  report.initial_l2 = l2_norm(e0);
  report.final_errors = e;
  report.final_l2 = l2;
  report.converged = max_abs(e) < cal_cfg.eps_tol && l2 <= cal_cfg.eps_tol;
  SuccessFlags flags = success_flags(e, l2, cal_cfg);
  report.relaxed = flags.relaxed;
  report.strict = flags.strict;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(delivered), std::move(report)};
}

json archive_to_json(const ParetoArchive& archive) {
  json members = json::array();
  for (std::size_t i = 0; i < archive.xs.size(); ++i)
    members.push_back({{"x", archive.xs[i]}, {"objectives", archive.objectives[i]}});
  return json{{"schema_version", kSchemaVersion},
              {"members", members},
              {"selected", archive.selected}};
}

}  // namespace dynshop
