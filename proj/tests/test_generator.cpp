#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "dynshop/generator.hpp"
#include "helpers.hpp"

using namespace dynshop;

namespace {

struct SampleMoments {
  double mean = 0.0;
  double scv = 0.0;
};

SampleMoments sample_moments(const std::vector<double>& xs) {
  SampleMoments m;
  for (double x : xs) m.mean += x;
  m.mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - m.mean) * (x - m.mean);
  var /= xs.size();
  m.scv = var / (m.mean * m.mean);
  return m;
}

// Composite Simpson over [0, t]; independent of the closed forms under test.
double simpson_integral(const Modulation& mod, double t, double horizon, int n = 2000) {
  double h = t / n;
  double acc = modulation_g(mod, 0.0, horizon) + modulation_g(mod, t, horizon);
  for (int i = 1; i < n; ++i)
    acc += modulation_g(mod, i * h, horizon) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// 10 equal machines, one 40-unit single-op route; MeanP = 40, sum v = 10.
InputConfig rate_fixture() {
  PlantSpec plant;
  for (int i = 0; i < 10; ++i) plant.machines.push_back({i, 1.0});
  GroupSpec g;
  g.id = "G";
  for (int i = 0; i < 10; ++i) g.machines.push_back(i);
  plant.groups = {g};
  ProcessTemplate t;
  t.id = "T";
  t.operations = {{"o0", "G", 40.0}};
  plant.templates = {t};
  plant.job_mix = {1.0};
  return test::config_for(plant, 1107.5);
}

}  // namespace

TEST_CASE("gamma draws match requested mean and scv") {
  std::mt19937_64 rng(7);
  std::vector<double> xs(100000);
  for (auto& x : xs) x = gamma_by_mean_scv(4.0, 0.5, rng);
  SampleMoments m = sample_moments(xs);
  CHECK(std::abs(m.mean - 4.0) / 4.0 < 0.02);
  CHECK(std::abs(m.scv - 0.5) / 0.5 < 0.05);

  // Near-zero scv degenerates to the mean.
  for (int i = 0; i < 100; ++i)
    CHECK(std::abs(gamma_by_mean_scv(4.0, 1e-9, rng) - 4.0) / 4.0 < 0.01);
}

TEST_CASE("interarrival gamma parameters from rate and scv") {
  GammaParams p = interarrival_params(2.0, 0.25);
  CHECK(p.shape == doctest::Approx(4.0));
  CHECK(p.scale == doctest::Approx(0.125));
  CHECK(interarrival_params(1.0, 1.0).shape == doctest::Approx(1.0));
}

TEST_CASE("plant moments: mean work and between-op scv") {
  PlantSpec plant = test::two_group_plant();
  CHECK(mean_work_per_job(plant) == doctest::Approx(6.0));
  // Op means (4, 2), equal mass: mean 3, variance 1, scv 1/9.
  CHECK(between_op_scv(plant) == doctest::Approx(1.0 / 9.0));

  // Second template, one 6-unit op, mix 50/50: pooled op mean 4,
  // variance 8/3, scv 1/6.
  ProcessTemplate t2;
  t2.id = "T2";
  t2.operations = {{"o0", "A", 6.0}};
  plant.templates.push_back(t2);
  plant.job_mix = {0.5, 0.5};
  CHECK(between_op_scv(plant) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("pooled scv decomposes into draw scv above the structural floor") {
  // pooled = draw + between + draw * between
  CHECK(pooled_scv_to_draw_scv(1.0, 1.0 / 9.0) == doctest::Approx(0.8));
  CHECK(pooled_scv_to_draw_scv(0.05, 1.0 / 9.0) == 0.0);
  CHECK(pooled_scv_to_draw_scv(0.5, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("base rate: utilization form, fixed-count form, rate scale") {
  InputConfig cfg = rate_fixture();
  cfg.targets.rho_global = 0.8;
  CHECK(compute_base_rate(cfg) == doctest::Approx(0.2));

  cfg.fixed_job_count = 200;
  CHECK(compute_base_rate(cfg) == doctest::Approx(200.0 / 1107.5));

  cfg.distributions.rate_scale = 2.0;
  CHECK(compute_base_rate(cfg) == doctest::Approx(400.0 / 1107.5));

  cfg.fixed_job_count.reset();
  cfg.targets.rho_global = 1e-12;
  CHECK(compute_base_rate(cfg) < 1e-9);
}

TEST_CASE("fixed-count arrivals: exact count, sorted, inside the horizon") {
  std::mt19937_64 rng(11);
  DistributionParams dist;
  auto ts = sample_arrivals(200.0 / 1107.5, 1.0, 1107.5, 200, dist, rng);
  CHECK(ts.size() == 200);
  CHECK(std::is_sorted(ts.begin(), ts.end()));
  CHECK(ts.front() >= 0.0);
  CHECK(ts.back() < 1107.5);
}

TEST_CASE("free arrivals match rate and scv under Monte Carlo") {
  std::mt19937_64 rng(13);
  DistributionParams dist;
  auto ts = sample_arrivals(1.0, 2.0, 100000.0, std::nullopt, dist, rng);
  REQUIRE(ts.size() > 50000);
  std::vector<double> gaps;
  for (std::size_t i = 1; i < ts.size(); ++i) gaps.push_back(ts[i] - ts[i - 1]);
  SampleMoments m = sample_moments(gaps);
  CHECK(std::abs(m.mean - 1.0) < 0.02);
  CHECK(std::abs(m.scv - 2.0) / 2.0 < 0.05);
}

TEST_CASE("modulation integrals agree with Simpson quadrature") {
  double H = 300.0;
  Modulation periodic{ModulationProfile::Periodic, 0.5, H / 3.0};
  Modulation linear{ModulationProfile::Linear, 0.7, 1.0};
  for (double t : {10.0, 77.7, 150.0, 299.0}) {
    CHECK(modulation_integral(periodic, t, H) ==
          doctest::Approx(simpson_integral(periodic, t, H)).epsilon(1e-8));
    CHECK(modulation_integral(linear, t, H) ==
          doctest::Approx(simpson_integral(linear, t, H)).epsilon(1e-8));
  }
}

TEST_CASE("time warp inverts the intensity integral") {
  double H = 300.0;
  SUBCASE("constant and zero-amplitude profiles are the identity") {
    Modulation c{ModulationProfile::Constant, 0.0, 1.0};
    Modulation l0{ModulationProfile::Linear, 0.0, 1.0};
    for (double t : {0.0, 5.0, 123.4, 300.0}) {
      CHECK(warp_time(c, t, H) == doctest::Approx(t));
      CHECK(warp_time(l0, t, H) == doctest::Approx(t));
    }
  }
  SUBCASE("periodic profile: Lambda(warp(x)) = x") {
    Modulation mod{ModulationProfile::Periodic, 0.5, H / 3.0};
    for (int i = 0; i < 200; ++i) {
      double raw = H * i / 200.0;
      double t = warp_time(mod, raw, H);
      CHECK(std::abs(modulation_integral(mod, t, H) - raw) < 1e-6);
    }
  }
  SUBCASE("warping preserves order") {
    Modulation mod{ModulationProfile::Linear, 1.0, 1.0};
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, H);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> raw(100);
      for (auto& x : raw) x = u(rng);
      std::sort(raw.begin(), raw.end());
      auto warped = warp_times(mod, raw, H);
      CHECK(std::is_sorted(warped.begin(), warped.end()));
    }
  }
}

TEST_CASE("due dates: linear rule with horizon truncation") {
  std::vector<JobSpec> jobs = {test::job(0, 10.0, {20.0}, 0.0, "T")};
  assign_due_dates(jobs, 5.0, 1000.0);
  CHECK(jobs[0].due == doctest::Approx(110.0));
  assign_due_dates(jobs, 5.0, 100.0);
  CHECK(jobs[0].due == doctest::Approx(100.0));
  assign_due_dates(jobs, 1e-12, 1000.0);
  CHECK(jobs[0].due == doctest::Approx(10.0));
}

TEST_CASE("disturbance plan tracks the requested capacity loss") {
  PlantSpec plant;
  plant.machines = {{0, 1.0}, {1, 2.0}};
  plant.groups = {{"G", {0, 1}}};
  ProcessTemplate t;
  t.id = "T";
  t.operations = {{"o0", "G", 5.0}};
  plant.templates = {t};
  plant.job_mix = {1.0};

  InputConfig cfg = test::config_for(plant, 100.0);
  cfg.targets.delta = 0.1;  // C_tot = 300, budget 30

  std::vector<JobSpec> jobs;
  for (int i = 0; i < 10; ++i) jobs.push_back(test::job(i, i * 9.0, {5.0}, 90.0));

  std::mt19937_64 rng(5);
  DisturbancePlan plan = plan_disturbances(cfg, jobs, rng);
  CHECK(plan.requested_capacity_loss == doctest::Approx(30.0));
  double weighted = 0.0;
  for (const auto& o : plan.outages)
    weighted += plant.find_machine(o.machine)->speed * o.duration;
  CHECK(std::abs(weighted - 30.0) / 30.0 < 0.01);
  for (const auto& o : plan.outages) {
    CHECK(o.start >= 0.0);
    CHECK(o.start + o.duration <= 100.0 + 1e-9);
  }
}

TEST_CASE("bottleneck window budget follows the capacity shortfall") {
  InputConfig cfg = test::config_for(test::single_machine_plant(), 100.0);
  cfg.targets.delta = 0.35;
  cfg.targets.bottlenecks.push_back({"G", 0.0, 100.0, 0.9});

  // 12 jobs, 5 units each: window workload 60, window capacity 100.
  std::vector<JobSpec> jobs;
  for (int i = 0; i < 12; ++i) jobs.push_back(test::job(i, i * 8.0, {5.0}, 99.0));

  std::mt19937_64 rng(5);
  DisturbancePlan plan = plan_disturbances(cfg, jobs, rng);
  REQUIRE(plan.window_budgets.size() == 1);
  // Delta C_b = C_b - W_b / rho_b = 100 - 60/0.9
  CHECK(plan.window_budgets[0] == doctest::Approx(100.0 - 60.0 / 0.9).epsilon(1e-6));

  // Overprovisioned window: the shortfall clamps at zero.
  cfg.targets.bottlenecks[0].rho = 0.5;
  std::mt19937_64 rng2(5);
  DisturbancePlan relaxed = plan_disturbances(cfg, jobs, rng2);
  CHECK(relaxed.window_budgets[0] == 0.0);
}

TEST_CASE("job sampling: degenerate mix and deterministic batches") {
  PlantSpec plant = test::two_group_plant();
  ProcessTemplate t2;
  t2.id = "T2";
  t2.operations = {{"o0", "A", 6.0}};
  plant.templates.push_back(t2);
  plant.job_mix = {1.0, 0.0};

  InputConfig cfg = test::config_for(plant, 100.0);
  auto proc = derive_stream(1, RngStream::Processing);
  auto batch = derive_stream(1, RngStream::Batch);
  auto jobs = sample_jobs(cfg, {0.0, 10.0, 20.0}, proc, batch);
  REQUIRE(jobs.size() == 3);
  for (const auto& j : jobs) CHECK(j.template_id == "T");

  cfg.dynamics.p_batch = 1.0;
  cfg.distributions.batch = {3.0, 0.0};
  auto proc2 = derive_stream(1, RngStream::Processing);
  auto batch2 = derive_stream(1, RngStream::Batch);
  auto expanded = sample_jobs(cfg, {0.0, 10.0}, proc2, batch2);
  REQUIRE(expanded.size() == 6);
  std::map<std::int64_t, int> by_batch;
  for (const auto& j : expanded) {
    CHECK(j.batch_id >= 0);
    ++by_batch[j.batch_id];
  }
  REQUIRE(by_batch.size() == 2);
  for (const auto& [id, n] : by_batch) CHECK(n == 3);
  CHECK(expanded[0].arrival == expanded[1].arrival);
  CHECK(expanded[0].template_id == expanded[1].template_id);
}

TEST_CASE("static configuration yields arrival-only streams") {
  InputConfig cfg = rate_fixture();
  cfg.fixed_job_count = 50;
  cfg.master_seed = 21;
  EventStream s = generate_instance(cfg);
  CHECK(validate_stream(s).ok());
  CHECK(s.jobs().size() == 50);
  for (const auto& e : s.events) CHECK(e.kind == EventKind::JobArrival);
}

TEST_CASE("generation is deterministic in (config, seed)") {
  InputConfig cfg = rate_fixture();
  cfg.fixed_job_count = 40;
  cfg.targets.delta = 0.05;
  cfg.dynamics.p_cancel = 0.1;
  cfg.master_seed = 33;
  std::string a = canonical_dump(stream_to_json(generate_instance(cfg)));
  std::string b = canonical_dump(stream_to_json(generate_instance(cfg)));
  CHECK(a == b);
  cfg.master_seed = 34;
  CHECK(canonical_dump(stream_to_json(generate_instance(cfg))) != a);
}

TEST_CASE("warm start injects extra jobs at time zero") {
  InputConfig cfg = rate_fixture();
  cfg.fixed_job_count = 10;
  cfg.dynamics.warm_start_jobs = 5;
  cfg.master_seed = 2;
  EventStream s = generate_instance(cfg);
  auto jobs = s.jobs();
  CHECK(jobs.size() == 15);
  int at_zero = 0;
  for (const auto* j : jobs)
    if (j->arrival == 0.0) ++at_zero;
  CHECK(at_zero >= 5);
}

TEST_CASE("down events pair with up markers") {
  InputConfig cfg = rate_fixture();
  cfg.fixed_job_count = 40;
  cfg.targets.delta = 0.08;
  cfg.master_seed = 17;
  EventStream s = generate_instance(cfg);

  std::map<std::int64_t, const Event*> downs;
  int ups = 0;
  for (const auto& e : s.events) {
    if (e.kind == EventKind::MachineDown) downs[e.id] = &e;
    if (e.kind == EventKind::MachineUp) {
      ++ups;
      REQUIRE(downs.count(e.ref_event) == 1);
      const Event* d = downs[e.ref_event];
      CHECK(d->machine == e.machine);
      CHECK(e.time == doctest::Approx(std::min(d->time + d->duration, s.horizon)));
    }
  }
  CHECK(ups == static_cast<int>(downs.size()));
  CHECK(ups > 0);
}

TEST_CASE("full-complexity scenario emits every mechanism") {
  // Per-job Bernoulli with the catalog probabilities; presence rates over
  // 100 seeds follow the binomial expectations (p=0.01 kinds are only
  // ~87% likely to show up in any single 200-job stream).
  InputConfig cfg = rate_fixture();
  cfg.fixed_job_count = 200;
  cfg.targets.delta = 0.10;
  cfg.dynamics.pm_interval = cfg.horizon / 8.0;
  cfg.dynamics.p_batch = 0.10;
  cfg.dynamics.p_ptime = 0.05;
  cfg.dynamics.p_cancel = 0.02;
  cfg.dynamics.p_rework = 0.01;
  cfg.dynamics.p_route = 0.01;
  cfg.dynamics.p_due_change = 0.02;
  cfg.dynamics.p_priority = 0.10;

  std::map<EventKind, int> seeds_with;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    cfg.master_seed = seed;
    EventStream s = generate_instance(cfg);
    CHECK(validate_stream(s).ok());
    std::map<EventKind, bool> seen;
    for (const auto& e : s.events) seen[e.kind] = true;
    for (const auto& [k, v] : seen)
      if (v) ++seeds_with[k];
  }
  CHECK(seeds_with[EventKind::MachineDown] == 100);
  CHECK(seeds_with[EventKind::PreventiveMaintenance] == 100);
  CHECK(seeds_with[EventKind::PriorityChange] >= 99);
  CHECK(seeds_with[EventKind::Cancellation] >= 90);
  CHECK(seeds_with[EventKind::DueDateChange] >= 90);
  CHECK(seeds_with[EventKind::Rework] >= 70);
  CHECK(seeds_with[EventKind::RouteChange] >= 70);
}
