#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dynshop/generator.hpp"
#include "dynshop/sim.hpp"
#include "helpers.hpp"

using namespace dynshop;

namespace {

const SnapshotJob& job_in(const Snapshot& s, std::int64_t id) {
  for (const auto& j : s.jobs)
    if (j.id == id) return j;
  throw std::runtime_error("job missing from snapshot");
}

const SnapshotMachine& machine_in(const Snapshot& s, int id) {
  for (const auto& m : s.machines)
    if (m.id == id) return m;
  throw std::runtime_error("machine missing from snapshot");
}

Event scenario_event(std::int64_t id, double time, EventKind kind, std::int64_t job_id) {
  Event e;
  e.id = id;
  e.time = time;
  e.kind = kind;
  e.job_id = job_id;
  return e;
}

}  // namespace

TEST_CASE("construction rejects broken or empty streams") {
  PlantSpec plant = test::single_machine_plant();
  EventStream dup = test::stream_of(plant, 100.0,
                                    {test::job(0, 0.0, {5.0}, 20.0),
                                     test::job(0, 1.0, {5.0}, 20.0)});
  CHECK_THROWS_AS(Simulator{dup}, std::invalid_argument);

  EventStream arrivals_only;
  arrivals_only.horizon = 100.0;
  arrivals_only.config = test::config_for(plant, 100.0);
  arrivals_only.events.push_back(test::down_event(0, 0, 1.0, 2.0));
  arrivals_only.events.push_back(test::up_event(1, 0, 3.0, 0));
  arrivals_only.sort_events();
  Simulator no_jobs{arrivals_only};  // construction tolerates it, reset does not
  CHECK_THROWS_WITH_AS(no_jobs.reset(), doctest::Contains("no job arrivals"),
                       std::invalid_argument);
}

TEST_CASE("reset advances to the first decision epoch") {
  PlantSpec plant = test::single_machine_plant();

  SUBCASE("clock lands on the first arrival") {
    EventStream s = test::stream_of(plant, 100.0, {test::job(0, 5.0, {5.0}, 30.0)});
    Simulator sim(s);
    const Snapshot& snap = sim.reset();
    CHECK(snap.clock == doctest::Approx(5.0));
    CHECK_FALSE(snap.done);
    REQUIRE(snap.admissible.size() == 1);
    CHECK(snap.admissible[0] == Action{0, 0, 0});
    CHECK(admissible_actions(snap) == snap.admissible);
  }

  SUBCASE("an initial outage defers the epoch to recovery") {
    EventStream s = test::stream_of(plant, 100.0, {test::job(0, 5.0, {5.0}, 30.0)});
    std::int64_t next = s.max_event_id() + 1;
    s.events.push_back(test::down_event(next, 0, 0.0, 10.0));
    s.events.push_back(test::up_event(next + 1, 0, 10.0, next));
    s.sort_events();
    Simulator sim(s);
    CHECK(sim.reset().clock == doctest::Approx(10.0));
    CHECK(machine_in(sim.snapshot(), 0).status == "idle");
  }
}

TEST_CASE("admissible actions pair every ready op with eligible idle machines") {
  PlantSpec plant;
  plant.machines = {{0, 1.0}, {1, 1.0}};
  plant.groups = {{"G", {0, 1}}};
  ProcessTemplate t;
  t.id = "T";
  t.operations = {{"o0", "G", 5.0}};
  plant.templates = {t};
  plant.job_mix = {1.0};

  EventStream s = test::stream_of(plant, 100.0, {test::job(0, 0.0, {6.0}, 30.0)});
  Simulator sim(s);
  const Snapshot& snap = sim.reset();
  REQUIRE(snap.admissible.size() == 2);
  CHECK(snap.admissible[0] == Action{0, 0, 0});
  CHECK(snap.admissible[1] == Action{0, 0, 1});

  // Starting the only ready op leaves nothing to decide: the kernel rolls
  // forward to completion.
  const Snapshot& after = sim.step({0, 0, 1});
  CHECK(after.done);
  CHECK(after.clock == doctest::Approx(6.0));
  CHECK(sim.makespan() == doctest::Approx(6.0));
}

TEST_CASE("a two-stage route executes serially across groups") {
  EventStream s = test::stream_of(test::two_group_plant(), 100.0,
                                  {test::job(0, 0.0, {3.0, 5.0}, 50.0)});
  Simulator sim(s);
  sim.reset();
  sim.step({0, 0, 0});  // A stage [0, 3]
  CHECK(sim.clock() == doctest::Approx(3.0));
  const Snapshot& mid = sim.snapshot();
  REQUIRE(mid.admissible.size() == 1);
  CHECK(mid.admissible[0] == Action{0, 1, 1});
  const Snapshot& done = sim.step({0, 1, 1});  // B stage [3, 8]
  CHECK(done.done);

  Trajectory t = sim.trajectory();
  REQUIRE(t.records.size() == 2);
  CHECK(t.records[0].machine == 0);
  CHECK(t.records[0].start == doctest::Approx(0.0));
  CHECK(t.records[0].end == doctest::Approx(3.0));
  CHECK(t.records[1].machine == 1);
  CHECK(t.records[1].start == doctest::Approx(3.0));
  CHECK(t.records[1].end == doctest::Approx(8.0));
  CHECK(t.makespan == doctest::Approx(8.0));
}

TEST_CASE("outages preempt and resume without losing work") {
  PlantSpec plant = test::single_machine_plant();
  EventStream s = test::stream_of(plant, 100.0, {test::job(0, 0.0, {10.0}, 60.0)});
  std::int64_t next = s.max_event_id() + 1;
  s.events.push_back(test::down_event(next, 0, 4.0, 5.0));
  s.events.push_back(test::up_event(next + 1, 0, 9.0, next));
  s.sort_events();

  Simulator sim(s);
  sim.reset();
  const Snapshot& done = sim.step({0, 0, 0});
  CHECK(done.done);

  Trajectory t = sim.trajectory();
  REQUIRE(t.records.size() == 1);
  CHECK(t.records[0].start == doctest::Approx(0.0));
  CHECK(t.records[0].end == doctest::Approx(15.0));  // 10 work + 5 outage
  CHECK(t.records[0].busy == doctest::Approx(10.0));
  CHECK(t.records[0].workload == doctest::Approx(10.0));

  const SnapshotMachine& m = machine_in(sim.snapshot(), 0);
  CHECK(m.busy_time == doctest::Approx(10.0));
  CHECK(m.down_time == doctest::Approx(5.0));
  CHECK(m.idle_time == doctest::Approx(0.0));
}

TEST_CASE("machine speed divides busy time, not workload") {
  PlantSpec plant = test::single_machine_plant(2.0, 5.0);
  EventStream s = test::stream_of(plant, 100.0, {test::job(0, 0.0, {10.0}, 60.0)});
  Simulator sim(s);
  sim.reset();
  sim.step({0, 0, 0});
  Trajectory t = sim.trajectory();
  REQUIRE(t.records.size() == 1);
  CHECK(t.records[0].end == doctest::Approx(5.0));
  CHECK(t.records[0].busy == doctest::Approx(5.0));
  CHECK(t.records[0].workload == doctest::Approx(10.0));
}

TEST_CASE("stepping rejects stale or ineligible actions") {
  PlantSpec plant = test::two_group_plant();
  plant.machines.push_back({2, 1.0});  // second A machine keeps the epoch open
  plant.groups[0].machines.push_back(2);

  EventStream s = test::stream_of(plant, 100.0,
                                  {test::job(0, 0.0, {4.0, 2.0}, 30.0),
                                   test::job(1, 0.0, {8.0, 4.0}, 70.0)});
  Simulator fresh(s);
  CHECK_THROWS_AS(fresh.step({0, 0, 0}), std::logic_error);

  Simulator sim(s);
  sim.reset();
  CHECK_THROWS_AS(sim.step({7, 0, 0}), std::invalid_argument);   // unknown job
  CHECK_THROWS_AS(sim.step({0, 1, 1}), std::invalid_argument);   // op not ready
  CHECK_THROWS_AS(sim.step({0, 0, 9}), std::invalid_argument);   // unknown machine
  CHECK_THROWS_AS(sim.step({0, 0, 1}), std::invalid_argument);   // wrong group

  sim.step({0, 0, 0});
  // Job 1 still has machine 2 to go to, so time holds; the busy machine 0
  // must reject a second assignment at the same instant.
  CHECK(sim.clock() == doctest::Approx(0.0));
  CHECK_THROWS_AS(sim.step({1, 0, 0}), std::invalid_argument);

  while (!sim.done()) {
    const Snapshot& snap = sim.snapshot();
    REQUIRE_FALSE(snap.admissible.empty());
    sim.step(snap.admissible.front());
  }
  CHECK_THROWS_AS(sim.step({0, 0, 0}), std::logic_error);
  CHECK_THROWS_AS(sim.step_pass(), std::logic_error);
}

TEST_CASE("passing an epoch moves time to the next activity") {
  PlantSpec plant = test::single_machine_plant();
  EventStream s = test::stream_of(plant, 100.0,
                                  {test::job(0, 0.0, {5.0}, 40.0),
                                   test::job(1, 7.0, {5.0}, 40.0)});
  Simulator sim(s);
  sim.reset();
  CHECK(sim.clock() == doctest::Approx(0.0));
  const Snapshot& later = sim.step_pass();
  CHECK(later.clock == doctest::Approx(7.0));
  CHECK(later.admissible.size() == 2);

  // Declining with nothing running and no future events cannot make progress.
  EventStream lone = test::stream_of(plant, 100.0, {test::job(0, 0.0, {5.0}, 40.0)});
  Simulator stuck(lone);
  stuck.reset();
  CHECK_THROWS_AS(stuck.step_pass(), std::runtime_error);
}

TEST_CASE("cancellation drops unstarted work but never a running op") {
  EventStream s = test::stream_of(test::two_group_plant(), 100.0,
                                  {test::job(0, 0.0, {4.0, 2.0}, 30.0)});
  std::int64_t next = s.max_event_id() + 1;

  SUBCASE("queued job cancels to completion without records") {
    s.events.push_back(scenario_event(next, 1.0, EventKind::Cancellation, 0));
    s.sort_events();
    Simulator sim(s);
    sim.reset();
    const Snapshot& after = sim.step_pass();  // decline; cancel lands at t=1
    CHECK(after.done);
    CHECK(job_in(after, 0).cancelled);
    CHECK(job_in(after, 0).complete);
    CHECK(sim.trajectory().records.empty());
    bool logged = false;
    for (const auto& ev : sim.trajectory().applied_events)
      if (ev.kind == "cancellation") logged = ev.applied;
    CHECK(logged);
  }

  SUBCASE("running op finishes; the tail is removed") {
    s.events.push_back(scenario_event(next, 1.0, EventKind::Cancellation, 0));
    s.sort_events();
    Simulator sim(s);
    sim.reset();
    const Snapshot& after = sim.step({0, 0, 0});
    CHECK(after.done);  // second op vanished, so the run ends at t=4
    CHECK(after.clock == doctest::Approx(4.0));
    Trajectory t = sim.trajectory();
    REQUIRE(t.records.size() == 1);
    CHECK(t.records[0].op_index == 0);
    CHECK(t.makespan == doctest::Approx(4.0));
    CHECK(job_in(after, 0).route_length == 1);
  }
}

TEST_CASE("rework only re-queues operations that already completed") {
  PlantSpec plant = test::single_machine_plant();
  EventStream s = test::stream_of(plant, 100.0, {test::job(0, 0.0, {4.0}, 50.0)});
  std::int64_t next = s.max_event_id() + 1;

  SUBCASE("rework against a running op is dropped") {
    Event rw = scenario_event(next, 2.0, EventKind::Rework, 0);
    rw.op_index = 0;
    s.events.push_back(rw);
    s.sort_events();
    Simulator sim(s);
    sim.reset();
    const Snapshot& after = sim.step({0, 0, 0});
    CHECK(after.done);
    bool applied = true;
    for (const auto& ev : sim.trajectory().applied_events)
      if (ev.kind == "rework") applied = ev.applied;
    CHECK_FALSE(applied);
    CHECK(sim.trajectory().records.size() == 1);
  }

  SUBCASE("rework after completion reopens the job") {
    Event rw = scenario_event(next, 6.0, EventKind::Rework, 0);
    rw.op_index = 0;
    s.events.push_back(rw);
    s.sort_events();
    Simulator sim(s);
    sim.reset();
    const Snapshot& mid = sim.step({0, 0, 0});  // completes at 4, reopens at 6
    CHECK_FALSE(mid.done);
    CHECK(mid.clock == doctest::Approx(6.0));
    const SnapshotJob& j = job_in(mid, 0);
    CHECK_FALSE(j.complete);
    CHECK(j.route_length == 2);
    REQUIRE(j.pending.size() == 1);
    CHECK(j.pending[0].p == doctest::Approx(4.0));  // copy of the first op

    const Snapshot& done = sim.step({0, 1, 0});
    CHECK(done.done);
    Trajectory t = sim.trajectory();
    REQUIRE(t.records.size() == 2);
    CHECK(t.records[1].start == doctest::Approx(6.0));
    CHECK(t.records[1].end == doctest::Approx(10.0));
  }
}

TEST_CASE("route changes replace everything not yet started") {
  PlantSpec plant = test::two_group_plant();
  ProcessTemplate t2;
  t2.id = "T2";
  t2.operations = {{"x0", "A", 1.0}, {"x1", "B", 7.0}};
  plant.templates.push_back(t2);
  plant.job_mix = {0.5, 0.5};

  EventStream s = test::stream_of(plant, 100.0, {test::job(0, 0.0, {4.0, 2.0}, 60.0)});
  Event rc = scenario_event(s.max_event_id() + 1, 1.0, EventKind::RouteChange, 0);
  rc.new_template = "T2";
  rc.new_times = {0.0, 7.0};  // entries before the cut are ignored
  s.events.push_back(rc);
  s.sort_events();

  Simulator sim(s);
  sim.reset();
  const Snapshot& mid = sim.step({0, 0, 0});  // change applies at t=1, op runs to 4
  CHECK(mid.clock == doctest::Approx(4.0));
  const SnapshotJob& j = job_in(mid, 0);
  CHECK(j.template_id == "T2");
  REQUIRE(j.pending.size() == 1);
  CHECK(j.pending[0].group == "B");
  CHECK(j.pending[0].p == doctest::Approx(7.0));

  const Snapshot& done = sim.step({0, 1, 1});
  CHECK(done.done);
  CHECK(sim.makespan() == doctest::Approx(11.0));
}

TEST_CASE("priority and due-date updates reach the snapshot") {
  EventStream s = test::stream_of(test::two_group_plant(), 100.0,
                                  {test::job(0, 0.0, {4.0, 2.0}, 30.0)});
  std::int64_t next = s.max_event_id() + 1;
  Event pr = scenario_event(next, 1.0, EventKind::PriorityChange, 0);
  pr.new_priority = 5;
  Event dd = scenario_event(next + 1, 1.0, EventKind::DueDateChange, 0);
  dd.new_due = 44.0;
  s.events.push_back(pr);
  s.events.push_back(dd);
  s.sort_events();

  Simulator sim(s);
  sim.reset();
  CHECK(job_in(sim.snapshot(), 0).priority == 0);
  const Snapshot& after = sim.step({0, 0, 0});  // clock rolls past t=1
  CHECK(job_in(after, 0).priority == 5);
  CHECK(job_in(after, 0).due == doctest::Approx(44.0));
}

TEST_CASE("identical action sequences replay to identical trajectories") {
  InputConfig cfg = test::config_for(test::two_group_plant(), 200.0);
  cfg.fixed_job_count = 12;
  cfg.master_seed = 5;
  EventStream s = generate_instance(cfg);

  auto run = [&s]() {
    Simulator sim(s);
    sim.reset();
    while (!sim.done()) {
      const Snapshot& snap = sim.snapshot();
      if (snap.admissible.empty()) {
        sim.step_pass();
        continue;
      }
      sim.step(snap.admissible.front());
    }
    return trajectory_to_jsonl(sim.trajectory());
  };
  CHECK(run() == run());
}

TEST_CASE("observation levels reveal strictly more structure") {
  EventStream s = test::stream_of(test::two_group_plant(), 100.0,
                                  {test::job(0, 0.0, {4.0, 2.0}, 30.0),
                                   test::job(1, 0.0, {8.0, 4.0}, 70.0)});
  s.config.targets.bottlenecks.push_back({"A", 0.0, 50.0, 0.8});

  Simulator sim(s);
  sim.reset();

  Observation l1 = sim.observe(ObsLevel::L1);
  CHECK(l1.machines.size() == 2);
  REQUIRE(l1.ready.size() == 2);
  CHECK(l1.ready[0].group == "A");
  CHECK(l1.ready[0].mean_time == doctest::Approx(4.0));  // nominal, not realized
  CHECK(l1.ready[1].remaining_work == doctest::Approx(6.0));
  CHECK(l1.queue_lengths.empty());
  CHECK(l1.job_stats.empty());
  CHECK(l1.priors.is_null());

  Observation l2 = sim.observe(ObsLevel::L2);
  CHECK(l2.queue_lengths.at("A") == 2);
  REQUIRE(l2.job_stats.size() == 2);
  CHECK(l2.job_stats[0].slack_factor == doctest::Approx(30.0 / 6.0));
  CHECK(l2.job_stats[1].slack_factor == doctest::Approx(70.0 / 6.0));
  CHECK(l2.event_counts.at("job_arrival") == 2);

  Observation l3 = sim.observe(ObsLevel::L3);
  REQUIRE_FALSE(l3.priors.is_null());
  CHECK(l3.priors.at("targets").at("rho_global").get<double>() ==
        doctest::Approx(s.config.targets.rho_global));
  CHECK(l3.priors.at("horizon").get<double>() == doctest::Approx(100.0));
  REQUIRE(l3.priors.at("windows").size() == 1);
  CHECK(l3.priors.at("windows")[0].at("score").get<double>() ==
        doctest::Approx(0.8 * 50.0 / 100.0));

  CHECK_THROWS_AS(encode_observation(sim.snapshot(), ObsLevel::L3, nullptr),
                  std::invalid_argument);
  CHECK(obs_level_from_int(2) == ObsLevel::L2);
  CHECK_THROWS_AS(obs_level_from_int(4), std::invalid_argument);

  json j = observation_to_json(l2);
  CHECK(j.at("level").get<int>() == 2);
  CHECK(j.at("ready").size() == 2);
}

TEST_CASE("trajectories round-trip through jsonl and export to gantt lanes") {
  EventStream s = test::stream_of(test::two_group_plant(), 100.0,
                                  {test::job(0, 0.0, {3.0, 5.0}, 50.0)});
  Simulator sim(s);
  sim.reset();
  sim.step({0, 0, 0});
  sim.step({0, 1, 1});
  REQUIRE(sim.done());

  Trajectory t = sim.trajectory();
  t.instance = "fixture";
  t.agent = "scripted";
  std::string text = trajectory_to_jsonl(t);
  Trajectory back = trajectory_from_jsonl(text);
  CHECK(trajectory_to_jsonl(back) == text);
  CHECK(back.instance == "fixture");
  CHECK(back.makespan == doctest::Approx(8.0));
  CHECK(back.records.size() == t.records.size());
  CHECK(back.applied_events.size() == t.applied_events.size());

  json gantt = trajectory_to_gantt(t);
  CHECK(gantt.at("makespan").get<double>() == doctest::Approx(8.0));
  REQUIRE(gantt.at("machines").size() == 2);
  CHECK(gantt.at("machines")[0].at("machine").get<int>() == 0);
  CHECK(gantt.at("machines")[0].at("ops")[0].at("job").get<std::int64_t>() == 0);
}
