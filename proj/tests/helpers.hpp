#pragma once

// Hand-sized fixtures shared across the test binaries. Everything here is
// small enough to check against paper-and-pencil arithmetic.

#include <string>
#include <vector>

#include "dynshop/model.hpp"

namespace dynshop::test {

// Two machines in two singleton groups; one template A(4) -> B(2).
inline PlantSpec two_group_plant() {
  PlantSpec plant;
  plant.machines = {{0, 1.0}, {1, 1.0}};
  plant.groups = {{"A", {0}}, {"B", {1}}};
  ProcessTemplate t;
  t.id = "T";
  t.operations = {{"o0", "A", 4.0}, {"o1", "B", 2.0}};
  plant.templates = {t};
  plant.job_mix = {1.0};
  return plant;
}

// Single machine, single group, one-op template; the smallest valid plant.
inline PlantSpec single_machine_plant(double speed = 1.0, double mean = 5.0) {
  PlantSpec plant;
  plant.machines = {{0, speed}};
  plant.groups = {{"G", {0}}};
  ProcessTemplate t;
  t.id = "T";
  t.operations = {{"o0", "G", mean}};
  plant.templates = {t};
  plant.job_mix = {1.0};
  return plant;
}

inline InputConfig config_for(const PlantSpec& plant, double horizon) {
  InputConfig cfg;
  cfg.horizon = horizon;
  cfg.plant = plant;
  cfg.targets.rho_global = 0.5;
  cfg.targets.tau = 4.0;
  cfg.targets.c_a2 = 1.0;
  cfg.targets.c_p2 = 0.5;
  return cfg;
}

inline JobSpec job(std::int64_t id, double arrival, std::vector<double> times,
                   double due, const std::string& template_id = "T") {
  JobSpec j;
  j.id = id;
  j.arrival = arrival;
  j.template_id = template_id;
  j.processing_times = std::move(times);
  j.due = due;
  return j;
}

inline Event arrival_event(std::int64_t event_id, JobSpec j) {
  Event e;
  e.id = event_id;
  e.time = j.arrival;
  e.kind = EventKind::JobArrival;
  e.job = std::move(j);
  return e;
}

inline Event down_event(std::int64_t event_id, int machine, double start,
                        double duration) {
  Event e;
  e.id = event_id;
  e.time = start;
  e.kind = EventKind::MachineDown;
  e.machine = machine;
  e.duration = duration;
  return e;
}

inline Event up_event(std::int64_t event_id, int machine, double time,
                      std::int64_t ref) {
  Event e;
  e.id = event_id;
  e.time = time;
  e.kind = EventKind::MachineUp;
  e.machine = machine;
  e.ref_event = ref;
  return e;
}

// Stream over `plant` from explicit jobs; event ids follow list order.
inline EventStream stream_of(const PlantSpec& plant, double horizon,
                             std::vector<JobSpec> jobs) {
  EventStream s;
  s.horizon = horizon;
  s.config = config_for(plant, horizon);
  std::int64_t id = 0;
  for (auto& j : jobs) s.events.push_back(arrival_event(id++, std::move(j)));
  s.sort_events();
  return s;
}

}  // namespace dynshop::test
