#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynshop/model.hpp"

namespace dynshop {

// One executed operation. `end - start` equals `busy` plus preemption gaps.
struct TrajectoryRecord {
  std::int64_t job = 0;
  int op_index = 0;
  int machine = 0;
  std::string group;
  double start = 0.0;
  double end = 0.0;
  double workload = 0.0;  // realized processing requirement p
  double busy = 0.0;      // p / v_m
};

// Scenario/stream event as the kernel applied (or dropped) it.
struct AppliedEvent {
  std::int64_t event_id = -1;
  std::string kind;
  double time = 0.0;
  std::int64_t job_id = -1;
  bool applied = true;
  std::string note;
};

struct Trajectory {
  int schema_version = kSchemaVersion;
  std::string instance;  // provenance label
  std::string agent;
  double makespan = 0.0;
  std::vector<TrajectoryRecord> records;       // sorted by start
  std::vector<AppliedEvent> applied_events;

  void sort_records();
};

// Line-delimited JSON: header line, then one record per line.
std::string trajectory_to_jsonl(const Trajectory& t);
Trajectory trajectory_from_jsonl(const std::string& text);
void save_trajectory(const Trajectory& t, const std::string& path);
Trajectory load_trajectory(const std::string& path);

// Machine-keyed schedule view of the same records.
json trajectory_to_gantt(const Trajectory& t);

}  // namespace dynshop
