#include "dynshop/trajectory.hpp"

#include <algorithm>
#include <sstream>

#include "dynshop/detail/object_reader.hpp"

namespace dynshop {

using detail::ObjectReader;

void Trajectory::sort_records() {
  std::sort(records.begin(), records.end(),
            [](const TrajectoryRecord& a, const TrajectoryRecord& b) {
              if (a.start != b.start) return a.start < b.start;
              if (a.job != b.job) return a.job < b.job;
              return a.op_index < b.op_index;
            });
}

std::string trajectory_to_jsonl(const Trajectory& t) {
  std::string out;
  json header{{"row", "header"},
              {"schema_version", t.schema_version},
              {"instance", t.instance},
              {"agent", t.agent},
              {"makespan", t.makespan}};
  out += header.dump();
  out += '\n';
  for (const auto& r : t.records) {
    json line{{"row", "op"},       {"job", r.job},
              {"op_index", r.op_index}, {"machine", r.machine},
              {"group", r.group},   {"start", r.start},
              {"end", r.end},       {"workload", r.workload},
              {"busy", r.busy}};
    out += line.dump();
    out += '\n';
  }
  for (const auto& e : t.applied_events) {
    json line{{"row", "event"},  {"event_id", e.event_id}, {"kind", e.kind},
              {"time", e.time},  {"job_id", e.job_id},     {"applied", e.applied},
              {"note", e.note}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

Trajectory trajectory_from_jsonl(const std::string& text) {
  Trajectory t;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::string where = "trajectory:" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(where, e.what());
    }
    ObjectReader r(j, where);
    std::string row = r.get<std::string>("row");
    if (row == "header") {
      if (have_header) throw ParseError(where, "duplicate header row");
      have_header = true;
      t.schema_version = r.get<int>("schema_version");
      t.instance = r.get<std::string>("instance");
      t.agent = r.get<std::string>("agent");
      t.makespan = r.get<double>("makespan");
    } else if (row == "op") {
      TrajectoryRecord rec;
      rec.job = r.get<std::int64_t>("job");
      rec.op_index = r.get<int>("op_index");
      rec.machine = r.get<int>("machine");
      rec.group = r.get<std::string>("group");
      rec.start = r.get<double>("start");
      rec.end = r.get<double>("end");
      rec.workload = r.get<double>("workload");
      rec.busy = r.get<double>("busy");
      t.records.push_back(std::move(rec));
    } else if (row == "event") {
      AppliedEvent e;
      e.event_id = r.get<std::int64_t>("event_id");
      e.kind = r.get<std::string>("kind");
      e.time = r.get<double>("time");
      e.job_id = r.get<std::int64_t>("job_id");
      e.applied = r.get<bool>("applied");
      e.note = r.get<std::string>("note");
      t.applied_events.push_back(std::move(e));
    } else {
      throw ParseError(where + ".row", "unknown row type '" + row + "'");
    }
    r.finish();
  }
  if (!have_header) throw ParseError("trajectory", "missing header row");
  return t;
}

void save_trajectory(const Trajectory& t, const std::string& path) {
  write_text_file(path, trajectory_to_jsonl(t));
}

Trajectory load_trajectory(const std::string& path) {
  return trajectory_from_jsonl(read_text_file(path));
}

json trajectory_to_gantt(const Trajectory& t) {
  std::map<int, json> lanes;
  for (const auto& r : t.records)
    lanes[r.machine].push_back(json{{"job", r.job},
                                    {"op_index", r.op_index},
                                    {"group", r.group},
                                    {"start", r.start},
                                    {"end", r.end}});
  json machines = json::array();
  for (auto& [machine, ops] : lanes)
    machines.push_back(json{{"machine", machine}, {"ops", std::move(ops)}});
  return json{{"schema_version", t.schema_version},
              {"instance", t.instance},
              {"agent", t.agent},
              {"makespan", t.makespan},
              {"machines", machines}};
}

}  // namespace dynshop
