#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dynshop/model.hpp"
#include "dynshop/trajectory.hpp"

// Discrete-event kernel: replays an EventStream under agent decisions with
// preempt-resume outages, producing snapshots at decision epochs and a
// verifiable trajectory.
namespace dynshop {

struct Action {
  std::int64_t job = -1;
  int op_index = -1;
  int machine = -1;
};

bool operator==(const Action& a, const Action& b);
bool operator<(const Action& a, const Action& b);  // (job, op, machine)

struct SnapshotOp {
  int index = 0;
  std::string group;
  double mean = 0.0;  // nominal processing time
  double p = 0.0;     // realized processing time
};

struct SnapshotMachine {
  int id = 0;
  double speed = 1.0;
  std::string group;
  std::string status;  // "idle" | "busy" | "down"
  std::int64_t job = -1;
  int op_index = -1;
  double available_at = 0.0;  // projected next instant work can start
  double down_until = 0.0;
  double remaining = 0.0;  // unprocessed share of the running op
  double busy_time = 0.0;
  double idle_time = 0.0;
  double down_time = 0.0;
  double assigned_work = 0.0;
};

struct SnapshotJob {
  std::int64_t id = 0;
  double arrival = 0.0;
  double due = 0.0;
  int priority = 0;
  std::string template_id;
  bool cancelled = false;
  bool complete = false;
  bool running = false;
  int next_op = 0;
  int route_length = 0;
  std::vector<SnapshotOp> pending;  // unstarted operations, route order
  double remaining_work_nominal = 0.0;
  double remaining_work_realized = 0.0;
};

// Full value copy of the kernel state at a decision epoch.
struct Snapshot {
  double clock = 0.0;
  bool done = false;
  int epoch = 0;
  std::vector<SnapshotMachine> machines;
  std::vector<SnapshotJob> jobs;        // arrived jobs
  std::vector<Action> admissible;      // sorted by (job, machine)
  std::map<std::string, int> event_counts;  // applied, by kind
  std::size_t pending_events = 0;
};

std::vector<Action> admissible_actions(const Snapshot& snapshot);

enum class ObsLevel { L1 = 1, L2 = 2, L3 = 3 };

ObsLevel obs_level_from_int(int level);

struct ObsMachine {
  int id = 0;
  std::string group;
  double speed = 1.0;
  std::string status;
  double available_at = 0.0;
  double busy_time = 0.0;
  double idle_time = 0.0;
  double assigned_work = 0.0;
};

struct ObsReadyOp {
  std::int64_t job = -1;
  int op_index = 0;
  std::string group;
  double mean_time = 0.0;       // nominal
  double remaining_work = 0.0;  // nominal means of unstarted ops
  int remaining_ops = 0;
  double arrival = 0.0;
};

struct ObsJobStat {
  std::int64_t id = 0;
  double due = 0.0;
  int priority = 0;
  double slack_factor = 0.0;  // (due - clock) / remaining nominal work
};

struct Observation {
  ObsLevel level = ObsLevel::L1;
  double clock = 0.0;
  bool done = false;
  int epoch = 0;
  std::vector<ObsMachine> machines;
  std::vector<ObsReadyOp> ready;
  // L2
  std::map<std::string, int> queue_lengths;
  std::vector<ObsJobStat> job_stats;
  std::map<std::string, int> event_counts;
  // L3
  json priors;
};

// L3 requires the generating config; throws without it.
Observation encode_observation(const Snapshot& snapshot, ObsLevel level,
                               const InputConfig* context = nullptr);
json observation_to_json(const Observation& obs);

class Simulator {
public:
  explicit Simulator(const EventStream& stream);

  // Advances to the first decision epoch; throws on a stream with no arrivals.
  const Snapshot& reset();
  // Starts an admissible action; the clock holds while further actions remain
  // admissible at this instant, otherwise advances to the next epoch.
  const Snapshot& step(const Action& action);
  // Declines the epoch: time moves to the next activity point regardless.
  const Snapshot& step_pass();

  bool done() const { return done_; }
  double clock() const { return clock_; }
  double horizon() const { return stream_.horizon; }
  const Snapshot& snapshot() const { return snapshot_; }
  const EventStream& stream() const { return stream_; }
  Observation observe(ObsLevel level) const;

  double makespan() const;
  Trajectory trajectory() const;

private:
  struct OpRt {
    std::string group;
    double mean = 0.0;
    double p = 0.0;
  };
  struct JobRt {
    std::int64_t id = 0;
    double arrival = 0.0;
    double due = 0.0;
    int priority = 0;
    std::string template_id;
    std::vector<OpRt> route;
    int next_op = 0;  // first op not yet started
    bool running = false;
    bool cancelled = false;
    bool complete = false;
  };
  struct MachineRt {
    int id = 0;
    double speed = 1.0;
    std::string group;
    std::int64_t job = -1;
    int op_index = -1;
    double remaining = 0.0;
    double op_start = 0.0;
    double op_workload = 0.0;
    double down_until = 0.0;
    double busy_time = 0.0;
    double idle_time = 0.0;
    double down_time = 0.0;
    double assigned_work = 0.0;
  };

  bool machine_up(const MachineRt& m) const { return clock_ >= m.down_until; }
  double next_activity_time() const;
  void move_clock(double t);
  bool complete_due();
  void apply_event(const Event& ev);
  bool settle();  // fixpoint of completions + due events at the current clock
  void advance_to_epoch();
  bool all_work_done() const;
  void complete_op(MachineRt& m);
  std::vector<Action> collect_admissible() const;
  void rebuild_snapshot();
  JobRt* find_job(std::int64_t id);

  EventStream stream_;
  std::map<int, std::string> machine_group_;
  std::vector<MachineRt> machines_;
  std::map<std::int64_t, JobRt> jobs_;
  std::size_t cursor_ = 0;
  double clock_ = 0.0;
  bool done_ = false;
  bool started_ = false;
  int epoch_ = 0;
  std::vector<TrajectoryRecord> records_;
  std::vector<AppliedEvent> applied_;
  std::map<std::string, int> event_counts_;
  Snapshot snapshot_;
};

}  // namespace dynshop
