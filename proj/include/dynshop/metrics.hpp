#pragma once

#include <map>
#include <string>
#include <vector>

#include "dynshop/model.hpp"
#include "dynshop/trajectory.hpp"

// Observed metric extraction from realized event streams, optionally grounded
// in an executed trajectory instead of nominal released workload.
namespace dynshop {

struct Interval {
  double start = 0.0;
  double end = 0.0;
};

// Union of possibly overlapping intervals, sorted and disjoint.
std::vector<Interval> merge_intervals(std::vector<Interval> intervals);

// Total overlap of the merged set with [lo, hi].
double overlap_length(const std::vector<Interval>& merged, double lo, double hi);

struct WindowObserved {
  std::string group;
  double start = 0.0;
  double end = 0.0;
  double rho_target = 0.0;
  double rho_observed = 0.0;
  double effective_capacity = 0.0;
  double workload = 0.0;
};

struct ObservedMetrics {
  double rho_global = 0.0;
  double c_a2 = 0.0;
  double c_p2 = 0.0;
  double tau = 0.0;
  double chi_load = 0.0;
  double delta = 0.0;
  double eps_bn = 0.0;  // RMS deviation over bottleneck windows

  std::map<std::string, double> rho_groups;
  std::vector<WindowObserved> windows;

  int n_jobs = 0;
  int n_machines = 0;
  double mean_route_length = 0.0;
  double mean_interarrival = 0.0;
  double std_interarrival = 0.0;
  double mean_processing = 0.0;
  double std_processing = 0.0;
  double total_workload = 0.0;
  double total_capacity = 0.0;

  // "nominal": released workload from job specs; "trajectory": executed ops.
  std::string attribution = "nominal";
  bool scv_degenerate = false;  // fewer than 2 samples for an SCV
};

// Population-variance moments over the stream; pass a trajectory to attribute
// workload to executed operations instead of released routes.
ObservedMetrics observed_metrics(const EventStream& stream,
                                 const Trajectory* trajectory = nullptr);

// Per-machine merged downtime intervals from Down/PM events, clipped to [0, H].
std::map<int, std::vector<Interval>> downtime_by_machine(const EventStream& stream);

json metrics_to_json(const ObservedMetrics& m);
ObservedMetrics metrics_from_json(const json& j);

}  // namespace dynshop
