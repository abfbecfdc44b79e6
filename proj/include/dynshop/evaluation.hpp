#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dynshop/agents.hpp"
#include "dynshop/metrics.hpp"

// Trajectory verification, schedule KPIs, experiment matrices, coverage
// subset selection and the statistical validation toolbox.
namespace dynshop {

struct VerificationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Hard-constraint checks: per-job precedence, per-machine exclusivity,
// downtime/duration accounting, payload conformance, cancellation cutoff.
VerificationReport verify(const Trajectory& traj, const EventStream& stream);

struct Kpis {
  double makespan = 0.0;
  double mean_tardiness = 0.0;
  int n_jobs = 0;        // arrived, uncancelled
  int n_completed = 0;
  int n_cancelled = 0;
  bool complete = true;  // every uncancelled job fully executed
};

Kpis kpis(const Trajectory& traj, const EventStream& stream);

struct MatrixCell {
  std::string instance;
  std::string agent;
  std::uint64_t seed = 0;
  double makespan = 0.0;
  double mean_tardiness = 0.0;
  double wall_seconds = 0.0;
  bool verified = false;
  int violations = 0;
  double gap_percent = 0.0;  // relative to the per-instance best makespan
  std::string fault;         // nonempty when the cell aborted
};

struct ExperimentMatrix {
  std::vector<MatrixCell> cells;
  std::map<std::string, double> best_makespan;  // per instance, verified cells
};

// Every (instance, agent, seed) cell simulated, verified and scored.
// Wall-clock is excluded from the canonical export so reruns are
// byte-identical.
ExperimentMatrix run_matrix(const std::vector<std::pair<std::string, EventStream>>& instances,
                            const std::vector<std::string>& agents,
                            const std::vector<std::uint64_t>& seeds, int threads = 1,
                            ObsLevel level = ObsLevel::L1, const AgentOptions& opts = {});

json matrix_to_json(const ExperimentMatrix& matrix);

// Farthest-point greedy on z-scored features; the last feature column is the
// difficulty score and seeds the first center. Returns indices in pick order.
std::vector<std::size_t> kcenter_subset(const std::vector<std::vector<double>>& features,
                                        std::size_t k);
// Max-min distance of the selection, in the same standardized space.
double kcenter_radius(const std::vector<std::vector<double>>& features,
                      const std::vector<std::size_t>& centers);

struct SpearmanResult {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, permutation
};

SpearmanResult spearman_permutation(const std::vector<double>& x,
                                    const std::vector<double>& y,
                                    int permutations = 10000, std::uint64_t seed = 0);

struct BootstrapResult {
  double diff = 0.0;  // mean(a) - mean(b)
  double lo = 0.0;    // percentile 2.5
  double hi = 0.0;    // percentile 97.5
};

BootstrapResult bootstrap_mean_diff(const std::vector<double>& a,
                                    const std::vector<double>& b, int resamples = 10000,
                                    std::uint64_t seed = 0);

// Sup distance between empirical CDFs.
double ks_statistic(std::vector<double> a, std::vector<double> b);

}  // namespace dynshop
