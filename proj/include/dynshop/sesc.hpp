#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>

#include "dynshop/metrics.hpp"

// Greedy stream-editing calibrator: scores repair operators against the
// normalized error vector, applies the best, keeps only strict improvements.
namespace dynshop {

// Metric order of the error vector.
enum MetricIndex : int {
  kRho = 0,
  kCa2 = 1,
  kCp2 = 2,
  kTau = 3,
  kChi = 4,
  kDelta = 5,
  kEpsBn = 6,
  kMetricCount = 7,
};

using ErrorVector = std::array<double, kMetricCount>;
using ImpactVector = std::array<double, kMetricCount>;

double l2_norm(const ErrorVector& e);
double max_abs(const ErrorVector& e);

enum class Strategy { ArrivalStructure, SlackScaling, ProcessingResample, BottleneckEngineering };

std::string to_string(Strategy s);

struct CalibratorConfig {
  double eps_tol = 0.05;       // convergence and success tolerance
  double epsilon = 1e-6;       // relative-error regularizer
  double lambda_soft = 1.0;    // mild penalty for side effects within tolerance
  double lambda_hard = 10.0;   // penalty for side effects beyond tolerance
  double eta_tau = 0.5;        // slack-scaling learning rate
  double job_change_cap = 0.10;  // max fraction of jobs deleted/duplicated per step
  int max_iterations = 60;
  double alpha_min = 0.05;
  double alpha_max = 20.0;
  // Empirical-SCV matching inside resampling operators.
  double resample_rel_target = 0.02;
  int resample_max_tries = 100;
  std::set<Strategy> disabled;

  // Signed impact priors per strategy.
  std::map<Strategy, ImpactVector> impacts() const;
};

// e_l = |obs - tgt| / (|tgt| + eps) for non-zero targets, absolute otherwise.
ErrorVector error_vector(const ObservedMetrics& m, const TargetMetrics& targets, double eps);

// phi(a, e): positive impact rewards error mass, negative impact penalizes it
// (mildly inside tolerance, strongly outside).
double strategy_score(const ImpactVector& impact, const ErrorVector& e,
                      const CalibratorConfig& cfg);

// State threaded through repeated slack-scaling applications.
struct SlackState {
  double alpha = 1.0;
  // Pre-calibration slack per job; captured on first use.
  std::map<std::int64_t, double> base_slack;
  std::map<std::int64_t, double> event_base_slack;  // due-change payloads by event id
};

// Operators. Each returns an edited copy of the stream.

// Rate mode deletes or duplicates round(min(e_rho, cap) * N_J) jobs; renewal
// mode redraws all arrival epochs from a Gamma matched to the target SCV,
// preserving job order and total workload.
EventStream adjust_arrival_structure(const EventStream& stream, const TargetMetrics& targets,
                                     const ErrorVector& e, const CalibratorConfig& cfg,
                                     std::mt19937_64& rng);

// Multiplicative due-date scaling: D = t + clip(alpha * base_slack, W_j, H - t).
EventStream scale_slack(const EventStream& stream, const TargetMetrics& targets,
                        const ObservedMetrics& m, const CalibratorConfig& cfg, SlackState& state);

// Redraws all processing times (isomorphic: same jobs/ops), then rescales so
// the total workload is conserved exactly.
EventStream resample_processing_times(const EventStream& stream, double c_p2_target,
                                      const CalibratorConfig& cfg, std::mt19937_64& rng);

// Stretches or shrinks in-window outages on the worst bottleneck window so
// the window's effective capacity matches its utilization target.
// `residual` receives unplaceable capacity when shrinking hits zero.
EventStream engineer_bottleneck(const EventStream& stream, const ObservedMetrics& m,
                                const CalibratorConfig& cfg, double* residual = nullptr);

struct IterationRecord {
  int iteration = 0;
  std::string strategy;
  bool accepted = false;
  double l2_before = 0.0;
  double l2_after = 0.0;
  ErrorVector errors{};  // after the attempt
};

struct CalibrationReport {
  std::string mode = "sesc";
  int iterations = 0;  // accepted steps
  bool converged = false;
  bool relaxed = false;
  bool strict = false;
  double initial_l2 = 0.0;
  double final_l2 = 0.0;
  ErrorVector initial_errors{};
  ErrorVector final_errors{};
  double wall_seconds = 0.0;
  std::vector<IterationRecord> steps;
};

// Relaxed: l2 <= eps_tol. Strict additionally bounds each driver error.
struct SuccessFlags {
  bool relaxed = false;
  bool strict = false;
};
SuccessFlags success_flags(const ErrorVector& e, double l2, const CalibratorConfig& cfg);

// Per-metric strict thresholds (multiples of eps_tol).
ErrorVector strict_thresholds(const CalibratorConfig& cfg);

// Greedy loop; deterministic in (stream, targets, cfg, seed).
std::pair<EventStream, CalibrationReport> calibrate(const EventStream& stream,
                                                    const TargetMetrics& targets,
                                                    const CalibratorConfig& cfg,
                                                    std::uint64_t seed);

json report_to_json(const CalibrationReport& r);

}  // namespace dynshop
