#pragma once

#include <random>
#include <vector>

#include "dynshop/model.hpp"

// Instance generation: Gamma renewal arrivals, nonstationary time warping,
// due-date assignment, disturbance budgeting and dynamic-scenario sampling.
namespace dynshop {

// Gamma draw parameterized by mean and squared coefficient of variation.
// scv -> 0 degenerates to the mean (shape clamped at 1e6).
double gamma_by_mean_scv(double mean, double scv, std::mt19937_64& rng);

// Shape/scale for a renewal process with rate `lambda` and SCV `scv`.
struct GammaParams {
  double shape = 1.0;
  double scale = 1.0;
};
GammaParams interarrival_params(double lambda, double scv);

// Mix-weighted mean total processing requirement per job.
double mean_work_per_job(const PlantSpec& plant);

// Mix-weighted squared CV of template operation means around the pooled
// mean; the floor the pooled processing SCV cannot go below.
double between_op_scv(const PlantSpec& plant);

// Per-draw SCV so the pooled processing-time SCV lands on `target`.
// Returns 0 (degenerate draws) when the structural floor exceeds the target.
double pooled_scv_to_draw_scv(double target, double between);

// Base arrival rate: fixed-count N/H when pinned, else
// rho* . sum(v_m) / MeanP. `rate_scale` multiplies either branch.
double compute_base_rate(const InputConfig& cfg);

// Renewal arrival timestamps on [0, H). Fixed-count mode emits exactly
// `fixed_count` arrivals affinely rescaled into [0, H); otherwise cumulative
// sums are emitted while they stay within H.
std::vector<double> sample_arrivals(double lambda, double c_a2, double horizon,
                                    std::optional<int> fixed_count,
                                    const DistributionParams& dist,
                                    std::mt19937_64& rng);

// Intensity profile g(t) >= 0 and its integral Lambda(t) in closed form.
double modulation_g(const Modulation& mod, double t, double horizon);
double modulation_integral(const Modulation& mod, double t, double horizon);

// Inverse warp Lambda^{-1}(raw) by bisection on [0, H(1+A)], |err| <= 1e-9.
double warp_time(const Modulation& mod, double raw, double horizon);
std::vector<double> warp_times(const Modulation& mod, const std::vector<double>& raw,
                               double horizon);

// D_j = min(t_j + tau * W_j, H).
void assign_due_dates(std::vector<JobSpec>& jobs, double tau, double horizon);

struct Outage {
  int machine = -1;
  double start = 0.0;
  double duration = 0.0;
  bool preventive = false;
};

struct DisturbancePlan {
  std::vector<Outage> outages;
  double requested_capacity_loss = 0.0;  // delta* . C_tot
  double planned_capacity_loss = 0.0;    // v-weighted loss of all outages
  std::vector<double> window_budgets;    // delta C_b per bottleneck window
  std::vector<std::string> notes;        // infeasibility reports
};

// Bottleneck window budgets first (capped at 0.95 C_b when infeasible),
// then preventive maintenance, then the global remainder spread uniformly.
// Total v-weighted downtime tracks delta* . C_tot within 1%.
DisturbancePlan plan_disturbances(const InputConfig& cfg, const std::vector<JobSpec>& jobs,
                                  std::mt19937_64& rng);

// Jobs for the given arrival epochs: template choice, batch expansion and
// realized Gamma processing times.
std::vector<JobSpec> sample_jobs(const InputConfig& cfg, const std::vector<double>& arrivals,
                                 std::mt19937_64& processing_rng, std::mt19937_64& batch_rng);

// Full pipeline; deterministic in (cfg, cfg.master_seed).
EventStream generate_instance(const InputConfig& cfg);

}  // namespace dynshop
