#pragma once

#include <array>
#include <string>

#include "dynshop/metrics.hpp"

// Scalar difficulty index built from congestion, due-date pressure, scale and
// disruption components of an observed instance.
namespace dynshop {

struct SsiConfig {
  double c_max = 100.0;    // congestion normalizer
  double p_max = 2.0;      // due-date pressure normalizer
  double k_max = 200.0;    // scale normalizer (machines x mean route length)
  double s_max = 0.25;     // disruption normalizer
  double epsilon = 1e-3;   // tightness floor inside the pressure term
  double rho_cap = 0.999;  // clamp for the busiest-group utilization
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};  // C, P, K, S
};

struct SsiComponents {
  double congestion = 0.0;   // raw C
  double pressure = 0.0;     // raw P
  double scale = 0.0;        // raw K, already capped at 1
  double disruption = 0.0;   // raw S, already capped at 1
  double congestion_hat = 0.0;
  double pressure_hat = 0.0;
  double scale_hat = 0.0;
  double disruption_hat = 0.0;
  double score = 0.0;        // d in [0, 100]
  std::string bucket;        // under-loaded / moderate / hard / critical
};

// Component extraction; machine count and mean route length come from the
// observed metrics.
SsiComponents ssi_components(const ObservedMetrics& m, const SsiConfig& cfg = {});

// Convenience: just the scalar d.
double ssi_score(const ObservedMetrics& m, const SsiConfig& cfg = {});

std::string ssi_bucket(double score);

struct RankStability {
  double spearman = 0.0;
  double kendall = 0.0;
  double decile_shift = 0.0;
};

// Agreement between two scorings of the same instance set.
RankStability rank_stability(const std::vector<double>& base,
                             const std::vector<double>& variant);

json ssi_to_json(const SsiComponents& c);

}  // namespace dynshop
