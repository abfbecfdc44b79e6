#include "dynshop/ssi.hpp"

#include <algorithm>
#include <cmath>

#include "dynshop/stats.hpp"

namespace dynshop {

namespace {

// log-compressed normalization into [0, 1].
double hat(double x, double x_max) {
  if (x <= 0.0) return 0.0;
  double v = std::log1p(x) / std::log1p(x_max);
  return std::min(std::max(v, 0.0), 1.0);
}

}  // namespace

std::string ssi_bucket(double score) {
  if (score < 15.0) return "under-loaded";
  if (score < 25.0) return "moderate";
  if (score < 35.0) return "hard";
  return "critical";
}

SsiComponents ssi_components(const ObservedMetrics& m, const SsiConfig& cfg) {
  SsiComponents c;

  double rho_nb = 0.0;
  for (const auto& [g, rho] : m.rho_groups) rho_nb = std::max(rho_nb, rho);
  rho_nb = std::min(rho_nb, cfg.rho_cap);
  c.congestion = rho_nb / (1.0 - rho_nb) * (1.0 + 0.5 * (m.c_a2 + m.c_p2));

  c.pressure = 1.0 / std::max(m.tau, cfg.epsilon);

  c.scale = std::min(m.n_machines * m.mean_route_length / cfg.k_max, 1.0);
  c.disruption = std::min(m.delta / cfg.s_max, 1.0);

  c.congestion_hat = hat(c.congestion, cfg.c_max);
  c.pressure_hat = hat(c.pressure, cfg.p_max);
  c.scale_hat = hat(c.scale, 1.0);
  c.disruption_hat = hat(c.disruption, 1.0);

  double wsum = cfg.weights[0] + cfg.weights[1] + cfg.weights[2] + cfg.weights[3];
  double acc = cfg.weights[0] * c.congestion_hat + cfg.weights[1] * c.pressure_hat +
               cfg.weights[2] * c.scale_hat + cfg.weights[3] * c.disruption_hat;
  c.score = wsum > 0.0 ? 100.0 * acc / wsum : 0.0;
  c.bucket = ssi_bucket(c.score);
  return c;
}

double ssi_score(const ObservedMetrics& m, const SsiConfig& cfg) {
  return ssi_components(m, cfg).score;
}

RankStability rank_stability(const std::vector<double>& base,
                             const std::vector<double>& variant) {
  RankStability r;
  r.spearman = spearman_rho(base, variant);
  r.kendall = kendall_tau(base, variant);
  r.decile_shift = mean_decile_shift(base, variant);
  return r;
}

json ssi_to_json(const SsiComponents& c) {
  return json{{"schema_version", kSchemaVersion},
              {"congestion", c.congestion},
              {"pressure", c.pressure},
              {"scale", c.scale},
              {"disruption", c.disruption},
              {"congestion_hat", c.congestion_hat},
              {"pressure_hat", c.pressure_hat},
              {"scale_hat", c.scale_hat},
              {"disruption_hat", c.disruption_hat},
              {"score", c.score},
              {"bucket", c.bucket}};
}

}  // namespace dynshop
