#include "dynshop/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dynshop {

std::vector<double> fractional_ranks(const std::vector<double>& xs) {
  std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
    double rank = 0.5 * (i + j) + 1.0;  // average of 1-based positions
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman_rho: size mismatch");
  if (x.size() < 2) throw std::invalid_argument("spearman_rho: needs at least 2 points");
  return pearson(fractional_ranks(x), fractional_ranks(y));
}

double kendall_tau(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau: size mismatch");
  std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("kendall_tau: needs at least 2 points");
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double dx = x[i] - x[j];
      double dy = y[i] - y[j];
      if (dx == 0.0 && dy == 0.0) continue;
      if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0.0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  double n0 = 0.5 * n * (n - 1);
  double denom = std::sqrt((n0 - ties_x) * (n0 - ties_y));
  if (denom == 0.0) return 0.0;
  return (concordant - discordant) / denom;
}

double mean_decile_shift(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("mean_decile_shift: size mismatch");
  std::size_t n = x.size();
  if (n == 0) return 0.0;
  auto deciles = [n](const std::vector<double>& ranks) {
    std::vector<int> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      int bucket = static_cast<int>((ranks[i] - 1.0) * 10.0 / n) + 1;
      d[i] = std::min(bucket, 10);
    }
    return d;
  };
  std::vector<int> dx = deciles(fractional_ranks(x));
  std::vector<int> dy = deciles(fractional_ranks(y));
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::abs(dx[i] - dy[i]);
  return total / n;
}

}  // namespace dynshop
