#pragma once

#include <cstdint>
#include <vector>

// Rank statistics shared by scoring stability checks and outcome validation.
namespace dynshop {

// Fractional (average) ranks, 1-based; ties share the mean rank.
std::vector<double> fractional_ranks(const std::vector<double>& xs);

// Spearman rank correlation point estimate (average-rank ties).
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Kendall tau-b (tie-corrected).
double kendall_tau(const std::vector<double>& x, const std::vector<double>& y);

// Mean absolute decile shift between the two rankings.
double mean_decile_shift(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace dynshop
