#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dynshop/model.hpp"
#include "dynshop/sesc.hpp"

namespace dynshop {

enum class MooMode { Extended12D, Hybrid5D };

std::string to_string(MooMode mode);
MooMode moo_mode_from_string(const std::string& name);

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

struct MooConfig {
  MooMode mode = MooMode::Extended12D;
  int population = 0;  // 0 picks the mode default (60 extended, 100 hybrid)
  int generations = 40;
  double eta_c = 15.0;
  double eta_m = 20.0;
  double crossover_prob = 0.9;
  double mutation_prob = 0.0;  // 0 picks 1/d
  double penalty = 1e6;
  int threads = 1;
  ErrorVector thetas;  // selection tolerances
  MooConfig();

  int dims() const;
  int effective_population() const;
  double effective_mutation_prob() const;
  std::vector<Bounds> bounds() const;
  std::vector<double> identity_vector() const;
};

InputConfig decode(const std::vector<double>& x, MooMode mode, const InputConfig& base);

// Objectives share the calibrator error vector: generate from the decoded
// config at `seed`, measure, compare against the base targets.
ErrorVector evaluate_objectives(const std::vector<double>& x, MooMode mode,
                                const InputConfig& base, std::uint64_t seed,
                                double penalty = 1e6);

bool dominates(const std::vector<double>& a, const std::vector<double>& b);
std::vector<std::vector<std::size_t>> nondominated_sort(
    const std::vector<std::vector<double>>& objectives);
std::vector<double> crowding_distance(const std::vector<std::vector<double>>& objectives,
                                      const std::vector<std::size_t>& front);

struct Nsga2Problem {
  std::size_t dims = 0;
  std::vector<Bounds> bounds;
  // evaluate(x, generation, index) -> objective vector; init generation is 0.
  std::function<std::vector<double>(const std::vector<double>&, int, int)> evaluate;
  std::vector<std::vector<double>> seeds;  // optional initial individuals
  int threads = 1;
};

struct Nsga2Result {
  std::vector<std::vector<double>> xs;          // final nondominated set
  std::vector<std::vector<double>> objectives;  // parallel to xs
};

Nsga2Result nsga2(const Nsga2Problem& problem, int population, int generations,
                  double eta_c, double eta_m, double crossover_prob, double mutation_prob,
                  std::uint64_t seed);

std::size_t select_solution(const std::vector<std::vector<double>>& objectives,
                            const ErrorVector& thetas);

struct ParetoArchive {
  std::vector<std::vector<double>> xs;
  std::vector<ErrorVector> objectives;
  std::size_t selected = 0;
};

ParetoArchive moo_search(const InputConfig& base, const MooConfig& cfg, std::uint64_t seed);

// Searches parameter space against the stream's own config, then delivers a
// fresh instance generated from the selected configuration.
std::pair<EventStream, CalibrationReport> calibrate_moo(const EventStream& stream,
                                                        const TargetMetrics& targets,
                                                        const MooConfig& moo_cfg,
                                                        const CalibratorConfig& cal_cfg,
                                                        std::uint64_t seed);

json archive_to_json(const ParetoArchive& archive);

}  // namespace dynshop
