#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dynshop/sesc.hpp"
#include "dynshop/ssi.hpp"

// Suite drivers: parameter grids, centroid-anchored sweeps and scale ladders,
// each cell generated, calibrated and scored, with a replayable manifest.
namespace dynshop {

// 10 machines in 4 groups, 3 templates with 4-operation routes.
PlantSpec balanced_plant();
// Uneven speeds and group sizes; exercises imbalance and bottlenecks.
PlantSpec mixed_plant();
PlantSpec plant_preset(const std::string& name);  // "balanced" | "mixed"

// Base configuration around the preset plant: fixed job count, horizon
// matched to the small scale level, centroid targets.
InputConfig base_config(const std::string& plant = "balanced");

struct GridAxis {
  std::string name;  // target dimension
  std::vector<double> levels;
};

// Full factorial levels for the six driver targets.
std::vector<GridAxis> reference_grid_axes();

// Named one-dimensional sweep progressions around the centroid.
// "utilization" 0.4:0.02:0.98, "tightness" 1.5:0.5:12.0,
// "variability" log-spaced joint SCV in [0.1, 5], "disruption" 0:0.01:0.25.
GridAxis sweep_axis(const std::string& name);

// Centroid targets: rho 0.85, tau 5, c_a2 1, c_p2 0.5, delta 0.05, chi 0.
void apply_centroid(InputConfig& cfg);

// Sets one named target dimension; throws on unknown names.
void apply_axis_value(InputConfig& cfg, const std::string& name, double value);

struct ScaleLevel {
  std::string name;
  int jobs = 0;
  double horizon = 0.0;
};

// Small through extra-large; the arrival rate is constant across levels.
const std::vector<ScaleLevel>& scale_levels();
const ScaleLevel* find_scale_level(const std::string& name);

struct StageArtifact {
  std::string name;  // "instance", "metrics", "score", "report"
  std::string path;  // empty when not persisted
  std::string hash;  // fnv1a64 of the canonical serialization, hex
};

struct ManifestEntry {
  std::string name;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
  bool feasible = true;
  std::string note;  // failure reason when infeasible
  double ssi = 0.0;
  std::string bucket;
  double final_l2 = 0.0;
  bool relaxed = false;
  bool strict = false;
  std::vector<StageArtifact> artifacts;
};

struct RunManifest {
  int schema_version = kSchemaVersion;
  std::string kind;  // "grid" | "sweep" | "scale"
  std::uint64_t master_seed = 0;
  std::vector<ManifestEntry> entries;
};

json manifest_to_json(const RunManifest& m);
void save_manifest(const RunManifest& m, const std::string& path);

struct PipelineOptions {
  std::string out_dir;    // empty: nothing persisted
  bool calibrate = true;  // greedy calibration pass after generation
  CalibratorConfig calibrator;
  int threads = 1;
  bool keep_streams = false;  // retain calibrated streams in memory
};

struct PipelineResult {
  RunManifest manifest;
  std::vector<EventStream> streams;  // parallel to entries when kept
};

// Cartesian product of axis levels, crossed with seeds. Infeasible cells are
// recorded in the manifest, never fatal.
PipelineResult run_grid(const InputConfig& base, const std::vector<GridAxis>& axes,
                        const std::vector<std::uint64_t>& seeds,
                        const PipelineOptions& opts = {});

// One or two sweep dimensions around the centroid.
PipelineResult run_sweep(const InputConfig& base, const std::vector<std::string>& dims,
                         const std::vector<std::uint64_t>& seeds,
                         const PipelineOptions& opts = {});

// Fixed-count generation at a named (or custom) scale level.
PipelineResult run_scale(const InputConfig& base, const ScaleLevel& level,
                         const std::vector<std::uint64_t>& seeds,
                         const PipelineOptions& opts = {});

}  // namespace dynshop
