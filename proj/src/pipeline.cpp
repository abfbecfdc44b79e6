#include "dynshop/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "dynshop/generator.hpp"
#include "dynshop/parallel.hpp"

namespace dynshop {

namespace {

ProcessTemplate make_template(const std::string& id,
                              const std::vector<std::pair<std::string, double>>& ops) {
  ProcessTemplate t;
  t.id = id;
  int k = 0;
  for (const auto& [group, mean] : ops) {
    OperationSpec op;
    op.id = id + "-op" + std::to_string(k++);
    op.group = group;
    op.mean = mean;
    t.operations.push_back(std::move(op));
  }
  return t;
}

}  // namespace

PlantSpec balanced_plant() {
  PlantSpec p;
  for (int m = 0; m < 10; ++m) p.machines.push_back({m, 1.0});
  p.groups = {
      {"G0", {0, 1, 2}},
      {"G1", {3, 4, 5}},
      {"G2", {6, 7}},
      {"G3", {8, 9}},
  };
  // Every route loads the groups proportionally to their capacity (3:3:2:2),
  // so the nominal load imbalance is zero by construction.
  p.templates = {
      make_template("T0", {{"G0", 12.0}, {"G1", 12.0}, {"G2", 8.0}, {"G3", 8.0}}),
      make_template("T1", {{"G0", 9.0}, {"G1", 9.0}, {"G2", 6.0}, {"G3", 6.0}}),
      make_template("T2", {{"G0", 15.0}, {"G1", 15.0}, {"G2", 10.0}, {"G3", 10.0}}),
  };
  p.job_mix = {0.40, 0.35, 0.25};
  return p;
}

PlantSpec mixed_plant() {
  PlantSpec p;
  const double speeds[10] = {1.0, 1.0, 1.25, 0.8, 1.0, 1.5, 1.0, 0.75, 1.2, 1.0};
  for (int m = 0; m < 10; ++m) p.machines.push_back({m, speeds[m]});
  p.groups = {
      {"A", {0, 1, 2, 3}},
      {"B", {4, 5}},
      {"C", {6, 7, 8}},
      {"D", {9}},
  };
  p.templates = {
      make_template("T0", {{"A", 10.0}, {"B", 6.0}, {"C", 9.0}, {"D", 4.0}}),
      make_template("T1", {{"A", 14.0}, {"C", 11.0}, {"B", 5.0}}),
      make_template("T2", {{"B", 8.0}, {"A", 12.0}, {"C", 7.0}, {"D", 3.0}, {"A", 6.0}}),
  };
  p.job_mix = {0.5, 0.3, 0.2};
  return p;
}

PlantSpec plant_preset(const std::string& name) {
  if (name == "balanced") return balanced_plant();
  if (name == "mixed") return mixed_plant();
  throw std::invalid_argument("unknown plant preset: " + name);
}

InputConfig base_config(const std::string& plant) {
  InputConfig cfg;
  cfg.plant = plant_preset(plant);
  cfg.horizon = 1107.5;
  cfg.fixed_job_count = 200;
  apply_centroid(cfg);
  return cfg;
}

std::vector<GridAxis> reference_grid_axes() {
  return {
      {"utilization", {0.50, 0.65, 0.80, 0.90, 0.95}},
      {"tightness", {2.0, 4.0, 6.0, 8.0, 10.0}},
      {"arrival_scv", {0.25, 0.5, 1.0, 2.0, 4.0}},
      {"processing_scv", {0.25, 0.5, 1.0, 2.0}},
      {"disruption", {0.0, 0.05, 0.10, 0.15}},
      {"imbalance", {0.0, 0.15, 0.30}},
  };
}

GridAxis sweep_axis(const std::string& name) {
  GridAxis axis;
  axis.name = name;
  if (name == "utilization") {
    for (int i = 0;; ++i) {
      double v = 0.40 + 0.02 * i;
      if (v > 0.98 + 1e-9) break;
      axis.levels.push_back(v);
    }
  } else if (name == "tightness") {
    for (int i = 0;; ++i) {
      double v = 1.5 + 0.5 * i;
      if (v > 12.0 + 1e-9) break;
      axis.levels.push_back(v);
    }
  } else if (name == "variability") {
    // Joint arrival/processing SCV, log-spaced.
    const int n = 20;
    for (int i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / (n - 1);
      axis.levels.push_back(0.1 * std::pow(5.0 / 0.1, t));
    }
  } else if (name == "disruption") {
    for (int i = 0;; ++i) {
      double v = 0.01 * i;
      if (v > 0.25 + 1e-9) break;
      axis.levels.push_back(v);
    }
  } else {
    throw std::invalid_argument("unknown sweep dimension: " + name);
  }
  return axis;
}

void apply_centroid(InputConfig& cfg) {
  cfg.targets.rho_global = 0.85;
  cfg.targets.tau = 5.0;
  cfg.targets.c_a2 = 1.0;
  cfg.targets.c_p2 = 0.5;
  cfg.targets.delta = 0.05;
  // Load imbalance is plant-structural, so the centroid pins it to the
  // preset's own value; no stream edit can steer it anywhere else.
  cfg.targets.chi_load = 0.0;
}

void apply_axis_value(InputConfig& cfg, const std::string& name, double value) {
  if (name == "utilization") {
    cfg.targets.rho_global = value;
  } else if (name == "tightness") {
    cfg.targets.tau = value;
  } else if (name == "arrival_scv") {
    cfg.targets.c_a2 = value;
  } else if (name == "processing_scv") {
    cfg.targets.c_p2 = value;
  } else if (name == "variability") {
    cfg.targets.c_a2 = value;
    cfg.targets.c_p2 = value;
  } else if (name == "disruption") {
    cfg.targets.delta = value;
  } else if (name == "imbalance") {
    cfg.targets.chi_load = value;
  } else {
    throw std::invalid_argument("unknown axis: " + name);
  }
}

const std::vector<ScaleLevel>& scale_levels() {
  static const std::vector<ScaleLevel> levels = {
      {"small", 200, 1107.5},
      {"medium", 400, 2214.9},
      {"large", 800, 4429.9},
      {"extra-large", 1600, 8859.7},
  };
  return levels;
}

const ScaleLevel* find_scale_level(const std::string& name) {
  for (const auto& level : scale_levels()) {
    if (level.name == name) return &level;
  }
  return nullptr;
}

json manifest_to_json(const RunManifest& m) {
  json entries = json::array();
  for (const auto& e : m.entries) {
    json je;
    je["name"] = e.name;
    je["params"] = e.params;
    je["seed"] = e.seed;
    je["feasible"] = e.feasible;
    if (!e.note.empty()) je["note"] = e.note;
    if (e.feasible) {
      je["ssi"] = e.ssi;
      je["bucket"] = e.bucket;
      je["final_l2"] = e.final_l2;
      je["relaxed"] = e.relaxed;
      je["strict"] = e.strict;
    }
    json arts = json::array();
    for (const auto& a : e.artifacts) {
      json ja;
      ja["name"] = a.name;
      if (!a.path.empty()) ja["path"] = a.path;
      ja["hash"] = a.hash;
      arts.push_back(std::move(ja));
    }
    je["artifacts"] = std::move(arts);
    entries.push_back(std::move(je));
  }
  json out;
  out["schema_version"] = m.schema_version;
  out["kind"] = m.kind;
  out["master_seed"] = m.master_seed;
  out["entries"] = std::move(entries);
  return out;
}

void save_manifest(const RunManifest& m, const std::string& path) {
  write_text_file(path, canonical_dump(manifest_to_json(m)));
}

namespace {

std::string hash_hex(const std::string& text) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(text);
  return os.str();
}

struct CellPlan {
  std::string name;
  std::map<std::string, double> params;
  std::uint64_t seed = 0;
};

// Serializes, fingerprints and optionally persists one artifact.
StageArtifact emit(const std::string& out_dir, const std::string& base,
                   const std::string& name, const json& payload) {
  StageArtifact art;
  art.name = name;
  std::string text = canonical_dump(payload);
  art.hash = hash_hex(text);
  if (!out_dir.empty()) {
    std::filesystem::path p = std::filesystem::path(out_dir) / (base + "." + name + ".json");
    write_text_file(p.string(), text);
    art.path = p.string();
  }
  return art;
}

PipelineResult run_cells(const std::string& kind, const InputConfig& base,
                         const std::vector<CellPlan>& plan, const PipelineOptions& opts) {
  PipelineResult result;
  result.manifest.kind = kind;
  result.manifest.master_seed = plan.empty() ? 0 : plan.front().seed;
  result.manifest.entries.resize(plan.size());
  if (opts.keep_streams) result.streams.resize(plan.size());
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  parallel_for(plan.size(), opts.threads, [&](std::size_t idx) {
    const CellPlan& cell = plan[idx];
    ManifestEntry& entry = result.manifest.entries[idx];
    entry.name = cell.name;
    entry.params = cell.params;
    entry.seed = cell.seed;

    InputConfig cfg = base;
    for (const auto& [axis, value] : cell.params) apply_axis_value(cfg, axis, value);
    std::string label = kind;
    for (const auto& [axis, value] : cell.params) {
      label += "/" + axis + "=" + std::to_string(value);
    }
    cfg.master_seed = derive_tagged_seed(cell.seed, label);

    auto check = validate_config(cfg);
    if (!check.ok()) {
      entry.feasible = false;
      entry.note = check.summary();
      return;
    }
    try {
      EventStream stream = generate_instance(cfg);
      CalibrationReport report;
      if (opts.calibrate) {
        auto [calibrated, rep] = calibrate(stream, cfg.targets, opts.calibrator,
                                           cfg.master_seed);
        stream = std::move(calibrated);
        report = std::move(rep);
      }
      ObservedMetrics m = observed_metrics(stream);
      if (!opts.calibrate) {
        ErrorVector e = error_vector(m, cfg.targets, opts.calibrator.epsilon);
        report.initial_errors = e;
        report.final_errors = e;
        report.initial_l2 = l2_norm(e);
        report.final_l2 = report.initial_l2;
        auto flags = success_flags(e, report.final_l2, opts.calibrator);
        report.relaxed = flags.relaxed;
        report.strict = flags.strict;
        report.mode = "none";
      }
      SsiComponents score = ssi_components(m);

      entry.ssi = score.score;
      entry.bucket = score.bucket;
      entry.final_l2 = report.final_l2;
      entry.relaxed = report.relaxed;
      entry.strict = report.strict;

      std::string file_base = cell.name;
      std::replace(file_base.begin(), file_base.end(), '/', '_');
      entry.artifacts.push_back(emit(opts.out_dir, file_base, "instance",
                                     stream_to_json(stream)));
      entry.artifacts.push_back(emit(opts.out_dir, file_base, "metrics", metrics_to_json(m)));
      entry.artifacts.push_back(emit(opts.out_dir, file_base, "score", ssi_to_json(score)));
      // Wall time would break hash replay; strip it from the record.
      report.wall_seconds = 0.0;
      entry.artifacts.push_back(emit(opts.out_dir, file_base, "report",
                                     report_to_json(report)));
      if (opts.keep_streams) result.streams[idx] = std::move(stream);
    } catch (const std::exception& e) {
      entry.feasible = false;
      entry.note = e.what();
      entry.artifacts.clear();
    }
  });

  if (!opts.out_dir.empty()) {
    std::filesystem::path p = std::filesystem::path(opts.out_dir) / "manifest.json";
    save_manifest(result.manifest, p.string());
  }
  return result;
}

std::vector<CellPlan> cross_axes(const std::string& kind, const std::vector<GridAxis>& axes,
                                 const std::vector<std::uint64_t>& seeds) {
  for (const auto& axis : axes) {
    if (axis.levels.empty()) {
      throw std::invalid_argument("axis has no levels: " + axis.name);
    }
  }
  std::size_t cells = 1;
  for (const auto& axis : axes) cells *= axis.levels.size();

  std::vector<CellPlan> plan;
  std::vector<std::size_t> digits(axes.size(), 0);
  for (std::size_t c = 0; c < cells; ++c) {
    std::map<std::string, double> params;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      params[axes[a].name] = axes[a].levels[digits[a]];
    }
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      CellPlan cp;
      std::ostringstream name;
      name << kind << "_" << std::setw(4) << std::setfill('0') << c << "_s" << seeds[s];
      cp.name = name.str();
      cp.params = params;
      cp.seed = seeds[s];
      plan.push_back(std::move(cp));
    }
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++digits[a] < axes[a].levels.size()) break;
      digits[a] = 0;
    }
  }
  return plan;
}

}  // namespace

PipelineResult run_grid(const InputConfig& base, const std::vector<GridAxis>& axes,
                        const std::vector<std::uint64_t>& seeds,
                        const PipelineOptions& opts) {
  if (axes.empty()) throw std::invalid_argument("run_grid: no axes");
  if (seeds.empty()) throw std::invalid_argument("run_grid: no seeds");
  return run_cells("grid", base, cross_axes("grid", axes, seeds), opts);
}

PipelineResult run_sweep(const InputConfig& base, const std::vector<std::string>& dims,
                         const std::vector<std::uint64_t>& seeds,
                         const PipelineOptions& opts) {
  if (dims.empty() || dims.size() > 2) {
    throw std::invalid_argument("run_sweep: need one or two dimensions");
  }
  if (seeds.empty()) throw std::invalid_argument("run_sweep: no seeds");
  InputConfig centered = base;
  apply_centroid(centered);
  std::vector<GridAxis> axes;
  for (const auto& d : dims) axes.push_back(sweep_axis(d));
  return run_cells("sweep", centered, cross_axes("sweep", axes, seeds), opts);
}

PipelineResult run_scale(const InputConfig& base, const ScaleLevel& level,
                         const std::vector<std::uint64_t>& seeds,
                         const PipelineOptions& opts) {
  if (level.jobs <= 0 || level.horizon <= 0.0) {
    throw std::invalid_argument("run_scale: level needs positive jobs and horizon");
  }
  if (seeds.empty()) throw std::invalid_argument("run_scale: no seeds");
  InputConfig cfg = base;
  cfg.fixed_job_count = level.jobs;
  cfg.horizon = level.horizon;

  std::vector<CellPlan> plan;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    CellPlan cp;
    std::ostringstream name;
    name << "scale_" << level.name << "_s" << seeds[s];
    cp.name = name.str();
    cp.seed = seeds[s];
    plan.push_back(std::move(cp));
  }
  return run_cells("scale", cfg, plan, opts);
}

}  // namespace dynshop
