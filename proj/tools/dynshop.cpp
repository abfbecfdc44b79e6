// Command-line front end: generation, calibration, scoring, simulation and
// the reproduction suites, wired for scripted pipelines.
//
// Exit codes: 0 ok, 2 validation/usage error, 3 calibration did not converge
// (best-effort outputs still written), 4 verification failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "dynshop/evaluation.hpp"
#include "dynshop/generator.hpp"
#include "dynshop/pcal.hpp"
#include "dynshop/pipeline.hpp"

namespace {

using namespace dynshop;

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kNoConverge = 3;
constexpr int kVerifyFail = 4;

// Relative inputs fall back to $DYNSHOP_CONFIG_DIR when not found locally.
std::string resolve_input(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::exists(path) || fs::path(path).is_absolute()) return path;
  const char* dir = std::getenv("DYNSHOP_CONFIG_DIR");
  if (dir != nullptr) {
    fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return path;
}

json load_json_file(const std::string& path) {
  return json::parse(read_text_file(resolve_input(path)));
}

struct Output {
  std::string format = "text";  // "text" | "json"

  void emit(const json& payload, const std::string& text) const {
    if (format == "json") {
      std::cout << canonical_dump(payload);
    } else {
      std::cout << text << "\n";
    }
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw std::invalid_argument("no seeds in: " + csv);
  return seeds;
}

// "name" picks the reference levels; "name=v1,v2" supplies custom ones.
GridAxis parse_axis(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos) {
    for (auto& axis : reference_grid_axes()) {
      if (axis.name == spec) return axis;
    }
    throw std::invalid_argument("axis has no reference levels: " + spec);
  }
  GridAxis axis;
  axis.name = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) axis.levels.push_back(std::stod(item));
  }
  if (axis.levels.empty()) throw std::invalid_argument("axis without levels: " + spec);
  return axis;
}

InputConfig load_config_arg(const std::string& path) {
  return config_from_json(load_json_file(path));
}

EventStream load_stream_arg(const std::string& path) {
  return stream_from_json(load_json_file(path));
}

TargetMetrics merge_targets(const InputConfig& base, const std::string& targets_path) {
  if (targets_path.empty()) return base.targets;
  json cfg_json = config_to_json(base);
  json patch = load_json_file(targets_path);
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    cfg_json["targets"][it.key()] = it.value();
  }
  return config_from_json(cfg_json).targets;
}

int report_feasibility(const RunManifest& m, const Output& out) {
  std::size_t feasible = 0;
  for (const auto& e : m.entries) feasible += e.feasible ? 1 : 0;
  json j;
  j["kind"] = m.kind;
  j["cells"] = m.entries.size();
  j["feasible"] = feasible;
  std::ostringstream text;
  text << m.kind << ": " << feasible << "/" << m.entries.size() << " cells feasible";
  out.emit(j, text.str());
  return kOk;
}

// Interactive line protocol: one observation per line out, one action per
// line in, either {"job":..,"op":..,"machine":..} or {"pass":true}.
AgentFn make_stdio_agent() {
  return [](const Observation& obs) -> std::optional<Action> {
    std::cout << observation_to_json(obs).dump() << "\n" << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) {
      throw std::runtime_error("stdio agent: input stream closed");
    }
    json j = json::parse(line);
    if (j.contains("pass") && j.at("pass").get<bool>()) return std::nullopt;
    Action a;
    a.job = j.at("job").get<std::int64_t>();
    a.op_index = j.at("op").get<int>();
    a.machine = j.at("machine").get<int>();
    return a;
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dynshop: calibrated dynamic job shop benchmark toolkit\n"
      "Relative input paths also resolve against $DYNSHOP_CONFIG_DIR."};
  app.require_subcommand(1);

  Output out;
  app.add_option("--format", out.format, "Output format: text or json")
      ->check(CLI::IsMember({"text", "json"}));

  // generate ---------------------------------------------------------------
  auto* c_gen = app.add_subcommand("generate", "Generate an instance from a config");
  std::string gen_config;
  std::string gen_out;
  std::optional<std::uint64_t> gen_seed;
  c_gen->add_option("--config", gen_config, "Input config json")->required();
  c_gen->add_option("--out", gen_out, "Instance output path")->required();
  c_gen->add_option("--seed", gen_seed, "Override the master seed");

  // metrics ----------------------------------------------------------------
  auto* c_met = app.add_subcommand("metrics", "Observed driver metrics of an instance");
  std::string met_instance;
  std::string met_trajectory;
  std::string met_out;
  c_met->add_option("--instance", met_instance, "Instance json")->required();
  c_met->add_option("--trajectory", met_trajectory, "Optional trajectory jsonl");
  c_met->add_option("--out", met_out, "Metrics output path");

  // score ------------------------------------------------------------------
  auto* c_score = app.add_subcommand("score", "Stress index of an instance");
  std::string score_instance;
  std::string score_metrics;
  std::string score_out;
  c_score->add_option("--instance", score_instance, "Instance json");
  c_score->add_option("--metrics", score_metrics, "Precomputed metrics json");
  c_score->add_option("--out", score_out, "Score output path");

  // calibrate ----------------------------------------------------------------
  auto* c_cal = app.add_subcommand("calibrate", "Calibrate an instance toward targets");
  std::string cal_instance;
  std::string cal_targets;
  std::string cal_out;
  std::string cal_report;
  std::string cal_mode = "sesc";
  std::uint64_t cal_seed = 0;
  int cal_iterations = 0;
  int cal_population = 0;
  int cal_generations = 0;
  int cal_jobs = 1;
  c_cal->add_option("--instance", cal_instance, "Instance json")->required();
  c_cal->add_option("--targets", cal_targets, "Target overrides (json object)");
  c_cal->add_option("--out", cal_out, "Calibrated instance output")->required();
  c_cal->add_option("--report", cal_report, "Calibration report output");
  c_cal->add_option("--mode", cal_mode, "sesc, moo or hybrid")
      ->check(CLI::IsMember({"sesc", "moo", "hybrid"}));
  c_cal->add_option("--seed", cal_seed, "Calibration seed");
  c_cal->add_option("--iterations", cal_iterations, "Greedy iteration cap");
  c_cal->add_option("--population", cal_population, "Search population size");
  c_cal->add_option("--generations", cal_generations, "Search generations");
  c_cal->add_option("--jobs", cal_jobs, "Parallel evaluations");

  // simulate -----------------------------------------------------------------
  auto* c_sim = app.add_subcommand("simulate", "Run one scheduling episode");
  std::string sim_instance;
  std::string sim_agent = "pdr:SPT+LIT";
  std::string sim_out;
  std::string sim_gantt;
  int sim_level = 1;
  c_sim->add_option("--instance", sim_instance, "Instance json")->required();
  c_sim->add_option("--agent", sim_agent, "pdr:<RULE>, random[:seed=N] or stdio");
  c_sim->add_option("--out", sim_out, "Trajectory output (jsonl)");
  c_sim->add_option("--gantt", sim_gantt, "Machine-keyed schedule output");
  c_sim->add_option("--level", sim_level, "Observation level 1..3")
      ->check(CLI::Range(1, 3));

  // verify -------------------------------------------------------------------
  auto* c_ver = app.add_subcommand("verify", "Check a trajectory against its instance");
  std::string ver_trajectory;
  std::string ver_instance;
  c_ver->add_option("--trajectory", ver_trajectory, "Trajectory jsonl")->required();
  c_ver->add_option("--instance", ver_instance, "Instance json")->required();

  // evaluate -----------------------------------------------------------------
  auto* c_eval = app.add_subcommand("evaluate", "Run an instances x agents x seeds matrix");
  std::string eval_matrix;
  std::string eval_out;
  int eval_jobs = 1;
  c_eval->add_option("--matrix", eval_matrix,
                     "Manifest json: {instances:[paths], agents:[specs], seeds:[ints]}")
      ->required();
  c_eval->add_option("--out", eval_out, "Matrix output path");
  c_eval->add_option("--jobs", eval_jobs, "Parallel cells");

  // subset -------------------------------------------------------------------
  auto* c_sub = app.add_subcommand("subset", "Coverage-maximizing instance subset");
  std::string sub_features;
  std::string sub_out;
  std::size_t sub_k = 0;
  c_sub->add_option("--features", sub_features,
                    "Feature json: [[...],...] or {ids:[...], features:[[...]]}")
      ->required();
  c_sub->add_option("-k,--count", sub_k, "Subset size")->required();
  c_sub->add_option("--out", sub_out, "Selection output path");

  // pipeline suites ------------------------------------------------------------
  std::string pipe_out_dir;
  std::string pipe_seeds = "1";
  std::string pipe_plant = "balanced";
  int pipe_jobs = 1;
  bool pipe_no_calibrate = false;
  auto add_pipeline_options = [&](CLI::App* cmd) {
    cmd->add_option("--out", pipe_out_dir, "Artifact directory")->required();
    cmd->add_option("--seeds", pipe_seeds, "Comma-separated seeds");
    cmd->add_option("--plant", pipe_plant, "Plant preset: balanced or mixed");
    cmd->add_option("--jobs", pipe_jobs, "Parallel cells");
    cmd->add_flag("--no-calibrate", pipe_no_calibrate, "Skip the calibration pass");
  };

  auto* c_grid = app.add_subcommand("grid", "Factorial target grid, generated and scored");
  std::vector<std::string> grid_axes;
  c_grid->add_option("--axis", grid_axes,
                     "Axis name (reference levels) or name=v1,v2,... (repeatable)")
      ->required();
  add_pipeline_options(c_grid);

  auto* c_sweep = app.add_subcommand("sweep", "Centroid-anchored parameter sweep");
  std::vector<std::string> sweep_dims;
  c_sweep->add_option("--dim", sweep_dims,
                      "utilization, variability, tightness or disruption (max 2)")
      ->required();
  add_pipeline_options(c_sweep);

  auto* c_scale = app.add_subcommand("scale", "Fixed-count generation at a scale level");
  std::string scale_level = "small";
  int scale_jobs_count = 0;
  double scale_horizon = 0.0;
  c_scale->add_option("--level", scale_level, "small, medium, large or extra-large");
  c_scale->add_option("--jobs-count", scale_jobs_count, "Custom N_J (with --horizon)");
  c_scale->add_option("--horizon", scale_horizon, "Custom horizon");
  add_pipeline_options(c_scale);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(c_gen)) {
      InputConfig cfg = load_config_arg(gen_config);
      if (gen_seed) cfg.master_seed = *gen_seed;
      auto check = validate_config(cfg);
      if (!check.ok()) {
        std::cerr << "invalid config:\n" << check.summary() << "\n";
        return kUsage;
      }
      EventStream stream = generate_instance(cfg);
      save_stream(stream, gen_out);
      json j;
      j["events"] = stream.events.size();
      j["jobs"] = stream.jobs().size();
      j["horizon"] = stream.horizon;
      j["out"] = gen_out;
      std::ostringstream text;
      text << "generated " << stream.jobs().size() << " jobs, " << stream.events.size()
           << " events -> " << gen_out;
      out.emit(j, text.str());
      return kOk;
    }

    if (app.got_subcommand(c_met)) {
      EventStream stream = load_stream_arg(met_instance);
      ObservedMetrics m;
      if (!met_trajectory.empty()) {
        Trajectory traj = load_trajectory(resolve_input(met_trajectory));
        m = observed_metrics(stream, &traj);
      } else {
        m = observed_metrics(stream);
      }
      json j = metrics_to_json(m);
      if (!met_out.empty()) write_text_file(met_out, canonical_dump(j));
      std::ostringstream text;
      text << "rho=" << m.rho_global << " c_a2=" << m.c_a2 << " c_p2=" << m.c_p2
           << " tau=" << m.tau << " chi=" << m.chi_load << " delta=" << m.delta
           << " eps_bn=" << m.eps_bn;
      out.emit(j, text.str());
      return kOk;
    }

    if (app.got_subcommand(c_score)) {
      if (score_instance.empty() == score_metrics.empty()) {
        std::cerr << "score: pass exactly one of --instance / --metrics\n";
        return kUsage;
      }
      ObservedMetrics m;
      if (!score_instance.empty()) {
        m = observed_metrics(load_stream_arg(score_instance));
      } else {
        m = metrics_from_json(load_json_file(score_metrics));
      }
      SsiComponents c = ssi_components(m);
      json j = ssi_to_json(c);
      if (!score_out.empty()) write_text_file(score_out, canonical_dump(j));
      std::ostringstream text;
      text << "ssi=" << c.score << " (" << c.bucket << ")";
      out.emit(j, text.str());
      return kOk;
    }

    if (app.got_subcommand(c_cal)) {
      EventStream stream = load_stream_arg(cal_instance);
      TargetMetrics targets = merge_targets(stream.config, cal_targets);
      CalibratorConfig cc;
      if (cal_iterations > 0) cc.max_iterations = cal_iterations;

      EventStream calibrated;
      CalibrationReport report;
      if (cal_mode == "sesc") {
        std::tie(calibrated, report) = calibrate(stream, targets, cc, cal_seed);
      } else {
        MooConfig mc;
        mc.mode = cal_mode == "hybrid" ? MooMode::Hybrid5D : MooMode::Extended12D;
        if (cal_population > 0) mc.population = cal_population;
        if (cal_generations > 0) mc.generations = cal_generations;
        mc.threads = cal_jobs;
        std::tie(calibrated, report) = calibrate_moo(stream, targets, mc, cc, cal_seed);
      }
      save_stream(calibrated, cal_out);
      if (!cal_report.empty()) {
        write_text_file(cal_report, canonical_dump(report_to_json(report)));
      }
      json j = report_to_json(report);
      std::ostringstream text;
      text << cal_mode << ": l2 " << report.initial_l2 << " -> " << report.final_l2
           << (report.relaxed ? " (converged)" : " (not converged)");
      out.emit(j, text.str());
      return report.relaxed ? kOk : kNoConverge;
    }

    if (app.got_subcommand(c_sim)) {
      EventStream stream = load_stream_arg(sim_instance);
      bool stdio = sim_agent == "stdio";
      AgentFn agent = stdio ? make_stdio_agent() : make_agent(sim_agent);
      Trajectory traj = run_episode(stream, agent, obs_level_from_int(sim_level), sim_agent);
      if (!sim_out.empty()) save_trajectory(traj, sim_out);
      if (!sim_gantt.empty()) {
        write_text_file(sim_gantt, canonical_dump(trajectory_to_gantt(traj)));
      }
      json j;
      j["agent"] = sim_agent;
      j["makespan"] = traj.makespan;
      j["records"] = traj.records.size();
      std::ostringstream text;
      text << sim_agent << ": makespan " << traj.makespan << ", " << traj.records.size()
           << " operations";
      // The stdout line protocol belongs to the agent in stdio mode.
      if (stdio) {
        std::cerr << text.str() << "\n";
      } else {
        out.emit(j, text.str());
      }
      return kOk;
    }

    if (app.got_subcommand(c_ver)) {
      Trajectory traj = load_trajectory(resolve_input(ver_trajectory));
      EventStream stream = load_stream_arg(ver_instance);
      VerificationReport rep = verify(traj, stream);
      json j;
      j["ok"] = rep.ok();
      json v = json::array();
      for (const auto& viol : rep.violations) {
        v.push_back({{"path", viol.path}, {"message", viol.message}});
      }
      j["violations"] = std::move(v);
      out.emit(j, rep.ok() ? "ok" : rep.summary());
      return rep.ok() ? kOk : kVerifyFail;
    }

    if (app.got_subcommand(c_eval)) {
      json spec = load_json_file(eval_matrix);
      std::vector<std::pair<std::string, EventStream>> instances;
      for (const auto& p : spec.at("instances")) {
        std::string path = p.get<std::string>();
        instances.emplace_back(path, load_stream_arg(path));
      }
      std::vector<std::string> agents;
      for (const auto& a : spec.at("agents")) agents.push_back(a.get<std::string>());
      std::vector<std::uint64_t> seeds;
      for (const auto& s : spec.at("seeds")) seeds.push_back(s.get<std::uint64_t>());
      ObsLevel level = obs_level_from_int(spec.value("level", 1));

      ExperimentMatrix matrix = run_matrix(instances, agents, seeds, eval_jobs, level);
      json j = matrix_to_json(matrix);
      if (!eval_out.empty()) write_text_file(eval_out, canonical_dump(j));
      std::size_t ok_cells = 0;
      for (const auto& c : matrix.cells) ok_cells += c.verified ? 1 : 0;
      std::ostringstream text;
      text << ok_cells << "/" << matrix.cells.size() << " cells verified";
      out.emit(j, text.str());
      return kOk;
    }

    if (app.got_subcommand(c_sub)) {
      json spec = load_json_file(sub_features);
      std::vector<std::vector<double>> features;
      std::vector<std::string> ids;
      const json& rows = spec.is_array() ? spec : spec.at("features");
      for (const auto& row : rows) {
        features.push_back(row.get<std::vector<double>>());
      }
      if (spec.is_object() && spec.contains("ids")) {
        ids = spec.at("ids").get<std::vector<std::string>>();
      }
      auto picked = kcenter_subset(features, sub_k);
      double radius = kcenter_radius(features, picked);
      json j;
      j["selected_indices"] = picked;
      if (!ids.empty()) {
        json names = json::array();
        for (std::size_t i : picked) names.push_back(ids.at(i));
        j["selected"] = std::move(names);
      }
      j["radius"] = radius;
      if (!sub_out.empty()) write_text_file(sub_out, canonical_dump(j));
      std::ostringstream text;
      text << "selected " << picked.size() << " of " << features.size()
           << ", radius " << radius;
      out.emit(j, text.str());
      return kOk;
    }

    if (app.got_subcommand(c_grid) || app.got_subcommand(c_sweep) ||
        app.got_subcommand(c_scale)) {
      PipelineOptions popts;
      popts.out_dir = pipe_out_dir;
      popts.calibrate = !pipe_no_calibrate;
      popts.threads = pipe_jobs;
      InputConfig base = base_config(pipe_plant);
      auto seeds = parse_seeds(pipe_seeds);

      PipelineResult result;
      if (app.got_subcommand(c_grid)) {
        std::vector<GridAxis> axes;
        for (const auto& spec : grid_axes) axes.push_back(parse_axis(spec));
        result = run_grid(base, axes, seeds, popts);
      } else if (app.got_subcommand(c_sweep)) {
        result = run_sweep(base, sweep_dims, seeds, popts);
      } else {
        ScaleLevel level;
        if (scale_jobs_count > 0 || scale_horizon > 0.0) {
          if (scale_jobs_count <= 0 || scale_horizon <= 0.0) {
            std::cerr << "scale: custom levels need both --jobs-count and --horizon\n";
            return kUsage;
          }
          level = {"custom", scale_jobs_count, scale_horizon};
        } else {
          const ScaleLevel* named = find_scale_level(scale_level);
          if (named == nullptr) {
            std::cerr << "unknown scale level: " << scale_level << "\n";
            return kUsage;
          }
          level = *named;
        }
        result = run_scale(base, level, seeds, popts);
      }
      return report_feasibility(result.manifest, out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
