#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "dynshop/generator.hpp"
#include "dynshop/metrics.hpp"
#include "dynshop/pipeline.hpp"
#include "helpers.hpp"

using namespace dynshop;

namespace {

// Small but statistically honest: keeps the preset arrival rate at 40 jobs.
InputConfig tiny_base() {
  InputConfig cfg = base_config("balanced");
  cfg.fixed_job_count = 40;
  cfg.horizon = 1107.5 * 40.0 / 200.0;
  return cfg;
}

std::string hex16(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

TEST_CASE("plant presets are valid and the balanced one is load-neutral") {
  PlantSpec bal = balanced_plant();
  CHECK(validate_config(base_config("balanced")).ok());
  CHECK(bal.machines.size() == 10);
  CHECK(bal.groups.size() == 4);
  CHECK(bal.templates.size() == 3);
  CHECK(mean_work_per_job(bal) == doctest::Approx(39.0));

  // Each route loads groups at the capacity ratio 3:3:2:2, so expected group
  // utilizations coincide and the imbalance score is zero.
  for (const auto& t : bal.templates) {
    std::map<std::string, double> load;
    for (const auto& op : t.operations) load[op.group] += op.mean;
    CHECK(load.at("G0") == doctest::Approx(load.at("G1")));
    CHECK(load.at("G2") == doctest::Approx(load.at("G3")));
    CHECK(load.at("G0") / load.at("G2") == doctest::Approx(1.5));
  }

  PlantSpec mixed = mixed_plant();
  CHECK(validate_config(base_config("mixed")).ok());
  CHECK(mixed.machines[5].speed == doctest::Approx(1.5));
  CHECK(plant_preset("mixed").groups.size() == mixed.groups.size());
  CHECK_THROWS_AS(plant_preset("lopsided"), std::invalid_argument);
}

TEST_CASE("base configuration sits on the centroid and validates") {
  InputConfig cfg = base_config();
  CHECK(validate_config(cfg).ok());
  CHECK(cfg.horizon == doctest::Approx(1107.5));
  CHECK(cfg.fixed_job_count == 200);
  CHECK(cfg.targets.rho_global == doctest::Approx(0.85));
  CHECK(cfg.targets.tau == doctest::Approx(5.0));
  CHECK(cfg.targets.c_a2 == doctest::Approx(1.0));
  CHECK(cfg.targets.c_p2 == doctest::Approx(0.5));
  CHECK(cfg.targets.delta == doctest::Approx(0.05));
  CHECK(cfg.targets.chi_load == doctest::Approx(0.0));

  InputConfig other;
  other.targets.rho_global = 0.2;
  apply_centroid(other);
  CHECK(other.targets.rho_global == doctest::Approx(0.85));
}

TEST_CASE("reference grid axes enumerate the full factorial") {
  auto axes = reference_grid_axes();
  REQUIRE(axes.size() == 6);
  CHECK(axes[0].name == "utilization");
  CHECK(axes[0].levels == std::vector<double>{0.50, 0.65, 0.80, 0.90, 0.95});
  CHECK(axes[1].name == "tightness");
  CHECK(axes[1].levels.size() == 5);
  CHECK(axes[2].name == "arrival_scv");
  CHECK(axes[2].levels == std::vector<double>{0.25, 0.5, 1.0, 2.0, 4.0});
  CHECK(axes[3].name == "processing_scv");
  CHECK(axes[3].levels.size() == 4);
  CHECK(axes[4].name == "disruption");
  CHECK(axes[4].levels.front() == doctest::Approx(0.0));
  CHECK(axes[5].name == "imbalance");
  CHECK(axes[5].levels.size() == 3);

  std::size_t cells = 1;
  for (const auto& a : axes) cells *= a.levels.size();
  CHECK(cells == 6000);
}

TEST_CASE("sweep progressions cover the documented ranges") {
  GridAxis u = sweep_axis("utilization");
  CHECK(u.levels.size() == 30);
  CHECK(u.levels.front() == doctest::Approx(0.40));
  CHECK(u.levels.back() == doctest::Approx(0.98));

  GridAxis t = sweep_axis("tightness");
  CHECK(t.levels.size() == 22);
  CHECK(t.levels.front() == doctest::Approx(1.5));
  CHECK(t.levels.back() == doctest::Approx(12.0));

  GridAxis v = sweep_axis("variability");
  CHECK(v.levels.size() == 20);
  CHECK(v.levels.front() == doctest::Approx(0.1));
  CHECK(v.levels.back() == doctest::Approx(5.0));
  double ratio = std::pow(50.0, 1.0 / 19.0);
  for (std::size_t i = 0; i + 1 < v.levels.size(); ++i)
    CHECK(v.levels[i + 1] / v.levels[i] == doctest::Approx(ratio));

  GridAxis d = sweep_axis("disruption");
  CHECK(d.levels.size() == 26);
  CHECK(d.levels.back() == doctest::Approx(0.25));

  CHECK_THROWS_AS(sweep_axis("imbalance"), std::invalid_argument);
}

TEST_CASE("axis values land on the matching target dimension") {
  InputConfig cfg = base_config();
  apply_axis_value(cfg, "utilization", 0.6);
  CHECK(cfg.targets.rho_global == doctest::Approx(0.6));
  apply_axis_value(cfg, "tightness", 8.0);
  CHECK(cfg.targets.tau == doctest::Approx(8.0));
  apply_axis_value(cfg, "arrival_scv", 2.0);
  CHECK(cfg.targets.c_a2 == doctest::Approx(2.0));
  apply_axis_value(cfg, "processing_scv", 0.25);
  CHECK(cfg.targets.c_p2 == doctest::Approx(0.25));
  apply_axis_value(cfg, "variability", 3.0);
  CHECK(cfg.targets.c_a2 == doctest::Approx(3.0));
  CHECK(cfg.targets.c_p2 == doctest::Approx(3.0));
  apply_axis_value(cfg, "disruption", 0.12);
  CHECK(cfg.targets.delta == doctest::Approx(0.12));
  apply_axis_value(cfg, "imbalance", 0.3);
  CHECK(cfg.targets.chi_load == doctest::Approx(0.3));
  CHECK_THROWS_AS(apply_axis_value(cfg, "spin", 1.0), std::invalid_argument);
}

TEST_CASE("scale ladder holds the arrival rate constant") {
  const auto& levels = scale_levels();
  REQUIRE(levels.size() == 4);
  CHECK(levels[0].name == "small");
  CHECK(levels[0].jobs == 200);
  CHECK(levels[3].name == "extra-large");
  CHECK(levels[3].jobs == 1600);

  double lambda0 = levels[0].jobs / levels[0].horizon;
  for (const auto& level : levels) {
    double lambda = level.jobs / level.horizon;
    CHECK(std::abs(lambda - lambda0) / lambda0 < 0.01);
  }

  const ScaleLevel* large = find_scale_level("large");
  REQUIRE(large != nullptr);
  CHECK(large->jobs == 800);
  CHECK(find_scale_level("galactic") == nullptr);
}

TEST_CASE("grid runs produce a complete, replayable manifest") {
  InputConfig base = tiny_base();
  std::vector<GridAxis> axes{{"utilization", {0.6, 0.8}}, {"tightness", {3.0, 6.0}}};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  PipelineOptions opts;
  opts.calibrate = false;
  opts.keep_streams = true;

  PipelineResult res = run_grid(base, axes, seeds, opts);
  const RunManifest& m = res.manifest;
  CHECK(m.kind == "grid");
  CHECK(m.master_seed == 1);
  REQUIRE(m.entries.size() == 12);
  REQUIRE(res.streams.size() == 12);

  CHECK(m.entries[0].name == "grid_0000_s1");
  CHECK(m.entries[1].name == "grid_0000_s2");
  CHECK(m.entries[3].name == "grid_0001_s1");
  CHECK(m.entries[0].params.at("utilization") == doctest::Approx(0.6));
  CHECK(m.entries[0].params.at("tightness") == doctest::Approx(3.0));
  // The trailing axis spins fastest in the cell order.
  CHECK(m.entries[3].params.at("utilization") == doctest::Approx(0.6));
  CHECK(m.entries[3].params.at("tightness") == doctest::Approx(6.0));
  CHECK(m.entries[11].params.at("utilization") == doctest::Approx(0.8));

  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const ManifestEntry& e = m.entries[i];
    CHECK(e.feasible);
    CHECK(e.note.empty());
    CHECK(e.ssi > 0.0);
    REQUIRE(e.artifacts.size() == 4);
    CHECK(e.artifacts[0].name == "instance");
    CHECK(e.artifacts[1].name == "metrics");
    CHECK(e.artifacts[2].name == "score");
    CHECK(e.artifacts[3].name == "report");
    for (const auto& art : e.artifacts) {
      CHECK(art.hash.size() == 16);
      CHECK(art.path.empty());  // nothing persisted without out_dir
    }

    // The kept stream is the fingerprinted one, and its score matches.
    const EventStream& s = res.streams[i];
    CHECK(hex16(fnv1a64(canonical_dump(stream_to_json(s)))) == e.artifacts[0].hash);
    std::size_t arrivals = 0;
    for (const auto& ev : s.events)
      if (ev.kind == EventKind::JobArrival) ++arrivals;
    CHECK(arrivals == 40);
    SsiComponents score = ssi_components(observed_metrics(s));
    CHECK(score.score == doctest::Approx(e.ssi));
    CHECK(score.bucket == e.bucket);
  }

  PipelineResult replay = run_grid(base, axes, seeds, opts);
  CHECK(canonical_dump(manifest_to_json(replay.manifest)) ==
        canonical_dump(manifest_to_json(m)));

  SUBCASE("an out-of-range level is recorded infeasible, not fatal") {
    std::vector<GridAxis> bad{{"utilization", {0.8, 1.5}}};
    PipelineResult r2 = run_grid(base, bad, {1}, opts);
    REQUIRE(r2.manifest.entries.size() == 2);
    CHECK(r2.manifest.entries[0].feasible);
    const ManifestEntry& sick = r2.manifest.entries[1];
    CHECK_FALSE(sick.feasible);
    CHECK_FALSE(sick.note.empty());
    CHECK(sick.artifacts.empty());
    json j = manifest_to_json(r2.manifest);
    CHECK_FALSE(j["entries"][1].contains("ssi"));
    CHECK(j["entries"][1].contains("note"));
  }

  SUBCASE("degenerate plans are rejected") {
    CHECK_THROWS_AS(run_grid(base, {}, seeds, opts), std::invalid_argument);
    CHECK_THROWS_AS(run_grid(base, axes, {}, opts), std::invalid_argument);
    CHECK_THROWS_AS(run_grid(base, {{"utilization", {}}}, seeds, opts),
                    std::invalid_argument);
  }
}

TEST_CASE("grid artifacts persist to disk with matching fingerprints") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "dynshop_pipeline_test";
  fs::remove_all(dir);

  InputConfig base = tiny_base();
  PipelineOptions opts;
  opts.calibrate = false;
  opts.out_dir = dir.string();

  PipelineResult res = run_grid(base, {{"utilization", {0.7}}}, {4}, opts);
  REQUIRE(res.manifest.entries.size() == 1);
  const ManifestEntry& e = res.manifest.entries[0];
  REQUIRE(e.artifacts.size() == 4);
  for (const auto& art : e.artifacts) {
    REQUIRE_FALSE(art.path.empty());
    CHECK(fs::exists(art.path));
    CHECK(hex16(fnv1a64(read_text_file(art.path))) == art.hash);
  }
  fs::path manifest_path = dir / "manifest.json";
  REQUIRE(fs::exists(manifest_path));
  CHECK(read_text_file(manifest_path.string()) ==
        canonical_dump(manifest_to_json(res.manifest)));
  fs::remove_all(dir);
}

TEST_CASE("sweeps stay on the centroid except for the swept dimension") {
  InputConfig base = tiny_base();
  base.targets.rho_global = 0.55;  // overridden by the centroid
  PipelineOptions opts;
  opts.calibrate = false;

  PipelineResult res = run_sweep(base, {"disruption"}, {7}, opts);
  const RunManifest& m = res.manifest;
  CHECK(m.kind == "sweep");
  GridAxis axis = sweep_axis("disruption");
  REQUIRE(m.entries.size() == axis.levels.size());
  for (std::size_t i = 0; i < m.entries.size(); ++i) {
    const ManifestEntry& e = m.entries[i];
    CHECK(e.params.size() == 1);
    CHECK(e.params.at("disruption") == doctest::Approx(axis.levels[i]));
    CHECK(e.feasible);
  }

  CHECK_THROWS_AS(run_sweep(base, {}, {7}, opts), std::invalid_argument);
  CHECK_THROWS_AS(
      run_sweep(base, {"utilization", "tightness", "disruption"}, {7}, opts),
      std::invalid_argument);
  CHECK_THROWS_AS(run_sweep(base, {"utilization"}, {}, opts), std::invalid_argument);
}

TEST_CASE("scale runs pin the job count and horizon of the level") {
  InputConfig base = base_config("balanced");
  ScaleLevel tiny{"tiny", 30, 166.1};
  PipelineOptions opts;
  opts.calibrate = false;
  opts.keep_streams = true;

  PipelineResult res = run_scale(base, tiny, {1, 2}, opts);
  const RunManifest& m = res.manifest;
  CHECK(m.kind == "scale");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].name == "scale_tiny_s1");
  CHECK(m.entries[1].name == "scale_tiny_s2");
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(m.entries[i].feasible);
    const EventStream& s = res.streams[i];
    CHECK(s.horizon == doctest::Approx(166.1));
    std::size_t arrivals = 0;
    for (const auto& ev : s.events)
      if (ev.kind == EventKind::JobArrival) ++arrivals;
    CHECK(arrivals == 30);
  }
  // Seeds produce distinct instances.
  CHECK(m.entries[0].artifacts[0].hash != m.entries[1].artifacts[0].hash);

  CHECK_THROWS_AS(run_scale(base, {"zero", 0, 100.0}, {1}, opts),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_scale(base, tiny, {}, opts), std::invalid_argument);
}

TEST_CASE("manifest serialization round-trips through disk") {
  RunManifest m;
  m.kind = "grid";
  m.master_seed = 9;
  ManifestEntry good;
  good.name = "grid_0000_s9";
  good.params = {{"utilization", 0.8}};
  good.seed = 9;
  good.ssi = 21.5;
  good.bucket = "moderate";
  good.final_l2 = 0.04;
  good.relaxed = true;
  good.strict = false;
  good.artifacts.push_back({"instance", "", "00000000deadbeef"});
  ManifestEntry bad;
  bad.name = "grid_0001_s9";
  bad.feasible = false;
  bad.note = "targets.rho_global: must lie in (0, 1)";
  m.entries = {good, bad};

  json j = manifest_to_json(m);
  CHECK(j["schema_version"] == kSchemaVersion);
  CHECK(j["kind"] == "grid");
  CHECK(j["master_seed"] == 9);
  CHECK(j["entries"][0]["ssi"] == doctest::Approx(21.5));
  CHECK(j["entries"][0]["artifacts"][0]["hash"] == "00000000deadbeef");
  CHECK_FALSE(j["entries"][0].contains("note"));
  CHECK_FALSE(j["entries"][1].contains("relaxed"));
  CHECK(j["entries"][1]["note"] == bad.note);

  namespace fs = std::filesystem;
  fs::path path = fs::temp_directory_path() / "dynshop_manifest_test.json";
  save_manifest(m, path.string());
  CHECK(json::parse(read_text_file(path.string())) == j);
  fs::remove(path);
}
