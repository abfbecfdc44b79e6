#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dynshop/evaluation.hpp"
#include "dynshop/generator.hpp"
#include "dynshop/metrics.hpp"
#include "helpers.hpp"

using namespace dynshop;
namespace fs = std::filesystem;

namespace {

// Every file this suite touches lives in one scratch directory.
const fs::path& work_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "dynshop_cli_work";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string at(const std::string& name) { return (work_dir() / name).string(); }

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  fs::path out = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
  fs::path err = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = env_prefix + DYNSHOP_CLI_PATH + " " + args + " > " +
                    out.string() + " 2> " + err.string();
  int status = std::system(cmd.c_str());
  CliResult res;
  if (WIFEXITED(status)) res.code = WEXITSTATUS(status);
  if (fs::exists(out)) res.out = read_text_file(out.string());
  if (fs::exists(err)) res.err = read_text_file(err.string());
  return res;
}

// Small two-group shop; cheap enough that every subcommand run stays fast.
std::string write_config(const std::string& name, std::uint64_t seed) {
  InputConfig cfg = test::config_for(test::two_group_plant(), 300.0);
  cfg.fixed_job_count = 12;
  cfg.master_seed = seed;
  std::string path = at(name);
  write_text_file(path, canonical_dump(config_to_json(cfg)));
  return path;
}

// Generates once through the CLI and returns the instance path.
const std::string& shared_instance() {
  static const std::string path = [] {
    std::string cfg = write_config("base_config.json", 42);
    std::string inst = at("base_instance.json");
    CliResult r = run_cli("generate --config " + cfg + " --out " + inst);
    REQUIRE(r.code == 0);
    return inst;
  }();
  return path;
}

}  // namespace

TEST_CASE("generate: writes an instance, honors seeds, rejects bad configs") {
  std::string cfg = write_config("gen_config.json", 42);
  std::string inst = at("gen_a.json");
  CliResult r = run_cli("generate --config " + cfg + " --out " + inst);
  CHECK(r.code == 0);
  CHECK(r.out.find("generated 12 jobs") != std::string::npos);
  REQUIRE(fs::exists(inst));
  EventStream s = stream_from_json(json::parse(read_text_file(inst)));
  CHECK(s.jobs().size() == 12);

  SUBCASE("json format reports counts") {
    CliResult j = run_cli("--format json generate --config " + cfg + " --out " +
                          at("gen_b.json"));
    REQUIRE(j.code == 0);
    json payload = json::parse(j.out);
    CHECK(payload["jobs"] == 12);
    CHECK(payload["events"] == s.events.size());
    CHECK(payload["horizon"] == doctest::Approx(300.0));
  }

  SUBCASE("same seed, same bytes; new seed, new instance") {
    run_cli("generate --config " + cfg + " --seed 5 --out " + at("gen_s5.json"));
    run_cli("generate --config " + cfg + " --seed 5 --out " + at("gen_s5b.json"));
    run_cli("generate --config " + cfg + " --seed 6 --out " + at("gen_s6.json"));
    CHECK(read_text_file(at("gen_s5.json")) == read_text_file(at("gen_s5b.json")));
    CHECK(read_text_file(at("gen_s5.json")) != read_text_file(at("gen_s6.json")));
  }

  SUBCASE("invalid target values exit with the usage code") {
    InputConfig bad = test::config_for(test::two_group_plant(), 300.0);
    bad.targets.rho_global = 1.5;
    write_text_file(at("bad_config.json"), canonical_dump(config_to_json(bad)));
    CliResult b = run_cli("generate --config " + at("bad_config.json") +
                          " --out " + at("never.json"));
    CHECK(b.code == 2);
    CHECK(b.err.find("invalid config") != std::string::npos);
    CHECK_FALSE(fs::exists(at("never.json")));
  }

  SUBCASE("a missing input file exits with the usage code") {
    CliResult b = run_cli("generate --config " + at("ghost.json") + " --out " +
                          at("never2.json"));
    CHECK(b.code == 2);
  }
}

TEST_CASE("metrics: observed drivers to stdout and disk") {
  CliResult r = run_cli("metrics --instance " + shared_instance());
  CHECK(r.code == 0);
  CHECK(r.out.find("rho=") != std::string::npos);

  CliResult j = run_cli("--format json metrics --instance " + shared_instance() +
                        " --out " + at("metrics.json"));
  REQUIRE(j.code == 0);
  json payload = json::parse(j.out);
  EventStream s = stream_from_json(json::parse(read_text_file(shared_instance())));
  ObservedMetrics m = observed_metrics(s);
  CHECK(payload["rho_global"] == doctest::Approx(m.rho_global));
  CHECK(payload["tau"] == doctest::Approx(m.tau));
  CHECK(read_text_file(at("metrics.json")) == canonical_dump(payload));
}

TEST_CASE("score: exactly one input source") {
  CliResult from_instance =
      run_cli("--format json score --instance " + shared_instance());
  REQUIRE(from_instance.code == 0);
  json a = json::parse(from_instance.out);
  CHECK(a.contains("score"));
  CHECK(a.contains("bucket"));

  REQUIRE(run_cli("metrics --instance " + shared_instance() + " --out " +
                  at("score_metrics.json"))
              .code == 0);
  CliResult from_metrics =
      run_cli("--format json score --metrics " + at("score_metrics.json"));
  REQUIRE(from_metrics.code == 0);
  CHECK(json::parse(from_metrics.out)["score"] == a["score"]);

  CHECK(run_cli("score").code == 2);
  CHECK(run_cli("score --instance " + shared_instance() + " --metrics " +
                at("score_metrics.json"))
            .code == 2);
}

TEST_CASE("calibrate: convergence exits 0, a stuck run exits 3 with output") {
  EventStream s = stream_from_json(json::parse(read_text_file(shared_instance())));
  ObservedMetrics m = observed_metrics(s);
  json reachable = {{"rho_global", m.rho_global}, {"c_a2", m.c_a2},
                    {"c_p2", m.c_p2},             {"tau", m.tau},
                    {"chi_load", m.chi_load},     {"delta", m.delta}};
  write_text_file(at("targets_observed.json"), canonical_dump(reachable));

  CliResult ok = run_cli("--format json calibrate --instance " + shared_instance() +
                         " --targets " + at("targets_observed.json") + " --out " +
                         at("cal_ok.json") + " --report " + at("cal_ok_report.json"));
  CHECK(ok.code == 0);
  json report = json::parse(ok.out);
  CHECK(report["converged"] == true);
  CHECK(fs::exists(at("cal_ok.json")));
  CHECK(json::parse(read_text_file(at("cal_ok_report.json"))) == report);

  SUBCASE("an unreachable target is best-effort, not silent") {
    write_text_file(at("targets_far.json"), canonical_dump(json{{"rho_global", 0.97}}));
    CliResult stuck = run_cli("calibrate --instance " + shared_instance() +
                              " --targets " + at("targets_far.json") +
                              " --iterations 1 --out " + at("cal_stuck.json"));
    CHECK(stuck.code == 3);
    CHECK(stuck.out.find("not converged") != std::string::npos);
    CHECK(fs::exists(at("cal_stuck.json")));  // best-effort stream still lands
  }

  SUBCASE("search modes run end to end") {
    CliResult moo = run_cli("--format json calibrate --instance " + shared_instance() +
                            " --targets " + at("targets_observed.json") +
                            " --mode hybrid --population 6 --generations 2" +
                            " --seed 3 --out " + at("cal_hybrid.json"));
    REQUIRE((moo.code == 0 || moo.code == 3));
    CHECK(json::parse(moo.out)["mode"] == "hybrid-5d");
    CHECK(fs::exists(at("cal_hybrid.json")));
  }
}

TEST_CASE("simulate and verify: a clean episode passes, a doctored one fails") {
  std::string traj = at("episode.jsonl");
  CliResult r = run_cli("--format json simulate --instance " + shared_instance() +
                        " --agent pdr:SPT+LIT --out " + traj + " --gantt " +
                        at("episode_gantt.json"));
  REQUIRE(r.code == 0);
  json info = json::parse(r.out);
  CHECK(info["agent"] == "pdr:SPT+LIT");
  CHECK(info["makespan"].get<double>() > 0.0);
  CHECK(info["records"] == 24);  // 12 jobs, two ops each

  json gantt = json::parse(read_text_file(at("episode_gantt.json")));
  CHECK(gantt.contains("machines"));

  CliResult ver = run_cli("verify --trajectory " + traj + " --instance " +
                          shared_instance());
  CHECK(ver.code == 0);
  CHECK(ver.out == "ok\n");

  SUBCASE("a tampered record flips the exit code to 4") {
    Trajectory t = load_trajectory(traj);
    t.records[0].workload += 3.0;
    save_trajectory(t, at("episode_bad.jsonl"));
    CliResult bad = run_cli("--format json verify --trajectory " +
                            at("episode_bad.jsonl") + " --instance " +
                            shared_instance());
    CHECK(bad.code == 4);
    json payload = json::parse(bad.out);
    CHECK(payload["ok"] == false);
    CHECK_FALSE(payload["violations"].empty());
  }

  SUBCASE("an unknown agent spec is a usage error") {
    CHECK(run_cli("simulate --instance " + shared_instance() + " --agent pdr:XXX")
              .code == 2);
  }
}

TEST_CASE("evaluate: the matrix manifest drives instances x agents x seeds") {
  json manifest = {{"instances", {shared_instance()}},
                   {"agents", {"pdr:SPT+LIT", "random"}},
                   {"seeds", {1, 2}}};
  write_text_file(at("matrix_spec.json"), canonical_dump(manifest));

  CliResult r = run_cli("--format json evaluate --matrix " + at("matrix_spec.json") +
                        " --out " + at("matrix.json"));
  REQUIRE(r.code == 0);
  json payload = json::parse(r.out);
  REQUIRE(payload["cells"].size() == 4);
  for (const auto& cell : payload["cells"]) CHECK(cell["verified"] == true);
  CHECK(json::parse(read_text_file(at("matrix.json"))) == payload);

  CliResult text = run_cli("evaluate --matrix " + at("matrix_spec.json"));
  CHECK(text.out.find("4/4 cells verified") != std::string::npos);
}

TEST_CASE("subset: coverage picks with optional ids") {
  write_text_file(at("features_plain.json"), "[[0.0],[1.0],[2.0]]");
  CliResult r =
      run_cli("--format json subset --features " + at("features_plain.json") + " -k 2");
  REQUIRE(r.code == 0);
  json payload = json::parse(r.out);
  CHECK(payload["selected_indices"] == json::array({2, 0}));
  CHECK(payload.contains("radius"));

  json named = {{"ids", {"a", "b", "c"}}, {"features", {{0.0}, {1.0}, {2.0}}}};
  write_text_file(at("features_named.json"), canonical_dump(named));
  CliResult n = run_cli("--format json subset --features " + at("features_named.json") +
                        " --count 2 --out " + at("subset.json"));
  REQUIRE(n.code == 0);
  CHECK(json::parse(n.out)["selected"] == json::array({"c", "a"}));
  CHECK(json::parse(read_text_file(at("subset.json")))["selected_indices"] ==
        json::array({2, 0}));

  CHECK(run_cli("subset --features " + at("features_plain.json") + " -k 9").code == 2);
}

TEST_CASE("suite subcommands: grid, sweep and scale emit manifests") {
  std::string grid_dir = at("suite_grid");
  CliResult g = run_cli("grid --axis utilization=0.6,0.8 --seeds 1 --no-calibrate --out " +
                        grid_dir);
  REQUIRE(g.code == 0);
  CHECK(g.out.find("grid: 2/2 cells feasible") != std::string::npos);
  json gm = json::parse(read_text_file(grid_dir + "/manifest.json"));
  CHECK(gm["kind"] == "grid");
  REQUIRE(gm["entries"].size() == 2);
  CHECK(gm["entries"][0]["params"]["utilization"] == doctest::Approx(0.6));
  // Artifacts listed in the manifest actually exist on disk.
  for (const auto& art : gm["entries"][0]["artifacts"]) {
    CHECK(fs::exists(art["path"].get<std::string>()));
  }

  CliResult bad_axis = run_cli("grid --axis spin --seeds 1 --out " + at("suite_bad"));
  CHECK(bad_axis.code == 2);

  CliResult sweep = run_cli("--format json sweep --dim disruption --seeds 1" +
                            std::string(" --no-calibrate --out ") + at("suite_sweep"));
  REQUIRE(sweep.code == 0);
  json sj = json::parse(sweep.out);
  CHECK(sj["kind"] == "sweep");
  CHECK(sj["cells"] == 26);
  CHECK(sj["feasible"] == 26);

  CliResult scale = run_cli("scale --jobs-count 40 --horizon 221.5 --seeds 1,2" +
                            std::string(" --no-calibrate --out ") + at("suite_scale"));
  REQUIRE(scale.code == 0);
  json sc = json::parse(read_text_file(at("suite_scale") + "/manifest.json"));
  REQUIRE(sc["entries"].size() == 2);
  CHECK(sc["entries"][0]["name"] == "scale_custom_s1");

  CHECK(run_cli("scale --jobs-count 40 --out " + at("suite_half")).code == 2);
  CHECK(run_cli("scale --level galactic --out " + at("suite_unknown")).code == 2);
}

TEST_CASE("input resolution and argument hygiene") {
  SUBCASE("relative inputs fall back to the config directory") {
    fs::path cfg_dir = work_dir() / "cfg_home";
    fs::create_directories(cfg_dir);
    InputConfig cfg = test::config_for(test::two_group_plant(), 300.0);
    cfg.fixed_job_count = 12;
    cfg.master_seed = 42;
    write_text_file((cfg_dir / "fallback_config.json").string(),
                    canonical_dump(config_to_json(cfg)));

    CliResult r = run_cli("generate --config fallback_config.json --out " +
                              at("fallback_instance.json"),
                          "DYNSHOP_CONFIG_DIR=" + cfg_dir.string() + " ");
    CHECK(r.code == 0);
    CHECK(fs::exists(at("fallback_instance.json")));

    CliResult miss = run_cli("generate --config fallback_config.json --out " +
                             at("fallback_none.json"));
    CHECK(miss.code == 2);  // no env, the relative name resolves nowhere
  }

  SUBCASE("parser-level misuse never reaches the tool logic") {
    CHECK(run_cli("").code != 0);                      // subcommand required
    CHECK(run_cli("conjure").code != 0);               // unknown subcommand
    CHECK(run_cli("generate --config x").code != 0);   // missing required --out
    CHECK(run_cli("simulate --instance " + shared_instance() + " --level 9").code !=
          0);                                          // out-of-range option
    CHECK(run_cli("--format yaml metrics --instance " + shared_instance()).code != 0);
  }
}
