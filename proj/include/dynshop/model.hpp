#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

// Domain model for dynamic flexible job-shop benchmark instances:
// plant description, target metrics, dynamic-scenario knobs, realized
// event streams, validation, canonical JSON round-trip and seeded
// per-purpose RNG streams.
namespace dynshop {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Errors

// Raised on malformed JSON documents; `where` is the offending field path.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

private:
  std::string where_;
};

// ---------------------------------------------------------------------------
// Plant

struct MachineSpec {
  int id = 0;
  double speed = 1.0;  // capacity factor v_m > 0
};

struct GroupSpec {
  std::string id;
  std::vector<int> machines;  // non-empty, machine ids
};

struct OperationSpec {
  std::string id;
  std::string group;  // eligible machine group
  double mean = 0.0;  // nominal processing time, > 0
};

struct ProcessTemplate {
  std::string id;
  std::vector<OperationSpec> operations;  // ordered route, non-empty
};

struct PlantSpec {
  std::vector<MachineSpec> machines;
  std::vector<GroupSpec> groups;
  std::vector<ProcessTemplate> templates;
  std::vector<double> job_mix;  // one weight per template, sums to 1

  double total_speed() const;
  const GroupSpec* find_group(const std::string& id) const;
  const ProcessTemplate* find_template(const std::string& id) const;
  const MachineSpec* find_machine(int id) const;
  // Group id of the machine, empty if the machine is in no group.
  std::string group_of_machine(int machine) const;
};

// ---------------------------------------------------------------------------
// Targets

struct BottleneckWindow {
  std::string group;
  double start = 0.0;
  double end = 0.0;   // start < end <= horizon
  double rho = 0.0;   // target utilization in (0, 1)
};

struct TargetMetrics {
  double rho_global = 0.8;  // in (0, 1)
  double c_a2 = 1.0;        // arrival SCV, > 0
  double c_p2 = 0.5;        // processing SCV, >= 0
  double tau = 5.0;         // due-date tightness, > 0
  double chi_load = 0.0;    // load-imbalance CV, >= 0
  double delta = 0.0;       // capacity loss ratio, in [0, 1)
  std::vector<BottleneckWindow> bottlenecks;
};

// ---------------------------------------------------------------------------
// Distribution / modulation layer

enum class ModulationProfile { Constant, Periodic, Linear };

struct Modulation {
  ModulationProfile profile = ModulationProfile::Constant;
  double amplitude = 0.0;  // A in [0, 1]
  double period = 1.0;     // T > 0, periodic profile only
};

struct NormalParams {
  double mean = 0.0;
  double stddev = 0.0;  // >= 0
};

struct DistributionParams {
  // Explicit arrival Gamma overrides target-derived (shape, scale) when set.
  std::optional<double> arrival_shape;
  std::optional<double> arrival_scale;
  // Explicit processing shape overrides the target-derived shape; per-op
  // scale always follows the template mean.
  std::optional<double> processing_shape;
  // Shape bias applied as shape * 2^bias, in [-1, 1].
  double arrival_shape_log2_bias = 0.0;
  double processing_shape_log2_bias = 0.0;
  // Multiplies the base arrival rate (fixed-count mode: the job count).
  double rate_scale = 1.0;
  NormalParams pm_duration{10.0, 2.0};  // preventive maintenance durations
  NormalParams batch{3.0, 0.0};        // batch size N(mu_B, sigma_B^2)
  Modulation modulation;
};

// ---------------------------------------------------------------------------
// Dynamic-scenario layer

struct DynamicScenario {
  double p_cancel = 0.0;
  double p_rework = 0.0;
  double p_priority = 0.0;
  double p_route = 0.0;
  double p_due_change = 0.0;
  double p_batch = 0.0;
  double p_ptime = 0.0;
  double pm_interval = 0.0;  // 0 disables preventive maintenance
  std::vector<double> ptime_multipliers{0.7, 0.9, 1.2, 1.5};
  double due_tightening_ratio = 0.5;  // in (0, 1]
  int warm_start_jobs = 0;            // extra jobs injected at t = 0

  bool any_job_event() const {
    return p_cancel > 0 || p_rework > 0 || p_priority > 0 || p_route > 0 ||
           p_due_change > 0 || p_ptime > 0;
  }
};

// ---------------------------------------------------------------------------
// Input configuration

struct InputConfig {
  int schema_version = kSchemaVersion;
  double horizon = 0.0;                  // H > 0
  std::optional<int> fixed_job_count;    // N_J when arrivals are count-pinned
  std::uint64_t master_seed = 0;
  PlantSpec plant;
  TargetMetrics targets;
  DistributionParams distributions;
  DynamicScenario dynamics;
};

// ---------------------------------------------------------------------------
// Events

// Fixed kind order used for same-timestamp tie-breaking.
enum class EventKind {
  MachineUp = 0,
  MachineDown = 1,
  PreventiveMaintenance = 2,
  JobArrival = 3,
  Cancellation = 4,
  Rework = 5,
  PriorityChange = 6,
  RouteChange = 7,
  DueDateChange = 8,
};

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

struct JobSpec {
  std::int64_t id = 0;
  double arrival = 0.0;
  std::string template_id;
  std::vector<double> processing_times;  // realized, one per route op
  double due = 0.0;
  std::int64_t batch_id = -1;  // -1: not part of a batch
  int priority = 0;

  double total_work() const;
};

struct Event {
  std::int64_t id = 0;
  double time = 0.0;
  EventKind kind = EventKind::JobArrival;

  // JobArrival
  std::optional<JobSpec> job;

  // MachineDown / MachineUp / PreventiveMaintenance
  int machine = -1;
  double duration = 0.0;         // capacity-loss duration (Down / PM)
  std::int64_t ref_event = -1;   // MachineUp: id of the paired Down

  // Scenario events
  std::int64_t job_id = -1;
  int op_index = -1;             // Rework target
  int new_priority = 0;          // PriorityChange
  double new_due = 0.0;          // DueDateChange
  std::string new_template;      // RouteChange
  std::vector<double> new_times; // RouteChange realized durations
};

// Sort key: (time, kind order, id).
bool event_before(const Event& a, const Event& b);

struct EventStream {
  int schema_version = kSchemaVersion;
  double horizon = 0.0;
  InputConfig config;  // generating configuration, embedded for provenance
  std::vector<Event> events;

  // Restores canonical event order.
  void sort_events();
  std::vector<const JobSpec*> jobs() const;
  const JobSpec* find_job(std::int64_t id) const;
  std::int64_t max_event_id() const;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string path;  // e.g. "plant.job_mix"
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

ValidationReport validate_config(const InputConfig& cfg);
ValidationReport validate_stream(const EventStream& stream);

// ---------------------------------------------------------------------------
// Canonical JSON round-trip

json config_to_json(const InputConfig& cfg);
InputConfig config_from_json(const json& j);
json stream_to_json(const EventStream& stream);
EventStream stream_from_json(const json& j);

// Sorted keys, shortest round-trip float formatting, trailing newline.
std::string canonical_dump(const json& j);

void save_config(const InputConfig& cfg, const std::string& path);
InputConfig load_config(const std::string& path);
void save_stream(const EventStream& stream, const std::string& path);
EventStream load_stream(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// ---------------------------------------------------------------------------
// Seeded RNG streams

enum class RngStream {
  Arrivals,
  Processing,
  Batch,
  Disturbance,
  Scenario,
  Calibrator,
  Moo,
  Agent,
};

RngStream rng_stream_from_string(const std::string& name);

// Stable 64-bit mix of (master seed, stream name); same inputs always
// produce the same engine state.
std::uint64_t derive_stream_seed(std::uint64_t master_seed, RngStream name);
std::mt19937_64 derive_stream(std::uint64_t master_seed, RngStream name);
std::mt19937_64 derive_stream(std::uint64_t master_seed, const std::string& name);

// Free-form variant for ad-hoc sub-streams (per-candidate, per-cell seeds).
std::uint64_t derive_tagged_seed(std::uint64_t master_seed, const std::string& tag);

// FNV-1a over arbitrary bytes; used for artifact fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);

}  // namespace dynshop
