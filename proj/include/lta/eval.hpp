#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lta/orchestrator.hpp"
#include "lta/scene_graph.hpp"
#include "lta/sim_world.hpp"
#include "lta/vlm.hpp"

namespace lta::eval {

// Scenario file (see docs/scenario_schema.md):
//   id, title, request, mode ("vlm" | "apriltag"), trials, seed,
//   world      sim world spec (table, camera, objects with on/at/jitter)
//   graph      initial scene graph, same JSON as the graph serializer
//   planner    scripted planner options ({"solver": ...})
//   vlm        {"bbox_jitter_px", "false_negative_rate", "false_positive_rate"}
//   faults     list of fault specs injected into every trial
//   success    task predicates, checked on the final world
//   sgh        scene-graph predicates, checked on the final graph
struct Scenario {
  std::string id;
  std::string title;
  std::string request;
  ToolMode mode = ToolMode::Vlm;
  int trials = 5;
  std::uint64_t seed = 1;
  Json world;
  SceneGraph graph;
  Json planner = Json::object();
  ScriptedVlmConfig vlm;
  std::vector<sim::FaultSpec> faults;
  Json success = Json::array();
  Json sgh = Json::array();
  Json source;  // the document as read

  static Scenario from_json(const Json& doc);  // ScenarioParseError
};

Scenario load_scenario(const std::string& path);
// *.json files of a directory, sorted by name; a file path yields itself.
std::vector<std::string> scenario_files(const std::string& path);

// Predicate types:
//   world:  inside {object, container}   on {object, support}   on_table {object}
//           stack {order: [bottom..top]}  closed {container}
//           near {object, others, max_distance}   between {object, a, b, tolerance}
//   graph:  child_of {node, parent}   coordinates_empty {node}
//           coordinates_fresh {node, tolerance}   (horizontal, against the world)
//           attribute {node, attribute, equals}
// `why` receives a one-line reason when the predicate fails.
bool holds(const Json& predicate, const sim::World& world, const SceneGraph& graph, std::string* why = nullptr);
void check_predicate_spec(const Json& predicate);  // ScenarioParseError

enum class Backend { Scripted, Remote };

struct RunOptions {
  std::optional<int> trials;
  std::optional<std::uint64_t> seed;
  Backend backend = Backend::Scripted;
  bool batch = true;
  std::optional<std::vector<sim::FaultSpec>> faults;  // replaces the scenario's
};

// Trial t runs with seed scenario.seed + t. `ideal` drops depth noise, box
// jitter and faults (used for the feasibility dry run).
sim::World build_world(const Scenario& s, std::uint64_t seed, bool ideal = false,
                       const std::vector<sim::FaultSpec>* faults = nullptr);
Backends make_backends(const Scenario& s, std::uint64_t seed, Backend backend, bool ideal = false,
                       const std::optional<std::string>& fixed_plan = std::nullopt);
std::unique_ptr<Session> make_session(const Scenario& s, std::uint64_t seed, const RunOptions& options,
                                      const std::string& id = "trial");

// Session for POST /sessions: body {"scenario": id (default: the first),
// "seed", "mode": "interactive" | "batch" (default interactive),
// "backend": "scripted" | "remote"}.
std::unique_ptr<Session> session_from_request(const std::vector<Scenario>& scenarios, const std::string& id,
                                              const Json& body);

struct TrialReport {
  std::string scenario;
  int trial = 0;
  std::uint64_t seed = 0;
  bool excluded = false;
  int pf = 0;
  int tcr = 0;
  double sgh = 0;
  std::string state;
  std::string plan;
  std::vector<std::string> notes;  // rule violations, failed predicates, lint findings
  Trace trace;

  Json to_json() const;  // without the trace
};

// 1 iff the plan parses, passes the rule checker, and an ideal dry run of it
// reaches Done with every success predicate holding.
int score_pf(const std::string& plan_text, const Scenario& s, std::uint64_t seed, std::vector<std::string>* notes);
int score_tcr(const Session& session, const Scenario& s, std::vector<std::string>* notes);
double score_sgh(const SceneGraph& graph, const sim::World& world, const Scenario& s, std::vector<std::string>* notes);

TrialReport run_trial(const Scenario& s, int trial, const RunOptions& options);

struct ScenarioSummary {
  std::string id;
  std::string title;
  int trials = 0;
  int excluded = 0;
  double pf = 0, tcr = 0, sgh = 0;  // percent over non-excluded trials
  std::vector<TrialReport> reports;

  Json to_json() const;
};

ScenarioSummary summarize(const std::string& id, const std::string& title, std::vector<TrialReport> reports);
ScenarioSummary run_scenario(const Scenario& s, const RunOptions& options);

struct TableRow {
  std::string id;
  double pf = 0, tcr = 0, sgh = 0;
};

// Two column groups side by side: experiments whose id starts with "I-" on
// the left, the others on the right, paired in order.
std::string render_table(const std::vector<TableRow>& rows);
std::string render_table(const std::vector<ScenarioSummary>& summaries);
std::string format_percent(double v);

// Rebuilds the initial state from a trace's session_start event, re-executes
// it and compares every result and the final graph and world snapshots.
struct ReplayCheck {
  std::size_t calls = 0;
  std::vector<std::string> mismatches;
  bool ok() const { return mismatches.empty(); }
};
ReplayCheck replay_trace(const Trace& trace);  // ScenarioParseError without a session_start

// report.json, table.txt and traces/<id>_trial<k>.ndjson under `dir`.
void write_reports(const std::string& dir, const std::vector<ScenarioSummary>& summaries);

}  // namespace lta::eval
