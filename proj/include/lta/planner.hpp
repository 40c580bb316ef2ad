#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "lta/chat.hpp"
#include "lta/plan.hpp"
#include "lta/registry.hpp"
#include "lta/remote.hpp"
#include "lta/scene_graph.hpp"
#include "lta/sim_world.hpp"

namespace lta {

// Planning prompt: role line with the verbatim request, the numbered rule list
// of the mode, the tool list, the scene graph as JSON, and the answer format.
// Deterministic in its inputs.
std::string build_planning_request(std::string_view user_request, const SceneGraph& graph,
                                   const std::vector<ToolDef>& tools, ToolMode mode);

// The numbered rules embedded in the prompt (seven in vlm mode, six in
// apriltag mode).
const std::vector<std::string>& planning_rules(ToolMode mode);

// Rule ids:
//   R1  perception tool between a pick and the place that follows it
//   R2  gripper discipline: pick while holding, place while empty, or a pick
//       never placed
//   R3  pick/place target without current coordinates: never known, or moved
//       since it was last localized
//   R4  advisory: adjacent single-target scans that could be one call
//   S   unknown tool or arguments that do not fit the tool (only when a
//       registry is given)
struct RuleViolation {
  std::string rule_id;
  int step = 0;  // 1-based
  std::string message;
  bool advisory = false;
  friend bool operator==(const RuleViolation&, const RuleViolation&) = default;
};

std::vector<RuleViolation> validate_plan(const Plan& plan, const SceneGraph& graph,
                                         const ToolRegistry* registry = nullptr);
bool has_errors(const std::vector<RuleViolation>& violations);
Json to_json(const RuleViolation& v);

// ---- Tower of Hanoi --------------------------------------------------------

struct HanoiMove {
  int disc;  // 1 = smallest
  int from;  // peg index 0..2
  int to;
  friend bool operator==(const HanoiMove&, const HanoiMove&) = default;
};

// Optimal recursive sequence, 2^n - 1 moves. InvalidConfiguration unless
// 1 <= n <= 8 and the pegs are a permutation of {0, 1, 2}.
std::vector<HanoiMove> hanoi_moves(int n, int from, int to, int spare);

struct HanoiNames {
  std::vector<std::string> bases;  // per peg
  std::vector<std::string> discs;  // discs[0] is the smallest
  std::vector<int> disc_tags;

  // base_1..base_3 (tags 1..3) and disc_1..disc_n (tags 11..10+n).
  static HanoiNames standard(int n);
};

// Alternating pick/place steps with containment edits; after every place the
// tags are read and the moved disc's coordinates are taken from the readout.
// Places name the object that will be underneath.
Plan solve_hanoi(int n, int from, int to, int spare, const HanoiNames& names);
Plan solve_hanoi(int n, int from, int to, int spare);

// ---- Scenario solvers --------------------------------------------------------

struct PlanningInput {
  std::string request;
  const SceneGraph& graph;
  ToolMode mode = ToolMode::Vlm;
  std::vector<ToolDef> tools;
  const sim::World* world = nullptr;  // ground truth for the scripted planner
};

// Each reads categories from things_to_know and names from the graph.
// InfeasibleGoal when the graph lacks what the task needs.
Plan solve_sorting(const PlanningInput& in);     // larger group -> larger container
Plan solve_stacking(const PlanningInput& in, const Json& options);
Plan solve_organize(const PlanningInput& in);    // misplaced items, the rest, then lids
Plan solve_relocation(const PlanningInput& in, const Json& options);
Plan solve_collect(const PlanningInput& in, const Json& options);  // selected items into one container

// Dispatches on options["solver"]: hanoi | sorting | stacking | organize |
// relocation | collect | fixed (options["plan"] holds the text verbatim).
Plan solve(const Json& options, const PlanningInput& in);

// ---- Planner backends ---------------------------------------------------------

class PlannerBackend {
 public:
  virtual ~PlannerBackend() = default;
  // Plan text in the plan grammar.
  virtual std::string plan(const PlanningInput& in) = 0;
};

class ScriptedPlanner : public PlannerBackend {
 public:
  explicit ScriptedPlanner(Json options) : options_(std::move(options)) {}
  std::string plan(const PlanningInput& in) override;

 private:
  Json options_;
};

// Sends the planning prompt as one user message. If the answer does not parse,
// asks once more with the parse error; the second answer is returned as is.
class RemotePlanner : public PlannerBackend {
 public:
  explicit RemotePlanner(RemoteConfig config) : config_(std::move(config)) {}
  std::string plan(const PlanningInput& in) override;

 private:
  RemoteConfig config_;
};

}  // namespace lta
