#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lta/chat.hpp"
#include "lta/geometry.hpp"
#include "lta/plan.hpp"
#include "lta/planner.hpp"
#include "lta/registry.hpp"
#include "lta/scene_graph.hpp"
#include "lta/sim_world.hpp"
#include "lta/vlm.hpp"

namespace lta {

// ---- Trace -------------------------------------------------------------------

// Event kinds:
//   session_start, user_msg, assistant_msg, tool_call, tool_result, graph_delta,
//   state_change, confirmation, failure_decision, suggestion, world_edit
// `seq` is the logical clock; nothing in a trace depends on wall time.
struct TraceEvent {
  std::uint64_t seq = 0;
  std::string kind;
  Json payload;
  Json to_json() const;
};

class Trace {
 public:
  const TraceEvent& append(std::string kind, Json payload);
  const std::vector<TraceEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  std::string to_ndjson() const;                      // one event per line
  static Trace from_ndjson(const std::string& text);  // ParseError

 private:
  std::vector<TraceEvent> events_;
};

// Protocol checks over a finished trace. Each returned string names the event
// seq and the broken rule:
//   - a movement call only after a plan was accepted
//   - movement calls come from different assistant turns, each after the
//     previous one's result
//   - no perception call while an object is held
//   - every failed result is followed by a failure decision for that call
std::vector<std::string> lint_trace(const Trace& trace);

// ---- Tool execution ------------------------------------------------------------

struct ToolOutcome {
  bool ok = true;
  Json payload;   // success payload; {"code", "message"} on failure
  std::optional<Errc> error;
  std::string text() const;  // what the chat model sees
};

// Runs tool calls against the world and the scene graph.
//
// Payloads:
//   pick_object                 {"object", "grasp": [x,y,z]}
//   place_object                {"object", "position": [x,y,z], "support"}
//   scan_and_update_...         {"updated": {name: [x,y,z]}, "not_visible": [...]}
//   get_a_specific_...          [x, y, z]
//   get_current_position_...    {"tag_<id>": [x,y,z]}
//   ask_vqa_vlm                 answer text
//   add_object_to_scenegraph    {"added": name}
//   edit_scenegraph             {"edited": node, "attribute": key}
//   plan_using_advanced_llm     plan text
class ToolExecutor {
 public:
  ToolExecutor(sim::World& world, SceneGraph& graph, VlmBackend& vlm, PlannerBackend* planner, ToolMode mode);

  // `args` must already be free of placeholders.
  ToolOutcome execute(const std::string& tool, const Json& args);

  // Table point under the free spot of the top view.
  Eigen::Vector2d free_spot_xy() const;

  const std::optional<Plan>& last_plan() const { return plan_; }
  const std::string& last_request() const { return request_; }
  const ToolRegistry& registry() const { return registry_; }
  geom::PerceptionParams<double>& perception() { return params_; }

 private:
  Json run(const std::string& tool, const Json& args);
  Json scan(const std::vector<std::string>& targets);
  Json point(const std::string& prompt);
  const Eigen::Vector3d& coordinates_of(const std::string& node) const;

  sim::World& world_;
  SceneGraph& graph_;
  VlmBackend& vlm_;
  PlannerBackend* planner_;
  ToolMode mode_;
  ToolRegistry registry_;
  geom::PerceptionParams<double> params_;
  std::optional<Plan> plan_;
  std::string request_;
};

// Failures that are retried before they reach the chat model. A failed pick
// relocalizes its object first; everything else is tried again as is.
bool is_retryable(Errc code);

// ---- Session -------------------------------------------------------------------

enum class SessionState { AwaitRequest, Planning, AwaitConfirmation, Executing, AwaitUserIntervention, Done, Failed };
std::string_view to_string(SessionState s);
bool is_terminal(SessionState s);

struct SessionOptions {
  ToolMode mode = ToolMode::Vlm;
  // Batch sessions accept the plan and answer suggestions on their own.
  bool batch = true;
  std::string batch_intervention = "reposition";
  int attempts_before_suggestion = 3;
  int max_turns = 4000;
  // Emitted as the first trace event (session_start) when set.
  Json context;
};

struct Backends {
  std::unique_ptr<ChatBackend> chat;
  std::unique_ptr<VlmBackend> vlm;
  std::unique_ptr<PlannerBackend> planner;
};

// System message of every session.
std::string executor_system_prompt(ToolMode mode);

// One conversation: request -> plan -> confirmation -> step-wise execution.
//
//   AwaitRequest --message--> Planning --plan shown--> AwaitConfirmation
//   AwaitConfirmation --yes--> Executing --all steps done--> Done
//   AwaitConfirmation --no--> Failed
//   Executing --3rd failure of one call (interactive)--> AwaitUserIntervention
//   AwaitUserIntervention --skip|reposition|retry--> Executing
//   Executing --halt--> Failed
// Calls in the wrong state throw InvalidTransition.
class Session {
 public:
  Session(std::string id, sim::World world, SceneGraph graph, Backends backends, SessionOptions options = {});
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  SessionState state() const { return state_; }
  const Trace& trace() const { return trace_; }
  const SceneGraph& graph() const { return graph_; }
  const sim::World& world() const { return world_; }
  const std::vector<ChatMessage>& history() const { return history_; }
  const SessionOptions& options() const { return options_; }
  const std::optional<Plan>& plan() const { return executor_.last_plan(); }

  // In AwaitRequest starts a request; in AwaitConfirmation counts as the answer.
  void post_message(const std::string& text);
  void confirm(bool accept);
  // "skip" | "reposition" | "retry"
  void intervene(const std::string& choice);

  // Called after every appended event (the service streams them).
  void set_listener(std::function<void(const TraceEvent&)> listener) { listener_ = std::move(listener); }

  // Plan steps (0-based) that finished successfully.
  const std::set<int>& completed_steps() const { return completed_; }
  // A backend could not be reached; the run says nothing about the task.
  bool backend_unavailable() const { return backend_unavailable_; }

 private:
  struct PendingCall {
    ToolCall call;
    int step = -1;
    int failures = 0;
    bool started = false;
    bool intervened = false;
    Json args;  // placeholders resolved
    std::optional<std::string> choice;
    std::optional<ToolOutcome> last;
  };

  void emit(std::string kind, Json payload);
  void set_state(SessionState s);
  void accept_plan(bool accept, bool automatic);
  void pump();
  // Runs one call with retries; false if it stopped to wait for the user.
  bool run_call(PendingCall& p);
  ToolOutcome attempt(const std::string& id, const std::string& name, const Json& args, int step, int attempt_no,
                      bool recovery);
  void recover(const PendingCall& p);
  void reposition(const PendingCall& p);
  void finish_call(const PendingCall& p, const ToolOutcome& out);
  int step_for(const ToolCall& call);
  std::string subject_of(const PendingCall& p) const;

  std::string id_;
  sim::World world_;
  SceneGraph graph_;
  Backends backends_;
  SessionOptions options_;
  ToolExecutor executor_;
  Trace trace_;
  std::vector<ChatMessage> history_;
  SessionState state_ = SessionState::AwaitRequest;
  std::function<void(const TraceEvent&)> listener_;

  std::vector<std::optional<Json>> payloads_;  // per plan step
  std::set<int> completed_;
  std::set<int> skipped_;  // failed questions
  std::vector<PendingCall> queue_;  // calls of the current turn not yet run
  std::vector<ChatMessage> results_;  // tool messages of the current turn
  std::set<int> assigned_;
  int turns_ = 0;
  int recovery_ids_ = 0;
  int motions_in_turn_ = 0;
  bool declined_ = false;
  bool plan_ready_ = false;
  bool plan_requested_ = false;
  bool backend_unavailable_ = false;
};

// ---- Replay ------------------------------------------------------------------

struct ReplayResult {
  SceneGraph graph;
  Json world;  // snapshot
  std::vector<std::string> mismatches;  // results that differ from the trace
};

// Re-executes the recorded tool calls and world edits (not the planning
// call) on fresh copies of the initial state.
ReplayResult replay(const Trace& trace, sim::World world, SceneGraph graph, VlmBackend& vlm, ToolMode mode);

}  // namespace lta
