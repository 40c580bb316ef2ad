#include "lta/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lta/error.hpp"
#include "lta/tool_names.hpp"

namespace lta {
namespace {

Json vec(const Eigen::Vector3d& p) { return Json::array({p.x(), p.y(), p.z()}); }

Json graph_json(const SceneGraph& g) { return Json::parse(serialize(g)); }

std::string code_name(Errc e) { return std::string(to_string(e)); }

}  // namespace

// ---- Trace -------------------------------------------------------------------

Json TraceEvent::to_json() const { return {{"seq", seq}, {"kind", kind}, {"payload", payload}}; }

const TraceEvent& Trace::append(std::string kind, Json payload) {
  events_.push_back({events_.size() + 1, std::move(kind), std::move(payload)});
  return events_.back();
}

std::string Trace::to_ndjson() const {
  std::string out;
  for (const auto& e : events_) out += e.to_json().dump() + "\n";
  return out;
}

Trace Trace::from_ndjson(const std::string& text) {
  Trace t;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      t.events_.push_back({j.at("seq").get<std::uint64_t>(), j.at("kind").get<std::string>(), j.at("payload")});
    } catch (const Json::exception& e) {
      throw Error(Errc::ParseError, "trace line " + std::to_string(n) + ": " + e.what());
    }
  }
  return t;
}

std::vector<std::string> lint_trace(const Trace& trace) {
  std::vector<std::string> out;
  bool accepted = false, holding = false, motion_open = false;
  int turn = 0, motion_turn = -1;
  std::string motion_id;
  std::map<std::string, std::uint64_t> undecided;  // failed call id -> seq
  auto flag = [&](std::uint64_t seq, const std::string& msg) { out.push_back("event " + std::to_string(seq) + ": " + msg); };
  auto check_decided = [&](std::uint64_t seq) {
    for (const auto& [id, at] : undecided) flag(at, "failure of '" + id + "' has no decision before event " + std::to_string(seq));
    undecided.clear();
  };

  for (const auto& e : trace.events()) {
    const Json& p = e.payload;
    if (e.kind == "assistant_msg") {
      check_decided(e.seq);
      ++turn;
    } else if (e.kind == "confirmation") {
      accepted = p.value("accepted", false);
    } else if (e.kind == "tool_call") {
      check_decided(e.seq);
      if (!p.value("executed", true)) continue;
      const std::string name = p.value("name", "");
      const std::string id = p.value("id", "");
      if (tools::is_motion(name)) {
        if (!accepted) flag(e.seq, name + " before a plan was accepted");
        if (id != motion_id) {
          if (turn == motion_turn) flag(e.seq, name + " in the same turn as the previous movement");
          if (motion_open) flag(e.seq, name + " before the previous movement returned");
        }
        motion_open = true;
        motion_turn = turn;
        motion_id = id;
      }
      if (tools::is_perception(name) && holding) flag(e.seq, name + " while an object is held");
    } else if (e.kind == "tool_result") {
      const std::string name = p.value("name", "");
      const bool ok = p.value("ok", false);
      if (tools::is_motion(name)) {
        motion_open = false;
        if (ok) holding = name == tools::kPick;
      }
      if (!ok) undecided[p.value("id", "")] = e.seq;
    } else if (e.kind == "failure_decision") {
      undecided.erase(p.value("id", ""));
    }
  }
  if (!trace.events().empty()) check_decided(trace.events().back().seq + 1);
  return out;
}

// ---- Tool execution ------------------------------------------------------------

std::string ToolOutcome::text() const {
  if (!ok) return payload.value("code", "") + ": " + payload.value("message", "");
  return payload.is_string() ? payload.get<std::string>() : payload.dump();
}

bool is_retryable(Errc code) {
  switch (code) {
    case Errc::GraspMissed:
    case Errc::EmptyCloud:
    case Errc::NoMatch:
    case Errc::NotVisible:
    case Errc::CaptureDropout:
    case Errc::MissingLabel:
      return true;
    default:
      return false;
  }
}

ToolExecutor::ToolExecutor(sim::World& world, SceneGraph& graph, VlmBackend& vlm, PlannerBackend* planner,
                           ToolMode mode)
    : world_(world), graph_(graph), vlm_(vlm), planner_(planner), mode_(mode), registry_(mode) {
  params_.table_z = world.config().table_z;
}

ToolOutcome ToolExecutor::execute(const std::string& tool, const Json& args) {
  try {
    registry_.validate(tool, args);
    return {true, run(tool, args), std::nullopt};
  } catch (const Error& e) {
    return {false, {{"code", code_name(e.code())}, {"message", e.detail()}}, e.code()};
  }
}

const Eigen::Vector3d& ToolExecutor::coordinates_of(const std::string& node) const {
  const SceneNode* n = graph_.find(node);
  if (!n) throw Error(Errc::UnknownNode, "no node named '" + node + "'");
  if (!n->coordinates) throw Error(Errc::NotVisible, "'" + node + "' has no coordinates in the scene graph");
  return *n->coordinates;
}

Json ToolExecutor::scan(const std::vector<std::string>& targets) {
  std::vector<sim::CaptureResult> caps;
  std::vector<geom::View<double>> views;
  for (int v = 0; v < world_.config().camera.views; ++v) {
    caps.push_back(world_.capture(v));
    views.push_back({caps.back().depth, caps.back().pose});
  }
  const VlmView top{world_, caps.front()};
  std::vector<std::string> present;
  Json missing = Json::array();
  for (const auto& t : targets) {
    if (!graph_.has(t)) throw Error(Errc::UnknownNode, "no node named '" + t + "'");
    if (vlm_.presence(t, top)) present.push_back(t);
    else missing.push_back(t);
  }
  const auto boxes = present.empty() ? std::vector<geom::BBox>{} : vlm_.bboxes(present, top);
  Json updated = Json::object();
  for (const auto& t : present) {
    auto box = std::find_if(boxes.begin(), boxes.end(), [&](const geom::BBox& b) { return b.label == t; });
    if (box == boxes.end()) {
      missing.push_back(t);
      continue;
    }
    Eigen::Vector3d p = geom::locate_in_views(views, *box, 0, params_);
    if (world_.has(t)) p += world_.localization_bias(t);
    graph_.set_coordinates(t, p);
    updated[t] = vec(p);
  }
  if (!missing.empty()) {
    std::string names;
    for (const auto& m : missing) names += (names.empty() ? "" : ", ") + m.get<std::string>();
    throw Error(Errc::NotVisible, "not visible: " + names);
  }
  return {{"updated", updated}, {"not_visible", missing}};
}

Json ToolExecutor::point(const std::string& prompt) {
  const sim::CaptureResult cap = world_.capture(0);
  Eigen::Vector2d px = vlm_.point(prompt, VlmView{world_, cap});
  if (world_.fault_fires(sim::FaultKind::PointMisdirect)) px = world_.free_spot_pixel().cast<double>();
  const int u = int(std::lround(px.x())), v = int(std::lround(px.y()));
  const auto& intr = cap.depth.intrinsics;
  if (u < 0 || v < 0 || u >= intr.width || v >= intr.height)
    throw Error(Errc::OutOfBounds, "point (" + std::to_string(u) + ", " + std::to_string(v) + ") is off the image");
  const double depth = cap.depth.at(u, v);
  if (!(depth > 0)) throw Error(Errc::InvalidDepth, "no depth at the pointed pixel");
  return vec(geom::deproject<double>(px, depth, intr, cap.pose));
}

Eigen::Vector2d ToolExecutor::free_spot_xy() const {
  const Eigen::Vector2i px = world_.free_spot_pixel();
  const auto r = world_.render(0);
  const double depth = r.depth.at(px.x(), px.y());
  if (!(depth > 0)) throw Error(Errc::InvalidDepth, "no depth at the free spot");
  return geom::deproject<double>(px.cast<double>(), depth, r.depth.intrinsics, world_.camera_pose(0)).head<2>();
}

Json ToolExecutor::run(const std::string& tool, const Json& args) {
  if (tool == tools::kPick) {
    const std::string name = args.at("object_name").get<std::string>();
    const Eigen::Vector3d grasp = coordinates_of(name);
    world_.pick(name, grasp);
    return {{"object", name}, {"grasp", vec(grasp)}};
  }
  if (tool == tools::kPlace) {
    const Eigen::Vector3d target = coordinates_of(args.at("place_position_name").get<std::string>());
    const std::string held = world_.held().value_or("");
    const sim::PlaceOutcome out = world_.place(target);
    return {{"object", held}, {"position", vec(out.position)}, {"support", out.support}};
  }
  if (tool == tools::kScan) {
    std::vector<std::string> targets;
    for (const auto& t : args.at("targets_to_scan")) {
      if (!t.is_string()) throw Error(Errc::ArgSchemaError, "targets_to_scan must list names");
      targets.push_back(t.get<std::string>());
    }
    return scan(targets);
  }
  if (tool == tools::kPoint) return point(args.at("prompt_to_vlm").get<std::string>());
  if (tool == tools::kAprilTags) {
    Json out = Json::object();
    for (const auto& r : world_.read_apriltags()) out["tag_" + std::to_string(r.tag_id)] = vec(r.position);
    return out;
  }
  if (tool == tools::kVqa) {
    const sim::CaptureResult cap = world_.capture(0);
    return vlm_.vqa(args.at("query_to_vlm").get<std::string>(), VlmView{world_, cap});
  }
  if (tool == tools::kAddObject) {
    SceneNode n;
    n.name = args.at("object_name").get<std::string>();
    auto strings = [&](const char* key) {
      std::vector<std::string> out;
      if (args.contains(key) && args[key].is_array())
        for (const auto& s : args[key]) {
          if (!s.is_string()) throw Error(Errc::ArgSchemaError, std::string(key) + " must list strings");
          out.push_back(s.get<std::string>());
        }
      return out;
    };
    n.affordance = strings("affordance");
    n.contains = strings("contains");
    if (args.contains("position_in_cartesian_space") && args["position_in_cartesian_space"].is_string())
      n.position_descriptor = args["position_in_cartesian_space"].get<std::string>();
    if (args.contains("things_to_know") && args["things_to_know"].is_string())
      n.things_to_know = args["things_to_know"].get<std::string>();
    if (args.contains("coordinates") && args["coordinates"].is_array() && !args["coordinates"].empty()) {
      const Json& c = args["coordinates"];
      if (c.size() != 3 || !std::all_of(c.begin(), c.end(), [](const Json& x) { return x.is_number(); }))
        throw Error(Errc::ArgSchemaError, "coordinates must be three numbers");
      n.coordinates = Eigen::Vector3d(c[0].get<double>(), c[1].get<double>(), c[2].get<double>());
    }
    std::string parent = graph_.has("table") ? "table" : std::string(SceneGraph::kRoot);
    if (args.contains("parent") && args["parent"].is_string()) parent = args["parent"].get<std::string>();
    graph_.add_object(n, parent);
    return {{"added", n.name}};
  }
  if (tool == tools::kEditGraph) {
    const std::string node = args.at("node_name").get<std::string>();
    const std::string key = args.at("attribute_name").get<std::string>();
    const auto attr = parse_attribute(key);
    if (!attr) throw Error(Errc::ArgSchemaError, "unknown attribute '" + key + "'");
    graph_.edit_attribute(node, *attr, args.contains("value") ? args["value"] : Json(nullptr));
    return {{"edited", node}, {"attribute", key}};
  }
  if (tool == tools::kPlan) {
    if (!planner_) throw Error(Errc::BackendUnavailable, "no planner configured");
    request_ = args.at("request_from_user").get<std::string>();
    const std::string text = planner_->plan(PlanningInput{request_, graph_, mode_, registry_.tools(), &world_});
    try {
      plan_ = parse_plan(text);
    } catch (const Error&) {
      plan_.reset();
    }
    return text;
  }
  throw Error(Errc::UnknownTool, "no tool named '" + tool + "'");
}

// ---- Session -------------------------------------------------------------------

std::string_view to_string(SessionState s) {
  switch (s) {
    case SessionState::AwaitRequest: return "await_request";
    case SessionState::Planning: return "planning";
    case SessionState::AwaitConfirmation: return "await_confirmation";
    case SessionState::Executing: return "executing";
    case SessionState::AwaitUserIntervention: return "await_user_intervention";
    case SessionState::Done: return "done";
    case SessionState::Failed: return "failed";
  }
  return "failed";
}

bool is_terminal(SessionState s) { return s == SessionState::Done || s == SessionState::Failed; }

std::string executor_system_prompt(ToolMode mode) {
  std::string s =
      "You control a robotic arm over a table through the tools provided. For every new request, call "
      "plan_using_advanced_llm with the request exactly as the user wrote it. Show the returned plan to the user and "
      "ask for confirmation before any movement. Once the user agrees, execute the plan step by step: at most one "
      "pick_object or place_object per turn, each followed by the scene-graph edits the plan lists after it. "
      "Replace $stepK.out placeholders with the output of step K. If a step fails, stop and report the failure.";
  if (mode == ToolMode::AprilTag) s += " Object positions come from AprilTag readouts.";
  return s;
}

Session::Session(std::string id, sim::World world, SceneGraph graph, Backends backends, SessionOptions options)
    : id_(std::move(id)),
      world_(std::move(world)),
      graph_(std::move(graph)),
      backends_(std::move(backends)),
      options_(std::move(options)),
      executor_(world_, graph_, *backends_.vlm, backends_.planner.get(), options_.mode) {
  if (!backends_.chat || !backends_.vlm) throw Error(Errc::InvalidConfiguration, "a session needs chat and vision backends");
  history_.push_back(ChatMessage::system(executor_system_prompt(options_.mode)));
  if (!options_.context.is_null()) emit("session_start", {{"context", options_.context}});
}

void Session::emit(std::string kind, Json payload) {
  const TraceEvent& e = trace_.append(std::move(kind), std::move(payload));
  if (listener_) listener_(e);
}

void Session::set_state(SessionState s) {
  if (s == state_) return;
  Json p = {{"from", to_string(state_)}, {"to", to_string(s)}};
  if (is_terminal(s)) {
    p["graph"] = graph_json(graph_);
    p["world"] = world_.snapshot();
  }
  state_ = s;
  emit("state_change", std::move(p));
}

void Session::post_message(const std::string& text) {
  if (state_ == SessionState::AwaitConfirmation) {
    history_.push_back(ChatMessage::user(text));
    emit("user_msg", {{"text", text}});
    accept_plan(is_affirmative(text), false);
    return;
  }
  if (state_ != SessionState::AwaitRequest && !is_terminal(state_))
    throw Error(Errc::InvalidTransition, "cannot take a message while " + std::string(to_string(state_)));
  history_.push_back(ChatMessage::user(text));
  emit("user_msg", {{"text", text}});
  declined_ = false;
  plan_ready_ = false;
  plan_requested_ = false;
  set_state(SessionState::Planning);
  pump();
}

void Session::confirm(bool accept) {
  if (state_ != SessionState::AwaitConfirmation)
    throw Error(Errc::InvalidTransition, "no plan is waiting for confirmation");
  history_.push_back(ChatMessage::user(accept ? "yes" : "no"));
  emit("user_msg", {{"text", accept ? "yes" : "no"}});
  accept_plan(accept, false);
}

void Session::accept_plan(bool accept, bool automatic) {
  emit("confirmation", {{"accepted", accept}, {"auto", automatic}});
  declined_ = !accept;
  if (accept) set_state(SessionState::Executing);
  pump();
}

void Session::intervene(const std::string& choice) {
  if (state_ != SessionState::AwaitUserIntervention || queue_.empty())
    throw Error(Errc::InvalidTransition, "no failure is waiting for a decision");
  if (choice != "skip" && choice != "reposition" && choice != "retry")
    throw Error(Errc::ArgSchemaError, "choice must be skip, reposition or retry");
  queue_.front().choice = choice;
  set_state(SessionState::Executing);
  pump();
}

int Session::step_for(const ToolCall& call) {
  const auto& plan = executor_.last_plan();
  if (!plan || call.name == tools::kPlan) return -1;
  if (call.plan_step) {
    const int s = *call.plan_step;
    return s >= 0 && s < int(plan->steps.size()) ? s : -1;
  }
  for (int i = 0; i < int(plan->steps.size()); ++i)
    if (!assigned_.count(i) && plan->steps[std::size_t(i)].tool == call.name) {
      assigned_.insert(i);
      return i;
    }
  return -1;
}

std::string Session::subject_of(const PendingCall& p) const {
  if (p.call.name == tools::kPick) return p.args.value("object_name", "");
  if (p.call.name == tools::kScan && p.args.contains("targets_to_scan") && p.args["targets_to_scan"].is_array() &&
      !p.args["targets_to_scan"].empty() && p.args["targets_to_scan"][0].is_string())
    return p.args["targets_to_scan"][0].get<std::string>();
  return {};
}

ToolOutcome Session::attempt(const std::string& id, const std::string& name, const Json& args, int step,
                             int attempt_no, bool recovery) {
  Json call = {{"id", id}, {"name", name}, {"args", args}, {"attempt", attempt_no}};
  call["plan_step"] = step >= 0 ? Json(step) : Json(nullptr);
  if (recovery) call["recovery"] = true;
  emit("tool_call", std::move(call));
  const SceneGraph before = graph_;
  ToolOutcome out = executor_.execute(name, args);
  emit("tool_result", {{"id", id}, {"name", name}, {"ok", out.ok}, {"payload", out.payload}});
  if (!(before == graph_)) emit("graph_delta", {{"id", id}, {"delta", to_json(diff(before, graph_))}});
  return out;
}

void Session::recover(const PendingCall& p) {
  if (p.call.name != tools::kPick) return;
  const std::string object = subject_of(p);
  if (object.empty()) return;
  auto next_id = [&] { return p.call.id + ".r" + std::to_string(++recovery_ids_); };
  if (options_.mode == ToolMode::Vlm) {
    const std::string id = next_id();
    const ToolOutcome out = attempt(id, std::string(tools::kScan), {{"targets_to_scan", Json::array({object})}}, -1, 1, true);
    if (!out.ok) emit("failure_decision", {{"id", id}, {"action", "continue"}, {"recovery", true}});
    return;
  }
  const std::string id = next_id();
  const ToolOutcome tags = attempt(id, std::string(tools::kAprilTags), {{"trigger", true}}, -1, 1, true);
  if (!tags.ok) {
    emit("failure_decision", {{"id", id}, {"action", "continue"}, {"recovery", true}});
    return;
  }
  if (!world_.has(object) || !world_.object(object).tag_id) return;
  const std::string key = "tag_" + std::to_string(*world_.object(object).tag_id);
  if (!tags.payload.contains(key)) return;
  const std::string edit_id = next_id();
  const ToolOutcome out = attempt(edit_id, std::string(tools::kEditGraph),
                                  {{"node_name", object}, {"attribute_name", "coordinates"}, {"value", tags.payload[key]}},
                                  -1, 1, true);
  if (!out.ok) emit("failure_decision", {{"id", edit_id}, {"action", "continue"}, {"recovery", true}});
}

void Session::reposition(const PendingCall& p) {
  const std::string object = subject_of(p);
  if (object.empty() || !world_.has(object)) return;
  Json edit = {{"action", "reposition"}, {"object", object}};
  try {
    const Eigen::Vector2d xy = executor_.free_spot_xy();
    world_.reposition(object, xy);
    edit["xy"] = Json::array({xy.x(), xy.y()});
    edit["ok"] = true;
  } catch (const Error& e) {
    edit["ok"] = false;
    edit["error"] = code_name(e.code()) + ": " + e.detail();
  }
  emit("world_edit", std::move(edit));
}

void Session::finish_call(const PendingCall& p, const ToolOutcome& out) {
  if (!out.ok && out.error == Errc::BackendUnavailable) backend_unavailable_ = true;
  if (!out.ok && p.step >= 0 && p.call.name == tools::kVqa) skipped_.insert(p.step);
  if (out.ok && p.step >= 0) {
    if (payloads_.size() <= std::size_t(p.step)) payloads_.resize(std::size_t(p.step) + 1);
    payloads_[std::size_t(p.step)] = out.payload;
    completed_.insert(p.step);
  }
  if (out.ok && p.call.name == tools::kPlan) {
    plan_requested_ = true;
    if (const auto& plan = executor_.last_plan()) {
      payloads_.assign(plan->steps.size(), std::nullopt);
      completed_.clear();
      skipped_.clear();
      assigned_.clear();
      plan_ready_ = true;
    }
  } else if (p.call.name == tools::kPlan) {
    plan_requested_ = true;
  }
  results_.push_back(ChatMessage::tool(p.call.id, out.text(), out.ok));
}

bool Session::run_call(PendingCall& p) {
  if (!p.started) {
    p.started = true;
    p.step = step_for(p.call);
    p.args = p.call.args;
    std::optional<Error> refused;
    try {
      p.args = resolve_placeholders(p.call.args, payloads_);
    } catch (const Error& e) {
      refused = e;
    }
    if (!refused && tools::is_motion(p.call.name)) {
      if (state_ != SessionState::Executing)
        refused = Error(Errc::RejectedCall, "movement before the plan was accepted");
      else if (motions_in_turn_++ > 0)
        refused = Error(Errc::RejectedCall, "only one movement per turn");
    }
    if (refused) {
      Json call = {{"id", p.call.id}, {"name", p.call.name}, {"args", p.call.args}, {"attempt", 1}, {"executed", false}};
      call["plan_step"] = p.step >= 0 ? Json(p.step) : Json(nullptr);
      emit("tool_call", std::move(call));
      const ToolOutcome out{false, {{"code", code_name(refused->code())}, {"message", refused->detail()}}, refused->code()};
      emit("tool_result", {{"id", p.call.id}, {"name", p.call.name}, {"ok", false}, {"payload", out.payload}});
      emit("failure_decision", {{"id", p.call.id}, {"action", "report"}, {"attempts", 0}});
      finish_call(p, out);
      return true;
    }
  }

  while (true) {
    if (p.choice) {
      const std::string choice = *p.choice;
      p.choice.reset();
      p.intervened = true;
      emit("failure_decision", {{"id", p.call.id}, {"action", choice}, {"auto", options_.batch}, {"attempts", p.failures}});
      if (choice == "skip") {
        finish_call(p, *p.last);
        return true;
      }
      if (choice == "reposition") reposition(p);
      recover(p);
    }
    ToolOutcome out = attempt(p.call.id, p.call.name, p.args, p.step, p.failures + 1, false);
    if (out.ok) {
      finish_call(p, out);
      return true;
    }
    p.last = out;
    ++p.failures;
    const bool retryable = is_retryable(*out.error) && p.call.name != tools::kPlace && p.call.name != tools::kVqa;
    if (!retryable || p.intervened) {
      emit("failure_decision", {{"id", p.call.id}, {"action", "report"}, {"attempts", p.failures}});
      finish_call(p, out);
      return true;
    }
    if (p.failures < options_.attempts_before_suggestion) {
      emit("failure_decision", {{"id", p.call.id}, {"action", "retry"}, {"attempts", p.failures}});
      recover(p);
      continue;
    }
    Json suggestion = {{"id", p.call.id}, {"tool", p.call.name}, {"failures", p.failures},
                       {"error", out.text()},  {"options", Json::array({"skip", "reposition"})}};
    suggestion["plan_step"] = p.step >= 0 ? Json(p.step) : Json(nullptr);
    const std::string subject = subject_of(p);
    if (!subject.empty()) suggestion["object"] = subject;
    emit("suggestion", std::move(suggestion));
    if (!options_.batch) {
      emit("failure_decision", {{"id", p.call.id}, {"action", "await_user"}, {"attempts", p.failures}});
      set_state(SessionState::AwaitUserIntervention);
      return false;
    }
    p.choice = options_.batch_intervention;
  }
}

void Session::pump() {
  while (true) {
    if (!queue_.empty()) {
      while (!queue_.empty()) {
        if (!run_call(queue_.front())) return;
        queue_.erase(queue_.begin());
      }
      for (auto& m : results_) history_.push_back(std::move(m));
      results_.clear();
    }
    if (++turns_ > options_.max_turns) {
      set_state(SessionState::Failed);
      return;
    }
    ChatMessage m;
    try {
      m = backends_.chat->complete(history_, executor_.registry().tools());
    } catch (const Error& e) {
      if (e.code() == Errc::BackendUnavailable || e.code() == Errc::AuthError) backend_unavailable_ = true;
      emit("assistant_msg", {{"error", code_name(e.code()) + ": " + e.detail()}});
      set_state(SessionState::Failed);
      return;
    }
    Json calls = Json::array();
    for (const auto& c : m.tool_calls) {
      Json j = {{"id", c.id}, {"name", c.name}, {"args", c.args}};
      j["plan_step"] = c.plan_step ? Json(*c.plan_step) : Json(nullptr);
      calls.push_back(std::move(j));
    }
    emit("assistant_msg", {{"content", m.content}, {"tool_calls", calls}});
    history_.push_back(m);
    motions_in_turn_ = 0;

    if (!m.tool_calls.empty()) {
      for (const auto& c : m.tool_calls) {
        PendingCall p;
        p.call = c;
        queue_.push_back(std::move(p));
      }
      continue;
    }
    if (declined_) {
      set_state(SessionState::Failed);
    } else if (state_ == SessionState::Planning) {
      if (plan_ready_) {
        set_state(SessionState::AwaitConfirmation);
        if (options_.batch) {
          history_.push_back(ChatMessage::user("yes"));
          emit("user_msg", {{"text", "yes"}});
          accept_plan(true, true);
        }
      } else {
        set_state(plan_requested_ ? SessionState::Failed : SessionState::AwaitRequest);
      }
    } else if (state_ == SessionState::Executing) {
      const auto& plan = executor_.last_plan();
      const bool all = plan && completed_.size() + skipped_.size() == plan->steps.size();
      set_state(all ? SessionState::Done : SessionState::Failed);
    }
    return;
  }
}

// ---- Replay ------------------------------------------------------------------

ReplayResult replay(const Trace& trace, sim::World world, SceneGraph graph, VlmBackend& vlm, ToolMode mode) {
  ToolExecutor exec(world, graph, vlm, nullptr, mode);
  ReplayResult r;
  const auto& ev = trace.events();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    const TraceEvent& e = ev[i];
    if (e.kind == "world_edit") {
      if (!e.payload.value("ok", false)) continue;
      const Json& xy = e.payload.at("xy");
      world.reposition(e.payload.at("object").get<std::string>(), {xy[0].get<double>(), xy[1].get<double>()});
      continue;
    }
    if (e.kind != "tool_call" || !e.payload.value("executed", true)) continue;
    const std::string name = e.payload.at("name").get<std::string>();
    if (name == tools::kPlan) continue;
    const ToolOutcome out = exec.execute(name, e.payload.at("args"));
    const std::string id = e.payload.at("id").get<std::string>();
    auto res = std::find_if(ev.begin() + std::ptrdiff_t(i) + 1, ev.end(), [&](const TraceEvent& x) {
      return x.kind == "tool_result" && x.payload.value("id", "") == id;
    });
    if (res == ev.end()) {
      r.mismatches.push_back("event " + std::to_string(e.seq) + ": no recorded result");
      continue;
    }
    if (res->payload.value("ok", false) != out.ok || res->payload.at("payload") != out.payload)
      r.mismatches.push_back("event " + std::to_string(e.seq) + ": " + name + " gave " + out.text());
  }
  r.graph = graph;
  r.world = world.snapshot();
  return r;
}

}  // namespace lta
