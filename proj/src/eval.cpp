#include "lta/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "lta/remote.hpp"

namespace lta::eval {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& msg) { throw Error(Errc::ScenarioParseError, msg); }

const std::map<std::string, std::vector<std::string>>& predicate_fields() {
  static const std::map<std::string, std::vector<std::string>> f = {
      {"inside", {"object", "container"}},
      {"on", {"object", "support"}},
      {"on_table", {"object"}},
      {"stack", {"order"}},
      {"closed", {"container"}},
      {"near", {"object", "others", "max_distance"}},
      {"between", {"object", "a", "b", "tolerance"}},
      {"child_of", {"node", "parent"}},
      {"coordinates_empty", {"node"}},
      {"coordinates_fresh", {"node"}},
      {"attribute", {"node", "attribute", "equals"}},
  };
  return f;
}

std::string str(const Json& p, const char* key) { return p.at(key).get<std::string>(); }

Eigen::Vector2d xy_of(const sim::World& w, const std::string& name) {
  const auto& p = w.object(name).position;
  return {p.x(), p.y()};
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3) << v;
  return o.str();
}

bool world_predicate(const std::string& type, const Json& p, const sim::World& w, std::string& why) {
  auto need = [&](const std::string& name) {
    if (!w.has(name)) {
      why = "no object '" + name + "'";
      return false;
    }
    return true;
  };
  auto support = [&](const std::string& name) { return w.support_of(name).value_or("(held)"); };

  if (type == "inside") {
    const auto o = str(p, "object"), c = str(p, "container");
    if (!need(o) || !need(c)) return false;
    if (w.enclosing_container(o) == c || support(o) == c) return true;
    why = o + " rests on " + support(o);
    return false;
  }
  if (type == "on" || type == "on_table") {
    const auto o = str(p, "object");
    const std::string s = type == "on" ? str(p, "support") : "table";
    if (!need(o)) return false;
    if (support(o) == s) return true;
    why = o + " rests on " + support(o);
    return false;
  }
  if (type == "stack") {
    const auto order = p.at("order").get<std::vector<std::string>>();
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      if (!need(order[i + 1])) return false;
      if (support(order[i + 1]) != order[i]) {
        why = order[i + 1] + " rests on " + support(order[i + 1]) + ", not " + order[i];
        return false;
      }
    }
    return true;
  }
  if (type == "closed") {
    const auto c = str(p, "container");
    if (!need(c)) return false;
    if (w.is_closed(c)) return true;
    why = c + " is open";
    return false;
  }
  if (type == "near") {
    const auto o = str(p, "object");
    const auto others = p.at("others").get<std::vector<std::string>>();
    if (!need(o) || others.empty()) return false;
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& n : others) {
      if (!need(n)) return false;
      c += xy_of(w, n);
    }
    c /= double(others.size());
    const double d = (xy_of(w, o) - c).norm();
    if (d <= p.at("max_distance").get<double>()) return true;
    why = o + " is " + fmt(d) + " m from the others";
    return false;
  }
  if (type == "between") {
    const auto o = str(p, "object"), a = str(p, "a"), b = str(p, "b");
    if (!need(o) || !need(a) || !need(b)) return false;
    const double d = (xy_of(w, o) - (xy_of(w, a) + xy_of(w, b)) / 2).norm();
    if (d <= p.at("tolerance").get<double>()) return true;
    why = o + " is " + fmt(d) + " m from the midpoint";
    return false;
  }
  return false;
}

bool graph_predicate(const std::string& type, const Json& p, const sim::World& w, const SceneGraph& g,
                     std::string& why) {
  const auto n = str(p, "node");
  const SceneNode* node = g.find(n);
  if (!node) {
    why = "no node '" + n + "'";
    return false;
  }
  if (type == "child_of") {
    const auto parent = g.parent_of(n).value_or("");
    if (parent == str(p, "parent")) return true;
    why = n + " is under " + parent;
    return false;
  }
  if (type == "coordinates_empty") {
    if (!node->coordinates) return true;
    why = n + " still has coordinates";
    return false;
  }
  if (type == "coordinates_fresh") {
    if (!node->coordinates) {
      why = n + " has no coordinates";
      return false;
    }
    if (!w.has(n)) {
      why = "no object '" + n + "'";
      return false;
    }
    const Eigen::Vector2d c(node->coordinates->x(), node->coordinates->y());
    const double d = (c - xy_of(w, n)).norm();
    if (d <= p.value("tolerance", 0.02)) return true;
    why = n + " coordinates are " + fmt(d) + " m off";
    return false;
  }
  if (type == "attribute") {
    const auto a = parse_attribute(str(p, "attribute"));
    Json have;
    switch (*a) {
      case Attribute::Affordance: have = node->affordance; break;
      case Attribute::Contains: have = node->contains; break;
      case Attribute::PositionDescriptor: have = node->position_descriptor; break;
      case Attribute::ThingsToKnow: have = node->things_to_know; break;
      case Attribute::Coordinates:
        have = node->coordinates ? Json::array({node->coordinates->x(), node->coordinates->y(), node->coordinates->z()})
                                 : Json::array();
        break;
    }
    if (have == p.at("equals")) return true;
    why = n + "." + str(p, "attribute") + " is " + have.dump();
    return false;
  }
  return false;
}

}  // namespace

void check_predicate_spec(const Json& p) {
  if (!p.is_object() || !p.contains("type") || !p["type"].is_string()) bad("predicate without a type");
  const auto type = p["type"].get<std::string>();
  const auto it = predicate_fields().find(type);
  if (it == predicate_fields().end()) bad("unknown predicate type '" + type + "'");
  for (const auto& f : it->second)
    if (!p.contains(f)) bad("predicate " + type + ": missing '" + f + "'");
  if (type == "attribute" && !parse_attribute(p["attribute"].get<std::string>()))
    bad("predicate attribute: unknown attribute");
}

bool holds(const Json& p, const sim::World& world, const SceneGraph& graph, std::string* why) {
  check_predicate_spec(p);
  const auto type = p["type"].get<std::string>();
  std::string reason;
  bool ok = false;
  try {
    if (p.contains("node"))
      ok = graph_predicate(type, p, world, graph, reason);
    else
      ok = world_predicate(type, p, world, reason);
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("predicate ") + type + ": " + e.what());
  }
  if (!ok && why) *why = type + ": " + reason;
  return ok;
}

Scenario Scenario::from_json(const Json& doc) {
  Scenario s;
  try {
    if (!doc.is_object()) bad("scenario must be an object");
    for (const char* k : {"id", "request", "world", "graph"})
      if (!doc.contains(k)) bad(std::string("scenario: missing '") + k + "'");
    s.id = doc["id"].get<std::string>();
    s.title = doc.value("title", s.id);
    s.request = doc["request"].get<std::string>();
    s.mode = parse_tool_mode(doc.value("mode", "vlm"));
    s.trials = doc.value("trials", s.trials);
    s.seed = doc.value("seed", s.seed);
    if (s.trials < 1) bad("scenario: trials must be positive");
    s.world = doc["world"];
    s.planner = doc.value("planner", Json::object());
    if (doc.contains("vlm")) {
      const Json& v = doc["vlm"];
      s.vlm.bbox_jitter_px = v.value("bbox_jitter_px", s.vlm.bbox_jitter_px);
      s.vlm.false_negative_rate = v.value("false_negative_rate", 0.0);
      s.vlm.false_positive_rate = v.value("false_positive_rate", 0.0);
    }
    for (const Json& f : doc.value("faults", Json::array())) s.faults.push_back(sim::FaultSpec::from_json(f));
    s.success = doc.value("success", Json::array());
    s.sgh = doc.value("sgh", Json::array());
    for (const Json& p : s.success) check_predicate_spec(p);
    for (const Json& p : s.sgh) check_predicate_spec(p);
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("scenario: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ScenarioParseError) throw;
    bad("scenario " + s.id + ": " + e.what());
  }
  s.source = doc;
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  // The graph keeps its key order, so it is read separately.
  OrderedJson ordered;
  try {
    ordered = OrderedJson::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    bad(path + ": " + e.what());
  }
  Scenario s = Scenario::from_json(Json::parse(buf.str()));
  try {
    s.graph = graph_from_json(ordered.at("graph"));
  } catch (const Error& e) {
    bad(path + ": graph: " + e.what());
  }
  return s;
}

std::vector<std::string> scenario_files(const std::string& path) {
  std::vector<std::string> out;
  if (fs::is_directory(path)) {
    for (const auto& e : fs::directory_iterator(path))
      if (e.is_regular_file() && e.path().extension() == ".json") out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
  } else if (fs::exists(path)) {
    out.push_back(path);
  } else {
    bad("no such scenario path: " + path);
  }
  return out;
}

sim::World build_world(const Scenario& s, std::uint64_t seed, bool ideal, const std::vector<sim::FaultSpec>* faults) {
  Json spec = s.world;
  if (ideal) spec["depth_noise"] = 0.0;
  sim::World w = sim::World::from_json(spec, seed);
  if (!ideal)
    for (const auto& f : faults ? *faults : s.faults) w.inject_fault(f);
  return w;
}

Backends make_backends(const Scenario& s, std::uint64_t seed, Backend backend, bool ideal,
                       const std::optional<std::string>& fixed_plan) {
  Backends b;
  ScriptedVlmConfig vc = s.vlm;
  vc.seed = seed;
  if (ideal) {
    vc.bbox_jitter_px = 0;
    vc.false_negative_rate = 0;
    vc.false_positive_rate = 0;
  }
  Json popts = s.planner;
  if (fixed_plan) popts = {{"solver", "fixed"}, {"plan", *fixed_plan}};
  if (backend == Backend::Scripted || ideal) {
    b.chat = std::make_unique<ScriptedChat>();
    b.vlm = std::make_unique<ScriptedVlm>(vc);
    b.planner = std::make_unique<ScriptedPlanner>(popts);
    return b;
  }
  const auto chat = RemoteConfig::from_env("CHAT");
  const auto vlm = RemoteConfig::from_env("VLM");
  if (!chat || !vlm) throw Error(Errc::InvalidConfiguration, "remote backend needs LTA_CHAT_URL and LTA_VLM_URL");
  const auto planner = RemoteConfig::from_env("PLANNER");
  b.chat = std::make_unique<RemoteChat>(*chat);
  b.vlm = std::make_unique<RemoteVlm>(*vlm);
  b.planner = std::make_unique<RemotePlanner>(planner ? *planner : *chat);
  return b;
}

namespace {

std::unique_ptr<Session> session_for(const Scenario& s, std::uint64_t seed, Backend backend, bool batch, bool ideal,
                                     const std::vector<sim::FaultSpec>* faults,
                                     const std::optional<std::string>& fixed_plan, const std::string& id) {
  SessionOptions so;
  so.mode = s.mode;
  so.batch = batch;
  Json fj = Json::array();
  for (const auto& f : (ideal ? std::vector<sim::FaultSpec>{} : faults ? *faults : s.faults)) fj.push_back(f.to_json());
  so.context = {{"scenario", s.source}, {"initial_graph", serialize(s.graph)}, {"seed", seed}, {"ideal", ideal},
                {"faults", fj}};
  return std::make_unique<Session>(id, build_world(s, seed, ideal, faults), s.graph,
                                   make_backends(s, seed, backend, ideal, fixed_plan), so);
}

bool all_hold(const Json& preds, const sim::World& w, const SceneGraph& g, std::vector<std::string>* notes,
              const std::string& prefix) {
  bool ok = true;
  for (const Json& p : preds) {
    std::string why;
    if (!holds(p, w, g, &why)) {
      ok = false;
      if (notes) notes->push_back(prefix + why);
    }
  }
  return ok;
}

}  // namespace

std::unique_ptr<Session> make_session(const Scenario& s, std::uint64_t seed, const RunOptions& options,
                                      const std::string& id) {
  return session_for(s, seed, options.backend, options.batch, false, options.faults ? &*options.faults : nullptr,
                     std::nullopt, id);
}

std::unique_ptr<Session> session_from_request(const std::vector<Scenario>& scenarios, const std::string& id,
                                              const Json& body) {
  if (scenarios.empty()) throw Error(Errc::InvalidConfiguration, "no scenarios loaded");
  const Scenario* s = &scenarios.front();
  if (body.contains("scenario")) {
    const auto want = body["scenario"].get<std::string>();
    auto it = std::find_if(scenarios.begin(), scenarios.end(), [&](const Scenario& x) { return x.id == want; });
    if (it == scenarios.end()) throw Error(Errc::InvalidConfiguration, "unknown scenario '" + want + "'");
    s = &*it;
  }
  RunOptions o;
  const std::string mode = body.value("mode", "interactive");
  if (mode != "interactive" && mode != "batch") throw Error(Errc::InvalidConfiguration, "mode must be interactive or batch");
  o.batch = mode == "batch";
  const std::string backend = body.value("backend", "scripted");
  if (backend != "scripted" && backend != "remote") throw Error(Errc::InvalidConfiguration, "unknown backend");
  o.backend = backend == "remote" ? Backend::Remote : Backend::Scripted;
  return make_session(*s, body.value("seed", s->seed), o, id);
}

int score_pf(const std::string& plan_text, const Scenario& s, std::uint64_t seed, std::vector<std::string>* notes) {
  Plan plan;
  try {
    plan = parse_plan(plan_text);
  } catch (const Error& e) {
    if (notes) notes->push_back(std::string("pf: ") + e.what());
    return 0;
  }
  const ToolRegistry reg(s.mode);
  const auto v = validate_plan(plan, s.graph, &reg);
  if (has_errors(v)) {
    if (notes)
      for (const auto& x : v)
        if (!x.advisory) notes->push_back("pf: " + x.rule_id + " at step " + std::to_string(x.step) + ": " + x.message);
    return 0;
  }
  auto dry = session_for(s, seed, Backend::Scripted, true, true, nullptr, plan_text, "dry-run");
  dry->post_message(s.request);
  if (dry->state() != SessionState::Done) {
    if (notes) notes->push_back("pf: dry run ended " + std::string(to_string(dry->state())));
    return 0;
  }
  return all_hold(s.success, dry->world(), dry->graph(), notes, "pf: ") ? 1 : 0;
}

int score_tcr(const Session& session, const Scenario& s, std::vector<std::string>* notes) {
  if (session.state() != SessionState::Done) {
    if (notes) notes->push_back("tcr: session ended " + std::string(to_string(session.state())));
    return 0;
  }
  return all_hold(s.success, session.world(), session.graph(), notes, "tcr: ") ? 1 : 0;
}

double score_sgh(const SceneGraph& graph, const sim::World& world, const Scenario& s, std::vector<std::string>* notes) {
  if (s.sgh.empty()) return 1.0;
  int ok = 0;
  for (const Json& p : s.sgh) {
    std::string why;
    if (holds(p, world, graph, &why))
      ++ok;
    else if (notes)
      notes->push_back("sgh: " + why);
  }
  return double(ok) / double(s.sgh.size());
}

Json TrialReport::to_json() const {
  Json j = {{"scenario", scenario}, {"trial", trial},   {"seed", seed},   {"excluded", excluded},
            {"state", state},       {"pf", pf},         {"tcr", tcr},     {"sgh", sgh},
            {"plan", plan},         {"notes", notes},   {"events", trace.size()}};
  return j;
}

TrialReport run_trial(const Scenario& s, int trial, const RunOptions& options) {
  TrialReport r;
  r.scenario = s.id;
  r.trial = trial;
  r.seed = options.seed.value_or(s.seed) + std::uint64_t(trial);
  auto session = make_session(s, r.seed, options, s.id + "-" + std::to_string(trial));
  session->post_message(s.request);
  if (!options.batch && session->state() == SessionState::AwaitConfirmation) session->confirm(true);
  while (!options.batch && session->state() == SessionState::AwaitUserIntervention) session->intervene("reposition");
  r.state = std::string(to_string(session->state()));
  r.trace = session->trace();
  for (const auto& f : lint_trace(r.trace)) r.notes.push_back("lint: " + f);
  if (session->backend_unavailable()) {
    r.excluded = true;
    r.notes.push_back("excluded: backend unavailable");
    return r;
  }
  if (session->plan()) r.plan = format_plan(*session->plan());
  r.pf = r.plan.empty() ? 0 : score_pf(r.plan, s, r.seed, &r.notes);
  if (r.plan.empty()) r.notes.push_back("pf: no readable plan");
  r.tcr = score_tcr(*session, s, &r.notes);
  r.sgh = score_sgh(session->graph(), session->world(), s, &r.notes);
  return r;
}

Json ScenarioSummary::to_json() const {
  Json trials_j = Json::array();
  for (const auto& r : reports) trials_j.push_back(r.to_json());
  return {{"id", id},   {"title", title}, {"trials", trials}, {"excluded", excluded},
          {"pf", pf},   {"tcr", tcr},     {"sgh", sgh},       {"reports", trials_j}};
}

ScenarioSummary summarize(const std::string& id, const std::string& title, std::vector<TrialReport> reports) {
  ScenarioSummary s;
  s.id = id;
  s.title = title;
  s.trials = int(reports.size());
  double pf = 0, tcr = 0, sgh = 0;
  int n = 0;
  for (const auto& r : reports) {
    if (r.excluded) {
      ++s.excluded;
      continue;
    }
    ++n;
    pf += r.pf;
    tcr += r.tcr;
    sgh += r.sgh;
  }
  if (n > 0) {
    s.pf = 100.0 * pf / n;
    s.tcr = 100.0 * tcr / n;
    s.sgh = 100.0 * sgh / n;
  }
  s.reports = std::move(reports);
  return s;
}

ScenarioSummary run_scenario(const Scenario& s, const RunOptions& options) {
  std::vector<TrialReport> reports;
  const int n = options.trials.value_or(s.trials);
  for (int t = 0; t < n; ++t) reports.push_back(run_trial(s, t, options));
  return summarize(s.id, s.title, std::move(reports));
}

std::string format_percent(double v) {
  const double r = std::round(v);
  std::ostringstream o;
  if (std::abs(v - r) < 1e-9)
    o << static_cast<long long>(r);
  else
    o << std::fixed << std::setprecision(1) << v;
  return o.str();
}

std::string render_table(const std::vector<TableRow>& rows) {
  std::vector<const TableRow*> left, right;
  for (const auto& r : rows) (r.id.rfind("I-", 0) == 0 ? left : right).push_back(&r);
  auto cells = [](const TableRow* r) {
    std::ostringstream o;
    if (!r) {
      o << std::setw(6) << "" << " | " << std::setw(6) << "" << " | " << std::setw(7) << "" << " | "
        << std::setw(7) << "";
    } else {
      o << std::left << std::setw(6) << r->id << std::right << " | " << std::setw(6) << format_percent(r->pf)
        << " | " << std::setw(7) << format_percent(r->tcr) << " | " << std::setw(7) << format_percent(r->sgh);
    }
    return o.str();
  };
  const std::string head = "Exp.   | PF (%) | TCR (%) | SGH (%)";
  const std::string rule = "-------+--------+---------+--------";
  std::string out;
  const bool two = !left.empty() && !right.empty();
  out += head + (two ? " || " + head : "") + "\n";
  out += rule + (two ? "-++-" + rule : "") + "\n";
  if (!two) {
    for (const auto* r : left.empty() ? right : left) {
      std::string line = cells(r);
      out += line + "\n";
    }
    return out;
  }
  for (std::size_t i = 0; i < std::max(left.size(), right.size()); ++i) {
    std::string line = cells(i < left.size() ? left[i] : nullptr);
    if (i < right.size()) line += " || " + cells(right[i]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string render_table(const std::vector<ScenarioSummary>& summaries) {
  std::vector<TableRow> rows;
  for (const auto& s : summaries) rows.push_back({s.id, s.pf, s.tcr, s.sgh});
  return render_table(rows);
}

ReplayCheck replay_trace(const Trace& trace) {
  const auto& ev = trace.events();
  if (ev.empty() || ev.front().kind != "session_start" || !ev.front().payload.contains("context"))
    bad("trace does not start with a session_start event");
  const Json& ctx = ev.front().payload["context"];
  Scenario s = Scenario::from_json(ctx.at("scenario"));
  s.graph = deserialize(ctx.at("initial_graph").get<std::string>());
  const auto seed = ctx.at("seed").get<std::uint64_t>();
  const bool ideal = ctx.value("ideal", false);
  std::vector<sim::FaultSpec> faults;
  for (const Json& f : ctx.value("faults", Json::array())) faults.push_back(sim::FaultSpec::from_json(f));

  Backends b = make_backends(s, seed, Backend::Scripted, ideal);
  ReplayResult r = replay(trace, build_world(s, seed, ideal, &faults), s.graph, *b.vlm, s.mode);
  ReplayCheck out;
  out.mismatches = r.mismatches;
  for (const auto& e : ev) out.calls += e.kind == "tool_call" && e.payload.value("executed", true);
  auto last = std::find_if(ev.rbegin(), ev.rend(),
                           [](const TraceEvent& e) { return e.kind == "state_change" && e.payload.contains("graph"); });
  if (last == ev.rend()) return out;
  if (Json::parse(serialize(r.graph)) != last->payload["graph"])
    out.mismatches.push_back("final graph differs from the recorded one");
  if (r.world != last->payload["world"]) out.mismatches.push_back("final world differs from the recorded one");
  return out;
}

void write_reports(const std::string& dir, const std::vector<ScenarioSummary>& summaries) {
  fs::create_directories(fs::path(dir) / "traces");
  auto write = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(Errc::InvalidConfiguration, "cannot write " + p.string());
    out << text;
  };
  Json all = Json::array();
  for (const auto& s : summaries) {
    all.push_back(s.to_json());
    for (const auto& r : s.reports)
      write(fs::path(dir) / "traces" / (s.id + "_trial" + std::to_string(r.trial) + ".ndjson"), r.trace.to_ndjson());
  }
  write(fs::path(dir) / "report.json", Json{{"scenarios", all}}.dump(2) + "\n");
  write(fs::path(dir) / "table.txt", render_table(summaries));
}

}  // namespace lta::eval
