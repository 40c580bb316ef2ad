#include "lta/planner.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>

#include "lta/error.hpp"
#include "lta/tool_names.hpp"

namespace lta {
namespace {

using Args = std::vector<std::pair<std::string, Json>>;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

bool mentions(const std::string& text, std::string_view word) { return lower(text).find(word) != std::string::npos; }

bool has_placeholder(const Json& v) { return !placeholders_in(v).empty(); }

// Coordinates value that leaves the node localized.
bool localizes(const Json* v) {
  if (!v) return false;
  if (has_placeholder(*v)) return true;
  return v->is_array() && v->size() == 3;
}

std::string str_arg(const PlanStep& s, std::string_view name) {
  const Json* v = s.arg(name);
  return v && v->is_string() ? v->get<std::string>() : std::string();
}

}  // namespace

// ---- Prompt ----------------------------------------------------------------

const std::vector<std::string>& planning_rules(ToolMode mode) {
  static const std::vector<std::string> vlm = {
      "If you move (pick or place) an object, you need to update its position (coordinates) again before attempting "
      "another pick or place. If you don't do that, the robot will unintentionally approach the past position "
      "available in the scene graph.",
      "Scanning is time-consuming. So update the position of manipulated objects if and only if you want to "
      "manipulate it again which requires the latest position.",
      "Update the scene graph as required. But don't waste time in scanning newly updated positions unless you plan "
      "to manipulate those objects further.",
      "MANDATORY: You are PROHIBITED to use get_a_specific_coordinate_point_using_vlm AFTER pick_object since an "
      "object held in hand will block cameras completely. STRICT RULE. MUST FOLLOW!!.",
      "Make sure to mark any placeholder values in case it depends on a previous function call in order for the "
      "actual action executing LLM to understand properly.",
      "You are far more intelligent (way larger model) than the ones used by VLM. So only use VLM as your eyes and "
      "not for anything that involves logic, reasoning and wider knowledge base. Use the VQA and Monologue to "
      "perceive---that's it.",
      "When using scan_and_update_coordinates_in_scene_graph, scan as many VISIBLE objects at once since scanning "
      "one by one can take some time since the robot needs to reach several vantage points to construct pointcloud "
      "for processing."};
  static const std::vector<std::string> tags = {
      "If you move (pick or place) an object, you need to update its position (coordinates) again before attempting "
      "another pick or place. If you don't do that, the robot will unintentionally approach the past position "
      "available in the scene graph.",
      "NEVER EVER use get_current_position_of_visible_apriltags between pick-and-place. Because an object in the end "
      "effector will block the view of the workspace. So you can use this function only after placing whatever is "
      "in hand.",
      "Use the get_current_position_of_visible_apriltags function to get the latest position. Make sure to update "
      "in the scene graph after fetching the values. So that pick-and-place can use that.",
      "Make sure to mark any placeholder values in case it depends on a previous function call in order for the "
      "actual action executing LLM to understand properly.",
      "Apriltags are used for localization. But Apriltags are only seen by the camera if it is not obscured when "
      "capturing the top-down view of the table/workspace. So don't attempt to see potentially obscured objects.",
      "When using place_object, use the name of the object that will be underneath the current object, rather than "
      "using generic labels like base_1, base_2, base_3 unless you are specifically placing on the base surface."};
  return mode == ToolMode::Vlm ? vlm : tags;
}

std::string build_planning_request(std::string_view user_request, const SceneGraph& graph,
                                   const std::vector<ToolDef>& tools, ToolMode mode) {
  std::ostringstream out;
  out << "You are a robotic arm. Your task is to give the right sequence to achieve the user request  "
      << user_request << "\n\nImportant note:\n";
  const auto& rules = planning_rules(mode);
  for (std::size_t i = 0; i < rules.size(); ++i) out << i + 1 << ") " << rules[i] << "\n";
  out << "\nYou can use the following functions:\n";
  for (const auto& t : tools) {
    out << "- " << t.name << "(";
    for (std::size_t i = 0; i < t.params.size(); ++i)
      out << (i ? ", " : "") << t.params[i].name << (t.params[i].required ? "" : "?");
    out << "): " << t.description << "\n";
  }
  out << "\nThe following is the scene graph representation available currently.\n"
      << render_for_prompt(graph) << "\n\n"
      << "Answer format: one tool call per line, written as \"N. tool_name(param=value, ...)\" with steps numbered "
         "from 1. Values are JSON strings, numbers, lists, or bare names. Refer to the output of an earlier step K "
         "as $stepK.out, adding .key or [index] to select a part of it. Lines that do not start with a step number "
         "are read as commentary.\n";
  return out.str();
}

// ---- Validation -------------------------------------------------------------

std::vector<RuleViolation> validate_plan(const Plan& plan, const SceneGraph& graph, const ToolRegistry* registry) {
  std::vector<RuleViolation> out;
  std::set<std::string> localized;
  for (const auto& n : graph.nodes())
    if (n.coordinates) localized.insert(n.name);
  std::optional<std::string> held;
  int held_step = 0;

  for (std::size_t i = 0; i < plan.steps.size(); ++i) {
    const PlanStep& s = plan.steps[i];
    const int n = int(i) + 1;
    auto flag = [&](const char* id, std::string msg, bool advisory = false) {
      out.push_back({id, n, std::move(msg), advisory});
    };

    if (registry) {
      if (!registry->has(s.tool)) {
        flag("S", "unknown tool '" + s.tool + "'");
        continue;
      }
      // Placeholders stand in for values of the declared type.
      Json args = Json::object();
      const ToolDef& def = registry->at(s.tool);
      for (const auto& [k, v] : s.args) {
        Json value = v;
        if (has_placeholder(v)) {
          auto p = std::find_if(def.params.begin(), def.params.end(), [&](const ToolParam& tp) { return tp.name == k; });
          const std::string type = p == def.params.end() ? "" : p->type;
          value = type == "array" ? Json::array() : type == "string" ? Json("") : type == "boolean" ? Json(true)
                  : type == "number"                                    ? Json(0)
                                                                        : Json(nullptr);
        }
        args[k] = value;
      }
      try {
        registry->validate(s.tool, args);
      } catch (const Error& e) {
        flag("S", e.detail());
      }
    }

    if (tools::is_perception(s.tool) && held)
      flag("R1", s.tool + " while holding '" + *held + "' (picked at step " + std::to_string(held_step) + ")");

    if (s.tool == tools::kPick) {
      const std::string target = str_arg(s, "object_name");
      if (held) flag("R2", "pick of '" + target + "' while holding '" + *held + "'");
      if (!localized.count(target)) flag("R3", "'" + target + "' has no current coordinates");
      localized.erase(target);
      held = target;
      held_step = n;
    } else if (s.tool == tools::kPlace) {
      const std::string target = str_arg(s, "place_position_name");
      if (!held) flag("R2", "place onto '" + target + "' with an empty gripper");
      if (!localized.count(target)) flag("R3", "'" + target + "' has no current coordinates");
      held.reset();
    } else if (s.tool == tools::kScan) {
      const Json* t = s.arg("targets_to_scan");
      if (t && t->is_array())
        for (const auto& name : *t)
          if (name.is_string()) localized.insert(name.get<std::string>());
      if (i > 0 && plan.steps[i - 1].tool == tools::kScan && t && t->is_array() && t->size() == 1) {
        const Json* prev = plan.steps[i - 1].arg("targets_to_scan");
        if (prev && prev->is_array() && prev->size() == 1)
          flag("R4", "single-target scans at steps " + std::to_string(n - 1) + " and " + std::to_string(n) +
                         " could be one call",
               true);
      }
    } else if (s.tool == tools::kAddObject) {
      const std::string name = str_arg(s, "object_name");
      if (localizes(s.arg("coordinates"))) localized.insert(name);
      else localized.erase(name);
    } else if (s.tool == tools::kEditGraph && str_arg(s, "attribute_name") == "coordinates") {
      const std::string name = str_arg(s, "node_name");
      if (localizes(s.arg("value"))) localized.insert(name);
      else localized.erase(name);
    }
  }
  if (held) out.push_back({"R2", held_step, "'" + *held + "' is picked but never placed", false});
  std::stable_sort(out.begin(), out.end(), [](const RuleViolation& a, const RuleViolation& b) { return a.step < b.step; });
  return out;
}

bool has_errors(const std::vector<RuleViolation>& violations) {
  return std::any_of(violations.begin(), violations.end(), [](const RuleViolation& v) { return !v.advisory; });
}

Json to_json(const RuleViolation& v) {
  return {{"rule", v.rule_id}, {"step", v.step}, {"message", v.message}, {"advisory", v.advisory}};
}

// ---- Plan building helpers ----------------------------------------------------

namespace {

std::string ref(int step, std::string_view suffix = {}) {
  return "$step" + std::to_string(step) + ".out" + std::string(suffix);
}

// Appends steps and mirrors their graph edits on a working copy, so later
// steps see the contains lists as they will be at execution time.
class Builder {
 public:
  explicit Builder(const SceneGraph& g) : graph_(g) {}

  int add(std::string_view tool, Args args, std::string note = {}) {
    plan_.steps.push_back({std::string(tool), std::move(args), std::move(note)});
    return int(plan_.steps.size());
  }

  int scan(const std::vector<std::string>& names) {
    Json targets = Json::array();
    for (const auto& n : names) targets.push_back(n);
    return add(tools::kScan, {{"targets_to_scan", targets}});
  }
  int point(const std::string& prompt) { return add(tools::kPoint, {{"prompt_to_vlm", prompt}}); }
  int pick(const std::string& name) { return add(tools::kPick, {{"object_name", name}}); }
  int place(const std::string& name) { return add(tools::kPlace, {{"place_position_name", name}}); }

  void edit(const std::string& node, Attribute a, const Json& value) {
    add(tools::kEditGraph, {{"node_name", node}, {"attribute_name", std::string(attribute_key(a))}, {"value", value}});
    if (a == Attribute::Coordinates && value.is_string()) return;  // placeholder; stays symbolic here
    graph_.edit_attribute(node, a, value);
  }
  void set_coordinates_from(const std::string& node, int step) {
    add(tools::kEditGraph,
        {{"node_name", node}, {"attribute_name", "coordinates"}, {"value", ref(step)}});
  }
  void add_point_node(const std::string& name, const std::string& position, const std::string& note, int step) {
    add(tools::kAddObject, {{"object_name", name},
                            {"affordance", Json::array({"placeable"})},
                            {"position_in_cartesian_space", position},
                            {"things_to_know", note},
                            {"coordinates", ref(step)},
                            {"contains", Json::array()}});
    SceneNode node;
    node.name = name;
    node.affordance = {"placeable"};
    node.position_descriptor = position;
    node.things_to_know = note;
    graph_.add_object(node, graph_.has("table") ? "table" : SceneGraph::kRoot);
  }

  // Removes `item` from its parent's contains list.
  void detach(const std::string& item) {
    const auto parent = graph_.parent_of(item);
    if (!parent) return;
    Json list = Json::array();
    for (const auto& c : graph_.at(*parent).contains)
      if (c != item) list.push_back(c);
    edit(*parent, Attribute::Contains, list);
  }
  void attach(const std::string& parent, const std::string& item) {
    Json list = Json::array();
    for (const auto& c : graph_.at(parent).contains) list.push_back(c);
    list.push_back(item);
    edit(parent, Attribute::Contains, list);
  }

  // pick, detach, place into `dest`, attach, then mark the item's coordinates
  // stale and describe where it went.
  void move_into(const std::string& item, const std::string& dest, const std::string& where) {
    pick(item);
    detach(item);
    place(dest);
    attach(dest, item);
    edit(item, Attribute::Coordinates, Json::array());
    edit(item, Attribute::PositionDescriptor, where);
  }

  const SceneGraph& graph() const { return graph_; }
  Plan take(std::string rationale) {
    plan_.rationale = std::move(rationale);
    return std::move(plan_);
  }

 private:
  SceneGraph graph_;
  Plan plan_;
};

// fruit | vegetable | tool | block | food, from the node's notes and name.
std::string kind_of(const SceneNode& n) {
  const std::string text = lower(n.things_to_know + " " + n.name);
  for (const char* k : {"vegetable", "fruit", "block", "tool", "food"})
    if (text.find(k) != std::string::npos) return k;
  return {};
}

bool is_lid(const SceneGraph&, const SceneNode& n) {
  if (n.name.size() > 4 && n.name.compare(n.name.size() - 4, 4, "_lid") == 0) return true;
  return mentions(n.things_to_know, "lid of");
}

bool is_container(const SceneGraph& g, const SceneNode& n) {
  if (is_lid(g, n) || n.name == "table" || n.name == SceneGraph::kRoot) return false;
  return mentions(n.name, "box") || mentions(n.things_to_know, "box") || mentions(n.things_to_know, "container");
}

std::optional<std::string> lid_of_box(const SceneGraph& g, const std::string& box) {
  if (g.has(box + "_lid")) return box + "_lid";
  for (const auto& n : g.nodes())
    if (mentions(n.things_to_know, "lid of " + box)) return n.name;
  return std::nullopt;
}

std::vector<std::string> children(const SceneGraph& g, const std::string& parent) {
  return g.has(parent) ? g.at(parent).contains : std::vector<std::string>{};
}

// Horizontal position from ground truth, else from the graph.
std::optional<Eigen::Vector2d> xy_of(const PlanningInput& in, const std::string& name) {
  if (in.world && in.world->has(name)) return in.world->object(name).position.head<2>();
  const SceneNode* n = in.graph.find(name);
  if (n && n->coordinates) return n->coordinates->head<2>();
  return std::nullopt;
}

double footprint_of(const PlanningInput& in, const std::string& name) {
  if (in.world && in.world->has(name)) return in.world->object(name).shape.footprint_area();
  const SceneNode* n = in.graph.find(name);
  const std::string text = lower(name + " " + (n ? n->things_to_know + " " + n->position_descriptor : ""));
  if (text.find("large") != std::string::npos || text.find("big") != std::string::npos) return 2;
  if (text.find("small") != std::string::npos) return 1;
  return 1.5;
}

std::string humanize(std::string name) {
  std::replace(name.begin(), name.end(), '_', ' ');
  return name;
}

}  // namespace

// ---- Hanoi ---------------------------------------------------------------------

std::vector<HanoiMove> hanoi_moves(int n, int from, int to, int spare) {
  if (n < 1 || n > 8) throw Error(Errc::InvalidConfiguration, "disc count must be 1..8", n);
  const std::set<int> pegs = {from, to, spare};
  if (pegs != std::set<int>{0, 1, 2}) throw Error(Errc::InvalidConfiguration, "pegs must be 0, 1 and 2 in some order");
  std::vector<HanoiMove> out;
  auto rec = [&](auto&& self, int k, int a, int b, int c) -> void {
    if (k == 0) return;
    self(self, k - 1, a, c, b);
    out.push_back({k, a, b});
    self(self, k - 1, c, b, a);
  };
  rec(rec, n, from, to, spare);
  return out;
}

HanoiNames HanoiNames::standard(int n) {
  HanoiNames h;
  for (int b = 1; b <= 3; ++b) h.bases.push_back("base_" + std::to_string(b));
  for (int d = 1; d <= n; ++d) {
    h.discs.push_back("disc_" + std::to_string(d));
    h.disc_tags.push_back(10 + d);
  }
  return h;
}

Plan solve_hanoi(int n, int from, int to, int spare, const HanoiNames& names) {
  const auto moves = hanoi_moves(n, from, to, spare);
  if (names.bases.size() != 3 || int(names.discs.size()) < n || int(names.disc_tags.size()) < n)
    throw Error(Errc::InvalidConfiguration, "Hanoi names need three bases and a name and tag per disc");
  std::vector<std::vector<int>> pegs(3);
  for (int d = n; d >= 1; --d) pegs[std::size_t(from)].push_back(d);
  auto top_name = [&](int peg) {
    const auto& p = pegs[std::size_t(peg)];
    return p.empty() ? names.bases[std::size_t(peg)] : names.discs[std::size_t(p.back() - 1)];
  };

  Plan plan;
  auto add = [&](std::string_view tool, Args args) {
    plan.steps.push_back({std::string(tool), std::move(args), {}});
    return int(plan.steps.size());
  };
  auto contains = [&](const std::string& node, Json value) {
    add(tools::kEditGraph, {{"node_name", node}, {"attribute_name", "contains"}, {"value", std::move(value)}});
  };
  for (const auto& m : moves) {
    const std::string disc = names.discs[std::size_t(m.disc - 1)];
    pegs[std::size_t(m.from)].pop_back();
    const std::string below_from = top_name(m.from);
    const std::string below_to = top_name(m.to);
    add(tools::kPick, {{"object_name", disc}});
    contains(below_from, Json::array());
    add(tools::kPlace, {{"place_position_name", below_to}});
    contains(below_to, Json::array({disc}));
    pegs[std::size_t(m.to)].push_back(m.disc);
    const int read = add(tools::kAprilTags, {{"trigger", true}});
    add(tools::kEditGraph, {{"node_name", disc},
                            {"attribute_name", "coordinates"},
                            {"value", ref(read, ".tag_" + std::to_string(names.disc_tags[std::size_t(m.disc - 1)]))}});
  }
  plan.rationale = "Move " + std::to_string(n) + " discs from " + names.bases[std::size_t(from)] + " to " +
                   names.bases[std::size_t(to)] + " in " + std::to_string(moves.size()) + " moves.";
  return plan;
}

Plan solve_hanoi(int n, int from, int to, int spare) { return solve_hanoi(n, from, to, spare, HanoiNames::standard(n)); }

namespace {

HanoiNames hanoi_names_from(const SceneGraph& g, int n) {
  HanoiNames h = HanoiNames::standard(n);
  static const std::regex tag(R"(tag\s*(?:id)?\s*:?\s*(\d+))", std::regex::icase);
  for (int d = 0; d < n; ++d) {
    const SceneNode* node = g.find(h.discs[std::size_t(d)]);
    std::smatch m;
    if (node && std::regex_search(node->things_to_know, m, tag)) h.disc_tags[std::size_t(d)] = std::stoi(m[1].str());
  }
  return h;
}

}  // namespace

// ---- Scenario solvers ---------------------------------------------------------------

Plan solve_sorting(const PlanningInput& in) {
  const SceneGraph& g = in.graph;
  std::vector<std::string> containers;
  std::map<std::string, std::vector<std::string>> groups;
  std::vector<std::string> order;  // items in table order
  for (const auto& name : children(g, "table")) {
    const SceneNode& n = g.at(name);
    if (is_container(g, n)) {
      containers.push_back(name);
      continue;
    }
    const std::string k = kind_of(n);
    if (k == "fruit" || k == "vegetable") {
      groups[k].push_back(name);
      order.push_back(name);
    }
  }
  if (containers.empty()) throw Error(Errc::InfeasibleGoal, "no container on the table");
  if (groups.empty()) throw Error(Errc::InfeasibleGoal, "nothing to sort");
  if (groups.size() > containers.size()) throw Error(Errc::InfeasibleGoal, "more categories than containers");

  std::stable_sort(containers.begin(), containers.end(), [&](const std::string& a, const std::string& b) {
    const double fa = footprint_of(in, a), fb = footprint_of(in, b);
    return fa != fb ? fa > fb : a < b;
  });
  std::vector<std::string> kinds;
  for (const auto& [k, v] : groups) kinds.push_back(k);
  std::stable_sort(kinds.begin(), kinds.end(), [&](const std::string& a, const std::string& b) {
    return groups[a].size() != groups[b].size() ? groups[a].size() > groups[b].size() : a < b;
  });
  std::map<std::string, std::string> dest;
  for (std::size_t i = 0; i < kinds.size(); ++i) dest[kinds[i]] = containers[i];

  Builder b(g);
  std::vector<std::string> targets = order;
  for (const auto& [k, box] : dest)
    if (!g.at(box).coordinates) targets.push_back(box);
  b.scan(targets);
  for (const auto& item : order) {
    const std::string box = dest[kind_of(g.at(item))];
    b.move_into(item, box, "inside " + box);
  }
  std::string why = "Sort by category:";
  for (const auto& k : kinds) why += " " + k + "s -> " + dest[k] + ";";
  why.pop_back();
  return b.take(why + ".");
}

Plan solve_stacking(const PlanningInput& in, const Json& options) {
  const SceneGraph& g = in.graph;
  std::vector<std::string> blocks;
  for (const auto& name : children(g, "table"))
    if (kind_of(g.at(name)) == "block") blocks.push_back(name);
  if (blocks.size() < 2) throw Error(Errc::InfeasibleGoal, "need at least two blocks");

  std::string base = options.value("base", "");
  if (base.empty()) {
    Eigen::Vector2d c = Eigen::Vector2d::Zero();
    for (const auto& name : blocks) {
      const auto p = xy_of(in, name);
      if (!p) throw Error(Errc::InfeasibleGoal, "position of '" + name + "' is unknown");
      c += *p;
    }
    c /= double(blocks.size());
    double best = 1e300;
    for (const auto& name : blocks) {
      const double d = (*xy_of(in, name) - c).norm();
      if (d < best) best = d, base = name;
    }
  }
  if (std::find(blocks.begin(), blocks.end(), base) == blocks.end())
    throw Error(Errc::InfeasibleGoal, "'" + base + "' is not a block on the table");
  std::vector<std::string> rest;
  for (const auto& name : blocks)
    if (name != base) rest.push_back(name);
  std::stable_sort(rest.begin(), rest.end(), [&](const std::string& a, const std::string& b) {
    const double fa = footprint_of(in, a), fb = footprint_of(in, b);
    return fa != fb ? fa > fb : a < b;
  });

  Builder b(g);
  std::string top = base;
  for (const auto& block : rest) {
    b.set_coordinates_from(top, b.point("the center of the " + top));
    b.set_coordinates_from(block, b.point("the center of the " + block));
    b.pick(block);
    b.detach(block);
    b.place(top);
    b.attach(top, block);
    top = block;
  }
  return b.take("Stack on " + base + ", largest footprint first.");
}

Plan solve_organize(const PlanningInput& in) {
  const SceneGraph& g = in.graph;
  struct Box {
    std::string name, kind, lid;
  };
  std::vector<Box> boxes;
  for (const auto& n : g.nodes()) {
    if (!is_container(g, n)) continue;
    const std::string text = lower(n.name + " " + n.things_to_know);
    const std::string kind = text.find("tool") != std::string::npos   ? "tool"
                             : text.find("food") != std::string::npos ? "food"
                                                                      : "";
    if (kind.empty()) continue;
    boxes.push_back({n.name, kind, lid_of_box(g, n.name).value_or("")});
  }
  if (boxes.empty()) throw Error(Errc::InfeasibleGoal, "no labeled boxes to organize into");
  auto box_for = [&](const SceneNode& n) -> const Box* {
    std::string k = kind_of(n);
    if (k == "fruit" || k == "vegetable") k = "food";
    for (const auto& b : boxes)
      if (b.kind == k) return &b;
    return nullptr;
  };

  Builder b(g);
  // Open closed boxes, setting each lid down at a free spot.
  for (const auto& box : boxes) {
    if (box.lid.empty()) continue;
    const auto& inside = g.at(box.name).contains;
    if (std::find(inside.begin(), inside.end(), box.lid) == inside.end()) continue;
    const std::string spot = box.lid + "_temporary_spot";
    b.set_coordinates_from(box.lid, b.point("the knob of the " + box.lid));
    b.add_point_node(spot, "free spot on the table", "Temporary place for " + box.lid + ".",
                     b.point("a temporary location for the " + humanize(box.lid)));
    b.pick(box.lid);
    b.detach(box.lid);
    b.place(spot);
    b.attach("table", box.lid);
    b.edit(box.lid, Attribute::Coordinates, Json::array());
    b.edit(box.lid, Attribute::PositionDescriptor, "on the table at " + spot);
  }

  std::vector<std::pair<std::string, const Box*>> misplaced, loose;
  for (const auto& box : boxes)
    for (const auto& item : g.at(box.name).contains) {
      if (item == box.lid) continue;
      const Box* want = box_for(g.at(item));
      if (want && want->name != box.name) misplaced.push_back({item, want});
    }
  for (const auto& item : children(g, "table")) {
    const SceneNode& n = g.at(item);
    if (is_container(g, n) || is_lid(g, n)) continue;
    if (const Box* want = box_for(n)) loose.push_back({item, want});
  }
  std::vector<std::string> targets;
  for (const auto& [item, box] : misplaced) targets.push_back(item);
  for (const auto& [item, box] : loose) targets.push_back(item);
  if (!targets.empty()) b.scan(targets);
  for (const auto& [item, box] : misplaced) b.move_into(item, box->name, "inside " + box->name);
  for (const auto& [item, box] : loose) b.move_into(item, box->name, "inside " + box->name);

  for (const auto& box : boxes) {
    if (box.lid.empty()) continue;
    b.set_coordinates_from(box.lid, b.point("the knob of the " + box.lid));
    b.move_into(box.lid, box.name, "closing " + box.name);
  }
  std::string why;
  if (!misplaced.empty()) why = "First return misplaced items, then put away the rest, then close the boxes.";
  else why = "Put every item in its box, then close the boxes.";
  return b.take(why);
}

Plan solve_relocation(const PlanningInput& in, const Json& options) {
  const SceneGraph& g = in.graph;
  std::string object = options.value("object", "");
  std::string prompt = options.value("prompt", "");
  std::string where = options.value("description", "");

  static const std::regex between(R"(move the (\w+) between (?:the )?(\w+) and (?:the )?(\w+))", std::regex::icase);
  std::smatch m;
  if (object.empty() && std::regex_search(in.request, m, between)) {
    object = lower(m[1].str());
    prompt = "between the " + lower(m[2].str()) + " and the " + lower(m[3].str());
  }
  if (object.empty()) {
    // The fruit farthest from its nearest fellow fruit; the target is the
    // midpoint of the widest pair among the others.
    std::vector<std::string> fruits;
    for (const auto& n : g.nodes())
      if (kind_of(n) == "fruit" && xy_of(in, n.name)) fruits.push_back(n.name);
    if (fruits.size() < 3) throw Error(Errc::InfeasibleGoal, "need an isolated fruit and two others");
    double best = -1;
    for (const auto& f : fruits) {
      double nearest = 1e300;
      for (const auto& o : fruits)
        if (o != f) nearest = std::min(nearest, (*xy_of(in, f) - *xy_of(in, o)).norm());
      if (nearest > best) best = nearest, object = f;
    }
    std::string a, c;
    double widest = -1;
    for (const auto& x : fruits)
      for (const auto& y : fruits)
        if (x < y && x != object && y != object && (*xy_of(in, x) - *xy_of(in, y)).norm() > widest)
          widest = (*xy_of(in, x) - *xy_of(in, y)).norm(), a = x, c = y;
    prompt = "between the " + a + " and the " + c;
    if (where.empty()) where = "near the other fruits";
  }
  if (!g.has(object)) throw Error(Errc::InfeasibleGoal, "'" + object + "' is not in the scene graph");
  if (prompt.empty()) throw Error(Errc::InfeasibleGoal, "no target description for '" + object + "'");
  if (where.empty()) where = prompt;
  const std::string target = options.value("target", "target_point_for_" + object);

  Builder b(g);
  b.scan({object});
  b.add_point_node(target, where, "Target point for " + object + ".", b.point(prompt));
  b.pick(object);
  b.place(target);
  b.edit(object, Attribute::Coordinates, Json::array());
  b.edit(object, Attribute::PositionDescriptor, where);
  return b.take("Move " + object + " " + where + ".");
}

Plan solve_collect(const PlanningInput& in, const Json& options) {
  const SceneGraph& g = in.graph;
  std::vector<std::string> candidates;
  std::string container = options.value("container", "");
  for (const auto& name : children(g, "table")) {
    const SceneNode& n = g.at(name);
    if (is_container(g, n)) {
      if (container.empty()) container = name;
      continue;
    }
    const auto& aff = n.affordance;
    if (!is_lid(g, n) && std::find(aff.begin(), aff.end(), "pickable") != aff.end()) candidates.push_back(name);
  }
  if (container.empty() || !g.has(container)) throw Error(Errc::InfeasibleGoal, "no container to collect into");

  std::string select = options.value("select", "");
  std::string recipe = options.value("recipe", "");
  const std::string req = lower(in.request);
  static const std::regex for_recipe(R"(ingredients for ([a-z ]+?)(?: into| in| to|$))");
  std::smatch m;
  if (select.empty() && (req.find("mismatched") != std::string::npos || req.find("odd one") != std::string::npos))
    select = "odd_one_out";
  if (select.empty() && std::regex_search(req, m, for_recipe)) {
    select = "recipe";
    recipe = m[1].str();
  }

  std::vector<std::string> items;
  if (options.contains("items")) {
    for (const auto& i : options["items"]) items.push_back(i.get<std::string>());
  } else if (select == "odd_one_out") {
    std::vector<std::string> edible, other;
    for (const auto& name : candidates) {
      const auto& aff = g.at(name).affordance;
      (std::find(aff.begin(), aff.end(), "edible") != aff.end() ? edible : other).push_back(name);
    }
    if (other.size() == 1 && edible.size() > 1) items = other;
    else if (edible.size() == 1 && other.size() > 1) items = edible;
    else throw Error(Errc::InfeasibleGoal, "no single mismatched item");
  } else if (select == "recipe") {
    static const std::map<std::string, std::set<std::string>> recipes = {
        {"fried noodles", {"noodles", "noodle", "garlic", "onion", "egg", "soy", "cabbage", "carrot", "chili",
                           "scallion", "shrimp", "chicken", "oil", "pepper"}},
        {"salad", {"lettuce", "tomato", "cucumber", "onion", "carrot", "lemon", "oil", "pepper"}}};
    auto it = recipes.find(recipe);
    if (it == recipes.end()) throw Error(Errc::InfeasibleGoal, "unknown recipe '" + recipe + "'");
    for (const auto& name : candidates) {
      std::stringstream ss(name);
      std::string token;
      bool hit = it->second.count(name) > 0;
      while (!hit && std::getline(ss, token, '_')) hit = it->second.count(token) > 0;
      if (hit) items.push_back(name);
    }
    if (items.empty()) throw Error(Errc::InfeasibleGoal, "no ingredients for " + recipe + " on the table");
  } else {
    throw Error(Errc::InfeasibleGoal, "cannot tell which items to collect");
  }

  Builder b(g);
  std::vector<std::string> targets = items;
  if (!g.at(container).coordinates) targets.push_back(container);
  b.scan(targets);
  for (const auto& item : items) b.move_into(item, container, "inside " + container);
  return b.take("Collect into " + container + ".");
}

Plan solve(const Json& options, const PlanningInput& in) {
  const std::string solver = options.value("solver", "");
  if (solver == "hanoi") {
    const int n = options.value("discs", 3);
    const int from = options.value("from", 0), to = options.value("to", 2);
    const int spare = options.value("spare", 3 - from - to);
    return solve_hanoi(n, from, to, spare, hanoi_names_from(in.graph, n));
  }
  if (solver == "sorting") return solve_sorting(in);
  if (solver == "stacking") return solve_stacking(in, options);
  if (solver == "organize") return solve_organize(in);
  if (solver == "relocation") return solve_relocation(in, options);
  if (solver == "collect") return solve_collect(in, options);
  if (solver == "fixed") return parse_plan(options.value("plan", ""));
  throw Error(Errc::InvalidConfiguration, "unknown solver '" + solver + "'");
}

std::string ScriptedPlanner::plan(const PlanningInput& in) {
  if (options_.value("solver", "") == "fixed") return options_.value("plan", "");
  return format_plan(solve(options_, in));
}

std::string RemotePlanner::plan(const PlanningInput& in) {
  const std::string prompt = build_planning_request(in.request, in.graph, in.tools, in.mode);
  Json messages = Json::array({{{"role", "user"}, {"content", prompt}}});
  auto ask = [&] {
    const Json body = {{"model", config_.model}, {"messages", messages}};
    return parse_completion(post_json(config_, body.dump())).content;
  };
  std::string text = ask();
  try {
    parse_plan(text);
    return text;
  } catch (const Error& e) {
    if (e.code() != Errc::PlanParseError) throw;
    messages.push_back({{"role", "assistant"}, {"content", text}});
    messages.push_back({{"role", "user"},
                        {"content", "Your answer could not be read (" + std::string(e.what()) +
                                        "). Reply with the numbered steps only, one tool call per line."}});
  }
  return ask();
}

}  // namespace lta
