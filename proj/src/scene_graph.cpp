#include "lta/scene_graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "lta/error.hpp"

namespace lta {
namespace {

constexpr std::string_view kFieldKeys[] = {"affordance", "contains", "position_in_cartesian_space",
                                           "things_to_know", "coordinates"};

bool finite3(const Eigen::Vector3d& v) { return v.allFinite(); }

std::string squote(std::string_view s) { return "'" + std::string(s) + "'"; }

// Value conversions shared by deserialization (SchemaError) and edits
// (TypeMismatch). `fail` throws and never returns.
template <typename Json_, typename Fail>
std::vector<std::string> string_list(const Json_& v, Fail&& fail) {
  std::vector<std::string> out;
  if (v.is_null()) return out;
  if (!v.is_array()) fail("expected a list of strings");
  for (const auto& e : v) {
    if (!e.is_string()) fail("expected a list of strings");
    out.push_back(e.template get<std::string>());
  }
  return out;
}

template <typename Json_, typename Fail>
std::optional<Eigen::Vector3d> coordinate_value(const Json_& v, Fail&& fail, bool& non_finite) {
  non_finite = false;
  if (v.is_null()) return std::nullopt;
  if (!v.is_array()) fail("expected [] or [x, y, z]");
  if (v.empty()) return std::nullopt;
  if (v.size() != 3) fail("expected [] or [x, y, z]");
  Eigen::Vector3d xyz;
  for (int i = 0; i < 3; ++i) {
    if (!v[i].is_number()) fail("expected [] or [x, y, z]");
    xyz[i] = v[i].template get<double>();
  }
  if (!finite3(xyz)) non_finite = true;
  return xyz;
}

Json coordinates_json(const std::optional<Eigen::Vector3d>& c) {
  Json arr = Json::array();
  if (c) {
    for (int i = 0; i < 3; ++i) arr.push_back((*c)[i]);
  }
  return arr;
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string_view attribute_key(Attribute a) { return kFieldKeys[static_cast<int>(a)]; }

std::optional<Attribute> parse_attribute(std::string_view key) {
  for (Attribute a : kAllAttributes) {
    if (attribute_key(a) == key) return a;
  }
  if (key == "position_descriptor" || key == "position") return Attribute::PositionDescriptor;
  return std::nullopt;
}

Json SceneNode::attribute(Attribute a) const {
  switch (a) {
    case Attribute::Affordance:
      return Json(affordance);
    case Attribute::Contains:
      return Json(contains);
    case Attribute::PositionDescriptor:
      return Json(position_descriptor);
    case Attribute::ThingsToKnow:
      return Json(things_to_know);
    case Attribute::Coordinates:
      return coordinates_json(coordinates);
  }
  return {};
}

bool operator==(const SceneNode& a, const SceneNode& b) {
  if (a.coordinates.has_value() != b.coordinates.has_value()) return false;
  if (a.coordinates && !(*a.coordinates == *b.coordinates)) return false;
  return a.name == b.name && a.affordance == b.affordance && a.contains == b.contains &&
         a.position_descriptor == b.position_descriptor && a.things_to_know == b.things_to_know;
}

// ---------------------------------------------------------------------------

SceneGraph::SceneGraph() {
  SceneNode root;
  root.name = std::string(kRoot);
  nodes_.push_back(std::move(root));
  rebuild_index();
}

SceneGraph SceneGraph::from_nodes(std::vector<SceneNode> nodes) {
  SceneGraph g;
  g.nodes_ = std::move(nodes);
  g.index_.clear();
  g.parent_.clear();
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) {
    const auto& n = g.nodes_[i];
    if (n.name.empty()) throw Error(Errc::SchemaError, "name: empty node name");
    if (!g.index_.emplace(n.name, i).second)
      throw Error(Errc::SchemaError, "name: duplicate node " + squote(n.name));
    if (n.coordinates && !finite3(*n.coordinates))
      throw Error(Errc::SchemaError, "coordinates: non-finite value in node " + squote(n.name));
  }
  if (!g.has(kRoot)) throw Error(Errc::SchemaError, "workspace: root node missing");
  for (const auto& n : g.nodes_) {
    for (const auto& c : n.contains) {
      if (!g.has(c))
        throw Error(Errc::SchemaError,
                    "contains: " + squote(n.name) + " references unknown node " + squote(c));
      if (c == kRoot) throw Error(Errc::SchemaError, "contains: root listed as a child");
      if (!g.parent_.emplace(c, n.name).second)
        throw Error(Errc::SchemaError, "contains: " + squote(c) + " has more than one parent");
    }
  }
  for (const auto& n : g.nodes_) {
    std::unordered_set<std::string_view> seen{n.name};
    for (auto it = g.parent_.find(n.name); it != g.parent_.end(); it = g.parent_.find(it->second)) {
      if (!seen.insert(it->second).second)
        throw Error(Errc::SchemaError, "contains: cycle through " + squote(n.name));
    }
  }
  return g;
}

void SceneGraph::rebuild_index() {
  index_.clear();
  parent_.clear();
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i].name, i);
  for (const auto& n : nodes_) {
    for (const auto& c : n.contains) parent_[c] = n.name;
  }
}

bool SceneGraph::has(std::string_view name) const { return index_.count(std::string(name)) > 0; }

const SceneNode* SceneGraph::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

const SceneNode& SceneGraph::at(std::string_view name) const {
  const SceneNode* n = find(name);
  if (!n) throw Error(Errc::UnknownNode, "no node named " + squote(name));
  return *n;
}

SceneNode& SceneGraph::mutable_node(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error(Errc::UnknownNode, "no node named " + squote(name));
  return nodes_[it->second];
}

std::optional<std::string> SceneGraph::parent_of(std::string_view name) const {
  auto it = parent_.find(std::string(name));
  if (it == parent_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> SceneGraph::orphans() const {
  std::vector<std::string> out;
  for (const auto& n : nodes_) {
    if (n.name != kRoot && !parent_.count(n.name)) out.push_back(n.name);
  }
  return out;
}

bool SceneGraph::is_ancestor(std::string_view ancestor, std::string_view node) const {
  for (auto p = parent_of(node); p; p = parent_of(*p)) {
    if (*p == ancestor) return true;
  }
  return false;
}

void SceneGraph::add_object(const SceneNode& node, std::string_view parent) {
  if (has(node.name)) throw Error(Errc::DuplicateName, "node " + squote(node.name) + " exists");
  if (!has(parent)) throw Error(Errc::UnknownParent, "no node named " + squote(parent));
  if (node.name.empty()) throw Error(Errc::TypeMismatch, "node name must not be empty");
  if (node.coordinates && !finite3(*node.coordinates))
    throw Error(Errc::NonFiniteValue, "coordinates of " + squote(node.name));
  if (!node.contains.empty())
    throw Error(Errc::TypeMismatch, "new nodes start without children");
  nodes_.push_back(node);
  mutable_node(parent).contains.push_back(node.name);
  index_.emplace(node.name, nodes_.size() - 1);
  parent_[node.name] = std::string(parent);
}

void SceneGraph::edit_attribute(std::string_view name, Attribute attribute, const Json& value) {
  SceneNode& target = mutable_node(name);
  auto type_error = [&](const std::string& why) -> void {
    throw Error(Errc::TypeMismatch,
                std::string(attribute_key(attribute)) + " of " + squote(name) + ": " + why);
  };
  switch (attribute) {
    case Attribute::Affordance:
      target.affordance = string_list(value, type_error);
      return;
    case Attribute::PositionDescriptor:
    case Attribute::ThingsToKnow: {
      if (!value.is_string()) type_error("expected a string");
      auto& field = attribute == Attribute::PositionDescriptor ? target.position_descriptor
                                                               : target.things_to_know;
      field = value.get<std::string>();
      return;
    }
    case Attribute::Coordinates: {
      bool non_finite = false;
      auto xyz = coordinate_value(value, type_error, non_finite);
      if (non_finite) throw Error(Errc::NonFiniteValue, "coordinates of " + squote(name));
      target.coordinates = xyz;
      return;
    }
    case Attribute::Contains: {
      auto children = string_list(value, type_error);
      std::unordered_set<std::string> unique;
      for (const auto& c : children) {
        if (!unique.insert(c).second) type_error("duplicate child " + squote(c));
        if (!has(c)) throw Error(Errc::UnknownNode, "no node named " + squote(c));
        if (c == kRoot || c == name || is_ancestor(c, name))
          throw Error(Errc::WouldCreateCycle,
                      squote(c) + " cannot be contained by " + squote(name));
      }
      // Detach the new children from their previous parents, then replace.
      for (const auto& c : children) {
        auto p = parent_of(c);
        if (p && *p != name) {
          auto& siblings = mutable_node(*p).contains;
          siblings.erase(std::remove(siblings.begin(), siblings.end(), c), siblings.end());
        }
      }
      SceneNode& fresh = mutable_node(name);
      for (const auto& old_child : fresh.contains) parent_.erase(old_child);
      fresh.contains = std::move(children);
      for (const auto& c : fresh.contains) parent_[c] = std::string(name);
      return;
    }
  }
}

void SceneGraph::set_coordinates(std::string_view name, const Eigen::Vector3d& xyz) {
  SceneNode& target = mutable_node(name);
  if (!finite3(xyz)) throw Error(Errc::NonFiniteValue, "coordinates of " + squote(name));
  target.coordinates = xyz;
}

void SceneGraph::remove_node(std::string_view name) {
  if (name == kRoot) throw Error(Errc::TypeMismatch, "the root cannot be removed");
  const SceneNode& n = at(name);
  if (!n.contains.empty())
    throw Error(Errc::TypeMismatch, squote(name) + " still contains other nodes");
  if (auto p = parent_of(name)) {
    auto& siblings = mutable_node(*p).contains;
    siblings.erase(std::remove(siblings.begin(), siblings.end(), name), siblings.end());
  }
  std::string key(name);
  nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(index_.at(key)));
  rebuild_index();
}

bool operator==(const SceneGraph& a, const SceneGraph& b) {
  if (a.size() != b.size()) return false;
  for (const auto& n : a.nodes()) {
    const SceneNode* m = b.find(n.name);
    if (!m || !(*m == n)) return false;
  }
  return true;
}

SceneGraph add_object(const SceneGraph& graph, const SceneNode& node, std::string_view parent) {
  SceneGraph g = graph;
  g.add_object(node, parent);
  return g;
}

SceneGraph edit_attribute(const SceneGraph& graph, std::string_view node, Attribute attribute,
                          const Json& value) {
  SceneGraph g = graph;
  g.edit_attribute(node, attribute, value);
  return g;
}

SceneGraph set_coordinates(const SceneGraph& graph, std::string_view node,
                           const Eigen::Vector3d& xyz) {
  SceneGraph g = graph;
  g.set_coordinates(node, xyz);
  return g;
}

// --- serialization ---------------------------------------------------------

OrderedJson to_json(const SceneGraph& graph) {
  OrderedJson doc = OrderedJson::object();
  for (const auto& n : graph.nodes()) {
    OrderedJson node = OrderedJson::object();
    node["affordance"] = n.affordance;
    node["contains"] = n.contains;
    node["position_in_cartesian_space"] = n.position_descriptor;
    node["things_to_know"] = n.things_to_know;
    OrderedJson coords = OrderedJson::array();
    if (n.coordinates) {
      for (int i = 0; i < 3; ++i) coords.push_back((*n.coordinates)[i]);
    }
    node["coordinates"] = std::move(coords);
    doc[n.name] = std::move(node);
  }
  return doc;
}

std::string serialize(const SceneGraph& graph) { return to_json(graph).dump(2); }

SceneGraph graph_from_json(const OrderedJson& doc) {
  if (!doc.is_object()) throw Error(Errc::SchemaError, "graph: top level must be an object");
  std::vector<SceneNode> nodes;
  for (const auto& [name, body] : doc.items()) {
    auto schema = [&](std::string_view field, const std::string& why) -> void {
      throw Error(Errc::SchemaError,
                  std::string(field) + ": " + why + " in node " + squote(name));
    };
    if (!body.is_object()) schema("node", "expected an object");
    for (const auto& [key, _] : body.items()) {
      if (std::find(std::begin(kFieldKeys), std::end(kFieldKeys), key) == std::end(kFieldKeys))
        schema(key, "unexpected field");
    }
    for (auto key : kFieldKeys) {
      if (!body.contains(std::string(key))) schema(key, "missing");
    }
    SceneNode n;
    n.name = name;
    n.affordance = string_list(body.at("affordance"),
                               [&](const std::string& why) { schema("affordance", why); });
    n.contains =
        string_list(body.at("contains"), [&](const std::string& why) { schema("contains", why); });
    const auto& pos = body.at("position_in_cartesian_space");
    if (!pos.is_string()) schema("position_in_cartesian_space", "expected a string");
    n.position_descriptor = pos.get<std::string>();
    const auto& ttk = body.at("things_to_know");
    if (!ttk.is_string()) schema("things_to_know", "expected a string");
    n.things_to_know = ttk.get<std::string>();
    bool non_finite = false;
    n.coordinates = coordinate_value(
        body.at("coordinates"), [&](const std::string& why) { schema("coordinates", why); },
        non_finite);
    if (non_finite) schema("coordinates", "non-finite value");
    nodes.push_back(std::move(n));
  }
  return SceneGraph::from_nodes(std::move(nodes));
}

SceneGraph deserialize(std::string_view text) {
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte);
    throw Error(Errc::ParseError, "line " + std::to_string(line) + ", column " +
                                      std::to_string(col) + ": " + e.what());
  }
  return graph_from_json(doc);
}

// --- diff / apply -------------------------------------------------------------

GraphDelta diff(const SceneGraph& before, const SceneGraph& after) {
  GraphDelta d;
  for (const auto& n : before.nodes()) {
    if (!after.has(n.name)) d.removed.push_back(n.name);
  }
  const SceneNode blank;
  for (const auto& n : after.nodes()) {
    const SceneNode* old = before.find(n.name);
    if (!old) d.added.push_back(n.name);
    const SceneNode& reference = old ? *old : blank;
    for (Attribute a : kAllAttributes) {
      Json ov = reference.attribute(a);
      Json nv = n.attribute(a);
      if (ov != nv) d.attribute_changes.push_back({n.name, a, old ? ov : Json(), nv});
    }
    auto op = old ? before.parent_of(n.name) : std::nullopt;
    auto np = after.parent_of(n.name);
    if (op != np) d.reparented.push_back({n.name, op, np});
  }
  return d;
}

SceneGraph apply(const SceneGraph& before, const GraphDelta& delta) {
  std::vector<SceneNode> nodes;
  std::unordered_set<std::string> removed(delta.removed.begin(), delta.removed.end());
  for (const auto& n : before.nodes()) {
    if (!removed.count(n.name)) nodes.push_back(n);
  }
  for (const auto& name : delta.added) {
    SceneNode n;
    n.name = name;
    nodes.push_back(std::move(n));
  }
  auto find = [&](const std::string& name) -> SceneNode& {
    for (auto& n : nodes) {
      if (n.name == name) return n;
    }
    throw Error(Errc::UnknownNode, "delta references unknown node " + squote(name));
  };
  auto fail = [](const std::string& why) -> void { throw Error(Errc::TypeMismatch, why); };
  for (const auto& c : delta.attribute_changes) {
    SceneNode& n = find(c.node);
    bool non_finite = false;
    switch (c.attribute) {
      case Attribute::Affordance:
        n.affordance = string_list(c.new_value, fail);
        break;
      case Attribute::Contains:
        n.contains = string_list(c.new_value, fail);
        break;
      case Attribute::PositionDescriptor:
        n.position_descriptor = c.new_value.get<std::string>();
        break;
      case Attribute::ThingsToKnow:
        n.things_to_know = c.new_value.get<std::string>();
        break;
      case Attribute::Coordinates:
        n.coordinates = coordinate_value(c.new_value, fail, non_finite);
        break;
    }
  }
  return SceneGraph::from_nodes(std::move(nodes));
}

Json to_json(const GraphDelta& delta) {
  Json j;
  j["added"] = delta.added;
  j["removed"] = delta.removed;
  j["attribute_changes"] = Json::array();
  for (const auto& c : delta.attribute_changes) {
    j["attribute_changes"].push_back({{"node", c.node},
                                      {"attribute", attribute_key(c.attribute)},
                                      {"old", c.old_value},
                                      {"new", c.new_value}});
  }
  j["reparented"] = Json::array();
  for (const auto& r : delta.reparented) {
    j["reparented"].push_back({{"node", r.node},
                               {"old_parent", r.old_parent ? Json(*r.old_parent) : Json()},
                               {"new_parent", r.new_parent ? Json(*r.new_parent) : Json()}});
  }
  return j;
}

}  // namespace lta
