#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace lta {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class Attribute { Affordance, Contains, PositionDescriptor, ThingsToKnow, Coordinates };

inline constexpr Attribute kAllAttributes[] = {Attribute::Affordance, Attribute::Contains,
                                               Attribute::PositionDescriptor,
                                               Attribute::ThingsToKnow, Attribute::Coordinates};

// Field name used by the file format (and by the edit tool's attribute_name).
std::string_view attribute_key(Attribute a);
std::optional<Attribute> parse_attribute(std::string_view key);

struct SceneNode {
  std::string name;
  std::vector<std::string> affordance;
  std::vector<std::string> contains;
  std::string position_descriptor;
  std::string things_to_know;
  std::optional<Eigen::Vector3d> coordinates;

  Json attribute(Attribute a) const;
  friend bool operator==(const SceneNode& a, const SceneNode& b);
};

// Rooted containment hierarchy. Nodes keep insertion order, which is the
// serialization order; `contains` order is significant.
//
// Invariants (checked on every mutation):
//   - names are unique, "workspace" exists and is nobody's child,
//   - every name in a `contains` list resolves,
//   - a node appears in at most one `contains` list,
//   - containment is acyclic,
//   - coordinates are empty or three finite numbers.
//
// Edits that replace a `contains` list may leave former children without a
// parent; those nodes are roots of their own trees until re-attached.
class SceneGraph {
 public:
  static constexpr std::string_view kRoot = "workspace";

  SceneGraph();

  // Builds a graph from raw nodes, validating every invariant. Throws
  // SchemaError naming the offending field.
  static SceneGraph from_nodes(std::vector<SceneNode> nodes);

  std::span<const SceneNode> nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool has(std::string_view name) const;
  const SceneNode* find(std::string_view name) const;
  const SceneNode& at(std::string_view name) const;  // UnknownNode
  std::optional<std::string> parent_of(std::string_view name) const;
  // Nodes (other than the root) that currently have no parent.
  std::vector<std::string> orphans() const;
  bool is_ancestor(std::string_view ancestor, std::string_view node) const;

  // In-place edits. Each validates fully before touching state.
  void add_object(const SceneNode& node, std::string_view parent);
  void edit_attribute(std::string_view node, Attribute attribute, const Json& value);
  void set_coordinates(std::string_view node, const Eigen::Vector3d& xyz);
  // Removes a leaf node. Not reachable from the tool surface.
  void remove_node(std::string_view node);

  // Same node set, attributes and child order; node order is ignored.
  friend bool operator==(const SceneGraph& a, const SceneGraph& b);

 private:
  SceneNode& mutable_node(std::string_view name);
  void rebuild_index();

  std::vector<SceneNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::string> parent_;
};

// Snapshot-style helpers: return an edited copy, leaving the input untouched.
SceneGraph add_object(const SceneGraph& graph, const SceneNode& node, std::string_view parent);
SceneGraph edit_attribute(const SceneGraph& graph, std::string_view node, Attribute attribute,
                          const Json& value);
SceneGraph set_coordinates(const SceneGraph& graph, std::string_view node,
                           const Eigen::Vector3d& xyz);

std::string serialize(const SceneGraph& graph);
SceneGraph deserialize(std::string_view text);
OrderedJson to_json(const SceneGraph& graph);
SceneGraph graph_from_json(const OrderedJson& doc);

// The planner sees exactly the serialized form.
inline std::string render_for_prompt(const SceneGraph& graph) { return serialize(graph); }

struct AttributeChange {
  std::string node;
  Attribute attribute;
  Json old_value;
  Json new_value;
  friend bool operator==(const AttributeChange&, const AttributeChange&) = default;
};

struct Reparent {
  std::string node;
  std::optional<std::string> old_parent;
  std::optional<std::string> new_parent;
  friend bool operator==(const Reparent&, const Reparent&) = default;
};

struct GraphDelta {
  std::vector<std::string> added;
  std::vector<std::string> removed;
  std::vector<AttributeChange> attribute_changes;
  std::vector<Reparent> reparented;

  bool empty() const {
    return added.empty() && removed.empty() && attribute_changes.empty() && reparented.empty();
  }
};

GraphDelta diff(const SceneGraph& before, const SceneGraph& after);
SceneGraph apply(const SceneGraph& before, const GraphDelta& delta);
Json to_json(const GraphDelta& delta);

}  // namespace lta
