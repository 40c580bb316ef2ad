#include "lta/registry.hpp"

#include <algorithm>

#include "lta/error.hpp"
#include "lta/tool_names.hpp"

namespace lta {
namespace {

ToolDef def(std::string_view name, std::string description, std::vector<ToolParam> params) {
  return {std::string(name), std::move(description), std::move(params)};
}

bool type_matches(const std::string& type, const std::string& items, const Json& v) {
  if (type.empty()) return true;
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "number") return v.is_number();
  if (type == "integer") return v.is_number_integer();
  if (type == "object") return v.is_object();
  if (type == "array") {
    if (!v.is_array()) return false;
    return std::all_of(v.begin(), v.end(), [&](const Json& e) { return type_matches(items.empty() ? "string" : items, "", e); });
  }
  return false;
}

}  // namespace

std::string_view to_string(ToolMode m) { return m == ToolMode::Vlm ? "vlm" : "apriltag"; }

ToolMode parse_tool_mode(std::string_view s) {
  if (s == "vlm") return ToolMode::Vlm;
  if (s == "apriltag") return ToolMode::AprilTag;
  throw Error(Errc::InvalidConfiguration, "unknown tool mode '" + std::string(s) + "'");
}

std::vector<ToolDef> tool_definitions(ToolMode mode) {
  std::vector<ToolDef> out;
  out.push_back(def(tools::kPick,
                    "Makes the robot pick a provided object. The name MUST precisely match what is in the "
                    "database/scene graph whose coordinate is available.",
                    {{"object_name", "string", "Name of the scene graph node to pick.", true, ""}}));
  out.push_back(def(tools::kPlace,
                    "Makes the robot to place an object in hand safely at the provided place name. The name MUST "
                    "precisely match what is in the database/scene graph whose coordinate is available.",
                    {{"place_position_name", "string", "Name of the scene graph node to place onto or into.", true, ""}}));
  out.push_back(def(tools::kVqa,
                    "This is a VLM (QwenVL 2.5). You can ask VQA. The VLM will answer with whatever you want to "
                    "know. Only for single Q&A and not conversations since the chat history is not stored.",
                    {{"query_to_vlm", "string", "Question about the current top view.", true, ""}}));
  if (mode == ToolMode::Vlm) {
    out.push_back(def(tools::kScan,
                      "DO NOT CALL AFTER PICK_OBJECT. The camera mounted on the robotic arm will scan and update the "
                      "position of the requested object using a VLM. The camera mounted near gripper needs "
                      "unobstructed view when scanning and it cannot see hidden objects. Therefore, do not call this "
                      "function after pick and before place. This function fills/updates the scene graph nodes "
                      "(targets) with coordinates by itself. This can only scan identifiable individual objects. To "
                      "simply get points you need to user get_a_specific_coordinate_point_using_vlm.",
                      {{"targets_to_scan", "array", "Names of scene graph nodes to localize.", true, "string"}}));
    out.push_back(def(tools::kPoint,
                      "DO NOT CALL AFTER PICK_OBJECT. The camera mounted on the robotic arm will look at the "
                      "workspace. Then VLM will give you the specific point you ask for in the workspace. Output "
                      "given to you will be of the form [x,y,z]. Based on response you need to add/update the scene "
                      "graph with received output coordinates by yourself. The gripper should also be free of any "
                      "objects when scanning. Therefore DO NOT call this function after pick_object and before "
                      "place_object. Strictly do NOT add 'I want [x,y,z] coordinate' in prompt and keep the prompt "
                      "SHORT. The camera ALWAYS takes the TOP VIEW Photo of the workspace/table.",
                      {{"prompt_to_vlm", "string", "Short description of the point.", true, ""}}));
  } else {
    out.push_back(def(tools::kAprilTags,
                      "This function lets you know of the TAG ID and Position [x,y,z] of all the currently visible "
                      "Apriltags. But ONLY VISIBLE Objects with Apriltags are captured. Obscured objects are not "
                      "visible. Note that camera captures top down view of table.",
                      {{"trigger", "boolean", "Set to true to capture.", true, ""}}));
  }
  out.push_back(def(tools::kAddObject, "Adds a new object in the scene graph with specified parameters.",
                    {{"object_name", "string", "Unique node name.", true, ""},
                     {"affordance", "array", "Affordance tags.", true, "string"},
                     {"position_in_cartesian_space", "string", "Free-text position description.", true, ""},
                     {"things_to_know", "string", "Free-text notes.", true, ""},
                     {"coordinates", "array", "[x, y, z] in meters, or [] if unknown.", true, "number"},
                     {"contains", "array", "Names of nodes inside the new object.", true, "string"},
                     {"parent", "string", "Node that contains the new object; defaults to table.", false, ""}}));
  out.push_back(def(tools::kEditGraph, "Edit the attribute of any node that is already present in the scene graph.",
                    {{"node_name", "string", "Existing node.", true, ""},
                     {"attribute_name", "string",
                      "One of affordance, contains, position_in_cartesian_space, things_to_know, coordinates.", true,
                      ""},
                     {"value", "", "New value for the attribute.", true, ""}}));
  out.push_back(def(tools::kPlan,
                    "You will get a detailed plan from advanced LLM to execute. This ensures high success rate.",
                    {{"request_from_user", "string", "The user's request, verbatim.", true, ""}}));
  return out;
}

void ToolRegistry::register_tools(ToolMode mode) {
  if (!tools_.empty() && mode == mode_) return;
  mode_ = mode;
  tools_ = tool_definitions(mode);
}

bool ToolRegistry::has(std::string_view name) const {
  return std::any_of(tools_.begin(), tools_.end(), [&](const ToolDef& t) { return t.name == name; });
}

const ToolDef& ToolRegistry::at(std::string_view name) const {
  for (const auto& t : tools_)
    if (t.name == name) return t;
  throw Error(Errc::UnknownTool, "no tool named '" + std::string(name) + "' in " + std::string(to_string(mode_)) + " mode");
}

void ToolRegistry::validate(std::string_view name, const Json& args) const {
  const ToolDef& t = at(name);
  if (!args.is_object()) throw Error(Errc::ArgSchemaError, t.name + ": arguments must be an object");
  for (const auto& p : t.params) {
    auto it = args.find(p.name);
    if (it == args.end()) {
      if (p.required) throw Error(Errc::ArgSchemaError, t.name + ": missing argument '" + p.name + "'");
      continue;
    }
    // None is accepted where it reads as "empty".
    if (it->is_null() && (p.type == "array" || p.type.empty() || (t.name == tools::kAddObject && p.name != "object_name")))
      continue;
    if (!type_matches(p.type, p.items, *it))
      throw Error(Errc::ArgSchemaError, t.name + ": argument '" + p.name + "' must be " +
                                            (p.type == "array" ? "an array of " + (p.items.empty() ? std::string("string") : p.items)
                                                               : "a " + p.type));
  }
  for (auto it = args.begin(); it != args.end(); ++it)
    if (std::none_of(t.params.begin(), t.params.end(), [&](const ToolParam& p) { return p.name == it.key(); }))
      throw Error(Errc::ArgSchemaError, t.name + ": unknown argument '" + it.key() + "'");
}

}  // namespace lta
