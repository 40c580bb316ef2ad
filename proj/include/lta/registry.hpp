#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lta/chat.hpp"

namespace lta {

// vlm: the default tool set. apriltag: the VLM grounding tools (scan, point)
// are replaced by the tag readout.
enum class ToolMode { Vlm, AprilTag };

std::string_view to_string(ToolMode m);
ToolMode parse_tool_mode(std::string_view s);  // InvalidConfiguration

// Definitions in registration order, with the descriptions shown to models.
std::vector<ToolDef> tool_definitions(ToolMode mode);

class ToolRegistry {
 public:
  explicit ToolRegistry(ToolMode mode = ToolMode::Vlm) { register_tools(mode); }

  // Registers the mode's tool set. Registering the same mode again is a no-op;
  // another mode replaces the set.
  void register_tools(ToolMode mode);

  ToolMode mode() const { return mode_; }
  const std::vector<ToolDef>& tools() const { return tools_; }
  bool has(std::string_view name) const;
  const ToolDef& at(std::string_view name) const;  // UnknownTool

  // UnknownTool, or ArgSchemaError for a missing required argument, an
  // unknown argument or a value of the wrong JSON type.
  void validate(std::string_view name, const Json& args) const;

 private:
  ToolMode mode_ = ToolMode::Vlm;
  std::vector<ToolDef> tools_;
};

}  // namespace lta
