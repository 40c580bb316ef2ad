#pragma once

#include <string_view>

namespace lta::tools {

inline constexpr std::string_view kPick = "pick_object";
inline constexpr std::string_view kPlace = "place_object";
inline constexpr std::string_view kVqa = "ask_vqa_vlm";
inline constexpr std::string_view kScan = "scan_and_update_coordinates_in_scene_graph";
inline constexpr std::string_view kPoint = "get_a_specific_coordinate_point_using_vlm";
inline constexpr std::string_view kAprilTags = "get_current_position_of_visible_apriltags";
inline constexpr std::string_view kAddObject = "add_object_to_scenegraph";
inline constexpr std::string_view kEditGraph = "edit_scenegraph";
inline constexpr std::string_view kPlan = "plan_using_advanced_llm";

inline bool is_motion(std::string_view t) { return t == kPick || t == kPlace; }
inline bool is_perception(std::string_view t) { return t == kScan || t == kPoint || t == kVqa || t == kAprilTags; }
inline bool is_graph_edit(std::string_view t) { return t == kAddObject || t == kEditGraph; }

}  // namespace lta::tools
