#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lta/geometry.hpp"

// Text formats exchanged with the vision-language model. Remote responses are
// checked against these grammars before anything downstream sees them.
namespace lta::wire {

inline constexpr std::string_view kPresenceSystem = "Output is STRICTLY Binary. 1 or 0.";
inline constexpr std::string_view kBBoxSystem =
    "Strictly maintain format\n"
    "[{\"bbox_2d\": [integer, integer, integer, integer], \"label\": \"obj_name\"},\n"
    "{\"bbox_2d\": [integer, integer, integer, integer], \"label\": \"obj_name\"},\n"
    "...\n"
    "]";
inline constexpr std::string_view kPointSystem =
    "STRICTLY ADHERE TO OUTPUT FORMAT <points x y>object</points>. Single Coordinate. STRICTLY ADHERE TO THIS "
    "FORMAT!!!!";

std::string presence_prompt(std::string_view object_name);
std::string bbox_prompt(const std::vector<std::string>& object_names);
std::string point_prompt(std::string_view request);

// "1" or "0", surrounding whitespace allowed. MalformedResponse otherwise.
bool parse_presence(std::string_view text);
std::string format_presence(bool present);

// JSON list of {"bbox_2d": [x1, y1, x2, y2], "label": name} with integer
// pixels and x1 < x2, y1 < y2. ParseError otherwise.
std::vector<geom::BBox> parse_bboxes(std::string_view text);
std::string format_bboxes(const std::vector<geom::BBox>& boxes);

struct PointAnswer {
  Eigen::Vector2d pixel;
  std::string label;
};
// Exactly one <points x y>label</points> element. ParseError otherwise.
PointAnswer parse_point(std::string_view text);
std::string format_point(const Eigen::Vector2d& pixel, std::string_view label);

}  // namespace lta::wire
