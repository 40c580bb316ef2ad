#include "lta/wire.hpp"

#include <regex>

#include <json.hpp>

#include "lta/error.hpp"
#include "lta/text.hpp"

namespace lta::wire {
namespace {

std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string presence_prompt(std::string_view object_name) {
  return "Do you see " + std::string(object_name) + " in the image. Answer strictly in binary. 1 or 0.";
}

std::string bbox_prompt(const std::vector<std::string>& object_names) {
  std::string names;
  for (std::size_t i = 0; i < object_names.size(); ++i) names += (i ? ", " : "") + object_names[i];
  return "Outline the position of " + names + " and output all the coordinates in the JSON format.";
}

std::string point_prompt(std::string_view request) {
  return "Point to the " + std::string(request) +
         ". STRICTLY output a SINGULAR coordinate in XML format <points x y>object</points>";
}

bool parse_presence(std::string_view text) {
  const std::string_view t = trim(text);
  if (t == "1") return true;
  if (t == "0") return false;
  throw Error(Errc::MalformedResponse, "presence answer must be 1 or 0, got '" + std::string(t) + "'");
}

std::string format_presence(bool present) { return present ? "1" : "0"; }

std::vector<geom::BBox> parse_bboxes(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(trim(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::ParseError, std::string("bbox list is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(Errc::ParseError, "bbox answer must be a JSON list");
  std::vector<geom::BBox> out;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("bbox_2d") || !item.contains("label"))
      throw Error(Errc::ParseError, "each entry needs bbox_2d and label");
    const auto& b = item["bbox_2d"];
    if (!item["label"].is_string()) throw Error(Errc::ParseError, "label must be a string");
    if (!b.is_array() || b.size() != 4) throw Error(Errc::ParseError, "bbox_2d must hold four integers");
    for (const auto& v : b)
      if (!v.is_number_integer()) throw Error(Errc::ParseError, "bbox_2d must hold four integers");
    geom::BBox box{item["label"].get<std::string>(), b[0].get<int>(), b[1].get<int>(), b[2].get<int>(),
                   b[3].get<int>()};
    if (!box.valid())
      throw Error(Errc::ParseError, "bbox for '" + box.label + "' has min >= max");
    out.push_back(std::move(box));
  }
  return out;
}

std::string format_bboxes(const std::vector<geom::BBox>& boxes) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& b : boxes)
    doc.push_back({{"bbox_2d", {b.x_min, b.y_min, b.x_max, b.y_max}}, {"label", b.label}});
  return doc.dump();
}

PointAnswer parse_point(std::string_view text) {
  static const std::regex element(R"(<points\s+([-+0-9.eE]+)\s+([-+0-9.eE]+)\s*>([^<]*)</points>)");
  const std::string t(trim(text));
  std::smatch m;
  if (!std::regex_match(t, m, element)) {
    const auto first = t.find("<points");
    if (first != std::string::npos && t.find("<points", first + 1) != std::string::npos)
      throw Error(Errc::ParseError, "expected a single <points> element, got several");
    throw Error(Errc::ParseError, "expected <points x y>object</points>, got '" + t + "'");
  }
  PointAnswer out;
  try {
    std::size_t used = 0;
    out.pixel.x() = std::stod(m[1].str(), &used);
    if (used != m[1].length()) throw std::invalid_argument("x");
    out.pixel.y() = std::stod(m[2].str(), &used);
    if (used != m[2].length()) throw std::invalid_argument("y");
  } catch (const std::exception&) {
    throw Error(Errc::ParseError, "point coordinates are not numbers: '" + t + "'");
  }
  out.label = std::string(trim(m[3].str()));
  return out;
}

std::string format_point(const Eigen::Vector2d& pixel, std::string_view label) {
  return "<points " + format_number(pixel.x()) + " " + format_number(pixel.y()) + ">" + std::string(label) +
         "</points>";
}

}  // namespace lta::wire
