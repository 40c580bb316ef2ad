#include "lta/vlm.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <regex>

#include "lta/error.hpp"

namespace lta {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return char(std::tolower(c)); });
  return s;
}

// "red onion" and "the red_onion" both name red_onion.
std::string to_node_name(std::string phrase) {
  phrase = lower(phrase);
  if (phrase.rfind("the ", 0) == 0) phrase = phrase.substr(4);
  while (!phrase.empty() && std::isspace(static_cast<unsigned char>(phrase.back()))) phrase.pop_back();
  std::replace(phrase.begin(), phrase.end(), ' ', '_');
  return phrase;
}

const geom::BBox* find_box(const sim::CaptureResult& cap, const std::string& name) {
  for (const auto& b : cap.truth_bboxes)
    if (b.label == name) return &b;
  return nullptr;
}

// Plural forms the question grammar accepts for a noun.
bool noun_matches(const std::string& word, const std::string& noun) {
  if (noun.empty()) return false;
  return word == noun || word == noun + "s" || word == noun + "es";
}

std::vector<const sim::SimObject*> visible_matching(const VlmView& view, const std::string& word) {
  std::vector<const sim::SimObject*> out;
  for (const auto& o : view.world.objects())
    if (view.capture.visible.count(o.name) &&
        (noun_matches(word, lower(o.color)) || noun_matches(word, lower(o.category))))
      out.push_back(&o);
  return out;
}

}  // namespace

std::uint64_t fnv1a(std::string_view text, std::uint64_t h) {
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

Eigen::Vector2d bbox_center(const geom::BBox& b) {
  return {(b.x_min + b.x_max - 1) / 2.0, (b.y_min + b.y_max - 1) / 2.0};
}

std::uint64_t ScriptedVlm::query_seed(const VlmView& view, std::string_view kind, std::string_view text) const {
  std::uint64_t h = fnv1a(kind, config_.seed ^ 0xcbf29ce484222325ull);
  h = fnv1a(std::to_string(view.capture.id), h);
  return fnv1a(text, h);
}

bool ScriptedVlm::presence(const std::string& object_name, const VlmView& view) {
  const bool truth = view.capture.visible.count(object_name) > 0;
  const double rate = truth ? config_.false_negative_rate : config_.false_positive_rate;
  if (rate <= 0 || (!truth && !view.world.has(object_name))) return truth;
  std::mt19937_64 rng(query_seed(view, "presence", object_name));
  return sim::unit_draw(rng) < rate ? !truth : truth;
}

std::vector<geom::BBox> ScriptedVlm::bboxes(const std::vector<std::string>& names, const VlmView& view) {
  std::vector<geom::BBox> out;
  const auto& intr = view.capture.depth.intrinsics;
  for (const auto& name : names) {
    const geom::BBox* truth = find_box(view.capture, name);
    if (!truth) continue;
    geom::BBox b = *truth;
    if (config_.bbox_jitter_px > 0) {
      std::mt19937_64 rng(query_seed(view, "bbox", name));
      std::uniform_int_distribution<int> d(-config_.bbox_jitter_px, config_.bbox_jitter_px);
      geom::BBox j = b;
      j.x_min += d(rng);
      j.y_min += d(rng);
      j.x_max += d(rng);
      j.y_max += d(rng);
      j = geom::clamp_bbox(j, intr.width, intr.height);
      if (j.valid()) b = j;
    }
    out.push_back(b);
  }
  return out;
}

Eigen::Vector2d ScriptedVlm::point(const std::string& request, const VlmView& view) {
  static const std::regex between(R"(between\s+(.+?)\s+and\s+(.+?)[\s.?!]*$)", std::regex::icase);
  std::smatch m;
  if (std::regex_search(request, m, between)) {
    const std::string a = to_node_name(m[1].str()), b = to_node_name(m[2].str());
    const geom::BBox* ba = find_box(view.capture, a);
    const geom::BBox* bb = find_box(view.capture, b);
    if (!ba) throw Error(Errc::NotVisible, "'" + a + "' is not visible");
    if (!bb) throw Error(Errc::NotVisible, "'" + b + "' is not visible");
    return (bbox_center(*ba) + bbox_center(*bb)) / 2;
  }
  static const std::regex part(R"(^\s*(?:the\s+)?(?:center|centre|middle|knob|handle)\s+of\s+(.+?)[\s.?!]*$)",
                               std::regex::icase);
  if (std::regex_search(request, m, part)) {
    const std::string a = to_node_name(m[1].str());
    const geom::BBox* ba = find_box(view.capture, a);
    if (!ba) throw Error(Errc::NotVisible, "'" + a + "' is not visible");
    return bbox_center(*ba);
  }
  const std::string r = lower(request);
  if (r.find("free spot") != std::string::npos || r.find("temporary location") != std::string::npos) {
    if (view.capture.view != 0) throw Error(Errc::UnsupportedPrompt, "free spots are found in the top view");
    return view.world.free_spot_pixel().cast<double>();
  }
  throw Error(Errc::UnsupportedPrompt, "cannot point to '" + request + "'");
}

std::string ScriptedVlm::vqa(const std::string& question, const VlmView& view) {
  static const std::regex see(R"(^\s*(?:do you see|is there|are there)\s+(?:a |an |any |some )?([a-z]+)(?:\s+(?:object|objects|item|items|thing|things))?\s*\??\s*$)",
                              std::regex::icase);
  static const std::regex count(R"(^\s*how many\s+([a-z]+)(?:\s+(?:object|objects|item|items))?\s+(?:are\s+)?(?:visible|there|do you see)\s*\??\s*$)",
                                std::regex::icase);
  static const std::regex list(R"(^\s*(?:which|what) objects (?:are visible|do you see)\s*\??\s*$)",
                               std::regex::icase);
  std::smatch m;
  if (std::regex_match(question, m, see)) {
    const auto hits = visible_matching(view, lower(m[1].str()));
    if (hits.empty()) return "no";
    std::string names;
    for (std::size_t i = 0; i < hits.size(); ++i) names += (i ? ", " : "") + hits[i]->name;
    return "yes: " + names;
  }
  if (std::regex_match(question, m, count)) return std::to_string(visible_matching(view, lower(m[1].str())).size());
  if (std::regex_match(question, m, list)) {
    std::string names;
    for (const auto& name : view.capture.visible) names += (names.empty() ? "" : ", ") + name;
    return names;
  }
  throw Error(Errc::UnsupportedPrompt, "cannot answer '" + question + "'");
}

}  // namespace lta
