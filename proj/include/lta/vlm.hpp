#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lta/geometry.hpp"
#include "lta/sim_world.hpp"

namespace lta {

// What the model looks at: one capture, plus the world it came from (the
// scripted model reads ground truth, the remote one gets a rendered image).
struct VlmView {
  const sim::World& world;
  const sim::CaptureResult& capture;
};

class VlmBackend {
 public:
  virtual ~VlmBackend() = default;
  virtual bool presence(const std::string& object_name, const VlmView& view) = 0;
  // Boxes for the named objects; an object may be missing from the answer.
  virtual std::vector<geom::BBox> bboxes(const std::vector<std::string>& names, const VlmView& view) = 0;
  virtual Eigen::Vector2d point(const std::string& request, const VlmView& view) = 0;
  virtual std::string vqa(const std::string& question, const VlmView& view) = 0;
};

struct ScriptedVlmConfig {
  int bbox_jitter_px = 3;
  double false_negative_rate = 0;
  double false_positive_rate = 0;
  std::uint64_t seed = 0;
};

// Answers from simulator ground truth. Every answer is a pure function of the
// capture, the world snapshot, the seed and the query text.
//
// Point requests understood (case-insensitive):
//   "between A and B"            midpoint of the two objects' box centers
//   "the center|knob|handle of A"  center of A's box (a knob sits at a lid's center)
//   "free spot on the table"     center of the largest empty circle
//   "temporary location ..."     same as a free spot
// Questions understood:
//   "do you see (a|an|any|some) <color|category> (object)?"  -> "yes: a, b" | "no"
//   "how many <category|color> (objects) are visible?"        -> count
//   "which objects are visible?"                              -> "a, b, c"
class ScriptedVlm : public VlmBackend {
 public:
  explicit ScriptedVlm(ScriptedVlmConfig config = {}) : config_(config) {}

  bool presence(const std::string& object_name, const VlmView& view) override;
  std::vector<geom::BBox> bboxes(const std::vector<std::string>& names, const VlmView& view) override;
  Eigen::Vector2d point(const std::string& request, const VlmView& view) override;
  std::string vqa(const std::string& question, const VlmView& view) override;

  const ScriptedVlmConfig& config() const { return config_; }

 private:
  std::uint64_t query_seed(const VlmView& view, std::string_view kind, std::string_view text) const;
  ScriptedVlmConfig config_;
};

// Center of a half-open pixel box.
Eigen::Vector2d bbox_center(const geom::BBox& box);

// Stable 64-bit FNV-1a, used to derive per-query generators.
std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ull);

}  // namespace lta
