#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "lta/geometry.hpp"

namespace lta::sim {

using Vec3 = Eigen::Vector3d;
using Json = nlohmann::json;

enum class ShapeKind { Box, Cylinder, Sphere, Disc };

struct Shape {
  ShapeKind kind = ShapeKind::Box;
  double w = 0, d = 0, h = 0;  // box extents along local x, y, z
  double r = 0;                // cylinder, disc, sphere

  double height() const { return kind == ShapeKind::Sphere ? 2 * r : h; }
  bool round() const { return kind != ShapeKind::Box; }
  double footprint_area() const;
};

struct SimObject {
  std::string name;
  Shape shape;
  Vec3 position = Vec3::Zero();  // geometric center, base frame
  double yaw = 0;
  std::string color;
  std::string category;
  bool graspable = true;
  bool container = false;  // open-top hollow box
  double wall = 0.01;      // container wall and floor thickness
  std::optional<std::string> is_lid_of;
  std::optional<int> tag_id;

  double top() const { return position.z() + shape.height() / 2; }
  double bottom() const { return position.z() - shape.height() / 2; }
  bool footprint_contains(double x, double y, double margin = 0) const;
  // Top-center point, where a tag sits.
  Vec3 tag_point() const { return {position.x(), position.y(), top()}; }
};

enum class FaultKind { GraspSlip, LocalizationBias, CaptureDropout, PointMisdirect };

std::string_view to_string(FaultKind k);
FaultKind parse_fault_kind(std::string_view s);  // UnknownFaultKind

// A fault fires on an eligible operation when its draw u (uniform in [0,1))
// is below `probability` and it has shots left. Every eligible operation
// consumes exactly one draw from the fault's own generator, seeded with
// fault_seed(world seed, index in injection order).
struct FaultSpec {
  FaultKind kind = FaultKind::GraspSlip;
  double probability = 1.0;
  int count = -1;                     // shots; -1 = unlimited
  std::optional<std::string> target;  // restrict to one object
  Vec3 offset = Vec3::Zero();         // LocalizationBias displacement, meters

  static FaultSpec from_json(const Json& j);
  Json to_json() const;
};

std::uint64_t fault_seed(std::uint64_t world_seed, std::size_t index);
// The uniform draw used by faults: top 53 bits of a 64-bit output.
inline double unit_draw(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

struct CameraConfig {
  geom::CameraIntrinsics<double> intrinsics{240.0, 240.0, 160.0, 120.0, 320, 240};
  double height = 0.7;      // above the table center
  double tilt_deg = 12.0;   // side views
  int views = 3;            // pose 0 looks straight down
};

struct WorldConfig {
  double table_z = 0.0;
  Eigen::Vector2d table_center{0.2, -0.6};
  Eigen::Vector2d table_size{0.8, 0.6};
  double grasp_tolerance = 0.02;
  double overlap_limit = 0.5;
  double min_visible_fraction = 0.3;
  double container_clearance = 0.025;
  double depth_noise = 0.0;  // stddev, meters
  CameraConfig camera;
};

struct CaptureResult {
  std::uint64_t id = 0;
  int view = 0;
  geom::DepthImage<double> depth;
  geom::CameraPose<double> pose;
  std::vector<geom::BBox> truth_bboxes;  // visible objects only
  std::set<std::string> visible;
};

struct TagReading {
  int tag_id;
  Vec3 position;
};

struct PlaceOutcome {
  Vec3 position;
  std::string support;
};

class World {
 public:
  explicit World(WorldConfig config = {}, std::uint64_t seed = 0);

  // Builds from the scenario "world" section. Object positions are jittered
  // deterministically from the seed for objects with a "jitter" value.
  static World from_json(const Json& spec, std::uint64_t seed);

  const WorldConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

  // Adds a resting object. With `support` = "table" the object sits at `xy`;
  // on an object it is stacked or, for containers, arranged inside.
  void add_object(SimObject obj, const std::string& support, std::optional<Eigen::Vector2d> xy);

  const std::vector<SimObject>& objects() const { return objects_; }
  bool has(const std::string& name) const;
  const SimObject& object(const std::string& name) const;  // UnknownObject
  std::optional<std::string> held() const { return held_; }
  std::optional<std::string> support_of(const std::string& name) const;
  std::vector<std::string> resting_on(const std::string& name) const;
  bool is_closed(const std::string& container) const;
  std::string enclosing_container(const std::string& name) const;  // "" if none

  void pick(const std::string& name, const Vec3& grasp_point);
  PlaceOutcome place(const Vec3& target);
  // Operator intervention: moves a resting object to a free table spot.
  void reposition(const std::string& name, const Eigen::Vector2d& xy);

  CaptureResult capture(int view);
  std::vector<TagReading> read_apriltags();

  void inject_fault(const FaultSpec& fault);
  const std::vector<FaultSpec>& faults() const { return faults_; }
  // Consumes one draw for every fault of `kind` that applies to `target`;
  // true if any fired.
  bool fault_fires(FaultKind kind, const std::string& target = {});
  // Sum of active bias offsets for `target`.
  Vec3 localization_bias(const std::string& target);

  geom::CameraPose<double> camera_pose(int view) const;
  // Visible set from the top-down pose, noise free.
  std::set<std::string> visible_objects() const;
  // Noise-free render from `view`: depth and per-pixel object index (-1 = table, -2 = nothing).
  struct Render {
    geom::DepthImage<double> depth;
    std::vector<int> ids;
    std::vector<int> footprint_pixels;  // per object, hits ignoring occluders
  };
  Render render(int view) const;
  // Largest empty circle on the table seen from the top camera; ties go to the
  // point nearest the principal point. Returns the pixel.
  Eigen::Vector2i free_spot_pixel() const;
  // Noise-free reference for perception: centroid of the object's surface
  // points from all views above the table band. EmptyCloud if unseen.
  Vec3 surface_centroid(const std::string& name, double z_epsilon = 0.005) const;

  Json snapshot() const;
  bool operator==(const World& other) const;

 private:
  int index_of(const std::string& name) const;
  bool rests(int i) const;
  // Footprint overlap of `a` placed at xy with `b`, as a fraction of a's area.
  double overlap_fraction(const SimObject& a, double x, double y, const SimObject& b) const;
  bool collides_on_table(const SimObject& obj, double x, double y, int ignore) const;
  std::optional<Eigen::Vector2d> arrange_inside(const SimObject& obj, const SimObject& box, Eigen::Vector2d want) const;
  PlaceOutcome settle(int i, double x, double y, bool initial);

  WorldConfig config_;
  std::uint64_t seed_;
  std::vector<SimObject> objects_;
  std::map<std::string, std::string> support_;
  std::optional<std::string> held_;
  std::vector<FaultSpec> faults_;
  std::vector<std::mt19937_64> fault_rngs_;
  std::vector<int> fault_shots_;
  std::uint64_t captures_ = 0;
};

Json to_json(const SimObject& o);
SimObject object_from_json(const Json& j);

}  // namespace lta::sim
