#include "lta/sim_world.hpp"

#include <algorithm>
#include <cmath>

#include "lta/error.hpp"

namespace lta::sim {
namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 vec3_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw Error(Errc::ScenarioParseError, std::string(what) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Eigen::Vector2d vec2_from(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw Error(Errc::ScenarioParseError, std::string(what) + ": expected [x, y]");
  return {j[0].get<double>(), j[1].get<double>()};
}

bool is_lid_of(const SimObject& o, const std::string& container) {
  return o.is_lid_of && *o.is_lid_of == container;
}

}  // namespace

double Shape::footprint_area() const {
  return kind == ShapeKind::Box ? w * d : kPi * r * r;
}

bool SimObject::footprint_contains(double x, double y, double margin) const {
  const double dx = x - position.x(), dy = y - position.y();
  if (shape.round()) return dx * dx + dy * dy <= (shape.r + margin) * (shape.r + margin);
  const double c = std::cos(yaw), s = std::sin(yaw);
  const double lx = c * dx + s * dy, ly = -s * dx + c * dy;
  return std::abs(lx) <= shape.w / 2 + margin && std::abs(ly) <= shape.d / 2 + margin;
}

std::string_view to_string(FaultKind k) {
  switch (k) {
    case FaultKind::GraspSlip: return "grasp_slip";
    case FaultKind::LocalizationBias: return "localization_bias";
    case FaultKind::CaptureDropout: return "capture_dropout";
    case FaultKind::PointMisdirect: return "point_misdirect";
  }
  return "?";
}

FaultKind parse_fault_kind(std::string_view s) {
  for (auto k : {FaultKind::GraspSlip, FaultKind::LocalizationBias, FaultKind::CaptureDropout,
                 FaultKind::PointMisdirect})
    if (to_string(k) == s) return k;
  throw Error(Errc::UnknownFaultKind, "unknown fault kind '" + std::string(s) + "'");
}

FaultSpec FaultSpec::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw Error(Errc::ScenarioParseError, "fault: missing kind");
  FaultSpec f;
  f.kind = parse_fault_kind(j["kind"].get<std::string>());
  f.probability = j.value("probability", 1.0);
  f.count = j.value("count", -1);
  if (j.contains("target") && !j["target"].is_null()) f.target = j["target"].get<std::string>();
  if (j.contains("offset")) f.offset = vec3_from(j["offset"], "fault offset");
  if (!(f.probability >= 0 && f.probability <= 1)) throw Error(Errc::ScenarioParseError, "fault: probability not in [0, 1]");
  return f;
}

Json FaultSpec::to_json() const {
  Json j{{"kind", std::string(to_string(kind))}, {"probability", probability}, {"count", count}};
  if (target) j["target"] = *target;
  if (kind == FaultKind::LocalizationBias) j["offset"] = {offset.x(), offset.y(), offset.z()};
  return j;
}

std::uint64_t fault_seed(std::uint64_t world_seed, std::size_t index) {
  return world_seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1));
}

World::World(WorldConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  config_.camera.intrinsics.validate();
  if (config_.camera.views < 1) throw Error(Errc::InvalidConfiguration, "need at least one camera view");
}

int World::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < objects_.size(); ++i)
    if (objects_[i].name == name) return static_cast<int>(i);
  return -1;
}

bool World::has(const std::string& name) const { return index_of(name) >= 0; }

const SimObject& World::object(const std::string& name) const {
  const int i = index_of(name);
  if (i < 0) throw Error(Errc::UnknownObject, "no object named '" + name + "'");
  return objects_[i];
}

bool World::rests(int i) const { return !held_ || objects_[i].name != *held_; }

std::optional<std::string> World::support_of(const std::string& name) const {
  auto it = support_.find(name);
  if (it == support_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> World::resting_on(const std::string& name) const {
  std::vector<std::string> out;
  for (const auto& o : objects_) {
    auto it = support_.find(o.name);
    if (it != support_.end() && it->second == name) out.push_back(o.name);
  }
  return out;
}

bool World::is_closed(const std::string& container) const {
  for (const auto& n : resting_on(container))
    if (is_lid_of(object(n), container)) return true;
  return false;
}

std::string World::enclosing_container(const std::string& name) const {
  // A lid rests on its box but is not inside it, and neither is what sits on the lid.
  std::string child = name;
  auto s = support_of(name);
  while (s && *s != "table") {
    const SimObject& o = object(*s);
    if (o.container && !is_lid_of(object(child), o.name)) return o.name;
    child = *s;
    s = support_of(*s);
  }
  return {};
}

double World::overlap_fraction(const SimObject& a, double x, double y, const SimObject& b) const {
  // Sampled on a regular grid over a's footprint.
  constexpr int n = 24;
  const double c = std::cos(a.yaw), s = std::sin(a.yaw);
  const double ex = a.shape.round() ? a.shape.r : a.shape.w / 2;
  const double ey = a.shape.round() ? a.shape.r : a.shape.d / 2;
  int inside = 0, hits = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double lx = (2.0 * (i + 0.5) / n - 1) * ex, ly = (2.0 * (j + 0.5) / n - 1) * ey;
      if (a.shape.round() && lx * lx + ly * ly > ex * ex) continue;
      ++inside;
      if (b.footprint_contains(x + c * lx - s * ly, y + s * lx + c * ly)) ++hits;
    }
  return inside ? double(hits) / inside : 0.0;
}

bool World::collides_on_table(const SimObject& obj, double x, double y, int ignore) const {
  for (std::size_t j = 0; j < objects_.size(); ++j) {
    if (int(j) == ignore || !rests(int(j))) continue;
    auto it = support_.find(objects_[j].name);
    if (it == support_.end() || it->second != "table") continue;
    if (overlap_fraction(obj, x, y, objects_[j]) > 0 || objects_[j].footprint_contains(x, y)) return true;
  }
  return false;
}

std::optional<Eigen::Vector2d> World::arrange_inside(const SimObject& obj, const SimObject& box,
                                                     Eigen::Vector2d want) const {
  const double clear = config_.container_clearance;
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  // Half extents along the box axes.
  auto extents = [&](const SimObject& o) {
    if (o.shape.round()) return Eigen::Vector2d(o.shape.r, o.shape.r);
    const double a = std::abs(std::cos(o.yaw - box.yaw)), b = std::abs(std::sin(o.yaw - box.yaw));
    return Eigen::Vector2d(a * o.shape.w / 2 + b * o.shape.d / 2, b * o.shape.w / 2 + a * o.shape.d / 2);
  };
  const Eigen::Vector2d ex = extents(obj);
  const double hx = box.shape.w / 2 - box.wall - ex.x() - 0.005;
  const double hy = box.shape.d / 2 - box.wall - ex.y() - 0.005;
  if (hx < 0 || hy < 0) return std::nullopt;
  auto to_world = [&](double lx, double ly) {
    return Eigen::Vector2d(box.position.x() + c * lx - s * ly, box.position.y() + s * lx + c * ly);
  };
  const std::vector<std::string> contents = resting_on(box.name);
  auto free_at = [&](const Eigen::Vector2d& l) {
    for (const auto& n : contents) {
      const SimObject& other = object(n);
      const Eigen::Vector2d d = other.position.head<2>() - box.position.head<2>();
      const Eigen::Vector2d lo(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
      const Eigen::Vector2d eo = extents(other);
      if (obj.shape.round() && other.shape.round()) {
        if ((lo - l).norm() < obj.shape.r + other.shape.r + clear) return false;
        continue;
      }
      if (std::abs(lo.x() - l.x()) < ex.x() + eo.x() + clear && std::abs(lo.y() - l.y()) < ex.y() + eo.y() + clear)
        return false;
    }
    return true;
  };
  // Candidates on a 5 mm lattice over the usable interior, nearest to the
  // requested point first.
  const Eigen::Vector2d d = want - box.position.head<2>();
  const double wx = std::clamp(c * d.x() + s * d.y(), -hx, hx), wy = std::clamp(-s * d.x() + c * d.y(), -hy, hy);
  std::vector<std::pair<double, Eigen::Vector2d>> cand;
  const int nx = int(std::floor(hx / 0.005)), ny = int(std::floor(hy / 0.005));
  for (int i = -nx; i <= nx; ++i)
    for (int j = -ny; j <= ny; ++j) {
      const double lx = i * 0.005, ly = j * 0.005;
      cand.push_back({(lx - wx) * (lx - wx) + (ly - wy) * (ly - wy), Eigen::Vector2d(lx, ly)});
    }
  cand.push_back({0.0, Eigen::Vector2d(wx, wy)});
  std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [dist, l] : cand) {
    if (free_at(l)) return to_world(l.x(), l.y());
  }
  return std::nullopt;
}

PlaceOutcome World::settle(int i, double x, double y, bool initial) {
  SimObject& obj = objects_[i];
  const double x0 = config_.table_center.x() - config_.table_size.x() / 2;
  const double y0 = config_.table_center.y() - config_.table_size.y() / 2;
  if (x < x0 || x > x0 + config_.table_size.x() || y < y0 || y > y0 + config_.table_size.y() || !std::isfinite(x) ||
      !std::isfinite(y))
    throw Error(Errc::OutOfWorkspace, "target (" + std::to_string(x) + ", " + std::to_string(y) +
                                          ") is outside the table");

  // Resting objects under the target point.
  std::vector<int> under;
  for (std::size_t j = 0; j < objects_.size(); ++j)
    if (int(j) != i && rests(int(j)) && objects_[j].footprint_contains(x, y)) under.push_back(int(j));

  auto finish = [&](const Vec3& pos, const std::string& support) {
    obj.position = pos;
    support_[obj.name] = support;
    return PlaceOutcome{pos, support};
  };

  // A lid over its own container closes it.
  for (int j : under)
    if (is_lid_of(obj, objects_[j].name) && objects_[j].container) {
      const SimObject& box = objects_[j];
      if (is_closed(box.name)) throw Error(Errc::PlacementCollision, "'" + box.name + "' already has a lid");
      obj.yaw = box.yaw;
      return finish({box.position.x(), box.position.y(), box.top() + obj.shape.height() / 2}, box.name);
    }

  // Open containers take the object whatever already sits inside them.
  int box = -1;
  for (int j : under)
    if (objects_[j].container && !is_closed(objects_[j].name) && (box < 0 || objects_[j].top() > objects_[box].top()))
      box = j;
  if (box >= 0) {
    auto spot = arrange_inside(obj, objects_[box], {x, y});
    if (!spot) throw Error(Errc::PlacementCollision, "no free space inside '" + objects_[box].name + "'");
    const SimObject& b = objects_[box];
    return finish({spot->x(), spot->y(), b.bottom() + b.wall + obj.shape.height() / 2}, b.name);
  }

  if (!under.empty()) {
    int top = under.front();
    for (int j : under)
      if (objects_[j].top() > objects_[top].top()) top = j;
    const SimObject& s = objects_[top];
    const bool flat = s.shape.kind != ShapeKind::Sphere && !s.is_lid_of && !s.container;
    if (!flat) throw Error(Errc::PlacementCollision, "cannot rest on '" + s.name + "'");
    if (obj.shape.footprint_area() > s.shape.footprint_area() * (1 + 1e-9))
      throw Error(Errc::PlacementCollision, "'" + s.name + "' is smaller than '" + obj.name + "'");
    if (overlap_fraction(obj, x, y, s) <= config_.overlap_limit)
      throw Error(Errc::PlacementCollision, "insufficient overlap with '" + s.name + "'");
    for (const auto& n : resting_on(s.name))
      if (overlap_fraction(obj, x, y, object(n)) > 0)
        throw Error(Errc::PlacementCollision, "'" + n + "' is in the way");
    return finish({x, y, s.top() + obj.shape.height() / 2}, s.name);
  }

  if (collides_on_table(obj, x, y, i)) throw Error(Errc::PlacementCollision, "footprint overlaps another object");
  (void)initial;
  return finish({x, y, config_.table_z + obj.shape.height() / 2}, "table");
}

void World::add_object(SimObject obj, const std::string& support, std::optional<Eigen::Vector2d> xy) {
  if (obj.name.empty() || obj.name == "table" || has(obj.name))
    throw Error(Errc::InvalidConfiguration, "bad or duplicate object name '" + obj.name + "'");
  const bool round = obj.shape.round();
  if ((round && !(obj.shape.r > 0)) || (obj.shape.kind != ShapeKind::Sphere && !(obj.shape.h > 0)) ||
      (!round && !(obj.shape.w > 0 && obj.shape.d > 0)))
    throw Error(Errc::InvalidConfiguration, "object '" + obj.name + "' needs positive dimensions");
  if (obj.container && obj.shape.kind != ShapeKind::Box)
    throw Error(Errc::InvalidConfiguration, "containers must be boxes");
  Eigen::Vector2d at;
  if (xy) {
    at = *xy;
  } else if (support != "table") {
    at = object(support).position.head<2>();
  } else {
    throw Error(Errc::InvalidConfiguration, "object '" + obj.name + "' needs a position");
  }
  objects_.push_back(std::move(obj));
  try {
    const PlaceOutcome out = settle(int(objects_.size()) - 1, at.x(), at.y(), true);
    if (out.support != support)
      throw Error(Errc::PlacementCollision, "'" + objects_.back().name + "' landed on '" + out.support +
                                                "' instead of '" + support + "'");
  } catch (...) {
    support_.erase(objects_.back().name);
    objects_.pop_back();
    throw;
  }
}

void World::pick(const std::string& name, const Vec3& grasp) {
  if (held_) throw Error(Errc::GripperOccupied, "already holding '" + *held_ + "'");
  const int i = index_of(name);
  if (i < 0) throw Error(Errc::UnknownObject, "no object named '" + name + "'");
  const SimObject& o = objects_[i];
  if (!o.graspable) throw Error(Errc::NotGraspable, "'" + name + "' cannot be grasped");
  const std::string box = enclosing_container(name);
  if (!box.empty() && is_closed(box))
    throw Error(Errc::ObjectInsideClosedContainer, "'" + name + "' is inside closed '" + box + "'");
  if (!resting_on(name).empty()) throw Error(Errc::ObjectCovered, "'" + resting_on(name).front() + "' rests on '" + name + "'");
  // Horizontal offset from the center axis; the height only has to fall on
  // the object.
  const double tol = config_.grasp_tolerance;
  const double off = (grasp.head<2>() - o.position.head<2>()).norm();
  if (!grasp.allFinite() || off > tol) throw Error(Errc::GraspMissed, "grasp point is off the object", off);
  if (grasp.z() < o.bottom() - tol || grasp.z() > o.top() + tol) {
    const double dz = grasp.z() < o.bottom() ? o.bottom() - grasp.z() : grasp.z() - o.top();
    throw Error(Errc::GraspMissed, "grasp height is off the object", dz);
  }
  if (fault_fires(FaultKind::GraspSlip, name)) throw Error(Errc::GraspMissed, "object slipped from the gripper", off);
  held_ = name;
  support_.erase(name);
}

PlaceOutcome World::place(const Vec3& target) {
  if (!held_) throw Error(Errc::GripperEmpty, "nothing in the gripper");
  if (!target.allFinite()) throw Error(Errc::OutOfWorkspace, "non-finite target");
  const int i = index_of(*held_);
  const PlaceOutcome out = settle(i, target.x(), target.y(), false);
  held_.reset();
  return out;
}

void World::reposition(const std::string& name, const Eigen::Vector2d& xy) {
  const int i = index_of(name);
  if (i < 0) throw Error(Errc::UnknownObject, "no object named '" + name + "'");
  if (!rests(i)) throw Error(Errc::GripperOccupied, "'" + name + "' is in the gripper");
  if (!resting_on(name).empty()) throw Error(Errc::ObjectCovered, "'" + name + "' supports other objects");
  const SimObject saved = objects_[i];
  const std::string old_support = support_.at(name);
  support_.erase(name);
  try {
    const PlaceOutcome out = settle(i, xy.x(), xy.y(), false);
    if (out.support != "table") throw Error(Errc::PlacementCollision, "repositioning must land on the table");
  } catch (...) {
    objects_[i] = saved;
    support_[name] = old_support;
    throw;
  }
}

void World::inject_fault(const FaultSpec& fault) {
  if (fault.target && !has(*fault.target))
    throw Error(Errc::UnknownObject, "fault target '" + *fault.target + "' is not in the world");
  fault_rngs_.emplace_back(fault_seed(seed_, faults_.size()));
  fault_shots_.push_back(fault.count);
  faults_.push_back(fault);
}

bool World::fault_fires(FaultKind kind, const std::string& target) {
  bool fired = false;
  for (std::size_t k = 0; k < faults_.size(); ++k) {
    const FaultSpec& f = faults_[k];
    if (f.kind != kind || (f.target && *f.target != target)) continue;
    const double u = unit_draw(fault_rngs_[k]);
    if (fault_shots_[k] != 0 && u < f.probability) {
      if (fault_shots_[k] > 0) --fault_shots_[k];
      fired = true;
    }
  }
  return fired;
}

Vec3 World::localization_bias(const std::string& target) {
  Vec3 sum = Vec3::Zero();
  for (std::size_t k = 0; k < faults_.size(); ++k) {
    const FaultSpec& f = faults_[k];
    if (f.kind != FaultKind::LocalizationBias || (f.target && *f.target != target)) continue;
    const double u = unit_draw(fault_rngs_[k]);
    if (fault_shots_[k] != 0 && u < f.probability) {
      if (fault_shots_[k] > 0) --fault_shots_[k];
      sum += f.offset;
    }
  }
  return sum;
}

Json to_json(const SimObject& o) {
  Json j;
  j["name"] = o.name;
  switch (o.shape.kind) {
    case ShapeKind::Box:
      j["shape"] = "box";
      j["size"] = {o.shape.w, o.shape.d, o.shape.h};
      break;
    case ShapeKind::Cylinder:
      j["shape"] = "cylinder";
      j["r"] = o.shape.r;
      j["h"] = o.shape.h;
      break;
    case ShapeKind::Sphere:
      j["shape"] = "sphere";
      j["r"] = o.shape.r;
      break;
    case ShapeKind::Disc:
      j["shape"] = "disc";
      j["r"] = o.shape.r;
      j["h"] = o.shape.h;
      break;
  }
  j["position"] = {o.position.x(), o.position.y(), o.position.z()};
  j["yaw"] = o.yaw;
  j["color"] = o.color;
  j["category"] = o.category;
  j["graspable"] = o.graspable;
  if (o.container) {
    j["container"] = true;
    j["wall"] = o.wall;
  }
  if (o.is_lid_of) j["lid_of"] = *o.is_lid_of;
  if (o.tag_id) j["tag"] = *o.tag_id;
  return j;
}

SimObject object_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::ScenarioParseError, "world object: expected an object");
  SimObject o;
  try {
    o.name = j.at("name").get<std::string>();
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "box") {
      o.shape.kind = ShapeKind::Box;
      const Vec3 s = vec3_from(j.at("size"), "size");
      o.shape.w = s.x();
      o.shape.d = s.y();
      o.shape.h = s.z();
    } else if (shape == "cylinder" || shape == "disc") {
      o.shape.kind = shape == "disc" ? ShapeKind::Disc : ShapeKind::Cylinder;
      o.shape.r = j.at("r").get<double>();
      o.shape.h = j.at("h").get<double>();
    } else if (shape == "sphere") {
      o.shape.kind = ShapeKind::Sphere;
      o.shape.r = j.at("r").get<double>();
    } else {
      throw Error(Errc::ScenarioParseError, "unknown shape '" + shape + "' for '" + o.name + "'");
    }
    o.yaw = j.value("yaw", 0.0);
    o.color = j.value("color", "");
    o.category = j.value("category", "");
    o.graspable = j.value("graspable", true);
    o.container = j.value("container", false);
    o.wall = j.value("wall", 0.01);
    if (j.contains("lid_of")) o.is_lid_of = j["lid_of"].get<std::string>();
    if (j.contains("tag")) o.tag_id = j["tag"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ScenarioParseError, std::string("world object: ") + e.what());
  }
  return o;
}

World World::from_json(const Json& spec, std::uint64_t seed) {
  WorldConfig cfg;
  try {
    if (spec.contains("table")) {
      const Json& t = spec["table"];
      cfg.table_z = t.value("z", cfg.table_z);
      if (t.contains("center")) cfg.table_center = vec2_from(t["center"], "table center");
      if (t.contains("size")) cfg.table_size = vec2_from(t["size"], "table size");
    }
    cfg.grasp_tolerance = spec.value("grasp_tolerance", cfg.grasp_tolerance);
    cfg.overlap_limit = spec.value("overlap_limit", cfg.overlap_limit);
    cfg.min_visible_fraction = spec.value("min_visible_fraction", cfg.min_visible_fraction);
    cfg.container_clearance = spec.value("container_clearance", cfg.container_clearance);
    cfg.depth_noise = spec.value("depth_noise", cfg.depth_noise);
    if (spec.contains("camera")) {
      const Json& c = spec["camera"];
      cfg.camera.height = c.value("height", cfg.camera.height);
      cfg.camera.tilt_deg = c.value("tilt_deg", cfg.camera.tilt_deg);
      cfg.camera.views = c.value("views", cfg.camera.views);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ScenarioParseError, std::string("world: ") + e.what());
  }
  World w(cfg, seed);
  if (!spec.contains("objects") || !spec["objects"].is_array())
    throw Error(Errc::ScenarioParseError, "world: missing objects list");
  std::mt19937_64 rng(seed ^ 0x5851F42D4C957F2Dull);
  for (const Json& oj : spec["objects"]) {
    SimObject o = object_from_json(oj);
    const std::string on = oj.value("on", "table");
    std::optional<Eigen::Vector2d> at;
    if (oj.contains("at")) at = vec2_from(oj["at"], "at");
    const double jitter = oj.value("jitter", 0.0);
    bool placed = false;
    if (jitter > 0 && at) {
      for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
        const double dx = (2 * unit_draw(rng) - 1) * jitter, dy = (2 * unit_draw(rng) - 1) * jitter;
        try {
          w.add_object(o, on, Eigen::Vector2d(at->x() + dx, at->y() + dy));
          placed = true;
        } catch (const Error& e) {
          if (e.code() != Errc::PlacementCollision && e.code() != Errc::OutOfWorkspace) throw;
        }
      }
    }
    if (!placed) w.add_object(o, on, at);
  }
  return w;
}

Json World::snapshot() const {
  Json objs = Json::array();
  for (const auto& o : objects_) {
    Json j = to_json(o);
    auto s = support_of(o.name);
    j["support"] = s ? Json(*s) : Json(nullptr);
    objs.push_back(std::move(j));
  }
  return Json{{"table",
               {{"z", config_.table_z},
                {"center", {config_.table_center.x(), config_.table_center.y()}},
                {"size", {config_.table_size.x(), config_.table_size.y()}}}},
              {"gripper", held_ ? Json(*held_) : Json(nullptr)},
              {"objects", std::move(objs)}};
}

bool World::operator==(const World& other) const {
  if (objects_.size() != other.objects_.size() || held_ != other.held_ || support_ != other.support_) return false;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const auto& a = objects_[i];
    const auto& b = other.objects_[i];
    if (a.name != b.name || a.position != b.position || a.yaw != b.yaw) return false;
  }
  return true;
}

}  // namespace lta::sim
