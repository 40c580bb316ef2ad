// Analytic ray casting against the table plane and object primitives.

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "lta/error.hpp"
#include "lta/sim_world.hpp"

namespace lta::sim {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = 1e-9;

// Entry distance of a ray into an axis-aligned box, or inf.
double hit_aabb(const Vec3& o, const Vec3& d, const Vec3& center, const Vec3& half) {
  double t0 = -kInf, t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    const double lo = center[a] - half[a] - o[a], hi = center[a] + half[a] - o[a];
    if (std::abs(d[a]) < 1e-15) {
      if (lo > 0 || hi < 0) return kInf;
      continue;
    }
    double ta = lo / d[a], tb = hi / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t1 < kEps) return kInf;
  return t0 > kEps ? t0 : kInf;
}

double hit_cylinder(const Vec3& o, const Vec3& d, double r, double h) {
  double best = kInf;
  const double a = d.x() * d.x() + d.y() * d.y();
  if (a > 1e-18) {
    const double b = 2 * (o.x() * d.x() + o.y() * d.y());
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)})
        if (t > kEps && std::abs(o.z() + t * d.z()) <= h / 2) best = std::min(best, t);
    }
  }
  if (std::abs(d.z()) > 1e-15)
    for (double zc : {h / 2, -h / 2}) {
      const double t = (zc - o.z()) / d.z();
      const double x = o.x() + t * d.x(), y = o.y() + t * d.y();
      if (t > kEps && x * x + y * y <= r * r) best = std::min(best, t);
    }
  return best;
}

double hit_sphere(const Vec3& o, const Vec3& d, double r) {
  const double a = d.squaredNorm(), b = 2 * o.dot(d), c = o.squaredNorm() - r * r;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return kInf;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2 * a), t1 = (-b + sq) / (2 * a);
  if (t0 > kEps) return t0;
  return t1 > kEps ? t1 : kInf;
}

// Ray parameter of the first hit on `obj`, with d not necessarily unit.
double hit_object(const SimObject& obj, const Vec3& origin, const Vec3& dir) {
  const double c = std::cos(obj.yaw), s = std::sin(obj.yaw);
  const Vec3 q = origin - obj.position;
  const Vec3 o(c * q.x() + s * q.y(), -s * q.x() + c * q.y(), q.z());
  const Vec3 d(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  const Shape& sh = obj.shape;
  switch (sh.kind) {
    case ShapeKind::Box: {
      const Vec3 half(sh.w / 2, sh.d / 2, sh.h / 2);
      if (!obj.container) return hit_aabb(o, d, Vec3::Zero(), half);
      const double t = obj.wall;
      double best = hit_aabb(o, d, Vec3(0, 0, -half.z() + t / 2), Vec3(half.x(), half.y(), t / 2));
      best = std::min(best, hit_aabb(o, d, Vec3(half.x() - t / 2, 0, 0), Vec3(t / 2, half.y(), half.z())));
      best = std::min(best, hit_aabb(o, d, Vec3(-half.x() + t / 2, 0, 0), Vec3(t / 2, half.y(), half.z())));
      best = std::min(best, hit_aabb(o, d, Vec3(0, half.y() - t / 2, 0), Vec3(half.x(), t / 2, half.z())));
      best = std::min(best, hit_aabb(o, d, Vec3(0, -half.y() + t / 2, 0), Vec3(half.x(), t / 2, half.z())));
      return best;
    }
    case ShapeKind::Cylinder:
    case ShapeKind::Disc:
      return hit_cylinder(o, d, sh.r, sh.h);
    case ShapeKind::Sphere:
      return hit_sphere(o, d, sh.r);
  }
  return kInf;
}

struct PixelRect {
  int u0, v0, u1, v1;  // half-open
};

PixelRect screen_rect(const SimObject& obj, const geom::CameraIntrinsics<double>& intr,
                      const geom::CameraPose<double>& pose) {
  const PixelRect full{0, 0, intr.width, intr.height};
  double ex, ey;
  if (obj.shape.round()) {
    ex = ey = obj.shape.r;
  } else {
    const double c = std::abs(std::cos(obj.yaw)), s = std::abs(std::sin(obj.yaw));
    ex = c * obj.shape.w / 2 + s * obj.shape.d / 2;
    ey = s * obj.shape.w / 2 + c * obj.shape.d / 2;
  }
  double umin = kInf, umax = -kInf, vmin = kInf, vmax = -kInf;
  for (int k = 0; k < 8; ++k) {
    const Vec3 p(obj.position.x() + ((k & 1) ? ex : -ex), obj.position.y() + ((k & 2) ? ey : -ey),
                 (k & 4) ? obj.top() : obj.bottom());
    Eigen::Vector2d px;
    try {
      px = geom::project(p, intr, pose);
    } catch (const Error&) {
      return full;
    }
    umin = std::min(umin, px.x());
    umax = std::max(umax, px.x());
    vmin = std::min(vmin, px.y());
    vmax = std::max(vmax, px.y());
  }
  return {std::clamp(int(std::floor(umin)) - 1, 0, intr.width), std::clamp(int(std::floor(vmin)) - 1, 0, intr.height),
          std::clamp(int(std::ceil(umax)) + 2, 0, intr.width), std::clamp(int(std::ceil(vmax)) + 2, 0, intr.height)};
}

}  // namespace

geom::CameraPose<double> World::camera_pose(int view) const {
  const CameraConfig& cam = config_.camera;
  if (view < 0 || view >= cam.views) throw Error(Errc::OutOfBounds, "no camera view " + std::to_string(view));
  const Vec3 target(config_.table_center.x(), config_.table_center.y(), config_.table_z);
  // Side views swing about the y axis, alternating direction.
  double angle = 0;
  if (view > 0) angle = (view % 2 == 1 ? 1.0 : -1.0) * cam.tilt_deg * ((view + 1) / 2) * M_PI / 180.0;
  const Vec3 eye = target + cam.height * Vec3(std::sin(angle), 0, std::cos(angle));
  const Vec3 z = (target - eye).normalized();
  const Vec3 x = Vec3(0, -1, 0).cross(z).normalized();
  const Vec3 y = z.cross(x);
  geom::CameraPose<double> pose;
  pose.rotation.col(0) = x;
  pose.rotation.col(1) = y;
  pose.rotation.col(2) = z;
  pose.translation = eye;
  return pose;
}

World::Render World::render(int view) const {
  const auto& intr = config_.camera.intrinsics;
  const geom::CameraPose<double> pose = camera_pose(view);
  Render out;
  out.depth = geom::DepthImage<double>(intr);
  out.ids.assign(std::size_t(intr.width) * intr.height, -2);
  out.footprint_pixels.assign(objects_.size(), 0);
  std::vector<double> best(out.ids.size(), kInf);
  const Vec3 origin = pose.translation;
  auto ray = [&](int u, int v) {
    return Vec3(pose.rotation * Vec3((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0));
  };

  const double x0 = config_.table_center.x() - config_.table_size.x() / 2;
  const double y0 = config_.table_center.y() - config_.table_size.y() / 2;
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      const Vec3 d = ray(u, v);
      if (std::abs(d.z()) < 1e-15) continue;
      const double t = (config_.table_z - origin.z()) / d.z();
      if (t <= kEps) continue;
      const Vec3 p = origin + t * d;
      if (p.x() >= x0 && p.x() <= x0 + config_.table_size.x() && p.y() >= y0 && p.y() <= y0 + config_.table_size.y()) {
        best[std::size_t(v) * intr.width + u] = t;
        out.ids[std::size_t(v) * intr.width + u] = -1;
      }
    }

  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!rests(int(i))) continue;
    const PixelRect r = screen_rect(objects_[i], intr, pose);
    for (int v = r.v0; v < r.v1; ++v)
      for (int u = r.u0; u < r.u1; ++u) {
        const double t = hit_object(objects_[i], origin, ray(u, v));
        if (t == kInf) continue;
        ++out.footprint_pixels[i];
        const std::size_t k = std::size_t(v) * intr.width + u;
        if (t < best[k]) {
          best[k] = t;
          out.ids[k] = int(i);
        }
      }
  }
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      const double t = best[std::size_t(v) * intr.width + u];
      if (t < kInf) out.depth.at(u, v) = t;  // ray z component is 1 in the camera frame
    }
  return out;
}

Vec3 World::surface_centroid(const std::string& name, double z_epsilon) const {
  object(name);
  const int i = index_of(name);
  Vec3 sum = Vec3::Zero();
  std::size_t n = 0;
  for (int view = 0; view < config_.camera.views; ++view) {
    const Render r = render(view);
    const geom::CameraPose<double> pose = camera_pose(view);
    for (int v = 0; v < r.depth.intrinsics.height; ++v)
      for (int u = 0; u < r.depth.intrinsics.width; ++u)
        if (r.ids[std::size_t(v) * r.depth.intrinsics.width + u] == i) {
          const Vec3 p = geom::deproject(u, v, r.depth, pose);
          if (p.z() > config_.table_z + z_epsilon) {
            sum += p;
            ++n;
          }
        }
  }
  if (n == 0) throw Error(Errc::EmptyCloud, "'" + name + "' is not seen from any view");
  return sum / double(n);
}

std::set<std::string> World::visible_objects() const {
  const Render r = render(0);
  std::vector<int> own(objects_.size(), 0);
  for (int id : r.ids)
    if (id >= 0) {
      ++own[id];
      // A closed lid shows its container.
      const SimObject& o = objects_[id];
      if (o.is_lid_of) {
        auto s = support_of(o.name);
        if (s && *s == *o.is_lid_of) ++own[index_of(*s)];
      }
    }
  std::set<std::string> out;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const SimObject& o = objects_[i];
    if (!rests(int(i)) || r.footprint_pixels[i] == 0) continue;
    if (!o.container && !resting_on(o.name).empty()) continue;
    if (double(own[i]) >= config_.min_visible_fraction * r.footprint_pixels[i]) out.insert(o.name);
  }
  return out;
}

CaptureResult World::capture(int view) {
  if (held_) throw Error(Errc::GripperOccupiedDuringCapture, "'" + *held_ + "' blocks the camera");
  if (fault_fires(FaultKind::CaptureDropout)) throw Error(Errc::CaptureDropout, "camera returned no frame");
  CaptureResult cap;
  cap.id = captures_++;
  cap.view = view;
  cap.pose = camera_pose(view);
  Render r = render(view);
  cap.visible = visible_objects();
  const int w = config_.camera.intrinsics.width;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    if (!cap.visible.count(objects_[i].name)) continue;
    int u0 = w, v0 = config_.camera.intrinsics.height, u1 = -1, v1 = -1;
    for (std::size_t k = 0; k < r.ids.size(); ++k) {
      int id = r.ids[k];
      if (id < 0) continue;
      bool mine = id == int(i);
      if (!mine && objects_[id].is_lid_of && *objects_[id].is_lid_of == objects_[i].name &&
          support_of(objects_[id].name) == std::optional<std::string>(objects_[i].name))
        mine = true;
      if (!mine) continue;
      const int u = int(k % w), v = int(k / w);
      u0 = std::min(u0, u);
      v0 = std::min(v0, v);
      u1 = std::max(u1, u);
      v1 = std::max(v1, v);
    }
    if (u1 >= 0) cap.truth_bboxes.push_back(geom::BBox{objects_[i].name, u0, v0, u1 + 1, v1 + 1});
  }
  if (config_.depth_noise > 0) {
    std::mt19937_64 rng(seed_ ^ (0xD1B54A32D192ED03ull * (cap.id + 1)));
    std::normal_distribution<double> noise(0.0, config_.depth_noise);
    for (int v = 0; v < r.depth.height(); ++v)
      for (int u = 0; u < r.depth.width(); ++u)
        if (r.depth.at(u, v) > 0) r.depth.at(u, v) = std::max(1e-6, r.depth.at(u, v) + noise(rng));
  }
  cap.depth = std::move(r.depth);
  return cap;
}

std::vector<TagReading> World::read_apriltags() {
  if (held_) throw Error(Errc::GripperOccupiedDuringCapture, "'" + *held_ + "' blocks the camera");
  const std::set<std::string> visible = visible_objects();
  const Vec3 eye = camera_pose(0).translation;
  std::vector<TagReading> out;
  for (std::size_t i = 0; i < objects_.size(); ++i) {
    const SimObject& o = objects_[i];
    if (!o.tag_id || !visible.count(o.name)) continue;
    const Vec3 tag = o.tag_point();
    const Vec3 d = tag - eye;
    bool blocked = false;
    for (std::size_t j = 0; j < objects_.size() && !blocked; ++j)
      if (j != i && rests(int(j))) blocked = hit_object(objects_[j], eye, d) < 1 - 1e-6;
    if (blocked) continue;
    out.push_back({*o.tag_id, tag + localization_bias(o.name)});
  }
  std::sort(out.begin(), out.end(), [](const TagReading& a, const TagReading& b) { return a.tag_id < b.tag_id; });
  return out;
}

namespace {

// 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d) {
  const int n = int(f.size());
  std::vector<int> v(n);
  std::vector<double> z(n + 1);
  int k = 0;
  v[0] = 0;
  z[0] = -kInf;
  z[1] = kInf;
  auto cross = [&](int q, int p) { return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p); };
  for (int q = 1; q < n; ++q) {
    double s = cross(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = cross(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  k = 0;
  d.assign(n, 0);
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

Eigen::Vector2i World::free_spot_pixel() const {
  const Render r = render(0);
  const auto& intr = config_.camera.intrinsics;
  const int w = intr.width, h = intr.height;
  const double big = 1e12;
  std::vector<double> grid(std::size_t(w) * h);
  for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = r.ids[k] == -1 ? big : 0.0;
  std::vector<double> f, d;
  for (int v = 0; v < h; ++v) {
    f.assign(grid.begin() + std::ptrdiff_t(v) * w, grid.begin() + std::ptrdiff_t(v + 1) * w);
    edt_1d(f, d);
    std::copy(d.begin(), d.end(), grid.begin() + std::ptrdiff_t(v) * w);
  }
  for (int u = 0; u < w; ++u) {
    f.resize(h);
    for (int v = 0; v < h; ++v) f[v] = grid[std::size_t(v) * w + u];
    edt_1d(f, d);
    for (int v = 0; v < h; ++v) grid[std::size_t(v) * w + u] = d[v];
  }
  Eigen::Vector2i best(-1, -1);
  double best_d = -1, best_c = kInf;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      // The image border counts as occupied.
      const double border = std::min({u + 1.0, v + 1.0, double(w - u), double(h - v)});
      const double dd = std::min(grid[std::size_t(v) * w + u], border * border);
      const double dc = (u - intr.cx) * (u - intr.cx) + (v - intr.cy) * (v - intr.cy);
      if (dd > best_d || (dd == best_d && dc < best_c)) {
        best = {u, v};
        best_d = dd;
        best_c = dc;
      }
    }
  if (best_d <= 0) throw Error(Errc::NoMatch, "no free table area in view");
  return best;
}

}  // namespace lta::sim
