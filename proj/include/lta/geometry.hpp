#pragma once

// Depth-camera geometry and point-cloud processing. Dense types are templated
// on the scalar; the framework instantiates them with double.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "lta/error.hpp"

namespace lta::geom {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx = 1, fy = 1, cx = 0, cy = 0;
  int width = 1, height = 1;

  void validate() const {
    if (!(fx > 0 && fy > 0) || width <= 0 || height <= 0 || !(cx >= 0 && cx < width) ||
        !(cy >= 0 && cy < height))
      throw Error(Errc::InvalidConfiguration, "bad camera intrinsics");
  }
};

// Camera-to-base transform.
template <typename Scalar>
struct CameraPose {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> translation = Vec3<Scalar>::Zero();

  static CameraPose identity() { return {}; }

  void validate(Scalar tol = Scalar(1e-9)) const {
    const Scalar ortho = (rotation.transpose() * rotation - Mat3<Scalar>::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= tol) || !(std::abs(rotation.determinant() - Scalar(1)) <= tol) || !translation.allFinite())
      throw Error(Errc::InvalidConfiguration, "camera rotation is not a proper rotation");
  }

  Vec3<Scalar> apply(const Vec3<Scalar>& p) const { return rotation * p + translation; }
  Vec3<Scalar> inverse_apply(const Vec3<Scalar>& p) const { return rotation.transpose() * (p - translation); }
};

// Row-major depth in meters; 0 marks a missing reading.
template <typename Scalar>
struct DepthImage {
  using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  CameraIntrinsics<Scalar> intrinsics;
  Grid depths;

  DepthImage() = default;
  explicit DepthImage(const CameraIntrinsics<Scalar>& intr)
      : intrinsics(intr), depths(Grid::Zero(intr.height, intr.width)) {}

  int width() const { return static_cast<int>(depths.cols()); }
  int height() const { return static_cast<int>(depths.rows()); }
  Scalar at(int u, int v) const { return depths(v, u); }
  Scalar& at(int u, int v) { return depths(v, u); }

  void validate() const {
    intrinsics.validate();
    if (depths.rows() != intrinsics.height || depths.cols() != intrinsics.width)
      throw Error(Errc::InvalidConfiguration, "depth grid does not match intrinsics");
    if (!depths.allFinite() || (depths.array() < Scalar(0)).any())
      throw Error(Errc::InvalidDepth, "depth values must be finite and non-negative");
  }
};

// Pixel rectangle [x_min, x_max) x [y_min, y_max).
struct BBox {
  std::string label;
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  bool valid() const { return x_min < x_max && y_min < y_max; }
  double area() const { return double(x_max - x_min) * double(y_max - y_min); }
  friend bool operator==(const BBox&, const BBox&) = default;
};

template <typename Scalar>
using PointCloud = std::vector<Vec3<Scalar>>;

// Pixel coordinates name pixel centers: pixel (u, v) sees the ray through
// ((u - cx) / fx, (v - cy) / fy, 1).
template <typename Scalar>
Vec3<Scalar> deproject(const Vec2<Scalar>& pixel, Scalar depth, const CameraIntrinsics<Scalar>& intr,
                       const CameraPose<Scalar>& pose) {
  if (!(pixel.x() >= Scalar(-0.5) && pixel.x() < intr.width - Scalar(0.5) && pixel.y() >= Scalar(-0.5) &&
        pixel.y() < intr.height - Scalar(0.5)))
    throw Error(Errc::OutOfBounds, "pixel outside the image");
  if (!(depth > 0) || !std::isfinite(depth)) throw Error(Errc::InvalidDepth, "no depth at pixel");
  const Vec3<Scalar> cam((pixel.x() - intr.cx) * depth / intr.fx, (pixel.y() - intr.cy) * depth / intr.fy,
                         depth);
  return pose.apply(cam);
}

// Looks the depth up in the image.
template <typename Scalar>
Vec3<Scalar> deproject(int u, int v, const DepthImage<Scalar>& image, const CameraPose<Scalar>& pose) {
  if (u < 0 || v < 0 || u >= image.width() || v >= image.height())
    throw Error(Errc::OutOfBounds, "pixel (" + std::to_string(u) + ", " + std::to_string(v) + ") outside the image");
  return deproject<Scalar>(Vec2<Scalar>(Scalar(u), Scalar(v)), image.at(u, v), image.intrinsics, pose);
}

// Inverse of deproject. Returns the pixel and writes the camera-frame depth.
template <typename Scalar>
Vec2<Scalar> project(const Vec3<Scalar>& point, const CameraIntrinsics<Scalar>& intr, const CameraPose<Scalar>& pose,
                     Scalar* depth_out = nullptr) {
  const Vec3<Scalar> cam = pose.inverse_apply(point);
  if (depth_out) *depth_out = cam.z();
  if (!(cam.z() > 0)) throw Error(Errc::InvalidDepth, "point behind the camera");
  return Vec2<Scalar>(intr.fx * cam.x() / cam.z() + intr.cx, intr.fy * cam.y() / cam.z() + intr.cy);
}

// Clamps a box to the image; empty after clamping means invalid.
inline BBox clamp_bbox(BBox box, int width, int height) {
  box.x_min = std::clamp(box.x_min, 0, width);
  box.x_max = std::clamp(box.x_max, 0, width);
  box.y_min = std::clamp(box.y_min, 0, height);
  box.y_max = std::clamp(box.y_max, 0, height);
  return box;
}

template <typename Scalar>
PointCloud<Scalar> bbox_to_cloud(const BBox& bbox, const DepthImage<Scalar>& image, const CameraPose<Scalar>& pose) {
  if (!bbox.valid()) throw Error(Errc::OutOfBounds, "degenerate bounding box for '" + bbox.label + "'");
  const BBox box = clamp_bbox(bbox, image.width(), image.height());
  if (!box.valid()) throw Error(Errc::OutOfBounds, "bounding box for '" + bbox.label + "' lies outside the image");
  PointCloud<Scalar> out;
  out.reserve(static_cast<std::size_t>(box.area()));
  for (int v = box.y_min; v < box.y_max; ++v)
    for (int u = box.x_min; u < box.x_max; ++u)
      if (image.at(u, v) > 0) out.push_back(deproject(u, v, image, pose));
  if (out.empty()) throw Error(Errc::EmptyCloud, "no valid depth inside the box for '" + bbox.label + "'");
  return out;
}

template <typename Scalar>
PointCloud<Scalar> image_to_cloud(const DepthImage<Scalar>& image, const CameraPose<Scalar>& pose) {
  PointCloud<Scalar> out;
  for (int v = 0; v < image.height(); ++v)
    for (int u = 0; u < image.width(); ++u)
      if (image.at(u, v) > 0) out.push_back(deproject(u, v, image, pose));
  return out;
}

template <typename Scalar>
Vec3<Scalar> centroid(const PointCloud<Scalar>& cloud) {
  if (cloud.empty()) throw Error(Errc::EmptyCloud, "centroid of an empty cloud");
  Vec3<Scalar> sum = Vec3<Scalar>::Zero();
  for (const auto& p : cloud) sum += p;
  return sum / Scalar(cloud.size());
}

namespace detail {

struct CellKey {
  std::int64_t x, y, z;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct CellHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

template <typename Scalar>
CellKey cell_of(const Vec3<Scalar>& p, Scalar size) {
  return {static_cast<std::int64_t>(std::floor(p.x() / size)), static_cast<std::int64_t>(std::floor(p.y() / size)),
          static_cast<std::int64_t>(std::floor(p.z() / size))};
}

// Uniform hash grid over point indices.
template <typename Scalar>
class Grid {
 public:
  Grid(const PointCloud<Scalar>& cloud, Scalar cell) : cloud_(cloud), cell_(cell) {
    for (std::size_t i = 0; i < cloud.size(); ++i) cells_[cell_of(cloud[i], cell)].push_back(i);
  }

  Scalar cell_size() const { return cell_; }
  std::size_t occupied() const { return cells_.size(); }

  const std::vector<std::size_t>* bucket(const CellKey& k) const {
    auto it = cells_.find(k);
    return it == cells_.end() ? nullptr : &it->second;
  }

  // Calls f(index) for every point in the 3x3x3 block around p.
  template <typename F>
  void for_neighbors(const Vec3<Scalar>& p, F&& f) const {
    const CellKey c = cell_of(p, cell_);
    for (std::int64_t dx = -1; dx <= 1; ++dx)
      for (std::int64_t dy = -1; dy <= 1; ++dy)
        for (std::int64_t dz = -1; dz <= 1; ++dz)
          if (const auto* b = bucket({c.x + dx, c.y + dy, c.z + dz}))
            for (std::size_t j : *b) f(j);
  }

  // Mean distance from point i to its k nearest other points.
  Scalar mean_knn_distance(std::size_t i, std::size_t k) const {
    const Vec3<Scalar>& p = cloud_[i];
    const CellKey c = cell_of(p, cell_);
    std::vector<Scalar> best;  // sorted ascending, at most k entries
    auto offer = [&](std::size_t j) {
      if (j == i) return;
      const Scalar d = (cloud_[j] - p).norm();
      if (best.size() == k && d >= best.back()) return;
      best.insert(std::upper_bound(best.begin(), best.end(), d), d);
      if (best.size() > k) best.pop_back();
    };
    for (std::int64_t r = 0;; ++r) {
      // Shell cells up front cost (2r+1)^3; past the occupied count scanning
      // everything is cheaper.
      const std::int64_t side = 2 * r + 1;
      if (static_cast<std::size_t>(side * side * side) > 4 * cells_.size() + 27) {
        best.clear();
        for (std::size_t j = 0; j < cloud_.size(); ++j) offer(j);
        break;
      }
      for (std::int64_t dx = -r; dx <= r; ++dx)
        for (std::int64_t dy = -r; dy <= r; ++dy)
          for (std::int64_t dz = -r; dz <= r; ++dz) {
            if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != r) continue;
            if (const auto* b = bucket({c.x + dx, c.y + dy, c.z + dz}))
              for (std::size_t j : *b) offer(j);
          }
      // Anything outside the searched block is at least r cells away.
      if (best.size() == k && best.back() <= Scalar(r) * cell_) break;
    }
    if (best.empty()) return Scalar(0);
    return std::accumulate(best.begin(), best.end(), Scalar(0)) / Scalar(best.size());
  }

 private:
  const PointCloud<Scalar>& cloud_;
  Scalar cell_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t(0)); }
  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

// Concatenates the views and replaces the points falling into each voxel by
// their mean. Output follows the first occurrence of each voxel.
template <typename Scalar>
PointCloud<Scalar> merge_views(const std::vector<PointCloud<Scalar>>& clouds, Scalar voxel) {
  if (!(voxel > 0)) throw Error(Errc::InvalidConfiguration, "voxel size must be positive");
  std::unordered_map<detail::CellKey, std::size_t, detail::CellHash> slot;
  std::vector<Vec3<Scalar>> sums;
  std::vector<std::size_t> counts;
  for (const auto& cloud : clouds)
    for (const auto& p : cloud) {
      auto [it, fresh] = slot.try_emplace(detail::cell_of(p, voxel), sums.size());
      if (fresh) {
        sums.push_back(p);
        counts.push_back(1);
      } else {
        sums[it->second] += p;
        ++counts[it->second];
      }
    }
  PointCloud<Scalar> out(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) out[i] = sums[i] / Scalar(counts[i]);
  return out;
}

template <typename Scalar>
struct OutlierParams {
  Scalar table_z = 0;
  Scalar z_epsilon = Scalar(0.005);
  std::size_t k = 8;
  Scalar sigma = 2;
};

// Per-point mean distance to the k nearest other points.
template <typename Scalar>
std::vector<Scalar> mean_knn_distances(const PointCloud<Scalar>& cloud, std::size_t k, Scalar cell) {
  std::vector<Scalar> out(cloud.size());
  if (cloud.size() < 2) return out;
  k = std::min(k, cloud.size() - 1);
  detail::Grid<Scalar> grid(cloud, cell);
  for (std::size_t i = 0; i < cloud.size(); ++i) out[i] = grid.mean_knn_distance(i, k);
  return out;
}

template <typename Scalar>
PointCloud<Scalar> remove_plane_and_outliers(const PointCloud<Scalar>& cloud, const OutlierParams<Scalar>& params) {
  if (cloud.empty()) throw Error(Errc::EmptyCloud, "nothing to filter");
  PointCloud<Scalar> above;
  above.reserve(cloud.size());
  for (const auto& p : cloud)
    if (p.z() > params.table_z + params.z_epsilon) above.push_back(p);
  if (above.empty()) throw Error(Errc::EmptyCloud, "every point lies on the table plane");
  if (above.size() < 3 || params.k == 0) return above;

  const std::vector<Scalar> d = mean_knn_distances(above, params.k, Scalar(0.01));
  const Scalar mean = std::accumulate(d.begin(), d.end(), Scalar(0)) / Scalar(d.size());
  Scalar var = 0;
  for (Scalar x : d) var += (x - mean) * (x - mean);
  const Scalar stddev = std::sqrt(var / Scalar(d.size() - 1));
  const Scalar limit = mean + params.sigma * stddev;

  PointCloud<Scalar> out;
  out.reserve(above.size());
  for (std::size_t i = 0; i < above.size(); ++i)
    if (d[i] <= limit) out.push_back(above[i]);
  if (out.empty()) throw Error(Errc::EmptyCloud, "every point was an outlier");
  return out;
}

// Connected components of the graph joining points at distance <= link.
// Each component lists indices ascending; components are ordered by their
// smallest index.
template <typename Scalar>
std::vector<std::vector<std::size_t>> connected_components(const PointCloud<Scalar>& cloud, Scalar link) {
  if (!(link > 0)) throw Error(Errc::InvalidConfiguration, "link distance must be positive");
  detail::UnionFind uf(cloud.size());
  detail::Grid<Scalar> grid(cloud, link);
  const Scalar link2 = link * link;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    grid.for_neighbors(cloud[i], [&](std::size_t j) {
      if (j > i && (cloud[j] - cloud[i]).squaredNorm() <= link2) uf.unite(i, j);
    });
  std::vector<std::vector<std::size_t>> comps;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto [it, fresh] = slot.try_emplace(uf.find(i), comps.size());
    if (fresh) comps.emplace_back();
    comps[it->second].push_back(i);
  }
  return comps;
}

// Components with at least min_points points, ordered by centroid x, y, z.
template <typename Scalar>
std::vector<PointCloud<Scalar>> cluster(const PointCloud<Scalar>& cloud, Scalar link, std::size_t min_points) {
  struct Item {
    Vec3<Scalar> c;
    std::size_t first;
    PointCloud<Scalar> pts;
  };
  std::vector<Item> items;
  for (const auto& comp : connected_components(cloud, link)) {
    if (comp.size() < min_points) continue;
    Item it{Vec3<Scalar>::Zero(), comp.front(), {}};
    it.pts.reserve(comp.size());
    for (std::size_t i : comp) it.pts.push_back(cloud[i]);
    it.c = centroid(it.pts);
    items.push_back(std::move(it));
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.c.x() != b.c.x()) return a.c.x() < b.c.x();
    if (a.c.y() != b.c.y()) return a.c.y() < b.c.y();
    if (a.c.z() != b.c.z()) return a.c.z() < b.c.z();
    return a.first < b.first;
  });
  std::vector<PointCloud<Scalar>> out;
  out.reserve(items.size());
  for (auto& it : items) out.push_back(std::move(it.pts));
  return out;
}

// Fraction of `cluster_pts` within `tolerance` of some point of `reference`.
template <typename Scalar>
Scalar overlap_score(const PointCloud<Scalar>& cluster_pts, const PointCloud<Scalar>& reference, Scalar tolerance) {
  if (cluster_pts.empty()) return 0;
  detail::Grid<Scalar> grid(reference, tolerance);
  const Scalar tol2 = tolerance * tolerance;
  std::size_t hits = 0;
  for (const auto& p : cluster_pts) {
    bool hit = false;
    grid.for_neighbors(p, [&](std::size_t j) { hit = hit || (reference[j] - p).squaredNorm() <= tol2; });
    hits += hit;
  }
  return Scalar(hits) / Scalar(cluster_pts.size());
}

template <typename Scalar>
struct Match {
  std::size_t index = 0;
  Scalar score = 0;
};

// Best cluster by overlap score; ties go to the cluster whose centroid is
// nearest the reference centroid, then to the earlier cluster.
template <typename Scalar>
Match<Scalar> match_cluster(const std::vector<PointCloud<Scalar>>& clusters, const PointCloud<Scalar>& bbox_cloud,
                            Scalar tolerance, Scalar floor = Scalar(0.2)) {
  if (clusters.empty()) throw Error(Errc::NoMatch, "no clusters to match");
  if (bbox_cloud.empty()) throw Error(Errc::EmptyCloud, "empty box cloud");
  const Vec3<Scalar> ref = centroid(bbox_cloud);
  Match<Scalar> best;
  Scalar best_dist = std::numeric_limits<Scalar>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    const Scalar s = overlap_score(clusters[i], bbox_cloud, tolerance);
    const Scalar d = (centroid(clusters[i]) - ref).norm();
    if (!any || s > best.score || (s == best.score && d < best_dist)) {
      best = {i, s};
      best_dist = d;
      any = true;
    }
  }
  if (best.score < floor)
    throw Error(Errc::NoMatch, "best cluster overlap " + std::to_string(double(best.score)) + " is below the floor");
  return best;
}

template <typename Scalar>
struct PerceptionParams {
  Scalar voxel = Scalar(0.005);
  Scalar link_distance = Scalar(0.02);
  std::size_t min_points = 20;
  Scalar table_z = 0;
  Scalar z_epsilon = Scalar(0.005);
  std::size_t outlier_k = 8;
  Scalar outlier_sigma = 2;
  Scalar match_floor = Scalar(0.2);
};

template <typename Scalar>
struct View {
  DepthImage<Scalar> depth;
  CameraPose<Scalar> pose;
};

// The bounding-box pathway: the box (drawn on views[box_view]) selects one of
// the clusters segmented from all views merged. The result is the centroid of
// the unmerged points of every view that fall in the cluster's voxels, which
// keeps voxel quantization out of the estimate.
template <typename Scalar>
Vec3<Scalar> locate_in_views(const std::vector<View<Scalar>>& views, const BBox& box, std::size_t box_view,
                             const PerceptionParams<Scalar>& params) {
  if (views.empty() || box_view >= views.size()) throw Error(Errc::InvalidConfiguration, "no view for the box");
  std::vector<PointCloud<Scalar>> clouds;
  clouds.reserve(views.size());
  for (const auto& v : views) clouds.push_back(image_to_cloud(v.depth, v.pose));
  const PointCloud<Scalar> merged = merge_views(clouds, params.voxel);
  if (merged.empty()) throw Error(Errc::EmptyCloud, "no depth in any view");
  const PointCloud<Scalar> objects = remove_plane_and_outliers(
      merged, OutlierParams<Scalar>{params.table_z, params.z_epsilon, params.outlier_k, params.outlier_sigma});
  const auto clusters = cluster(objects, params.link_distance, params.min_points);

  PointCloud<Scalar> box_cloud;
  for (const auto& p : bbox_to_cloud(box, views[box_view].depth, views[box_view].pose))
    if (p.z() > params.table_z + params.z_epsilon) box_cloud.push_back(p);
  if (box_cloud.empty()) throw Error(Errc::EmptyCloud, "box for '" + box.label + "' only covers the table");
  const Match<Scalar> m = match_cluster(clusters, box_cloud, params.voxel, params.match_floor);

  std::unordered_set<detail::CellKey, detail::CellHash> cells;
  for (const auto& p : clusters[m.index]) cells.insert(detail::cell_of(p, params.voxel));
  Vec3<Scalar> sum = Vec3<Scalar>::Zero();
  std::size_t n = 0;
  for (const auto& cloud : clouds)
    for (const auto& p : cloud)
      if (p.z() > params.table_z + params.z_epsilon && cells.count(detail::cell_of(p, params.voxel))) {
        sum += p;
        ++n;
      }
  if (n == 0) return centroid(clusters[m.index]);
  return sum / Scalar(n);
}

// Portable depth file: uint32 width, uint32 height (little endian), then
// width*height float32 meters, row-major.
template <typename Scalar>
DepthImage<Scalar> read_depth_file(const std::string& path, const CameraIntrinsics<Scalar>& intr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::ParseError, "cannot open depth file " + path);
  auto read_u32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(Errc::ParseError, "truncated depth header");
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
  };
  const std::uint32_t w = read_u32(), h = read_u32();
  if (int(w) != intr.width || int(h) != intr.height)
    throw Error(Errc::InvalidConfiguration, "depth file size does not match intrinsics");
  DepthImage<Scalar> img(intr);
  for (std::uint32_t v = 0; v < h; ++v)
    for (std::uint32_t u = 0; u < w; ++u) {
      const std::uint32_t bits = read_u32();
      float f;
      static_assert(sizeof f == sizeof bits);
      std::memcpy(&f, &bits, sizeof f);
      img.at(int(u), int(v)) = Scalar(f);
    }
  img.validate();
  return img;
}

template <typename Scalar>
void write_depth_file(const std::string& path, const DepthImage<Scalar>& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::ParseError, "cannot write depth file " + path);
  auto write_u32 = [&](std::uint32_t x) {
    const unsigned char b[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                                static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  write_u32(std::uint32_t(img.width()));
  write_u32(std::uint32_t(img.height()));
  for (int v = 0; v < img.height(); ++v)
    for (int u = 0; u < img.width(); ++u) {
      const float f = static_cast<float>(img.at(u, v));
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof f);
      write_u32(bits);
    }
}

}  // namespace lta::geom
