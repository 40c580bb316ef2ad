#include <filesystem>
#include <map>
#include <random>
#include <set>

#include <Eigen/Geometry>

#include "lta/geometry.hpp"
#include "geometry_oracles.hpp"
#include "test_support.hpp"

using namespace lta;
using namespace lta::geom;
using V3 = Vec3<double>;
using Cloud = PointCloud<double>;

namespace {

using test::random_pose;
using test::random_blob;
using test::brute_partition;

CameraIntrinsics<double> intr320() { return {240.0, 240.0, 160.0, 120.0, 320, 240}; }

// Quadratic-time neighbour statistics.
std::vector<double> brute_knn(const Cloud& c, std::size_t k) {
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < c.size(); ++j)
      if (j != i) d.push_back((c[i] - c[j]).norm());
    std::sort(d.begin(), d.end());
    const std::size_t kk = std::min(k, d.size());
    double s = 0;
    for (std::size_t t = 0; t < kk; ++t) s += d[t];
    out[i] = kk ? s / double(kk) : 0.0;
  }
  return out;
}

double brute_score(const Cloud& cl, const Cloud& ref, double tol) {
  std::size_t hits = 0;
  for (const auto& p : cl) {
    bool hit = false;
    for (const auto& q : ref) hit = hit || (p - q).norm() <= tol;
    hits += hit;
  }
  return double(hits) / double(cl.size());
}

}  // namespace

TEST_CASE("deproject principal point and unit offset") {
  const auto intr = intr320();
  const auto id = CameraPose<double>::identity();
  CHECK((deproject<double>({160.0, 120.0}, 1.0, intr, id) - V3(0, 0, 1)).norm() < 1e-12);
  CameraIntrinsics<double> wide{100.0, 100.0, 160.0, 120.0, 320, 240};
  CHECK((deproject<double>({260.0, 120.0}, 1.0, wide, id) - V3(1, 0, 1)).norm() < 1e-12);
}

TEST_CASE("deproject errors") {
  const auto intr = intr320();
  DepthImage<double> img(intr);
  const auto id = CameraPose<double>::identity();
  CHECK_ERRC(deproject(10, 10, img, id), Errc::InvalidDepth);
  CHECK_ERRC(deproject(320, 10, img, id), Errc::OutOfBounds);
  CHECK_ERRC(deproject(-1, 10, img, id), Errc::OutOfBounds);
}

TEST_CASE("property: project inverts deproject within 1e-6 px") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> px(0.0, 319.0), py(0.0, 239.0), depth(0.1, 5.0);
  const auto intr = intr320();
  double worst = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto pose = random_pose(rng);
    const Vec2<double> pixel(px(rng), py(rng));
    const double d = depth(rng);
    const V3 p = deproject(pixel, d, intr, pose);
    double back_depth = 0;
    const Vec2<double> back = project(p, intr, pose, &back_depth);
    worst = std::max(worst, (back - pixel).norm());
    CHECK(std::abs(back_depth - d) < 1e-9);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("property: deproject is equivariant under rigid transforms") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> px(0.0, 319.0), depth(0.1, 3.0);
  const auto intr = intr320();
  for (int i = 0; i < 1000; ++i) {
    const auto pose = random_pose(rng);
    const Vec2<double> pixel(px(rng), px(rng) * 0.75);
    const double d = depth(rng);
    const V3 a = deproject(pixel, d, intr, pose);
    const V3 b = pose.apply(deproject(pixel, d, intr, CameraPose<double>::identity()));
    CHECK((a - b).norm() < 1e-9);
  }
}

TEST_CASE("pose validation") {
  CameraPose<double> pose;
  CHECK_NOTHROW(pose.validate());
  pose.rotation(0, 0) = -1;  // reflection
  CHECK_ERRC(pose.validate(), Errc::InvalidConfiguration);
}

TEST_CASE("bbox_to_cloud") {
  const auto intr = intr320();
  const auto id = CameraPose<double>::identity();
  DepthImage<double> img(intr);
  for (int v = 50; v < 60; ++v)
    for (int u = 100; u < 110; ++u) img.at(u, v) = 0.8;
  const Cloud c = bbox_to_cloud(BBox{"patch", 100, 50, 110, 60}, img, id);
  CHECK(c.size() == 100);
  for (const auto& p : c) CHECK(std::abs(p.z() - 0.8) < 1e-9);
  CHECK_ERRC(bbox_to_cloud(BBox{"void", 0, 0, 10, 10}, img, id), Errc::EmptyCloud);
  CHECK_ERRC(bbox_to_cloud(BBox{"bad", 10, 0, 10, 10}, img, id), Errc::OutOfBounds);
  // Boxes extending past the border are clamped.
  CHECK(bbox_to_cloud(BBox{"edge", 100, 50, 400, 60}, img, id).size() == 100);
}

TEST_CASE("bbox cloud of a rendered sphere surrounds its center") {
  const auto intr = intr320();
  const auto id = CameraPose<double>::identity();
  const V3 center(0.05, -0.02, 0.6);
  const double r = 0.04;
  DepthImage<double> img(intr);
  for (int v = 0; v < intr.height; ++v)
    for (int u = 0; u < intr.width; ++u) {
      const V3 dir((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy, 1.0);
      const double a = dir.squaredNorm(), b = -2 * dir.dot(center), cc = center.squaredNorm() - r * r;
      const double disc = b * b - 4 * a * cc;
      if (disc >= 0) img.at(u, v) = (-b - std::sqrt(disc)) / (2 * a);
    }
  const Vec2<double> c = project(center, intr, id);
  const int rad = 30;
  const Cloud cloud = bbox_to_cloud(BBox{"ball", int(c.x()) - rad, int(c.y()) - rad, int(c.x()) + rad, int(c.y()) + rad},
                                    img, id);
  V3 lo = cloud.front(), hi = cloud.front();
  for (const auto& p : cloud) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (int i = 0; i < 2; ++i) CHECK((lo[i] <= center[i] && center[i] <= hi[i]));
  CHECK(lo.z() < center.z());
  CHECK(hi.z() <= center.z() + 1e-9);  // only the near hemisphere is seen
}

TEST_CASE("merge_views deduplicates per voxel") {
  std::mt19937_64 rng(9);
  const Cloud a = random_blob(rng, V3(0, 0, 0.1), 0.02, 300);
  CHECK(merge_views<double>({a, a}, 0.005).size() <= a.size());
  Cloud b = a;
  for (auto& p : b) p.x() += 1.0;
  const Cloud disjoint_a = merge_views<double>({a}, 0.005);
  const Cloud disjoint_b = merge_views<double>({b}, 0.005);
  CHECK(merge_views<double>({a, b}, 0.005).size() == disjoint_a.size() + disjoint_b.size());
  CHECK_ERRC(merge_views<double>({a}, 0.0), Errc::InvalidConfiguration);
}

TEST_CASE("merging two half views of a box top recovers its centroid") {
  const double voxel = 0.005;
  Cloud left, right, all;
  for (double x = -0.04; x <= 0.04 + 1e-12; x += 0.001)
    for (double y = -0.03; y <= 0.03 + 1e-12; y += 0.001) {
      V3 p(0.3 + x, 0.1 + y, 0.05);
      all.push_back(p);
      (x < 0.005 ? left : right).push_back(p);
      if (std::abs(x) < 0.01) (x < 0.005 ? right : left).push_back(p);  // overlap strip seen twice
    }
  const V3 truth = centroid(all);
  CHECK((centroid(merge_views<double>({left, right}, voxel)) - truth).norm() < 2 * voxel);
}

TEST_CASE("plane removal keeps only points above the band") {
  Cloud c;
  for (double x = 0; x < 0.2; x += 0.005)
    for (double y = 0; y < 0.2; y += 0.005) c.push_back(V3(x, y, 0.0));
  std::size_t cube = 0;
  for (double x = 0.05; x < 0.09; x += 0.004)
    for (double y = 0.05; y < 0.09; y += 0.004)
      for (double z = 0.02; z <= 0.06 + 1e-12; z += 0.004) {
        c.push_back(V3(x, y, z));
        ++cube;
      }
  // k = 0 disables the statistical pass.
  const Cloud out = remove_plane_and_outliers(c, OutlierParams<double>{0.0, 0.01, 0, 2.0});
  CHECK(out.size() == cube);
  for (const auto& p : out) CHECK(p.z() >= 0.02 - 1e-12);
  const Cloud filtered = remove_plane_and_outliers(c, OutlierParams<double>{0.0, 0.01, 8, 2.0});
  CHECK(filtered.size() > cube * 9 / 10);
  for (const auto& p : filtered) CHECK(p.z() >= 0.02 - 1e-12);

  Cloud flat(c.begin(), c.begin() + 100);
  CHECK_ERRC(remove_plane_and_outliers(flat, OutlierParams<double>{0.0, 0.01, 8, 2.0}), Errc::EmptyCloud);
}

TEST_CASE("outlier removal drops a far stray point") {
  std::mt19937_64 rng(17);
  Cloud c = random_blob(rng, V3(0.1, 0.1, 0.1), 0.01, 400);
  c.push_back(V3(0.6, 0.6, 0.3));
  const Cloud out = remove_plane_and_outliers(c, OutlierParams<double>{0.0, 0.0, 8, 2.0});
  for (const auto& p : out) CHECK((p - V3(0.6, 0.6, 0.3)).norm() > 0.1);

  // Kept set equals the one computed from brute-force neighbour statistics.
  Cloud above;
  for (const auto& p : c)
    if (p.z() > 0.0) above.push_back(p);
  const auto d = brute_knn(above, 8);
  double mean = 0;
  for (double x : d) mean += x;
  mean /= double(d.size());
  double var = 0;
  for (double x : d) var += (x - mean) * (x - mean);
  const double limit = mean + 2.0 * std::sqrt(var / double(d.size() - 1));
  Cloud expected;
  for (std::size_t i = 0; i < above.size(); ++i)
    if (d[i] <= limit) expected.push_back(above[i]);
  CHECK(out == expected);
}

TEST_CASE("grid kNN matches brute force") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  for (int round = 0; round < 30; ++round) {
    Cloud c = random_blob(rng, V3(u(rng), u(rng), u(rng)), 0.005 + 0.02 * (round % 3), 150);
    for (int s = 0; s < round % 4; ++s) c.push_back(V3(u(rng) * 3, u(rng) * 3, u(rng)));
    const auto fast = mean_knn_distances(c, 8, 0.01);
    const auto slow = brute_knn(c, 8);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-12));
  }
}

TEST_CASE("clustering: trivial cases") {
  std::mt19937_64 rng(23);
  const Cloud a = random_blob(rng, V3(0, 0, 0.05), 0.005, 200);
  const Cloud b = random_blob(rng, V3(0.2, 0, 0.05), 0.005, 200);
  Cloud both = a;
  both.insert(both.end(), b.begin(), b.end());
  const auto two = cluster(both, 0.05, 20);
  REQUIRE(two.size() == 2);
  CHECK(centroid(two[0]).x() < centroid(two[1]).x());
  const auto one = cluster(a, 0.05, 20);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == a);
  CHECK(cluster(a, 0.05, 500).empty());
}

TEST_CASE("clustering equals the quadratic union-find oracle on 100 random clouds") {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(0.0, 0.25);
  std::uniform_int_distribution<int> n(50, 400);
  for (int round = 0; round < 100; ++round) {
    Cloud c;
    const int blobs = 1 + round % 5;
    for (int b = 0; b < blobs; ++b) {
      const Cloud blob = random_blob(rng, V3(u(rng), u(rng), u(rng)), 0.01, n(rng) / blobs);
      c.insert(c.end(), blob.begin(), blob.end());
    }
    for (int s = 0; s < 20; ++s) c.push_back(V3(u(rng), u(rng), u(rng)));
    const double link = 0.01 + 0.005 * (round % 4);

    std::set<std::set<std::size_t>> fast;
    for (const auto& comp : connected_components(c, link)) fast.insert({comp.begin(), comp.end()});
    CHECK(fast == brute_partition(c, link));

    // Filtered clusters are exactly the large components, as point sets.
    std::size_t large = 0, covered = 0;
    for (const auto& comp : brute_partition(c, link))
      if (comp.size() >= 20) {
        ++large;
        covered += comp.size();
      }
    const auto clusters = cluster(c, link, 20);
    CHECK(clusters.size() == large);
    std::size_t total = 0;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      total += clusters[i].size();
      if (i) CHECK(centroid(clusters[i - 1]).x() <= centroid(clusters[i]).x());
    }
    CHECK(total == covered);
  }
}

TEST_CASE("match_cluster") {
  std::mt19937_64 rng(31);
  const Cloud a = random_blob(rng, V3(0, 0, 0.05), 0.005, 100);
  const Cloud b = random_blob(rng, V3(0.3, 0, 0.05), 0.005, 100);
  auto m = match_cluster<double>({a}, a, 0.005);
  CHECK(m.index == 0);
  CHECK(m.score == 1.0);
  m = match_cluster<double>({a, b}, b, 0.005);
  CHECK(m.index == 1);
  CHECK_ERRC(match_cluster<double>({a}, b, 0.005), Errc::NoMatch);
  CHECK_ERRC(match_cluster<double>({}, b, 0.005), Errc::NoMatch);
}

TEST_CASE("match_cluster agrees with exhaustive scores in clutter") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> u(0.0, 0.15);
  for (int round = 0; round < 40; ++round) {
    std::vector<Cloud> clusters;
    for (int i = 0; i < 4; ++i) clusters.push_back(random_blob(rng, V3(u(rng), u(rng), 0.05), 0.01, 80));
    Cloud ref;
    const Cloud extra = random_blob(rng, V3(u(rng), u(rng), 0.05), 0.015, 60);
    ref.insert(ref.end(), extra.begin(), extra.end());
    std::vector<double> scores;
    for (const auto& cl : clusters) scores.push_back(brute_score(cl, ref, 0.005));
    const double best = *std::max_element(scores.begin(), scores.end());
    if (best < 0.2) {
      CHECK_ERRC(match_cluster(clusters, ref, 0.005), Errc::NoMatch);
      continue;
    }
    const auto m = match_cluster(clusters, ref, 0.005);
    CHECK(m.score == doctest::Approx(best));
    CHECK(scores[m.index] == best);
  }
}

TEST_CASE("centroid") {
  const V3 p(0.1, 0.2, 0.3);
  CHECK(centroid(Cloud{p}) == p);
  Cloud sym{p + V3(0.01, 0, 0), p - V3(0.01, 0, 0), p + V3(0, 0.02, 0), p - V3(0, 0.02, 0)};
  CHECK((centroid(sym) - p).norm() < 1e-15);
  CHECK_ERRC(centroid(Cloud{}), Errc::EmptyCloud);
}

TEST_CASE("depth file round trip") {
  const auto intr = intr320();
  DepthImage<double> img(intr);
  img.at(3, 4) = 0.75;
  img.at(319, 239) = 1.25;
  const auto path = (std::filesystem::temp_directory_path() / "lta_depth_test.bin").string();
  write_depth_file(path, img);
  const auto back = read_depth_file(path, intr);
  CHECK(back.depths == img.depths);
  std::filesystem::remove(path);
}

TEST_CASE("single precision instantiation") {
  CameraIntrinsics<float> intr{240.f, 240.f, 160.f, 120.f, 320, 240};
  const auto id = CameraPose<float>::identity();
  const Vec3<float> p = deproject<float>({200.f, 100.f}, 0.5f, intr, id);
  const Vec2<float> back = project(p, intr, id);
  CHECK(std::abs(back.x() - 200.f) < 1e-3f);
  PointCloud<float> c{p, p + Vec3<float>(0.001f, 0, 0)};
  CHECK(cluster(c, 0.01f, 1).size() == 1);
}
