#include <random>

#include "lta/sim_world.hpp"
#include "test_support.hpp"

using namespace lta;
using namespace lta::sim;

namespace {

SimObject box(const std::string& name, double w, double d, double h) {
  SimObject o;
  o.name = name;
  o.shape = {ShapeKind::Box, w, d, h, 0};
  return o;
}

SimObject disc(const std::string& name, double r, int tag) {
  SimObject o;
  o.name = name;
  o.shape = {ShapeKind::Disc, 0, 0, 0.015, r};
  o.tag_id = tag;
  return o;
}

SimObject sphere(const std::string& name, double r, const std::string& category = "fruit") {
  SimObject o;
  o.name = name;
  o.shape = {ShapeKind::Sphere, 0, 0, 0, r};
  o.category = category;
  return o;
}

SimObject container(const std::string& name, double w, double d, double h) {
  SimObject o = box(name, w, d, h);
  o.container = true;
  o.wall = 0.015;
  return o;
}

// Three bases along x with a three-disc tower on base_1.
World hanoi_world() {
  World w;
  for (int i = 0; i < 3; ++i) {
    SimObject b = box("base_" + std::to_string(i + 1), 0.12, 0.12, 0.01);
    b.tag_id = 10 + i;
    b.graspable = false;
    w.add_object(b, "table", Eigen::Vector2d(0.0 + 0.2 * i, -0.6));
  }
  w.add_object(disc("disc_3", 0.05, 3), "base_1", std::nullopt);
  w.add_object(disc("disc_2", 0.04, 2), "disc_3", std::nullopt);
  w.add_object(disc("disc_1", 0.03, 1), "disc_2", std::nullopt);
  return w;
}

}  // namespace

TEST_CASE("place on an empty table rests at table height") {
  WorldConfig cfg;
  cfg.table_z = 0.1;
  World w(cfg);
  w.add_object(box("block", 0.04, 0.04, 0.04), "table", Eigen::Vector2d(0.1, -0.5));
  w.pick("block", w.object("block").position);
  CHECK(w.held() == std::optional<std::string>("block"));
  const PlaceOutcome out = w.place(Vec3(0.3, -0.7, 0.5));
  CHECK(out.support == "table");
  CHECK(out.position.isApprox(Vec3(0.3, -0.7, 0.12)));
  CHECK_FALSE(w.held());
}

TEST_CASE("pick errors") {
  World w;
  w.add_object(box("block", 0.04, 0.04, 0.04), "table", Eigen::Vector2d(0.1, -0.5));
  const Vec3 c = w.object("block").position;
  try {
    w.pick("block", c + Vec3(0.10, 0, 0));
    FAIL("expected GraspMissed");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::GraspMissed);
    CHECK(e.quantity() == doctest::Approx(0.10));
  }
  CHECK_ERRC(w.pick("pear", c), Errc::UnknownObject);
  w.pick("block", c);
  CHECK_ERRC(w.pick("block", c), Errc::GripperOccupied);
  w.place(Vec3(0.2, -0.6, 0));
  CHECK_ERRC(w.place(Vec3(0.2, -0.6, 0)), Errc::GripperEmpty);
  w.pick("block", w.object("block").position);
  CHECK_ERRC(w.place(Vec3(2.0, -0.6, 0)), Errc::OutOfWorkspace);
}

TEST_CASE("grasp height may sit anywhere on the object") {
  World w;
  w.add_object(sphere("apple", 0.035), "table", Eigen::Vector2d(0.1, -0.5));
  const Vec3 c = w.object("apple").position;
  CHECK_ERRC(w.pick("apple", c + Vec3(0, 0, 0.08)), Errc::GraspMissed);
  w.pick("apple", c + Vec3(0.005, 0, 0.025));
  CHECK(w.held());
}

TEST_CASE("Hanoi stacking rules") {
  World w = hanoi_world();
  CHECK(w.support_of("disc_1") == std::optional<std::string>("disc_2"));
  CHECK_ERRC(w.pick("disc_3", w.object("disc_3").position), Errc::ObjectCovered);
  CHECK_ERRC(w.pick("base_2", w.object("base_2").position), Errc::NotGraspable);

  w.pick("disc_1", w.object("disc_1").position);
  w.place(w.object("base_3").tag_point());
  w.pick("disc_2", w.object("disc_2").position);
  CHECK_ERRC(w.place(w.object("disc_1").tag_point()), Errc::PlacementCollision);  // large on small
  w.place(w.object("base_2").tag_point());
  w.pick("disc_1", w.object("disc_1").position);
  const PlaceOutcome out = w.place(w.object("disc_2").tag_point());  // small on large
  CHECK(out.support == "disc_2");
  CHECK(out.position.z() == doctest::Approx(w.object("disc_2").top() + 0.0075));
}

TEST_CASE("capture of a single cube") {
  World w;
  w.add_object(box("cube", 0.05, 0.05, 0.05), "table", Eigen::Vector2d(0.2, -0.6));
  const CaptureResult cap = w.capture(0);
  CHECK(cap.visible == std::set<std::string>{"cube"});
  REQUIRE(cap.truth_bboxes.size() == 1);
  const double px = 0.05 * 240.0 / (0.7 - 0.05);  // side length in pixels at the top face
  CHECK(cap.truth_bboxes[0].area() == doctest::Approx(px * px).epsilon(0.12));
  // Table center is the principal point in the top view; the corners see no table.
  CHECK(cap.depth.at(40, 30) == doctest::Approx(0.7));
  CHECK(cap.depth.at(5, 5) == 0.0);
  CHECK(cap.depth.at(160, 120) == doctest::Approx(0.65));
  CHECK_NOTHROW(cap.pose.validate());
}

TEST_CASE("closed container hides its contents") {
  World w;
  w.add_object(container("toolbox", 0.24, 0.18, 0.09), "table", Eigen::Vector2d(0.1, -0.6));
  w.add_object(sphere("lemon", 0.035), "toolbox", std::nullopt);
  CHECK(w.visible_objects().count("lemon"));
  SimObject lid = box("toolbox_lid", 0.26, 0.2, 0.01);
  lid.is_lid_of = "toolbox";
  w.add_object(lid, "toolbox", std::nullopt);
  CHECK(w.is_closed("toolbox"));
  const auto vis = w.visible_objects();
  CHECK_FALSE(vis.count("lemon"));
  CHECK(vis.count("toolbox"));
  CHECK(vis.count("toolbox_lid"));
  CHECK_ERRC(w.pick("lemon", w.object("lemon").position), Errc::ObjectInsideClosedContainer);
  CHECK_ERRC(w.pick("toolbox", w.object("toolbox").position), Errc::ObjectCovered);
}

TEST_CASE("Hanoi tower: only the top disc is visible; tags follow") {
  World w = hanoi_world();
  auto vis = w.visible_objects();
  CHECK(vis.count("disc_1"));
  CHECK_FALSE(vis.count("disc_2"));
  CHECK_FALSE(vis.count("disc_3"));
  CHECK_FALSE(vis.count("base_1"));

  auto tags = w.read_apriltags();
  std::vector<int> ids;
  for (const auto& t : tags) ids.push_back(t.tag_id);
  CHECK(ids == std::vector<int>{1, 11, 12});

  w.pick("disc_1", w.object("disc_1").position);
  CHECK_ERRC(w.read_apriltags(), Errc::GripperOccupiedDuringCapture);
  CHECK_ERRC(w.capture(0), Errc::GripperOccupiedDuringCapture);
  w.place(w.object("base_2").tag_point());
  tags = w.read_apriltags();
  ids.clear();
  for (const auto& t : tags) {
    ids.push_back(t.tag_id);
    if (t.tag_id == 1) CHECK(t.position == w.object("disc_1").tag_point());
  }
  CHECK(ids == std::vector<int>{1, 2, 12});
}

TEST_CASE("all discs spread flat: every tag is read") {
  World w;
  for (int i = 0; i < 3; ++i)
    w.add_object(disc("disc_" + std::to_string(i + 1), 0.03 + 0.01 * i, i + 1), "table",
                 Eigen::Vector2d(0.0 + 0.15 * i, -0.6));
  CHECK(w.read_apriltags().size() == 3);
}

TEST_CASE("containers arrange their contents apart") {
  World w;
  w.add_object(container("large_box", 0.3, 0.22, 0.08), "table", Eigen::Vector2d(0.3, -0.6));
  const Vec3 center = w.object("large_box").position;
  for (auto name : {"orange", "apple", "lemon"}) {
    w.add_object(sphere(name, 0.035), "table", Eigen::Vector2d(0.0, -0.75));
    w.pick(name, w.object(name).position);
    const PlaceOutcome out = w.place(center);
    CHECK(out.support == "large_box");
    CHECK(out.position.z() == doctest::Approx(center.z() - 0.04 + 0.015 + 0.035));
  }
  const auto inside = w.resting_on("large_box");
  REQUIRE(inside.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j)
      CHECK((w.object(inside[i]).position - w.object(inside[j]).position).head<2>().norm() >= 0.07 + 0.025 - 1e-9);
  CHECK(w.enclosing_container("apple") == "large_box");
}

TEST_CASE("free spot on an empty table is the principal point") {
  World w;
  CHECK(w.free_spot_pixel() == Eigen::Vector2i(160, 120));
  w.add_object(box("block", 0.1, 0.1, 0.05), "table", Eigen::Vector2d(0.2, -0.6));
  const Eigen::Vector2i p = w.free_spot_pixel();
  CHECK((p - Eigen::Vector2i(160, 120)).norm() > 40);
}

TEST_CASE("faults") {
  CHECK_ERRC(parse_fault_kind("gremlin"), Errc::UnknownFaultKind);

  World w;
  w.add_object(box("block", 0.04, 0.04, 0.04), "table", Eigen::Vector2d(0.1, -0.5));
  w.inject_fault(FaultSpec{FaultKind::GraspSlip, 1.0, 1, std::string("block"), Vec3::Zero()});
  CHECK_ERRC(w.pick("block", w.object("block").position), Errc::GraspMissed);
  w.pick("block", w.object("block").position);
  CHECK(w.held());
  w.place(Vec3(0.1, -0.5, 0));

  w.inject_fault(FaultSpec{FaultKind::LocalizationBias, 1.0, -1, std::nullopt, Vec3(0.03, 0, 0)});
  CHECK(w.localization_bias("block").isApprox(Vec3(0.03, 0, 0)));

  w.inject_fault(FaultSpec{FaultKind::CaptureDropout, 1.0, 1, std::nullopt, Vec3::Zero()});
  CHECK_ERRC(w.capture(0), Errc::CaptureDropout);
  CHECK_NOTHROW(w.capture(0));
}

TEST_CASE("probabilistic faults follow the documented draw schedule") {
  const std::uint64_t seed = 42;
  World w(WorldConfig{}, seed);
  w.inject_fault(FaultSpec{FaultKind::PointMisdirect, 0.4, -1, std::nullopt, Vec3::Zero()});
  std::mt19937_64 oracle(seed ^ 0x9E3779B97F4A7C15ull);  // fault index 0
  for (int i = 0; i < 200; ++i) {
    const double u = double(oracle() >> 11) / 9007199254740992.0;
    CHECK(w.fault_fires(FaultKind::PointMisdirect) == (u < 0.4));
  }
}

TEST_CASE("captures are deterministic under seed and differ across seeds") {
  auto make = [](std::uint64_t seed) {
    WorldConfig cfg;
    cfg.depth_noise = 0.001;
    World w(cfg, seed);
    w.add_object(sphere("apple", 0.035), "table", Eigen::Vector2d(0.1, -0.6));
    return w;
  };
  World a = make(7), b = make(7), c = make(8);
  const auto ca = a.capture(1), cb = b.capture(1), cc = c.capture(1);
  CHECK(ca.depth.depths == cb.depth.depths);
  CHECK(ca.depth.depths != cc.depth.depths);
  CHECK(ca.truth_bboxes == cc.truth_bboxes);
}

TEST_CASE("property: random pick/place sequences keep the world consistent") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ux(-0.15, 0.55), uy(-0.85, -0.35);
  for (int round = 0; round < 20; ++round) {
    World w = hanoi_world();
    w.add_object(container("bin", 0.22, 0.18, 0.07), "table", Eigen::Vector2d(0.45, -0.8));
    w.add_object(sphere("plum", 0.03), "table", Eigen::Vector2d(0.0, -0.8));
    w.add_object(box("brick", 0.05, 0.05, 0.05), "table", Eigen::Vector2d(0.15, -0.8));
    std::multiset<std::string> names;
    for (const auto& o : w.objects()) names.insert(o.name);

    for (int step = 0; step < 60; ++step) {
      const auto& objs = w.objects();
      if (!w.held()) {
        const SimObject& o = objs[rng() % objs.size()];
        try {
          w.pick(o.name, o.position);
        } catch (const Error&) {
        }
      } else {
        Vec3 target(ux(rng), uy(rng), 0);
        if (rng() % 2) target = objs[rng() % objs.size()].position;
        try {
          const std::string held = *w.held();
          const PlaceOutcome out = w.place(target);
          // pick at the resulting center restores the held state
          if (rng() % 4 == 0) {
            w.pick(held, out.position);
            CHECK(w.held() == std::optional<std::string>(held));
            w.place(out.position);
            CHECK(w.object(held).position.head<2>().isApprox(out.position.head<2>()));
          }
        } catch (const Error&) {
        }
      }

      std::multiset<std::string> now;
      for (const auto& o : w.objects()) now.insert(o.name);
      CHECK(now == names);
      // Support forest rooted at the table.
      for (const auto& o : w.objects()) {
        if (w.held() == std::optional<std::string>(o.name)) {
          CHECK_FALSE(w.support_of(o.name));
          continue;
        }
        std::string cur = o.name;
        int hops = 0;
        while (cur != "table" && hops < 20) {
          auto s = w.support_of(cur);
          REQUIRE(s);
          cur = *s;
          ++hops;
        }
        CHECK(cur == "table");
      }
    }
    if (w.held()) continue;
    // For stacked non-container supports, at most the upper object is visible.
    const auto vis = w.visible_objects();
    for (const auto& o : w.objects()) {
      auto s = w.support_of(o.name);
      if (s && *s != "table" && !w.object(*s).container) CHECK_FALSE(vis.count(*s));
    }
  }
}

TEST_CASE("surface centroid of a cube seen from three views") {
  World w;
  w.add_object(box("cube", 0.05, 0.05, 0.05), "table", Eigen::Vector2d(0.2, -0.6));
  const Vec3 c = w.surface_centroid("cube");
  // Top face dominates; side faces pull the centroid down a little.
  CHECK(c.x() == doctest::Approx(0.2).epsilon(0.02));
  CHECK(c.y() == doctest::Approx(-0.6).epsilon(0.02));
  CHECK(c.z() > 0.035);
  CHECK(c.z() < 0.05);
  CHECK_ERRC(w.surface_centroid("pear"), Errc::UnknownObject);
}
