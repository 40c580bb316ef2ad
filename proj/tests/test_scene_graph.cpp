#include <cmath>
#include <limits>
#include <random>

#include "lta/scene_graph.hpp"
#include "test_support.hpp"

using namespace lta;
using lta::test::data_path;
using lta::test::read_file;

namespace {

SceneNode make_node(std::string name, std::vector<std::string> affordance = {"pickable"}) {
  SceneNode n;
  n.name = std::move(name);
  n.affordance = std::move(affordance);
  n.position_descriptor = "centroid_can_be_obtained";
  n.things_to_know = "None";
  return n;
}

SceneGraph table_graph() {
  SceneGraph g;
  g.add_object(make_node("table", {"fixed in space"}), "workspace");
  return g;
}

// Checks every structural invariant by rebuilding from raw nodes.
void check_invariants(const SceneGraph& g) {
  std::vector<SceneNode> copy(g.nodes().begin(), g.nodes().end());
  CHECK_NOTHROW(SceneGraph::from_nodes(copy));
  CHECK(!g.parent_of("workspace"));
  std::map<std::string, int> parents;
  for (const auto& n : g.nodes())
    for (const auto& c : n.contains) ++parents[c];
  for (const auto& [name, count] : parents) CHECK(count == 1);
}

SceneGraph random_graph(std::mt19937_64& rng, int n_nodes) {
  SceneGraph g = table_graph();
  std::uniform_real_distribution<double> coord(-1.0, 1.0);
  for (int i = 0; i < n_nodes; ++i) {
    auto nodes = g.nodes();
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    std::string parent = nodes[pick(rng)].name;
    SceneNode n = make_node("obj_" + std::to_string(i));
    if (rng() % 2) n.coordinates = Eigen::Vector3d(coord(rng), coord(rng), coord(rng));
    g.add_object(n, parent);
  }
  return g;
}

void random_edit(std::mt19937_64& rng, SceneGraph& g) {
  auto nodes = g.nodes();
  std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
  std::string target = nodes[pick(rng)].name;
  try {
    switch (rng() % 4) {
      case 0: {
        Json kids = Json::array();
        int k = static_cast<int>(rng() % 3);
        for (int i = 0; i < k; ++i) kids.push_back(nodes[pick(rng)].name);
        g.edit_attribute(target, Attribute::Contains, kids);
        break;
      }
      case 1:
        g.set_coordinates(target, Eigen::Vector3d(double(rng() % 1000) / 997.0, -0.5, 0.125));
        break;
      case 2:
        g.edit_attribute(target, Attribute::ThingsToKnow, "note " + std::to_string(rng() % 100));
        break;
      default:
        g.add_object(make_node("extra_" + std::to_string(rng())), target);
    }
  } catch (const Error&) {
    // Rejected edits must leave the graph valid; checked by the caller.
  }
}

}  // namespace

TEST_CASE("add_object appends to the parent's contains list") {
  SceneGraph g = table_graph();
  SceneNode orange = make_node("orange", {"pickable", "edible"});
  g = add_object(g, orange, "table");
  const auto& table = g.at("table");
  REQUIRE(table.contains.size() == 1);
  CHECK(table.contains.back() == "orange");
  CHECK(g.parent_of("orange") == std::optional<std::string>("table"));
  CHECK(g.at("orange").affordance == std::vector<std::string>{"pickable", "edible"});
}

TEST_CASE("add_object under workspace keeps empty coordinates") {
  SceneGraph g;
  g = add_object(g, make_node("shelf"), "workspace");
  CHECK_FALSE(g.at("shelf").coordinates.has_value());
  check_invariants(g);
}

TEST_CASE("add_object errors") {
  SceneGraph g = add_object(table_graph(), make_node("orange"), "table");
  CHECK_ERRC(add_object(g, make_node("orange"), "table"), Errc::DuplicateName);
  CHECK_ERRC(add_object(g, make_node("pear"), "fridge"), Errc::UnknownParent);
}

TEST_CASE("edit_attribute with None empties contains") {
  SceneGraph g = table_graph();
  g.add_object(make_node("box"), "table");
  g.add_object(make_node("apple"), "box");
  g = edit_attribute(g, "box", Attribute::Contains, Json());
  CHECK(g.at("box").contains.empty());
  CHECK_FALSE(g.parent_of("apple"));
  CHECK(g.orphans() == std::vector<std::string>{"apple"});
}

TEST_CASE("edit_attribute contains reparents atomically") {
  SceneGraph g = table_graph();
  for (auto name : {"small_box", "garlic", "red_onion", "apple"}) g.add_object(make_node(name), "table");
  g = edit_attribute(g, "small_box", Attribute::Contains, Json{"garlic", "red_onion"});
  CHECK(g.at("small_box").contains == std::vector<std::string>{"garlic", "red_onion"});
  CHECK(g.at("table").contains == std::vector<std::string>{"small_box", "apple"});
  CHECK(g.parent_of("garlic") == std::optional<std::string>("small_box"));
  check_invariants(g);
}

TEST_CASE("edit_attribute rejects cycles and bad types") {
  SceneGraph g = table_graph();
  g.add_object(make_node("box"), "table");
  CHECK_ERRC(edit_attribute(g, "table", Attribute::Contains, Json{"workspace"}), Errc::WouldCreateCycle);
  CHECK_ERRC(edit_attribute(g, "box", Attribute::Contains, Json{"table"}), Errc::WouldCreateCycle);
  CHECK_ERRC(edit_attribute(g, "box", Attribute::Contains, Json{"box"}), Errc::WouldCreateCycle);
  CHECK_ERRC(edit_attribute(g, "box", Attribute::Contains, Json{"ghost"}), Errc::UnknownNode);
  CHECK_ERRC(edit_attribute(g, "ghost", Attribute::Contains, Json::array()), Errc::UnknownNode);
  CHECK_ERRC(edit_attribute(g, "box", Attribute::Affordance, "pickable"), Errc::TypeMismatch);
  CHECK_ERRC(edit_attribute(g, "box", Attribute::ThingsToKnow, 3), Errc::TypeMismatch);
  CHECK_ERRC(edit_attribute(g, "box", Attribute::Coordinates, Json{1, 2}), Errc::TypeMismatch);
  g.add_object(make_node("apple"), "table");
  CHECK_ERRC(edit_attribute(g, "box", Attribute::Contains, Json{"apple", "apple"}), Errc::TypeMismatch);
}

TEST_CASE("set_coordinates") {
  SceneGraph g = table_graph();
  g.add_object(make_node("apple"), "table");
  g.add_object(make_node("small_box"), "table");

  Eigen::Vector3d xyz(0.1, -0.5, 0.05);
  g = set_coordinates(g, "apple", xyz);
  CHECK(*g.at("apple").coordinates == xyz);

  Eigen::Vector3d exact(0.19957663118839264, -0.6754058599472046, 0.14970232427120209);
  g = set_coordinates(g, "small_box", exact);
  SceneGraph back = deserialize(serialize(g));
  const auto& c = *back.at("small_box").coordinates;
  for (int i = 0; i < 3; ++i) CHECK(std::memcmp(&c[i], &exact[i], sizeof(double)) == 0);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  CHECK_ERRC(set_coordinates(g, "apple", Eigen::Vector3d(nan, 0, 0)), Errc::NonFiniteValue);
  CHECK_ERRC(set_coordinates(g, "pear", xyz), Errc::UnknownNode);
}

TEST_CASE("example graphs round-trip") {
  const std::string initial_text = read_file(data_path("exp3a_initial_graph.json"));
  SceneGraph initial = deserialize(initial_text);
  CHECK(initial.size() == 9);
  CHECK(initial.at("table").contains.size() == 7);
  const std::string once = serialize(initial);
  CHECK(deserialize(once) == initial);
  CHECK(serialize(deserialize(once)) == once);

  // The final graph was printed in canonical two-space form; re-serializing it
  // must reproduce it byte for byte, coordinates included.
  std::string final_text = read_file(data_path("exp3a_final_graph.json"));
  while (!final_text.empty() && final_text.back() == '\n') final_text.pop_back();
  CHECK(serialize(deserialize(final_text)) == final_text);

  // 0.14970232427120209 and 0.1497023242712021 are the same double.
  CHECK(deserialize(final_text).at("small_box").coordinates ==
        initial.at("small_box").coordinates);
}

TEST_CASE("root-only graph round-trips") {
  SceneGraph g;
  CHECK(deserialize(serialize(g)) == g);
  CHECK(serialize(g) ==
        "{\n  \"workspace\": {\n    \"affordance\": [],\n    \"contains\": [],\n"
        "    \"position_in_cartesian_space\": \"\",\n    \"things_to_know\": \"\",\n"
        "    \"coordinates\": []\n  }\n}");
}

TEST_CASE("deserialize reports schema and parse errors") {
  const std::string missing = R"({"workspace": {"affordance": [], "position_in_cartesian_space": "",
      "things_to_know": "", "coordinates": []}})";
  try {
    deserialize(missing);
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::SchemaError);
    CHECK(e.detail().rfind("contains", 0) == 0);
  }
  try {
    deserialize("{\n  \"workspace\": [\n}");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ParseError);
    CHECK(e.detail().find("line 3") != std::string::npos);
  }
  CHECK_ERRC(deserialize(R"({"table": {"affordance": [], "contains": [], "position_in_cartesian_space": "",
      "things_to_know": "", "coordinates": []}})"),
             Errc::SchemaError);
  CHECK_ERRC(deserialize(R"({"workspace": {"affordance": [], "contains": ["x"], "position_in_cartesian_space": "",
      "things_to_know": "", "coordinates": []}})"),
             Errc::SchemaError);
  CHECK_ERRC(deserialize(R"({"workspace": {"affordance": [], "contains": [], "position_in_cartesian_space": "",
      "things_to_know": "", "coordinates": [1, 2]}})"),
             Errc::SchemaError);
  CHECK_ERRC(deserialize(R"({"workspace": {"affordance": [], "contains": [], "position_in_cartesian_space": "",
      "things_to_know": "", "coordinates": [], "color": "red"}})"),
             Errc::SchemaError);
}

TEST_CASE("None in contains normalizes to an empty list") {
  SceneGraph g = deserialize(R"({"workspace": {"affordance": ["None"], "contains": null,
      "position_in_cartesian_space": "irrelevant", "things_to_know": "None", "coordinates": null}})");
  CHECK(g.at("workspace").contains.empty());
  CHECK(serialize(g).find("\"contains\": []") != std::string::npos);
}

TEST_CASE("diff of the sorting example graphs") {
  SceneGraph initial = deserialize(read_file(data_path("exp3a_initial_graph.json")));
  SceneGraph final_graph = deserialize(read_file(data_path("exp3a_final_graph.json")));
  GraphDelta d = diff(initial, final_graph);
  CHECK(d.added.empty());
  CHECK(d.removed.empty());
  std::map<std::string, std::string> moved;
  for (const auto& r : d.reparented) moved[r.node] = r.new_parent.value_or("");
  CHECK(moved == std::map<std::string, std::string>{{"orange", "large_box"},
                                                    {"apple", "large_box"},
                                                    {"lemon", "large_box"},
                                                    {"garlic", "small_box"},
                                                    {"red_onion", "small_box"}});
  for (const auto& r : d.reparented) CHECK(r.old_parent == std::optional<std::string>("table"));
  CHECK(apply(initial, d) == final_graph);
}

TEST_CASE("diff basics") {
  SceneGraph g = table_graph();
  g.add_object(make_node("apple"), "table");
  CHECK(diff(g, g).empty());
  SceneGraph moved = set_coordinates(g, "apple", Eigen::Vector3d(0.1, 0.2, 0.3));
  GraphDelta d = diff(g, moved);
  REQUIRE(d.attribute_changes.size() == 1);
  CHECK(d.attribute_changes[0].node == "apple");
  CHECK(d.attribute_changes[0].attribute == Attribute::Coordinates);
  CHECK(d.reparented.empty());
}

TEST_CASE("render_for_prompt is deterministic and changes iff the graph does") {
  SceneGraph g = deserialize(read_file(data_path("exp3a_initial_graph.json")));
  const std::string a = render_for_prompt(g);
  CHECK(render_for_prompt(g) == a);
  std::size_t count = 0;
  for (auto pos = a.find("\"contains\""); pos != std::string::npos; pos = a.find("\"contains\"", pos + 1)) ++count;
  CHECK(count == g.size());
  SceneGraph same = edit_attribute(g, "apple", Attribute::ThingsToKnow, g.at("apple").things_to_know);
  CHECK(diff(g, same).empty());
  CHECK(render_for_prompt(same) == a);
  SceneGraph changed = edit_attribute(g, "apple", Attribute::ThingsToKnow, "bruised");
  CHECK_FALSE(diff(g, changed).empty());
  CHECK(render_for_prompt(changed) != a);
}

TEST_CASE("remove_node") {
  SceneGraph g = table_graph();
  g.add_object(make_node("apple"), "table");
  CHECK_ERRC(g.remove_node("workspace"), Errc::TypeMismatch);
  CHECK_ERRC(g.remove_node("table"), Errc::TypeMismatch);
  g.remove_node("apple");
  CHECK_FALSE(g.has("apple"));
  CHECK(g.at("table").contains.empty());
}

TEST_CASE("property: invariants hold under random edit sequences") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 60; ++round) {
    SceneGraph g = random_graph(rng, 8);
    for (int step = 0; step < 40; ++step) {
      random_edit(rng, g);
      check_invariants(g);
    }
  }
}

TEST_CASE("property: serialize/deserialize is the identity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> any(-1e3, 1e3);
  for (int round = 0; round < 100; ++round) {
    SceneGraph g = random_graph(rng, 10);
    g.set_coordinates("obj_0", Eigen::Vector3d(any(rng), std::nextafter(any(rng), 0.0), 1e-300 * any(rng)));
    SceneGraph back = deserialize(serialize(g));
    CHECK(back == g);
    CHECK(serialize(back) == serialize(g));
  }
}

TEST_CASE("property: apply(old, diff(old, new)) == new") {
  std::mt19937_64 rng(13);
  for (int round = 0; round < 100; ++round) {
    SceneGraph before = random_graph(rng, 8);
    SceneGraph after = before;
    for (int step = 0; step < 10; ++step) random_edit(rng, after);
    if (rng() % 3 == 0 && after.has("obj_7") && after.at("obj_7").contains.empty()) after.remove_node("obj_7");
    GraphDelta d = diff(before, after);
    SceneGraph rebuilt = apply(before, d);
    CHECK(rebuilt == after);
    CHECK(serialize(rebuilt) == serialize(after));
  }
}
