#include "lta/plan.hpp"
#include "test_support.hpp"

using namespace lta;

TEST_CASE("single step") {
  const Plan p = parse_plan("1. pick_object(object_name=apple)");
  REQUIRE(p.steps.size() == 1);
  CHECK(p.steps[0].tool == "pick_object");
  REQUIRE(p.steps[0].arg("object_name"));
  CHECK(*p.steps[0].arg("object_name") == "apple");
  CHECK(p.rationale.empty());
}

TEST_CASE("value forms") {
  const Plan p = parse_plan(
      "Sort the produce.\n"
      "1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[garlic, red_onion])\n"
      "2. get_a_specific_coordinate_point_using_vlm(prompt_to_vlm=\"free spot on the table\")  # for the lid\n"
      "3. add_object_to_scenegraph(object_name=spot, affordance=['placeable'], coordinates=$step2.out, "
      "contains=[], things_to_know=None, position_in_cartesian_space=\"on the table\")\n"
      "4. edit_scenegraph(node_name=apple, attribute_name=coordinates, value=[0.1, -0.5, 2e-2])\n"
      "5. edit_scenegraph(node_name=box, attribute_name=contains, value={\"a\": [1, 2]})\n"
      "Then done.\n");
  REQUIRE(p.steps.size() == 5);
  CHECK(*p.steps[0].arg("targets_to_scan") == Json::array({"garlic", "red_onion"}));
  CHECK(*p.steps[1].arg("prompt_to_vlm") == "free spot on the table");
  CHECK(p.steps[1].note == "for the lid");
  CHECK(*p.steps[2].arg("coordinates") == "$step2.out");
  CHECK(*p.steps[2].arg("affordance") == Json::array({"placeable"}));
  CHECK(p.steps[2].arg("things_to_know")->is_null());
  CHECK(*p.steps[3].arg("value") == Json::array({0.1, -0.5, 0.02}));
  CHECK((*p.steps[4].arg("value"))["a"] == Json::array({1, 2}));
  CHECK(p.rationale == "Sort the produce.\nThen done.");
}

TEST_CASE("forward placeholders are rejected") {
  const std::string text =
      "1. pick_object(object_name=apple)\n"
      "2. place_object(place_position_name=$step3.out)\n"
      "3. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[apple])\n";
  try {
    parse_plan(text);
    FAIL("expected PlanParseError");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::PlanParseError);
    CHECK(e.quantity() == 2);
  }
  CHECK_ERRC(parse_plan("1. pick_object(object_name=$step1.out)"), Errc::PlanParseError);
}

TEST_CASE("malformed plans") {
  CHECK_ERRC(parse_plan(""), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("just prose"), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("1. pick_object(object_name=apple"), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("2. pick_object(object_name=apple)"), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("1. pick_object(object_name=apple, object_name=pear)"), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("1. pick_object(object_name=\"apple)"), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("1. pick_object(object_name=apple) trailing"), Errc::PlanParseError);
  CHECK_ERRC(parse_plan("1. pick_object(x=$stepX.out)"), Errc::PlanParseError);
}

TEST_CASE("prose with decimals is not a step") {
  const Plan p = parse_plan("3.5 seconds per move is typical.\n1. pick_object(object_name=a)\n");
  CHECK(p.steps.size() == 1);
}

TEST_CASE("format and parse are inverse") {
  const std::string text =
      "1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[garlic, red_onion])\n"
      "2. get_a_specific_coordinate_point_using_vlm(prompt_to_vlm=\"between apple and yarn\")  # target\n"
      "3. add_object_to_scenegraph(object_name=spot, coordinates=$step2.out, things_to_know=None)\n"
      "4. edit_scenegraph(node_name=apple, attribute_name=coordinates, value=[0.1, -0.5, 0.02])\n"
      "5. edit_scenegraph(node_name=apple, attribute_name=things_to_know, value=\"A \\\"quoted\\\" note\")\n";
  const Plan p = parse_plan(text);
  CHECK(format_plan(p) == text);
  CHECK(parse_plan(format_plan(p)).steps == p.steps);
}

TEST_CASE("placeholder parsing and resolution") {
  const auto ph = Placeholder::parse("$step2.out.position[1]");
  REQUIRE(ph);
  CHECK(ph->step == 2);
  CHECK(ph->path == std::vector<Json>{"position", 1});
  CHECK(ph->to_string() == "$step2.out.position[1]");
  CHECK_FALSE(Placeholder::parse("$step0.out"));
  CHECK_FALSE(Placeholder::parse("$step2.output"));

  std::vector<std::optional<Json>> payloads = {Json{{"position", {0.1, 0.2, 0.3}}}, std::nullopt};
  CHECK(resolve_placeholders("$step1.out.position[2]", payloads) == 0.3);
  CHECK(resolve_placeholders(Json::array({"$step1.out.position", "x"}), payloads) ==
        Json::array({Json::array({0.1, 0.2, 0.3}), "x"}));
  CHECK_ERRC(resolve_placeholders("$step2.out", payloads), Errc::UnresolvedPlaceholder);
  CHECK_ERRC(resolve_placeholders("$step1.out.missing", payloads), Errc::UnresolvedPlaceholder);
  CHECK_ERRC(resolve_placeholders("$step3.out", payloads), Errc::UnresolvedPlaceholder);
  CHECK(placeholders_in(Json{{"a", Json::array({"$step1.out", "b"})}}).size() == 1);
}

TEST_CASE("placeholder as the last list element") {
  const Plan p = parse_plan("1. pick_object(object_name=a)\n2. edit_scenegraph(node_name=b, value=[$step1.out])\n");
  CHECK(*p.steps[1].arg("value") == Json::array({"$step1.out"}));
}
