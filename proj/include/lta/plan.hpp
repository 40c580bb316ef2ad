#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace lta {

using Json = nlohmann::json;

// Plan text grammar (see docs/plan_grammar.md):
//
//   plan  := prose* step+ prose*
//   step  := INT "." tool "(" [arg ("," arg)*] ")" ["#" note]
//   arg   := ident "=" value
//   value := json-string | number | true | false | null | None
//          | "[" [value ("," value)*] "]" | json-object
//          | placeholder | bareword
//   placeholder := "$step" INT ".out" ("." ident | "[" INT "]")*
//
// Steps are numbered 1, 2, 3... without gaps. A placeholder may only refer to
// an earlier step. Barewords are trimmed and become strings; `None` becomes
// null. Prose lines (anything not starting with "N.") form the rationale.

struct Placeholder {
  int step = 0;  // 1-based
  std::vector<Json> path;  // object keys (strings) and array indices (integers)

  static std::optional<Placeholder> parse(std::string_view text);
  std::string to_string() const;
};

struct PlanStep {
  std::string tool;
  std::vector<std::pair<std::string, Json>> args;  // in written order
  std::string note;

  const Json* arg(std::string_view name) const;
  friend bool operator==(const PlanStep&, const PlanStep&) = default;
};

struct Plan {
  std::vector<PlanStep> steps;
  std::string rationale;
};

Plan parse_plan(std::string_view text);  // PlanParseError naming the line
std::string format_plan(const Plan& plan);
std::string format_value(const Json& value);

// Every placeholder inside `value` (recursively).
std::vector<Placeholder> placeholders_in(const Json& value);
// Replaces placeholders using the payload of each referenced step.
// UnresolvedPlaceholder if a step has no payload or the path does not exist.
Json resolve_placeholders(const Json& value, const std::vector<std::optional<Json>>& step_payloads);

}  // namespace lta
