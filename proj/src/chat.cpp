#include "lta/chat.hpp"

#include <algorithm>
#include <cctype>

#include "lta/error.hpp"
#include "lta/plan.hpp"
#include "lta/tool_names.hpp"

namespace lta {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    case Role::Tool: return "tool";
  }
  return "user";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  if (s == "tool") return Role::Tool;
  throw Error(Errc::MalformedResponse, "unknown role '" + std::string(s) + "'");
}

Json ToolDef::schema() const {
  Json props = Json::object();
  Json required = Json::array();
  for (const auto& p : params) {
    Json prop = {{"description", p.description}};
    if (!p.type.empty()) prop["type"] = p.type;  // empty: any JSON value
    if (p.type == "array") prop["items"] = {{"type", p.items.empty() ? "string" : p.items}};
    props[p.name] = prop;
    if (p.required) required.push_back(p.name);
  }
  return {{"type", "function"},
          {"function",
           {{"name", name},
            {"description", description},
            {"parameters", {{"type", "object"}, {"properties", props}, {"required", required}}}}}};
}

bool is_affirmative(std::string_view reply) {
  std::string r;
  for (char c : reply)
    if (!std::ispunct(static_cast<unsigned char>(c))) r += char(std::tolower(static_cast<unsigned char>(c)));
  while (!r.empty() && std::isspace(static_cast<unsigned char>(r.back()))) r.pop_back();
  while (!r.empty() && std::isspace(static_cast<unsigned char>(r.front()))) r.erase(r.begin());
  static const char* yes[] = {"yes", "y", "ok", "okay", "confirm", "confirmed", "go ahead", "proceed", "sure",
                              "yes please", "do it"};
  return std::any_of(std::begin(yes), std::end(yes), [&](const char* w) { return r == w; });
}

namespace {

enum class Phase { Idle, NeedPlan, PlanPending, PlanReady, AwaitConfirm, Executing, Halted, Finished, Declined };

bool is_edit(std::string_view tool) { return tool == tools::kAddObject || tool == tools::kEditGraph; }

}  // namespace

ChatMessage ScriptedChat::complete(const std::vector<ChatMessage>& history, const std::vector<ToolDef>&) {
  if (history.empty() || history.front().role != Role::System)
    throw Error(Errc::MalformedToolCall, "history must start with a system message");

  Phase phase = Phase::Idle;
  std::string request;
  std::string plan_call;
  Plan plan;
  std::string plan_text;
  std::size_t cursor = 0;
  std::string failure;
  std::size_t calls_seen = 0;
  std::vector<std::pair<std::string, std::optional<int>>> calls;  // id -> plan step

  for (const auto& m : history) {
    switch (m.role) {
      case Role::System: break;
      case Role::User:
        if (phase == Phase::AwaitConfirm) {
          phase = is_affirmative(m.content) ? Phase::Executing : Phase::Declined;
          cursor = 0;
        } else if (phase != Phase::Executing && phase != Phase::PlanPending) {
          request = m.content;
          phase = Phase::NeedPlan;
        }
        break;
      case Role::Assistant:
        calls_seen += m.tool_calls.size();
        for (const auto& c : m.tool_calls) {
          if (c.name == tools::kPlan) {
            phase = Phase::PlanPending;
            plan_call = c.id;
          }
          calls.emplace_back(c.id, c.plan_step);
        }
        if (m.tool_calls.empty()) {
          if (phase == Phase::PlanReady) phase = Phase::AwaitConfirm;
          else if (phase == Phase::Executing && cursor >= plan.steps.size()) phase = Phase::Finished;
        }
        break;
      case Role::Tool: {
        const std::string id = m.tool_result_for.value_or("");
        if (phase == Phase::PlanPending && id == plan_call) {
          if (!m.ok) {
            phase = Phase::Halted;
            failure = "planning failed: " + m.content;
            break;
          }
          try {
            plan = parse_plan(m.content);
            plan_text = m.content;
            phase = Phase::PlanReady;
          } catch (const Error& e) {
            phase = Phase::Halted;
            failure = std::string("the plan could not be read: ") + e.what();
          }
          break;
        }
        if (phase != Phase::Executing) break;
        auto it = std::find_if(calls.begin(), calls.end(), [&](const auto& c) { return c.first == id; });
        const std::optional<int> step = it == calls.end() ? std::nullopt : it->second;
        if (!m.ok && step && std::size_t(*step) < plan.steps.size() && plan.steps[std::size_t(*step)].tool == tools::kVqa) {
          cursor = std::max(cursor, std::size_t(*step) + 1);  // answers are informational
        } else if (!m.ok) {
          phase = Phase::Halted;
          failure = (step ? "step " + std::to_string(*step + 1) + " failed: " : "a tool call failed: ") + m.content;
        } else if (step) {
          cursor = std::max(cursor, std::size_t(*step) + 1);
        }
        break;
      }
    }
  }

  auto next_id = [&](std::size_t k) { return "call_" + std::to_string(calls_seen + k + 1); };
  switch (phase) {
    case Phase::Idle:
      return ChatMessage::assistant("Hi! What would you like me to do on the table?");
    case Phase::NeedPlan: {
      ToolCall c{next_id(0), std::string(tools::kPlan), Json{{"request_from_user", request}}, std::nullopt};
      return ChatMessage::assistant("", {c});
    }
    case Phase::PlanPending:
      return ChatMessage::assistant("Still waiting for the plan.");
    case Phase::PlanReady:
    case Phase::AwaitConfirm:
      return ChatMessage::assistant("Here is the plan I received (" + std::to_string(plan.steps.size()) +
                                    " steps):\n" + format_plan(plan) + "\nShall I execute it?");
    case Phase::Declined:
      return ChatMessage::assistant("Understood, I will not execute the plan.");
    case Phase::Halted:
      return ChatMessage::assistant("I stopped: " + failure);
    case Phase::Finished:
      return ChatMessage::assistant("The task is complete.");
    case Phase::Executing: break;
  }

  if (cursor >= plan.steps.size())
    return ChatMessage::assistant("All " + std::to_string(plan.steps.size()) + " steps are done.");
  std::vector<ToolCall> turn;
  std::size_t i = cursor;
  do {
    const PlanStep& s = plan.steps[i];
    Json args = Json::object();
    for (const auto& [k, v] : s.args) args[k] = v;
    turn.push_back({next_id(turn.size()), s.tool, args, int(i)});
    ++i;
  } while (i < plan.steps.size() && is_edit(plan.steps[i].tool));
  return ChatMessage::assistant("", std::move(turn));
}

Json to_wire(const ChatMessage& m) {
  Json j = {{"role", to_string(m.role)}};
  if (m.role == Role::Tool) {
    j["tool_call_id"] = m.tool_result_for.value_or("");
    j["content"] = m.ok ? m.content : "FAILURE: " + m.content;
    return j;
  }
  if (m.role == Role::Assistant && !m.tool_calls.empty()) {
    j["content"] = m.content.empty() ? Json(nullptr) : Json(m.content);
    Json calls = Json::array();
    for (const auto& c : m.tool_calls)
      calls.push_back({{"id", c.id}, {"type", "function"}, {"function", {{"name", c.name}, {"arguments", c.args.dump()}}}});
    j["tool_calls"] = calls;
    return j;
  }
  j["content"] = m.content;
  return j;
}

Json request_body(const std::vector<ChatMessage>& history, const std::vector<ToolDef>& tools,
                  const std::string& model) {
  Json messages = Json::array();
  for (const auto& m : history) messages.push_back(to_wire(m));
  Json body = {{"model", model}, {"messages", messages}};
  if (!tools.empty()) {
    Json defs = Json::array();
    for (const auto& t : tools) defs.push_back(t.schema());
    body["tools"] = defs;
  }
  return body;
}

ChatMessage parse_completion(const std::string& body) {
  Json doc;
  try {
    doc = Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw Error(Errc::MalformedResponse, std::string("reply is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty() ||
      !doc["choices"][0].contains("message") || !doc["choices"][0]["message"].is_object())
    throw Error(Errc::MalformedResponse, "reply has no choices[0].message");
  const Json& msg = doc["choices"][0]["message"];
  ChatMessage out = ChatMessage::assistant("");
  if (msg.contains("role") && msg["role"].is_string() && parse_role(msg["role"].get<std::string>()) != Role::Assistant)
    throw Error(Errc::MalformedResponse, "reply role is not assistant");
  if (msg.contains("content") && msg["content"].is_string()) out.content = msg["content"].get<std::string>();
  if (msg.contains("tool_calls") && !msg["tool_calls"].is_null()) {
    if (!msg["tool_calls"].is_array()) throw Error(Errc::MalformedToolCall, "tool_calls must be a list");
    for (const auto& c : msg["tool_calls"]) {
      if (!c.is_object() || !c.contains("function") || !c["function"].contains("name") ||
          !c["function"]["name"].is_string())
        throw Error(Errc::MalformedToolCall, "tool call without a function name");
      ToolCall call;
      call.id = c.contains("id") && c["id"].is_string() ? c["id"].get<std::string>()
                                                        : "call_" + std::to_string(out.tool_calls.size() + 1);
      call.name = c["function"]["name"].get<std::string>();
      const Json& raw = c["function"].contains("arguments") ? c["function"]["arguments"] : Json("{}");
      try {
        call.args = raw.is_string() ? Json::parse(raw.get<std::string>()) : raw;
      } catch (const Json::parse_error&) {
        throw Error(Errc::MalformedToolCall, "arguments of '" + call.name + "' are not JSON");
      }
      if (!call.args.is_object()) throw Error(Errc::MalformedToolCall, "arguments of '" + call.name + "' must be an object");
      out.tool_calls.push_back(std::move(call));
    }
  }
  return out;
}

}  // namespace lta
