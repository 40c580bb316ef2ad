#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace lta {

using Json = nlohmann::json;

enum class Role { System, User, Assistant, Tool };
std::string_view to_string(Role r);
Role parse_role(std::string_view s);  // MalformedResponse

struct ToolCall {
  std::string id;
  std::string name;
  Json args = Json::object();
  // Index of the plan step this call executes, when known (0-based).
  std::optional<int> plan_step;
  friend bool operator==(const ToolCall&, const ToolCall&) = default;
};

struct ChatMessage {
  Role role = Role::User;
  std::string content;
  std::vector<ToolCall> tool_calls;
  std::optional<std::string> tool_result_for;  // tool messages only
  bool ok = true;                               // tool messages only

  static ChatMessage system(std::string text) { return {Role::System, std::move(text), {}, {}, true}; }
  static ChatMessage user(std::string text) { return {Role::User, std::move(text), {}, {}, true}; }
  static ChatMessage assistant(std::string text, std::vector<ToolCall> calls = {}) {
    return {Role::Assistant, std::move(text), std::move(calls), {}, true};
  }
  static ChatMessage tool(std::string call_id, std::string text, bool ok) {
    return {Role::Tool, std::move(text), {}, std::move(call_id), ok};
  }
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ToolParam {
  std::string name;
  std::string type;  // JSON schema type: string, array, number, ...; empty for any value
  std::string description;
  bool required = true;
  std::string items;  // element type for arrays
};

struct ToolDef {
  std::string name;
  std::string description;
  std::vector<ToolParam> params;

  Json schema() const;  // {"type":"function","function":{...}}
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  // History must be non-empty and start with a system message.
  virtual ChatMessage complete(const std::vector<ChatMessage>& history, const std::vector<ToolDef>& tools) = 0;
};

// Mechanical interaction policy, a pure function of the history:
//   1. forward the latest user request to plan_using_advanced_llm,
//   2. show the returned plan and ask for confirmation,
//   3. on an affirmative reply, run the plan one turn at a time: each turn
//      carries one step plus the scene-graph edits that directly follow it,
//   4. stop at the first failed tool result and report it (a failed question
//      is skipped).
class ScriptedChat : public ChatBackend {
 public:
  ChatMessage complete(const std::vector<ChatMessage>& history, const std::vector<ToolDef>& tools) override;
};

// True for "yes", "y", "ok", "confirm", "go ahead", ... (case-insensitive).
bool is_affirmative(std::string_view reply);

// Chat-completion wire shape: messages array, tool list, tool_calls in replies.
Json to_wire(const ChatMessage& m);
Json request_body(const std::vector<ChatMessage>& history, const std::vector<ToolDef>& tools,
                  const std::string& model);
// Parses {"choices":[{"message":{...}}]}. MalformedResponse / MalformedToolCall.
ChatMessage parse_completion(const std::string& body);

}  // namespace lta
