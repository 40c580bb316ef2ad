#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lta/chat.hpp"
#include "lta/vlm.hpp"

namespace lta {

struct RemoteConfig {
  std::string url;   // full endpoint, e.g. http://host:8000/v1/chat/completions
  std::string key;   // sent as a bearer token when non-empty
  std::string model = "default";
  double timeout_s = 60;
  int attempts = 3;
  int backoff_ms = 250;  // doubled after each failed attempt

  // LTA_CHAT_URL / LTA_CHAT_KEY (prefix "CHAT") or LTA_VLM_URL / LTA_VLM_KEY
  // (prefix "VLM"); LTA_<prefix>_MODEL is optional. nullopt if the URL is unset.
  static std::optional<RemoteConfig> from_env(const std::string& prefix);
};

// POSTs a JSON body and returns the response body. Connection failures, 429
// and 5xx are retried with backoff; after the last attempt the call fails with
// BackendUnavailable. 401/403 give AuthError at once, other 4xx give
// BackendUnavailable.
std::string post_json(const RemoteConfig& config, const std::string& body);

class RemoteChat : public ChatBackend {
 public:
  explicit RemoteChat(RemoteConfig config) : config_(std::move(config)) {}
  ChatMessage complete(const std::vector<ChatMessage>& history, const std::vector<ToolDef>& tools) override;

 private:
  RemoteConfig config_;
};

// Sends a rendered top-view image with the wire prompts and validates every
// answer against the wire grammar.
class RemoteVlm : public VlmBackend {
 public:
  explicit RemoteVlm(RemoteConfig config) : config_(std::move(config)) {}

  bool presence(const std::string& object_name, const VlmView& view) override;
  std::vector<geom::BBox> bboxes(const std::vector<std::string>& names, const VlmView& view) override;
  Eigen::Vector2d point(const std::string& request, const VlmView& view) override;
  std::string vqa(const std::string& question, const VlmView& view) override;

 private:
  std::string ask(std::string_view system, const std::string& prompt, const VlmView& view);
  RemoteConfig config_;
};

// Color image of a capture (objects shaded by their color names) encoded as PNG.
std::string render_png(const sim::World& world, int view);

}  // namespace lta
