#include "lta/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <map>
#include <thread>

#include <httplib.h>
#include <png.h>

#include "lta/error.hpp"
#include "lta/wire.hpp"

namespace lta {
namespace {

struct Endpoint {
  std::string base;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(Errc::InvalidConfiguration, "endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string getenv_or(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  return v ? v : "";
}

}  // namespace

std::optional<RemoteConfig> RemoteConfig::from_env(const std::string& prefix) {
  RemoteConfig c;
  c.url = getenv_or("LTA_" + prefix + "_URL");
  if (c.url.empty()) return std::nullopt;
  c.key = getenv_or("LTA_" + prefix + "_KEY");
  const std::string model = getenv_or("LTA_" + prefix + "_MODEL");
  if (!model.empty()) c.model = model;
  return c;
}

std::string post_json(const RemoteConfig& config, const std::string& body) {
  const Endpoint ep = split_url(config.url);
  httplib::Client client(ep.base);
  const auto secs = std::chrono::duration<double>(config.timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  httplib::Headers headers;
  if (!config.key.empty()) headers.emplace("Authorization", "Bearer " + config.key);

  std::string last = "no attempt made";
  int backoff = config.backoff_ms;
  for (int attempt = 1; attempt <= std::max(1, config.attempts); ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
    auto res = client.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw Error(Errc::AuthError, "endpoint answered " + std::to_string(res->status));
    if (res->status == 429 || res->status >= 500) {
      last = "endpoint answered " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300)
      throw Error(Errc::BackendUnavailable, "endpoint answered " + std::to_string(res->status) + ": " + res->body);
    return res->body;
  }
  throw Error(Errc::BackendUnavailable,
              last + " (after " + std::to_string(std::max(1, config.attempts)) + " attempts)");
}

ChatMessage RemoteChat::complete(const std::vector<ChatMessage>& history, const std::vector<ToolDef>& tools) {
  if (history.empty() || history.front().role != Role::System)
    throw Error(Errc::MalformedToolCall, "history must start with a system message");
  return parse_completion(post_json(config_, request_body(history, tools, config_.model).dump()));
}

std::string RemoteVlm::ask(std::string_view system, const std::string& prompt, const VlmView& view) {
  const std::string image = "data:image/png;base64," + httplib::detail::base64_encode(render_png(view.world, view.capture.view));
  Json messages = Json::array();
  if (!system.empty()) messages.push_back({{"role", "system"}, {"content", std::string(system)}});
  messages.push_back({{"role", "user"},
                      {"content",
                       {{{"type", "image_url"}, {"image_url", {{"url", image}}}},
                        {{"type", "text"}, {"text", prompt}}}}});
  const Json body = {{"model", config_.model}, {"messages", messages}};
  return parse_completion(post_json(config_, body.dump())).content;
}

bool RemoteVlm::presence(const std::string& object_name, const VlmView& view) {
  return wire::parse_presence(ask(wire::kPresenceSystem, wire::presence_prompt(object_name), view));
}

std::vector<geom::BBox> RemoteVlm::bboxes(const std::vector<std::string>& names, const VlmView& view) {
  if (names.empty()) return {};
  return wire::parse_bboxes(ask(wire::kBBoxSystem, wire::bbox_prompt(names), view));
}

Eigen::Vector2d RemoteVlm::point(const std::string& request, const VlmView& view) {
  return wire::parse_point(ask(wire::kPointSystem, wire::point_prompt(request), view)).pixel;
}

std::string RemoteVlm::vqa(const std::string& question, const VlmView& view) { return ask("", question, view); }

std::string render_png(const sim::World& world, int view) {
  static const std::map<std::string, std::array<std::uint8_t, 3>> palette = {
      {"red", {200, 40, 40}},     {"green", {50, 160, 60}},   {"blue", {40, 80, 200}},
      {"yellow", {230, 210, 40}}, {"orange", {240, 140, 30}}, {"purple", {120, 40, 140}},
      {"white", {240, 240, 240}}, {"black", {20, 20, 20}},    {"grey", {128, 128, 128}},
      {"gray", {128, 128, 128}},  {"brown", {120, 80, 40}},   {"pink", {240, 150, 180}},
      {"off-white", {230, 225, 210}}};
  const sim::World::Render r = world.render(view);
  const int w = r.depth.intrinsics.width, h = r.depth.intrinsics.height;
  std::vector<std::uint8_t> rgb(std::size_t(w) * h * 3);
  for (std::size_t k = 0; k < r.ids.size(); ++k) {
    std::array<std::uint8_t, 3> c{30, 30, 30};
    if (r.ids[k] == -1) {
      c = {170, 140, 100};
    } else if (r.ids[k] >= 0) {
      const sim::SimObject& o = world.objects()[std::size_t(r.ids[k])];
      auto it = palette.find(o.color);
      if (it != palette.end()) {
        c = it->second;
      } else {
        const std::uint64_t hsh = fnv1a(o.name);
        c = {std::uint8_t(64 + hsh % 160), std::uint8_t(64 + (hsh >> 8) % 160), std::uint8_t(64 + (hsh >> 16) % 160)};
      }
    }
    std::copy(c.begin(), c.end(), rgb.begin() + std::ptrdiff_t(k * 3));
  }

  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::InvalidConfiguration, "PNG encoding failed");
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), n);
      },
      nullptr);
  png_set_IHDR(png, info, png_uint_32(w), png_uint_32(h), 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int v = 0; v < h; ++v) png_write_row(png, rgb.data() + std::size_t(v) * w * 3);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace lta
