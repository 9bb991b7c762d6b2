#include "nashverify/chat_client.hpp"

#include "nashverify/errors.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

namespace nashverify {
namespace {

using json = nlohmann::json;

std::string_view role_name(ChatMessage::Role role) {
  switch (role) {
    case ChatMessage::Role::System:
      return "system";
    case ChatMessage::Role::User:
      return "user";
    case ChatMessage::Role::Assistant:
      return "assistant";
  }
  return "user";
}

std::string mime_for(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (ext == ".png") return "image/png";
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  return "application/octet-stream";
}

std::string image_url(const std::string& locator) {
  if (locator.starts_with("http://") || locator.starts_with("https://") ||
      locator.starts_with("data:")) {
    return locator;
  }
  std::ifstream in(locator, std::ios::binary);
  if (!in) throw FileError(locator, "cannot read image");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return "data:" + mime_for(locator) + ";base64," + base64_encode(bytes);
}

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path component of the base URL, no trailing slash
};

SplitUrl split_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw BackendError("endpoint base URL lacks a scheme: " + base_url, std::nullopt, false);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = base_url.substr(0, path_start);
  if (path_start != std::string::npos) out.prefix = base_url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

bool is_retryable_status(int status) {
  return status == 408 || status == 409 || status == 429 || status >= 500;
}

}  // namespace

std::string base64_encode(const std::string& bytes) {
  if (bytes.empty()) return {};
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int written =
      EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                      reinterpret_cast<const unsigned char*>(bytes.data()),
                      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

std::string build_request_body(const ChatRequest& request) {
  json messages = json::array();
  for (std::size_t i = 0; i < request.messages.size();) {
    const ChatMessage& msg = request.messages[i];
    if (msg.kind == ChatMessage::Kind::Text && msg.role != ChatMessage::Role::User) {
      messages.push_back({{"role", role_name(msg.role)}, {"content", msg.content}});
      ++i;
      continue;
    }
    // Run of user parts (text and images) becomes one message.
    json parts = json::array();
    bool has_image = false;
    for (; i < request.messages.size() && request.messages[i].role == ChatMessage::Role::User; ++i) {
      const ChatMessage& part = request.messages[i];
      if (part.kind == ChatMessage::Kind::Image) {
        has_image = true;
        parts.push_back({{"type", "image_url"}, {"image_url", {{"url", image_url(part.content)}}}});
      } else {
        parts.push_back({{"type", "text"}, {"text", part.content}});
      }
    }
    if (parts.empty()) {
      // An image attached to a non-user role is not representable; drop to text.
      messages.push_back({{"role", role_name(msg.role)}, {"content", msg.content}});
      ++i;
    } else if (!has_image && parts.size() == 1) {
      messages.push_back({{"role", "user"}, {"content", parts[0]["text"]}});
    } else {
      messages.push_back({{"role", "user"}, {"content", std::move(parts)}});
    }
  }

  json body = {
      {"model", request.model},
      {"messages", std::move(messages)},
      {"temperature", request.temperature},
      {"top_p", request.top_p},
      {"max_tokens", request.max_tokens},
  };
  if (!request.stop.empty()) body["stop"] = request.stop;
  return body.dump();
}

ChatResponse parse_response_body(const std::string& body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) {
    throw BackendError("endpoint returned a non-JSON body");
  }
  const auto choices = parsed.find("choices");
  if (choices == parsed.end() || !choices->is_array() || choices->empty()) {
    throw BackendError("endpoint response has no choices");
  }
  const json& first = choices->front();
  ChatResponse out;
  if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
    if (auto content = msg->find("content"); content != msg->end() && content->is_string()) {
      out.content = content->get<std::string>();
    }
  }
  if (auto reason = first.find("finish_reason"); reason != first.end() && reason->is_string()) {
    out.finish_reason = reason->get<std::string>();
  }
  return out;
}

HttpChatTransport::HttpChatTransport(EndpointConfig endpoint) : endpoint_(std::move(endpoint)) {
  split_base_url(endpoint_.base_url);  // validate early
}

ChatResponse HttpChatTransport::send(const ChatRequest& request) const {
  const SplitUrl url = split_base_url(endpoint_.base_url);
  // A client per request keeps the transport safe to share across threads.
  httplib::Client client(url.origin);
  const auto timeout_sec = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  const auto timeout_usec =
      std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - timeout_sec);
  client.set_connection_timeout(timeout_sec.count(), timeout_usec.count());
  client.set_read_timeout(timeout_sec.count(), timeout_usec.count());
  client.set_write_timeout(timeout_sec.count(), timeout_usec.count());

  httplib::Headers headers;
  if (!endpoint_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + endpoint_.api_key);
  }
  ChatRequest effective = request;
  if (effective.model.empty()) effective.model = endpoint_.model;

  auto result = client.Post(url.prefix + endpoint_.path, headers, build_request_body(effective),
                            "application/json");
  if (!result) {
    throw BackendError("request to " + endpoint_.base_url + " failed: " +
                       httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    std::ostringstream msg;
    msg << "endpoint returned HTTP " << result->status;
    throw BackendError(msg.str(), result->status, is_retryable_status(result->status));
  }
  return parse_response_body(result->body);
}

}  // namespace nashverify
