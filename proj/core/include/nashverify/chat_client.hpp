#pragma once

// Minimal OpenAI-compatible chat-completions client.

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace nashverify {

struct ChatMessage {
  enum class Role { System, User, Assistant };
  enum class Kind { Text, Image };

  Role role = Role::User;
  Kind kind = Kind::Text;
  std::string content;  // text, or the image locator (file path or URL) for Kind::Image

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 16;
  std::vector<std::string> stop;
};

struct ChatResponse {
  std::string content;
  std::string finish_reason;
};

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000/v1";
  std::string path = "/chat/completions";
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{60'000};
  std::chrono::milliseconds retry_backoff{250};
};

/// Sends one request. Throws BackendError on transport failure or non-2xx
/// status (retryable() distinguishes 408/429/5xx from other client errors).
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual ChatResponse send(const ChatRequest& request) const = 0;
};

class HttpChatTransport final : public ChatTransport {
 public:
  explicit HttpChatTransport(EndpointConfig endpoint);
  ChatResponse send(const ChatRequest& request) const override;

  const EndpointConfig& endpoint() const noexcept { return endpoint_; }

 private:
  EndpointConfig endpoint_;
};

/// JSON request body. Consecutive user text and image messages are merged
/// into one multi-part user message; local image files become base64 data URLs.
std::string build_request_body(const ChatRequest& request);

/// Content and finish reason of the first choice. Throws BackendError on
/// malformed bodies.
ChatResponse parse_response_body(const std::string& body);

std::string base64_encode(const std::string& bytes);

}  // namespace nashverify
