#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "coevo/distrib/completion_service.hpp"
#include "coevo/evaluation.hpp"
#include "json.hpp"

namespace coevo::distrib {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 64u << 20;

// Frame = 4-byte big-endian payload length + UTF-8 JSON object.
std::string encode_frame(const nlohmann::json& message);

// Incremental decoder for a byte stream of frames.
class FrameDecoder {
 public:
  void feed(std::string_view bytes);
  // Next complete message, or nullopt when more bytes are needed. Throws
  // ProtocolError on oversized frames, bad JSON or a missing "type".
  std::optional<nlohmann::json> next();
  std::size_t buffered() const { return buffer_.size(); }

 private:
  std::string buffer_;
};

nlohmann::json hello_message(const std::string& worker_id);
nlohmann::json pull_message();
nlohmann::json task_message(const EvaluationTask& task);
nlohmann::json empty_message();
nlohmann::json result_message(const EvaluationResult& result);
nlohmann::json ack_message(const std::string& task_id, bool accepted);
nlohmann::json error_message(const std::string& reason);

EvaluationTask task_from_message(const nlohmann::json& message);
EvaluationResult result_from_message(const nlohmann::json& message);

// Server side of one connection: validates each message against the
// protocol state and applies it to the completion service.
class MessageHandler {
 public:
  explicit MessageHandler(CompletionService& service) : service_(service) {}

  // Reply for one inbound message. Protocol violations produce an "error"
  // reply and close() turns true.
  nlohmann::json handle(const nlohmann::json& message);
  bool closed() const { return closed_; }
  const std::string& worker_id() const { return worker_id_; }

 private:
  nlohmann::json fail(const std::string& reason);

  CompletionService& service_;
  std::string worker_id_;
  bool greeted_ = false;
  bool closed_ = false;
};

}  // namespace coevo::distrib
