#include "coevo/distrib/protocol.hpp"

#include "coevo/errors.hpp"
#include "coevo/log.hpp"

namespace coevo::distrib {

using nlohmann::json;

std::string encode_frame(const json& message) {
  const std::string payload = message.dump();
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame exceeds maximum size");
  const auto n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out += payload;
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<json> FrameDecoder::next() {
  if (buffer_.size() < 4) return std::nullopt;
  const auto byte = [&](int i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(buffer_[i])); };
  const std::uint32_t n = (byte(0) << 24) | (byte(1) << 16) | (byte(2) << 8) | byte(3);
  if (n > kMaxFrameBytes) throw ProtocolError("frame length " + std::to_string(n) + " exceeds maximum");
  if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
  std::string payload = buffer_.substr(4, n);
  buffer_.erase(0, 4 + static_cast<std::size_t>(n));
  json message = json::parse(payload, nullptr, false);
  if (message.is_discarded()) throw ProtocolError("frame payload is not valid JSON");
  if (!message.is_object() || !message.contains("type") || !message["type"].is_string())
    throw ProtocolError("message must be an object with a string \"type\"");
  return message;
}

json hello_message(const std::string& worker_id) {
  return {{"type", "hello"}, {"proto", kProtocolVersion}, {"worker_id", worker_id}};
}

json pull_message() { return {{"type", "pull"}}; }

json task_message(const EvaluationTask& task) {
  return {{"type", "task"},
          {"task_id", task.task_id},
          {"network_json", task.network_json},
          {"train_config", task.train_config}};
}

json empty_message() { return {{"type", "empty"}}; }

json result_message(const EvaluationResult& r) {
  json j = {{"type", "result"},       {"task_id", r.task_id},     {"primary", r.primary},
            {"raw_secondary", r.raw_secondary}, {"status", to_string(r.status)},
            {"worker_id", r.worker_id}, {"duration", r.duration}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

json ack_message(const std::string& task_id, bool accepted) {
  return {{"type", "ack"}, {"task_id", task_id}, {"accepted", accepted}};
}

json error_message(const std::string& reason) { return {{"type", "error"}, {"reason", reason}}; }

namespace {

const json& field(const json& m, const char* name, json::value_t kind) {
  auto it = m.find(name);
  if (it == m.end()) throw ProtocolError(std::string("missing field \"") + name + "\"");
  const bool number = kind == json::value_t::number_float;
  if (number ? !it->is_number() : it->type() != kind)
    throw ProtocolError(std::string("field \"") + name + "\" has the wrong type");
  return *it;
}

}  // namespace

EvaluationTask task_from_message(const json& m) {
  if (m.value("type", "") != "task") throw ProtocolError("expected a task message");
  EvaluationTask t;
  t.task_id = field(m, "task_id", json::value_t::string).get<std::string>();
  t.network_json = field(m, "network_json", json::value_t::string).get<std::string>();
  t.train_config = field(m, "train_config", json::value_t::object);
  return t;
}

EvaluationResult result_from_message(const json& m) {
  if (m.value("type", "") != "result") throw ProtocolError("expected a result message");
  EvaluationResult r;
  r.task_id = field(m, "task_id", json::value_t::string).get<std::string>();
  r.primary = field(m, "primary", json::value_t::number_float).get<double>();
  r.raw_secondary = field(m, "raw_secondary", json::value_t::number_float).get<double>();
  const auto status = field(m, "status", json::value_t::string).get<std::string>();
  if (status == "ok") r.status = EvaluationStatus::ok;
  else if (status == "failed") r.status = EvaluationStatus::failed;
  else throw ProtocolError("unknown result status '" + status + "'");
  r.worker_id = field(m, "worker_id", json::value_t::string).get<std::string>();
  r.duration = field(m, "duration", json::value_t::number_float).get<double>();
  if (m.contains("error") && m["error"].is_string()) r.error = m["error"].get<std::string>();
  return r;
}

json MessageHandler::fail(const std::string& reason) {
  closed_ = true;
  log::warn("protocol error from '{}': {}", worker_id_.empty() ? "?" : worker_id_, reason);
  return error_message(reason);
}

json MessageHandler::handle(const json& message) {
  if (closed_) return error_message("connection closed");
  const std::string type = message.value("type", "");
  try {
    if (type == "hello") {
      if (greeted_) return fail("duplicate hello");
      if (!message.contains("proto") || !message["proto"].is_number_integer() ||
          message["proto"].get<int>() != kProtocolVersion)
        return fail("unsupported protocol version");
      worker_id_ = field(message, "worker_id", json::value_t::string).get<std::string>();
      if (worker_id_.empty()) return fail("empty worker_id");
      greeted_ = true;
      log::info("worker '{}' connected", worker_id_);
      return {{"type", "hello"}, {"proto", kProtocolVersion}, {"worker_id", worker_id_}};
    }
    if (!greeted_) return fail("expected hello first");
    if (type == "pull") {
      service_.reap_timeouts();
      auto task = service_.worker_pull(worker_id_);
      return task ? task_message(*task) : empty_message();
    }
    if (type == "result") {
      EvaluationResult r = result_from_message(message);
      if (r.worker_id.empty()) r.worker_id = worker_id_;
      const std::string id = r.task_id;
      return ack_message(id, service_.worker_return(std::move(r)));
    }
    return fail("unexpected message type '" + type + "'");
  } catch (const ProtocolError& e) {
    return fail(e.what());
  }
}

}  // namespace coevo::distrib
