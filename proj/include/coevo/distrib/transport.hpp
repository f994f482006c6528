#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "coevo/distrib/protocol.hpp"

namespace coevo::distrib {

// Client end of a message stream.
class Connection {
 public:
  virtual ~Connection() = default;
  virtual void send(const nlohmann::json& message) = 0;
  // Throws ProtocolError when the peer closes or the timeout elapses.
  virtual nlohmann::json receive(std::chrono::milliseconds timeout) = 0;

  nlohmann::json request(const nlohmann::json& message,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    send(message);
    return receive(timeout);
  }
};

// Stream socket connection speaking the framed protocol.
class SocketConnection : public Connection {
 public:
  // Throws ProtocolError if the connection cannot be established.
  static std::unique_ptr<SocketConnection> connect(const std::string& host, int port,
                                                   std::chrono::milliseconds timeout);
  explicit SocketConnection(int fd) : fd_(fd) {}
  ~SocketConnection() override;
  SocketConnection(const SocketConnection&) = delete;
  SocketConnection& operator=(const SocketConnection&) = delete;

  void send(const nlohmann::json& message) override;
  nlohmann::json receive(std::chrono::milliseconds timeout) override;

 private:
  int fd_;
  FrameDecoder decoder_;
};

// Same message contract without sockets: every message still round-trips
// through the frame encoder and decoder.
class InProcessConnection : public Connection {
 public:
  explicit InProcessConnection(CompletionService& service) : handler_(service) {}
  void send(const nlohmann::json& message) override;
  nlohmann::json receive(std::chrono::milliseconds timeout) override;

 private:
  MessageHandler handler_;
  FrameDecoder inbound_;
  FrameDecoder outbound_;
};

struct ServerSettings {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  double idle_timeout = 300.0;  // seconds without a message before closing
};

// TCP front end for a completion service, one thread per connection.
class QueueServer {
 public:
  QueueServer(CompletionService& service, ServerSettings settings);
  ~QueueServer();
  QueueServer(const QueueServer&) = delete;
  QueueServer& operator=(const QueueServer&) = delete;

  void start();  // throws ProtocolError if the address cannot be bound
  void stop();
  int port() const { return port_; }
  const std::string& host() const { return settings_.host; }
  std::size_t connections_served() const { return served_; }

 private:
  void accept_loop();
  void serve(int fd);

  CompletionService& service_;
  ServerSettings settings_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> running_{false};
  std::atomic<std::size_t> served_{0};
  std::thread acceptor_;
  std::mutex clients_mutex_;
  std::vector<std::jthread> clients_;
  std::vector<int> client_fds_;
};

struct WorkerSettings {
  std::string worker_id = "worker";
  double empty_backoff = 0.05;      // seconds, base delay after an empty reply
  double reconnect_backoff = 0.2;   // seconds between connection attempts
  int max_tasks = -1;               // stop after this many results; -1 = unbounded
  int max_reconnects = -1;          // -1 = retry forever
  std::uint64_t seed = 0;           // jitter
};

using ConnectionFactory = std::function<std::unique_ptr<Connection>()>;

// Loops hello -> pull -> (task | empty) -> evaluate -> result until `stop`
// is set, max_tasks is reached or reconnects run out. Returns the number of
// results the server accepted or acknowledged.
int run_worker(const ConnectionFactory& connect, const Evaluator& evaluator,
               const WorkerSettings& settings, const std::atomic<bool>& stop);

}  // namespace coevo::distrib
