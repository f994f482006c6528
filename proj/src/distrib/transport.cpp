#include "coevo/distrib/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "coevo/errors.hpp"
#include "coevo/log.hpp"
#include "coevo/rng.hpp"

namespace coevo::distrib {

using nlohmann::json;

namespace {

void write_all(int fd, const std::string& bytes) {
  std::size_t off = 0;
  while (off < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

// Waits for readable data; returns false on timeout.
bool wait_readable(int fd, int timeout_ms) {
  pollfd p{fd, POLLIN, 0};
  for (;;) {
    const int r = ::poll(&p, 1, timeout_ms);
    if (r < 0 && errno == EINTR) continue;
    if (r < 0) throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
    return r > 0;
  }
}

// Reads once; returns false when the peer has closed.
bool read_some(int fd, FrameDecoder& decoder) {
  char buf[65536];
  for (;;) {
    const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
    return true;
  }
}

}  // namespace

std::unique_ptr<SocketConnection> SocketConnection::connect(const std::string& host, int port,
                                                            std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    timeval tv{static_cast<time_t>(timeout.count() / 1000),
               static_cast<suseconds_t>((timeout.count() % 1000) * 1000)};
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      ::freeaddrinfo(res);
      return std::make_unique<SocketConnection>(fd);
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  ::freeaddrinfo(res);
  throw ProtocolError("cannot connect to " + host + ":" + service + ": " + last_error);
}

SocketConnection::~SocketConnection() {
  if (fd_ >= 0) ::close(fd_);
}

void SocketConnection::send(const json& message) { write_all(fd_, encode_frame(message)); }

json SocketConnection::receive(std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    if (auto m = decoder_.next()) return *m;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0 || !wait_readable(fd_, static_cast<int>(left.count())))
      throw ProtocolError("timed out waiting for a reply");
    if (!read_some(fd_, decoder_)) throw ProtocolError("connection closed by peer");
  }
}

void InProcessConnection::send(const json& message) {
  if (handler_.closed()) throw ProtocolError("connection closed by peer");
  inbound_.feed(encode_frame(message));
  while (auto m = inbound_.next()) outbound_.feed(encode_frame(handler_.handle(*m)));
}

json InProcessConnection::receive(std::chrono::milliseconds) {
  if (auto m = outbound_.next()) return *m;
  throw ProtocolError(handler_.closed() ? "connection closed by peer" : "no reply pending");
}

QueueServer::QueueServer(CompletionService& service, ServerSettings settings)
    : service_(service), settings_(std::move(settings)) {}

QueueServer::~QueueServer() { stop(); }

void QueueServer::start() {
  if (running_) return;
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(settings_.port);
  if (int rc = ::getaddrinfo(settings_.host.c_str(), service.c_str(), &hints, &res); rc != 0)
    throw ProtocolError("cannot resolve " + settings_.host + ": " + ::gai_strerror(rc));
  int fd = -1;
  std::string last_error = "no addresses";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) break;
    last_error = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw ProtocolError("cannot listen on " + settings_.host + ":" + service + ": " + last_error);
  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = addr.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                     : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  listen_fd_ = fd;
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  log::info("queue server listening on {}:{}", settings_.host, port_);
}

void QueueServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::jthread> clients;
  {
    std::lock_guard lock(clients_mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    clients.swap(clients_);
  }
  clients.clear();  // joins
}

void QueueServer::accept_loop() {
  while (running_) {
    if (!wait_readable(listen_fd_, 100)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(clients_mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    clients_.emplace_back([this, fd] { serve(fd); });
  }
}

void QueueServer::serve(int fd) {
  ++served_;
  MessageHandler handler(service_);
  FrameDecoder decoder;
  const int idle_ms = static_cast<int>(settings_.idle_timeout * 1000.0);
  try {
    while (running_ && !handler.closed()) {
      while (auto m = decoder.next()) {
        write_all(fd, encode_frame(handler.handle(*m)));
        if (handler.closed()) break;
      }
      if (handler.closed()) break;
      if (!wait_readable(fd, idle_ms)) {
        log::info("closing idle connection from '{}'", handler.worker_id());
        break;
      }
      if (!read_some(fd, decoder)) break;
    }
  } catch (const ProtocolError& e) {
    log::warn("connection from '{}' dropped: {}", handler.worker_id(), e.what());
    try {
      write_all(fd, encode_frame(error_message(e.what())));
    } catch (const ProtocolError&) {
    }
  }
  std::lock_guard lock(clients_mutex_);
  std::erase(client_fds_, fd);
  ::close(fd);
}

namespace {

EvaluationResult evaluate_safely(const Evaluator& evaluator, const EvaluationTask& task,
                                 const std::string& worker_id) {
  const auto start = std::chrono::steady_clock::now();
  EvaluationResult r;
  try {
    r = evaluator.evaluate(task);
  } catch (const std::exception& e) {
    r = EvaluationResult{};
    r.status = EvaluationStatus::failed;
    r.error = e.what();
  }
  r.task_id = task.task_id;
  r.worker_id = worker_id;
  r.duration = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

void sleep_unless_stopped(double seconds, const std::atomic<bool>& stop) {
  const auto until = std::chrono::steady_clock::now() + std::chrono::duration<double>(seconds);
  while (!stop && std::chrono::steady_clock::now() < until)
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
}

}  // namespace

int run_worker(const ConnectionFactory& connect, const Evaluator& evaluator,
               const WorkerSettings& settings, const std::atomic<bool>& stop) {
  Rng rng(settings.seed ^ stable_hash(settings.worker_id));
  int returned = 0;
  int reconnects = 0;
  while (!stop) {
    try {
      auto conn = connect();
      const json reply = conn->request(hello_message(settings.worker_id));
      if (reply.value("type", "") != "hello")
        throw ProtocolError("handshake rejected: " + reply.value("reason", reply.dump()));
      reconnects = 0;
      while (!stop) {
        if (settings.max_tasks >= 0 && returned >= settings.max_tasks) return returned;
        const json m = conn->request(pull_message());
        const std::string type = m.value("type", "");
        if (type == "empty") {
          sleep_unless_stopped(settings.empty_backoff * (0.5 + rng.uniform01()), stop);
          continue;
        }
        if (type != "task") throw ProtocolError("unexpected reply '" + type + "' to pull");
        EvaluationTask task = task_from_message(m);
        EvaluationResult r = evaluate_safely(evaluator, task, settings.worker_id);
        const json ack = conn->request(result_message(r));
        if (ack.value("type", "") != "ack") throw ProtocolError("result was not acknowledged");
        ++returned;
      }
    } catch (const ProtocolError& e) {
      if (stop) break;
      if (settings.max_reconnects >= 0 && reconnects >= settings.max_reconnects) {
        log::error("worker '{}' giving up: {}", settings.worker_id, e.what());
        break;
      }
      ++reconnects;
      log::info("worker '{}' reconnecting: {}", settings.worker_id, e.what());
      sleep_unless_stopped(settings.reconnect_backoff * (0.5 + rng.uniform01()), stop);
    }
  }
  return returned;
}

}  // namespace coevo::distrib
