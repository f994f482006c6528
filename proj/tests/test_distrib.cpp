#include <atomic>
#include <future>
#include <thread>

#include "coevo/distrib/completion_service.hpp"
#include "coevo/distrib/protocol.hpp"
#include "coevo/distrib/remote_backend.hpp"
#include "coevo/distrib/transport.hpp"
#include "coevo/errors.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "simulation.hpp"

using namespace coevo;
using namespace coevo::distrib;
using nlohmann::json;
using namespace std::chrono_literals;

namespace {

EvaluationTask task(const std::string& id) { return {id, "{}", json::object(), 0.0}; }

EvaluationResult result(const std::string& id, double primary = 0.5, const std::string& worker = "w") {
  EvaluationResult r;
  r.task_id = id;
  r.primary = primary;
  r.worker_id = worker;
  return r;
}

struct FakeClock {
  double now = 0.0;
  CompletionService::Clock fn() {
    return [this] { return now; };
  }
};

}  // namespace

TEST_CASE("submit") {
  CompletionService q;
  for (int i = 0; i < 100; ++i) CHECK(q.submit(task("t" + std::to_string(i))));
  CHECK(q.pending_count() == 100);
  CHECK(q.in_flight_count() == 0);
  CHECK_FALSE(q.submit(task("t7")));
  CHECK(q.pending_count() == 100);
}

TEST_CASE("worker_pull") {
  SUBCASE("empty queue gives nothing") {
    CompletionService q;
    CHECK_FALSE(q.worker_pull("w").has_value());
  }
  SUBCASE("pulls are FIFO and count attempts") {
    CompletionService q;
    q.submit(task("a"));
    q.submit(task("b"));
    CHECK(q.worker_pull("w")->task_id == "a");
    CHECK(q.snapshot().attempts.at("a") == 1);
    CHECK(q.in_flight_count() == 1);
    CHECK(q.pending_count() == 1);
  }
  SUBCASE("two workers race for one task") {
    for (int i = 0; i < 1000; ++i) {
      CompletionService q;
      q.submit(task("only"));
      std::atomic<int> got{0};
      std::jthread a([&] { got += q.worker_pull("a").has_value(); });
      std::jthread b([&] { got += q.worker_pull("b").has_value(); });
      a.join();
      b.join();
      REQUIRE(got == 1);
    }
  }
}

TEST_CASE("worker_return") {
  FakeClock clock;
  CompletionService q({10.0, 2}, clock.fn());
  q.submit(task("a"));
  q.worker_pull("w1");
  SUBCASE("normal return completes the task") {
    CHECK(q.worker_return(result("a")));
    CHECK(q.done_count() == 1);
    CHECK(q.in_flight_count() == 0);
    CHECK(q.workers().at("w").tasks_completed == 1);
  }
  SUBCASE("a duplicate return is discarded") {
    CHECK(q.worker_return(result("a")));
    CHECK_FALSE(q.worker_return(result("a")));
    CHECK(q.done_count() == 1);
    CHECK(q.discarded_returns() == 1);
  }
  SUBCASE("an unknown task is discarded") {
    CHECK_FALSE(q.worker_return(result("zzz")));
    CHECK(q.done_count() == 0);
  }
  SUBCASE("first completion wins after a requeue") {
    clock.now = 11.0;
    CHECK(q.reap_timeouts() == 1);
    CHECK(q.worker_pull("w2")->task_id == "a");
    CHECK(q.worker_return(result("a", 0.2, "w2")));
    CHECK_FALSE(q.worker_return(result("a", 0.9, "w1")));
    const auto r = q.try_next_result();
    REQUIRE(r);
    CHECK(r->primary == 0.2);
    CHECK_FALSE(q.try_next_result());
  }
  SUBCASE("a late return before the retry completes still wins") {
    clock.now = 11.0;
    q.reap_timeouts();
    CHECK(q.pending_count() == 1);
    CHECK(q.worker_return(result("a", 0.9, "w1")));
    CHECK(q.pending_count() == 0);
    CHECK_FALSE(q.worker_pull("w2"));
    CHECK(q.try_next_result()->primary == 0.9);
  }
}

TEST_CASE("next_result") {
  SUBCASE("results arrive in completion order") {
    CompletionService q;
    q.submit(task("A"));
    q.submit(task("B"));
    q.worker_pull("w1");
    q.worker_pull("w2");
    q.worker_return(result("B"));
    q.worker_return(result("A"));
    CHECK(q.try_next_result()->task_id == "B");
    CHECK(q.try_next_result()->task_id == "A");
  }
  SUBCASE("deadline passes without a result") {
    CompletionService q;
    const auto start = std::chrono::steady_clock::now();
    CHECK_FALSE(q.next_result(start + 50ms).has_value());
    CHECK(std::chrono::steady_clock::now() - start >= 50ms);
  }
  SUBCASE("a blocked consumer wakes on return") {
    CompletionService q;
    q.submit(task("x"));
    std::jthread worker([&] {
      auto t = q.worker_pull("w");
      std::this_thread::sleep_for(20ms);
      q.worker_return(result(t->task_id));
    });
    const auto r = q.next_result(std::chrono::steady_clock::now() + 5s);
    REQUIRE(r);
    CHECK(r->task_id == "x");
  }
  SUBCASE("N tasks with healthy workers give N results") {
    CompletionService q;
    for (int i = 0; i < 200; ++i) q.submit(task(std::to_string(i)));
    std::vector<std::jthread> workers;
    for (int w = 0; w < 4; ++w)
      workers.emplace_back([&, w] {
        while (auto t = q.worker_pull("w" + std::to_string(w))) q.worker_return(result(t->task_id));
      });
    std::set<std::string> seen;
    while (seen.size() < 200) {
      auto r = q.next_result(std::chrono::steady_clock::now() + 5s);
      REQUIRE(r);
      CHECK(seen.insert(r->task_id).second);
    }
    CHECK_FALSE(q.try_next_result());
  }
}

TEST_CASE("reap_timeouts") {
  FakeClock clock;
  CompletionService q({10.0, 2}, clock.fn());
  CHECK(q.reap_timeouts() == 0);
  q.submit(task("a"));
  q.submit(task("b"));
  q.worker_pull("dead");
  clock.now = 5.0;
  CHECK(q.reap_timeouts() == 0);
  clock.now = 10.5;
  CHECK(q.reap_timeouts() == 1);
  // Requeued at the head.
  CHECK(q.snapshot().pending == std::vector<std::string>{"a", "b"});

  SUBCASE("a dead worker's task is re-executed") {
    q.worker_pull("live");
    CHECK(q.worker_return(result("a", 0.5, "live")));
    CHECK(q.try_next_result()->ok());
  }
  SUBCASE("exhausted attempts complete as failed") {
    for (int attempt = 2; attempt <= 3; ++attempt) {
      CHECK(q.worker_pull("dead")->task_id == "a");
      clock.now += 11.0;
      q.reap_timeouts();
    }
    CHECK(q.snapshot().attempts.at("a") == 3);
    const auto r = q.try_next_result();
    REQUIRE(r);
    CHECK(r->task_id == "a");
    CHECK_FALSE(r->ok());
    CHECK(q.pending_count() == 1);  // b is unaffected
  }
}

TEST_CASE("fault-injection simulations conserve tasks and deliver once") {
  Rng rng(42);
  for (int run = 0; run < 20; ++run) {
    testing::SimulationConfig cfg;
    cfg.tasks = 10 + static_cast<int>(rng.index(191));
    cfg.workers = 1 + static_cast<int>(rng.index(16));
    cfg.crash_rate = rng.uniform(0.0, 0.3);
    cfg.seed = rng.next();
    const auto out = testing::simulate_completion_service(cfg);
    CHECK_MESSAGE(out.violations.empty(), (out.violations.empty() ? "" : out.violations.front()));
    CHECK(out.delivered == cfg.tasks);
  }
}

TEST_CASE("framing") {
  SUBCASE("golden bytes") {
    const std::string frame = encode_frame(hello_message("w1"));
    const std::string payload = R"({"proto":1,"type":"hello","worker_id":"w1"})";
    REQUIRE(frame.size() == 4 + payload.size());
    CHECK(frame.substr(0, 4) == std::string("\x00\x00\x00\x2b", 4));
    CHECK(frame.substr(4) == payload);
  }
  SUBCASE("byte-at-a-time decoding") {
    std::string stream = encode_frame(pull_message()) + encode_frame(empty_message()) +
                         encode_frame(ack_message("t", true));
    FrameDecoder d;
    std::vector<json> got;
    for (char c : stream) {
      d.feed(std::string_view(&c, 1));
      while (auto m = d.next()) got.push_back(*m);
    }
    REQUIRE(got.size() == 3);
    CHECK(got[0]["type"] == "pull");
    CHECK(got[1]["type"] == "empty");
    CHECK(got[2] == json{{"type", "ack"}, {"task_id", "t"}, {"accepted", true}});
    CHECK(d.buffered() == 0);
  }
  SUBCASE("malformed frames") {
    FrameDecoder oversize;
    oversize.feed(std::string("\xff\xff\xff\xff", 4));
    CHECK_THROWS_AS(oversize.next(), ProtocolError);
    FrameDecoder bad_json;
    bad_json.feed(std::string("\x00\x00\x00\x02{]", 6));
    CHECK_THROWS_AS(bad_json.next(), ProtocolError);
    FrameDecoder no_type;
    no_type.feed(encode_frame(json{{"kind", "pull"}}));
    CHECK_THROWS_AS(no_type.next(), ProtocolError);
    FrameDecoder partial;
    partial.feed(std::string("\x00\x00", 2));
    CHECK_FALSE(partial.next());
  }
  SUBCASE("task and result round trip") {
    EvaluationTask t{"t1", R"({"layers":[]})", json{{"epochs", 3}}, 0.0};
    const auto t2 = task_from_message(task_message(t));
    CHECK(t2.task_id == t.task_id);
    CHECK(t2.network_json == t.network_json);
    CHECK(t2.train_config == t.train_config);
    EvaluationResult r = result("t1", 0.75, "w9");
    r.raw_secondary = 1234;
    r.duration = 1.5;
    const auto r2 = result_from_message(result_message(r));
    CHECK(r2.primary == 0.75);
    CHECK(r2.raw_secondary == 1234);
    CHECK(r2.worker_id == "w9");
    CHECK(r2.duration == 1.5);
    CHECK(r2.ok());
    auto bad = result_message(r);
    bad["status"] = "maybe";
    CHECK_THROWS_AS(result_from_message(bad), ProtocolError);
    bad = result_message(r);
    bad["primary"] = "high";
    CHECK_THROWS_AS(result_from_message(bad), ProtocolError);
  }
}

TEST_CASE("message handler transcript") {
  CompletionService q;
  q.submit({"t1", "net", json{{"epochs", 3}}, 0.0});
  MessageHandler h(q);
  CHECK(h.handle(hello_message("w1")) == json{{"type", "hello"}, {"proto", 1}, {"worker_id", "w1"}});
  CHECK(h.handle(pull_message()) ==
        json{{"type", "task"}, {"task_id", "t1"}, {"network_json", "net"}, {"train_config", {{"epochs", 3}}}});
  CHECK(h.handle(pull_message()) == json{{"type", "empty"}});
  auto r = result("t1", 0.5, "w1");
  CHECK(h.handle(result_message(r)) == json{{"type", "ack"}, {"task_id", "t1"}, {"accepted", true}});
  CHECK(h.handle(result_message(r)) == json{{"type", "ack"}, {"task_id", "t1"}, {"accepted", false}});
  CHECK_FALSE(h.closed());
}

TEST_CASE("message handler rejects protocol violations") {
  CompletionService q;
  SUBCASE("pull before hello") {
    MessageHandler h(q);
    CHECK(h.handle(pull_message())["type"] == "error");
    CHECK(h.closed());
    CHECK(h.handle(hello_message("w"))["type"] == "error");
  }
  SUBCASE("wrong protocol version") {
    MessageHandler h(q);
    CHECK(h.handle(json{{"type", "hello"}, {"proto", 2}, {"worker_id", "w"}})["type"] == "error");
  }
  SUBCASE("empty worker id") {
    MessageHandler h(q);
    CHECK(h.handle(hello_message(""))["type"] == "error");
  }
  SUBCASE("unknown type") {
    MessageHandler h(q);
    h.handle(hello_message("w"));
    CHECK(h.handle(json{{"type", "gossip"}})["type"] == "error");
  }
  SUBCASE("malformed result") {
    MessageHandler h(q);
    h.handle(hello_message("w"));
    CHECK(h.handle(json{{"type", "result"}, {"task_id", "x"}})["type"] == "error");
  }
}

TEST_CASE("in-process worker drains the queue") {
  CompletionService q;
  const auto fixtures = testing::parameter_fixtures();
  for (std::size_t i = 0; i < fixtures.size(); ++i)
    q.submit({"t" + std::to_string(i), serialize_network(fixtures[i].network), json::object(), 0.0});
  SurrogateEvaluator ev;
  std::atomic<bool> stop{false};
  WorkerSettings ws;
  ws.worker_id = "inproc";
  ws.max_tasks = static_cast<int>(fixtures.size());
  const int n = run_worker([&] { return std::make_unique<InProcessConnection>(q); }, ev, ws, stop);
  CHECK(n == static_cast<int>(fixtures.size()));
  std::map<std::string, double> secondary;
  while (auto r = q.try_next_result()) secondary[r->task_id] = r->raw_secondary;
  REQUIRE(secondary.size() == fixtures.size());
  for (std::size_t i = 0; i < fixtures.size(); ++i)
    CHECK(secondary.at("t" + std::to_string(i)) == static_cast<double>(fixtures[i].expected));
}

TEST_CASE("remote backend over TCP") {
  RemoteSettings settings;
  settings.queue.task_timeout = 1.0;
  settings.unreachable_timeout = 10.0;
  RemoteBackend backend(settings);
  REQUIRE(backend.port() > 0);

  const auto fixtures = testing::parameter_fixtures();
  std::vector<EvaluationTask> tasks;
  for (int i = 0; i < 20; ++i)
    tasks.push_back({"n" + std::to_string(i), serialize_network(fixtures[static_cast<std::size_t>(i) % fixtures.size()].network),
                     json::object(), 0.0});

  SurrogateEvaluator ev;
  std::atomic<bool> stop{false};
  auto connect = [&] { return SocketConnection::connect("127.0.0.1", backend.port(), 2s); };

  SUBCASE("two workers, every task returned once") {
    std::vector<std::jthread> workers;
    for (int w = 0; w < 2; ++w)
      workers.emplace_back([&, w] {
        WorkerSettings ws;
        ws.worker_id = "tcp" + std::to_string(w);
        ws.empty_backoff = 0.01;
        run_worker(connect, ev, ws, stop);
      });
    const auto results = backend.evaluate_batch(tasks);
    stop = true;
    REQUIRE(results.size() == 20);
    std::set<std::string> ids;
    for (const auto& r : results) {
      CHECK(r.ok());
      ids.insert(r.task_id);
    }
    CHECK(ids.size() == 20);
  }
  SUBCASE("a worker that dies holding a task is covered by requeue") {
    auto batch = std::async(std::launch::async, [&] { return backend.evaluate_batch(tasks); });
    std::string held;
    {
      auto conn = connect();
      CHECK(conn->request(hello_message("doomed"))["type"] == "hello");
      for (int i = 0; i < 200 && held.empty(); ++i) {
        const auto m = conn->request(pull_message());
        if (m["type"] == "task") held = m["task_id"];
        else std::this_thread::sleep_for(10ms);
      }
    }  // connection dropped with the task in flight
    REQUIRE_FALSE(held.empty());
    std::jthread healthy([&] {
      WorkerSettings ws;
      ws.worker_id = "healthy";
      ws.empty_backoff = 0.05;
      run_worker(connect, ev, ws, stop);
    });
    const auto results = batch.get();
    stop = true;
    int ok = 0;
    for (const auto& r : results) ok += r.ok();
    CHECK(ok == 20);
    CHECK(backend.service().snapshot().attempts.at(held) == 2);
  }
}

TEST_CASE("remote backend without workers gives up") {
  RemoteSettings settings;
  settings.unreachable_timeout = 0.3;
  RemoteBackend backend(settings);
  CHECK_THROWS_AS(backend.evaluate_batch({task("lonely")}), EvaluatorUnavailable);
}

TEST_CASE("worker gives up when the server is unreachable") {
  SurrogateEvaluator ev;
  std::atomic<bool> stop{false};
  WorkerSettings ws;
  ws.max_reconnects = 2;
  ws.reconnect_backoff = 0.01;
  int attempts = 0;
  const int n = run_worker(
      [&]() -> std::unique_ptr<Connection> {
        ++attempts;
        throw ProtocolError("refused");
      },
      ev, ws, stop);
  CHECK(n == 0);
  CHECK(attempts == 3);
}
