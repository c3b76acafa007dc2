#include <doctest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <memory>
#include <thread>

#include "raar/chat_client.hpp"
#include "raar/errors.hpp"
#include "test_support.hpp"

using namespace raar;

namespace {

ModelEndpoint test_endpoint(int max_retries = 3) {
  ModelEndpoint endpoint;
  endpoint.base_url = "http://mock.local";
  endpoint.model_name = "scripted-model";
  endpoint.max_retries = max_retries;
  return endpoint;
}

std::unique_ptr<ChatClient> scripted_client(std::shared_ptr<ScriptedBackend> backend,
                                            int max_retries = 3) {
  auto client = std::make_unique<ChatClient>(backend, test_endpoint(max_retries),
                                             RetryPolicy{}, 4, 1);
  client->set_sleeper([](std::chrono::milliseconds) {});
  return client;
}

std::vector<ChatMessage> user_message(const std::string& content) {
  return {ChatMessage{Role::kUser, content}};
}

}  // namespace

TEST_CASE("scripted queue passthrough: one call, one attempt") {
  auto backend = ScriptedBackend::queue({{"X", false, ""}});
  auto client = scripted_client(backend);
  CallRecord record;
  std::string text = client->complete(user_message("hello"), {}, CallTag{}, &record);
  CHECK(text == "X");
  CHECK(record.attempts == 1);
  CHECK(record.ok);
  CHECK(backend->requests().size() == 1);
}

TEST_CASE("queue consumes responses in FIFO order") {
  auto backend = ScriptedBackend::queue({{"a", false, ""}, {"b", false, ""}});
  auto client = scripted_client(backend);
  CHECK(client->complete(user_message("1"), {}, CallTag{}) == "a");
  CHECK(client->complete(user_message("2"), {}, CallTag{}) == "b");
}

TEST_CASE("retry contract: fail twice then succeed with max_retries=3") {
  auto backend = ScriptedBackend::queue(
      {{"", true, "down"}, {"", true, "down"}, {"ok", false, ""}});
  auto client = scripted_client(backend, 3);
  CallRecord record;
  std::string text = client->complete(user_message("q"), {}, CallTag{}, &record);
  CHECK(text == "ok");
  CHECK(record.attempts == 3);
  CHECK(record.ok);
}

TEST_CASE("exhaustion: always failing with max_retries=1 gives 2 attempts") {
  auto backend = ScriptedBackend::queue({{"", true, "down"}, {"", true, "down"}});
  auto client = scripted_client(backend, 1);
  CallRecord record;
  try {
    client->complete(user_message("q"), {}, CallTag{}, &record);
    FAIL("expected endpoint-unreachable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEndpointUnreachable);
  }
  CHECK(record.attempts == 2);
  CHECK_FALSE(record.ok);
  CHECK(record.error == "down");
}

TEST_CASE("attempt count never exceeds max_retries + 1") {
  for (int max_retries : {0, 1, 2, 4}) {
    std::vector<ScriptedBackend::Entry> entries(16, {"", true, "down"});
    auto backend = ScriptedBackend::queue(entries);
    auto client = scripted_client(backend, max_retries);
    CallRecord record;
    CHECK_THROWS_AS(client->complete(user_message("q"), {}, CallTag{}, &record), Error);
    CHECK(record.attempts == max_retries + 1);
  }
}

TEST_CASE("keyed scripts route on (agent, round, strategy)") {
  auto backend = ScriptedBackend::keyed({
      {"sentiment|0|init", {"sentiment says fake", false, ""}},
      {"summary|1|rectification", {"summary output", false, ""}},
  });
  auto client = scripted_client(backend);
  CHECK(client->complete(user_message("q"), {},
                         CallTag{"sentiment", 0, "init", "item"}) ==
        "sentiment says fake");
  CHECK(client->complete(user_message("q"), {},
                         CallTag{"summary", 1, "rectification", "item"}) ==
        "summary output");

  SUBCASE("missing key names the key") {
    try {
      client->complete(user_message("q"), {},
                       CallTag{"summary", 2, "rectification", "i"});
      FAIL("expected exhausted-script error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kExhaustedScript);
      CHECK(std::string(e.what()).find("summary|2|rectification") != std::string::npos);
    }
  }

  SUBCASE("item-specific keys shadow generic ones") {
    auto specific = ScriptedBackend::keyed({
        {"verify|0|", {"False", false, ""}},
        {"verify|0||item_9", {"True", false, ""}},
    });
    auto c2 = scripted_client(specific);
    CHECK(c2->complete(user_message("q"), {}, CallTag{"verify", 0, "", "item_9"}) ==
          "True");
    CHECK(c2->complete(user_message("q"), {}, CallTag{"verify", 0, "", "other"}) ==
          "False");
  }
}

TEST_CASE("queue exhaustion is not retried and is reported as such") {
  auto backend = ScriptedBackend::queue({});
  auto client = scripted_client(backend, 5);
  CallRecord record;
  try {
    client->complete(user_message("q"), {}, CallTag{}, &record);
    FAIL("expected exhausted-script error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kExhaustedScript);
  }
  CHECK(record.attempts == 1);
}

TEST_CASE("empty scripted completion maps to empty-response") {
  auto backend = ScriptedBackend::queue({{"", false, ""}});
  auto client = scripted_client(backend, 0);
  try {
    client->complete(user_message("q"), {}, CallTag{});
    FAIL("expected empty-response error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyResponse);
  }
}

TEST_CASE("message preconditions") {
  auto backend = ScriptedBackend::queue({{"x", false, ""}});
  auto client = scripted_client(backend);
  CHECK_THROWS_AS(client->complete({}, {}, CallTag{}), Error);
  CHECK_THROWS_AS(
      client->complete({ChatMessage{Role::kAssistant, "hi"}}, {}, CallTag{}), Error);
  CHECK_THROWS_AS(client->complete({ChatMessage{Role::kUser, ""}}, {}, CallTag{}),
                  Error);
}

TEST_CASE("backoff is exponential with a cap and bounded jitter") {
  auto backend = ScriptedBackend::queue({{"x", false, ""}});
  ChatClient client(backend, test_endpoint(), RetryPolicy{}, 1, 42);
  // jitter 0.5 means no deviation from the nominal delay
  CHECK(client.backoff_delay(1, 0.5).count() == 1000);
  CHECK(client.backoff_delay(2, 0.5).count() == 2000);
  CHECK(client.backoff_delay(3, 0.5).count() == 4000);
  CHECK(client.backoff_delay(10, 0.5).count() == 30000);  // capped
  // jitter extremes stay within +/- 20%
  CHECK(client.backoff_delay(1, 0.0).count() == 800);
  CHECK(client.backoff_delay(1, 1.0).count() <= 1200);
  CHECK(client.backoff_delay(10, 1.0).count() <= 30000);
}

TEST_CASE("sleeper hook observes retries") {
  auto backend = ScriptedBackend::queue(
      {{"", true, "down"}, {"", true, "down"}, {"ok", false, ""}});
  ChatClient client(backend, test_endpoint(3), RetryPolicy{}, 1, 7);
  std::vector<int64_t> delays;
  client.set_sleeper([&](std::chrono::milliseconds d) { delays.push_back(d.count()); });
  client.complete(user_message("q"), {}, CallTag{});
  REQUIRE(delays.size() == 2);
  CHECK(delays[0] >= 800);
  CHECK(delays[0] <= 1200);
  CHECK(delays[1] >= 1600);
  CHECK(delays[1] <= 2400);
}

TEST_CASE("secrets never appear in serialized call records") {
  ::setenv("RAAR_TEST_SECRET", "super-secret-token-123", 1);
  ModelEndpoint endpoint = test_endpoint();
  endpoint.auth_secret_ref = "RAAR_TEST_SECRET";
  auto backend = ScriptedBackend::queue({{"answer", false, ""}});
  ChatClient client(backend, endpoint, RetryPolicy{}, 1, 0);
  client.set_sleeper([](std::chrono::milliseconds) {});
  CallRecord record;
  client.complete(user_message("q"), {}, CallTag{"summary", 0, "init", "i"}, &record);
  std::string serialized = to_json(record).dump();
  CHECK(serialized.find("super-secret-token-123") == std::string::npos);
  CHECK(serialized.find("RAAR_TEST_SECRET") == std::string::npos);
}

TEST_CASE("call records round-trip and drive replay") {
  auto backend = ScriptedBackend::queue({{"first", false, ""}, {"second", false, ""}});
  auto client = scripted_client(backend);
  std::vector<CallRecord> records;
  client->set_record_sink([&](const CallRecord& r) { records.push_back(r); });
  client->complete(user_message("a"), {}, CallTag{"summary", 0, "init", "i1"});
  client->complete(user_message("b"), {}, CallTag{"summary", 1, "init", "i1"});
  REQUIRE(records.size() == 2);

  json j = to_json(records[0]);
  CallRecord back = call_record_from_json(j);
  CHECK(to_json(back) == j);

  auto replayed = ScriptedBackend::replay(records);
  auto replay_client = scripted_client(replayed);
  CHECK(replay_client->complete(user_message("a"), {}, CallTag{}) == "first");
  CHECK(replay_client->complete(user_message("b"), {}, CallTag{}) == "second");
}

TEST_CASE("deterministic scripted clock zeroes timestamps") {
  auto backend = ScriptedBackend::queue({{"x", false, ""}});
  auto client = scripted_client(backend);
  CallRecord record;
  client->complete(user_message("q"), {}, CallTag{}, &record);
  CHECK(record.timestamp == "1970-01-01T00:00:00Z");
  CHECK(record.latency.count() == 0);
}

TEST_CASE("parallel keyed calls respect the parallelism gate") {
  std::map<std::string, ScriptedBackend::Entry> entries;
  for (int i = 0; i < 32; ++i) {
    entries["summary|" + std::to_string(i) + "|init"] = {"r", false, ""};
  }
  auto backend = ScriptedBackend::keyed(entries);
  ChatClient client(backend, test_endpoint(), RetryPolicy{}, 4, 0);
  client.set_sleeper([](std::chrono::milliseconds) {});
  std::atomic<int> done{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 32; ++i) {
    threads.emplace_back([&, i]() {
      client.complete(user_message("q"), {}, CallTag{"summary", i, "init", "x"});
      done.fetch_add(1);
    });
  }
  for (auto& t : threads) t.join();
  CHECK(done.load() == 32);
}

TEST_CASE("http backend speaks the chat-completion wire protocol") {
  httplib::Server server;
  std::string seen_auth, seen_body;
  server.Post("/v1/chat/completions",
              [&](const httplib::Request& req, httplib::Response& res) {
                seen_auth = req.get_header_value("Authorization");
                seen_body = req.body;
                json reply = {
                    {"choices",
                     json::array({json{{"message", json{{"role", "assistant"},
                                                        {"content", "pong"}}}}})}};
                res.set_content(reply.dump(), "application/json");
              });
  server.Post("/err", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
    res.set_content("overloaded", "text/plain");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread server_thread([&]() { server.listen_after_bind(); });
  server.wait_until_ready();

  ::setenv("RAAR_HTTP_TEST_TOKEN", "tok-abc", 1);
  ModelEndpoint endpoint;
  endpoint.base_url = "http://127.0.0.1:" + std::to_string(port);
  endpoint.model_name = "my-model";
  endpoint.auth_secret_ref = "RAAR_HTTP_TEST_TOKEN";
  endpoint.max_retries = 0;
  auto backend = std::make_shared<HttpBackend>(endpoint);
  ChatClient client(backend, endpoint, RetryPolicy{}, 1, 0);

  GenerationParams params;
  params.temperature = 0.25;
  params.max_output_tokens = 128;
  std::string reply = client.complete(
      {ChatMessage{Role::kSystem, "be terse"}, ChatMessage{Role::kUser, "ping"}},
      params, CallTag{"summary", 0, "init", "w"});
  CHECK(reply == "pong");
  CHECK(seen_auth == "Bearer tok-abc");
  json body = json::parse(seen_body);
  CHECK(body["model"] == "my-model");
  CHECK(body["temperature"] == doctest::Approx(0.25));
  CHECK(body["max_tokens"] == 128);
  REQUIRE(body["messages"].size() == 2);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][1]["content"] == "ping");

  {
    ModelEndpoint err_endpoint = endpoint;
    err_endpoint.base_url = "http://127.0.0.1:" + std::to_string(port) + "/err";
    err_endpoint.auth_secret_ref.clear();
    auto err_backend = std::make_shared<HttpBackend>(err_endpoint);
    ChatClient err_client(err_backend, err_endpoint, RetryPolicy{}, 1, 0);
    err_client.set_sleeper([](std::chrono::milliseconds) {});
    try {
      err_client.complete(user_message("x"), {}, CallTag{});
      FAIL("expected remote-error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kRemoteError);
      CHECK(std::string(e.what()).find("503") != std::string::npos);
    }
  }

  server.stop();
  server_thread.join();
}

TEST_CASE("scripts load from files in both modes") {
  testsupport::TempDir dir("script");
  SUBCASE("queue mode") {
    write_text_file(dir.path() / "queue.json",
                    R"({"mode":"queue","entries":["a",{"text":"b"},{"fail":"boom"}]})");
    auto backend = ScriptedBackend::from_file(dir.path() / "queue.json");
    CHECK_FALSE(backend->supports_concurrent_calls());
    CHECK(backend->remaining() == 3);
  }
  SUBCASE("keyed mode") {
    write_text_file(dir.path() / "keyed.json",
                    R"({"mode":"keyed","entries":{"summary|0|init":"cot"}})");
    auto backend = ScriptedBackend::from_file(dir.path() / "keyed.json");
    CHECK(backend->supports_concurrent_calls());
  }
  SUBCASE("bad mode") {
    write_text_file(dir.path() / "bad.json", R"({"mode":"x","entries":[]})");
    CHECK_THROWS_AS(ScriptedBackend::from_file(dir.path() / "bad.json"), Error);
  }
}
