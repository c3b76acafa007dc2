#include "raar/chat_client.hpp"

#include <cstdio>
#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "raar/errors.hpp"
#include "raar/rng.hpp"

namespace raar {

const char* to_string(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "user") return Role::kUser;
  if (s == "assistant") return Role::kAssistant;
  fail(ErrorCode::kSchemaError, "unknown role: " + std::string(s));
}

std::string CallTag::key() const {
  return agent + "|" + std::to_string(round) + "|" + strategy;
}

std::string CallTag::key_with_item() const { return key() + "|" + item_id; }

json to_json(const CallRecord& record) {
  json messages = json::array();
  for (const auto& message : record.request) {
    messages.push_back(json{{"role", to_string(message.role)},
                            {"content", message.content}});
  }
  return json{{"request", std::move(messages)},
              {"params",
               json{{"temperature", record.params.temperature},
                    {"max_output_tokens", record.params.max_output_tokens},
                    {"stop_sequences", record.params.stop_sequences}}},
              {"response", record.response},
              {"error", record.error},
              {"latency_ms", record.latency.count()},
              {"attempts", record.attempts},
              {"endpoint_id", record.endpoint_id},
              {"timestamp", record.timestamp},
              {"tag",
               json{{"agent", record.tag.agent},
                    {"round", record.tag.round},
                    {"strategy", record.tag.strategy},
                    {"item_id", record.tag.item_id}}},
              {"ok", record.ok}};
}

CallRecord call_record_from_json(const json& j) {
  CallRecord record;
  for (const auto& message : j.at("request")) {
    record.request.push_back(
        ChatMessage{role_from_string(message.at("role").get<std::string>()),
                    message.at("content").get<std::string>()});
  }
  const auto& params = j.at("params");
  record.params.temperature = params.at("temperature").get<double>();
  record.params.max_output_tokens = params.at("max_output_tokens").get<int>();
  record.params.stop_sequences =
      params.at("stop_sequences").get<std::vector<std::string>>();
  record.response = j.at("response").get<std::string>();
  record.error = j.at("error").get<std::string>();
  record.latency = std::chrono::milliseconds(j.at("latency_ms").get<int64_t>());
  record.attempts = j.at("attempts").get<int>();
  record.endpoint_id = j.at("endpoint_id").get<std::string>();
  record.timestamp = j.at("timestamp").get<std::string>();
  const auto& tag = j.at("tag");
  record.tag.agent = tag.at("agent").get<std::string>();
  record.tag.round = tag.at("round").get<int>();
  record.tag.strategy = tag.at("strategy").get<std::string>();
  record.tag.item_id = tag.at("item_id").get<std::string>();
  record.ok = j.at("ok").get<bool>();
  return record;
}

// ---------------------------------------------------------------------------
// ScriptedBackend

std::shared_ptr<ScriptedBackend> ScriptedBackend::queue(std::vector<Entry> entries) {
  auto backend = std::shared_ptr<ScriptedBackend>(new ScriptedBackend());
  backend->keyed_mode_ = false;
  backend->queue_.assign(entries.begin(), entries.end());
  return backend;
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::keyed(
    std::map<std::string, Entry> entries) {
  auto backend = std::shared_ptr<ScriptedBackend>(new ScriptedBackend());
  backend->keyed_mode_ = true;
  backend->keyed_ = std::move(entries);
  return backend;
}

namespace {

ScriptedBackend::Entry entry_from_json(const json& j) {
  if (j.is_string()) {
    return ScriptedBackend::Entry{j.get<std::string>(), false, ""};
  }
  ScriptedBackend::Entry entry;
  if (j.contains("fail")) {
    entry.fail = true;
    entry.error = j["fail"].is_string() ? j["fail"].get<std::string>() : "scripted failure";
  }
  if (j.contains("text")) entry.text = j["text"].get<std::string>();
  return entry;
}

}  // namespace

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(
    const std::filesystem::path& path) {
  json script = json::parse(read_text_file(path), nullptr, false);
  if (script.is_discarded() || !script.is_object() || !script.contains("mode") ||
      !script.contains("entries")) {
    fail(ErrorCode::kConfigError,
         "mock script " + path.string() + " must be {\"mode\",\"entries\"}");
  }
  std::string mode = script["mode"].get<std::string>();
  if (mode == "queue") {
    std::vector<Entry> entries;
    for (const auto& e : script["entries"]) entries.push_back(entry_from_json(e));
    return queue(std::move(entries));
  }
  if (mode == "keyed") {
    std::map<std::string, Entry> entries;
    for (const auto& [key, e] : script["entries"].items()) {
      entries[key] = entry_from_json(e);
    }
    return keyed(std::move(entries));
  }
  fail(ErrorCode::kConfigError, "mock script mode must be queue or keyed, got " + mode);
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::replay(
    const std::vector<CallRecord>& records) {
  std::vector<Entry> entries;
  for (const auto& record : records) {
    if (record.ok) {
      entries.push_back(Entry{record.response, false, ""});
    } else {
      entries.push_back(Entry{"", true, record.error});
    }
  }
  return queue(std::move(entries));
}

std::string ScriptedBackend::complete(const std::vector<ChatMessage>& messages,
                                      const GenerationParams&, const CallTag& tag) {
  Entry entry;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    requests_.push_back(LoggedRequest{tag, messages});
    if (keyed_mode_) {
      auto it = keyed_.find(tag.key_with_item());
      if (it == keyed_.end()) it = keyed_.find(tag.key());
      if (it == keyed_.end()) {
        fail(ErrorCode::kExhaustedScript,
             "scripted backend has no entry for key " + tag.key() +
                 " (or " + tag.key_with_item() + ")");
      }
      entry = it->second;
    } else {
      if (queue_.empty()) {
        fail(ErrorCode::kExhaustedScript,
             "scripted queue exhausted at call for key " + tag.key());
      }
      entry = queue_.front();
      queue_.pop_front();
    }
  }
  if (entry.fail) {
    fail(ErrorCode::kEndpointUnreachable, entry.error);
  }
  if (entry.text.empty()) {
    fail(ErrorCode::kEmptyResponse, "scripted empty completion for key " + tag.key());
  }
  return entry.text;
}

std::vector<ScriptedBackend::LoggedRequest> ScriptedBackend::requests() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return requests_;
}

size_t ScriptedBackend::remaining() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return keyed_mode_ ? keyed_.size() : queue_.size();
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    fail(ErrorCode::kConfigError, "endpoint base_url needs a scheme: " + url);
  }
  size_t path_start = url.find('/', scheme_end + 3);
  ParsedUrl parsed;
  if (path_start == std::string::npos) {
    parsed.scheme_host_port = url;
    parsed.path = "";
  } else {
    parsed.scheme_host_port = url.substr(0, path_start);
    parsed.path = url.substr(path_start);
  }
  if (parsed.path.empty() || parsed.path == "/") {
    parsed.path = "/v1/chat/completions";
  }
  return parsed;
}

}  // namespace

std::string HttpBackend::complete(const std::vector<ChatMessage>& messages,
                                  const GenerationParams& params, const CallTag&) {
  ParsedUrl url = parse_url(endpoint_.base_url);
  httplib::Client client(url.scheme_host_port);
  auto seconds = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
  client.set_connection_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);
  client.set_read_timeout(seconds.count() > 0 ? seconds.count() : 1, 0);

  httplib::Headers headers;
  if (!endpoint_.auth_secret_ref.empty()) {
    const char* token = std::getenv(endpoint_.auth_secret_ref.c_str());
    if (token == nullptr) {
      fail(ErrorCode::kConfigError,
           "auth secret env var not set: " + endpoint_.auth_secret_ref);
    }
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }

  json body = json::object();
  body["model"] = endpoint_.model_name;
  json message_list = json::array();
  for (const auto& message : messages) {
    message_list.push_back(json{{"role", to_string(message.role)},
                                {"content", message.content}});
  }
  body["messages"] = std::move(message_list);
  body["temperature"] = params.temperature;
  body["max_tokens"] = params.max_output_tokens;
  if (!params.stop_sequences.empty()) body["stop"] = params.stop_sequences;

  auto result = client.Post(url.path, headers, body.dump(), "application/json");
  if (!result) {
    fail(ErrorCode::kEndpointUnreachable,
         "transport failure: " + httplib::to_string(result.error()));
  }
  if (result->status != 200) {
    fail(ErrorCode::kRemoteError,
         "remote status " + std::to_string(result->status) + ": " +
             result->body.substr(0, 200));
  }
  json payload = json::parse(result->body, nullptr, false);
  if (payload.is_discarded() || !payload.contains("choices") ||
      !payload["choices"].is_array() || payload["choices"].empty()) {
    fail(ErrorCode::kRemoteError, "malformed completion payload");
  }
  const auto& first = payload["choices"][0];
  if (!first.contains("message") || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    fail(ErrorCode::kRemoteError, "completion payload lacks message content");
  }
  std::string text = first["message"]["content"].get<std::string>();
  if (text.empty()) {
    fail(ErrorCode::kEmptyResponse, "empty completion");
  }
  return text;
}

// ---------------------------------------------------------------------------
// ChatClient

// Counting gate bounding in-flight calls.
class ChatClient::Gate {
 public:
  explicit Gate(int limit) : available_(limit > 0 ? limit : 1) {}

  void acquire() {
    std::unique_lock<std::mutex> lock(mutex_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
  }

  void release() {
    {
      std::lock_guard<std::mutex> lock(mutex_);
      ++available_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int available_;
};

ChatClient::ChatClient(std::shared_ptr<ChatBackend> backend, ModelEndpoint endpoint,
                       RetryPolicy retry, int parallelism, uint64_t jitter_seed)
    : backend_(std::move(backend)),
      endpoint_(std::move(endpoint)),
      retry_(retry),
      jitter_state_(mix64(jitter_seed ^ 0x7261617263686174ULL)),
      gate_(std::make_unique<Gate>(parallelism)) {
  sleeper_ = [](std::chrono::milliseconds delay) {
    std::this_thread::sleep_for(delay);
  };
  if (backend_->deterministic()) {
    clock_ = [] { return std::chrono::system_clock::time_point{}; };
  } else {
    clock_ = [] { return std::chrono::system_clock::now(); };
  }
}

ChatClient::~ChatClient() = default;

void ChatClient::set_record_sink(RecordSink sink) {
  std::lock_guard<std::mutex> lock(sink_mutex_);
  sink_ = std::move(sink);
}

std::chrono::milliseconds ChatClient::backoff_delay(int attempt,
                                                    double unit_jitter) const {
  double delay = static_cast<double>(retry_.base_delay.count());
  for (int i = 1; i < attempt; ++i) delay *= retry_.multiplier;
  delay = std::min(delay, static_cast<double>(retry_.max_delay.count()));
  double jittered = delay * (1.0 + retry_.jitter * (2.0 * unit_jitter - 1.0));
  jittered = std::min(jittered, static_cast<double>(retry_.max_delay.count()));
  return std::chrono::milliseconds(static_cast<int64_t>(jittered));
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages,
                                 const GenerationParams& params, const CallTag& tag,
                                 CallRecord* record_out) {
  if (messages.empty()) {
    fail(ErrorCode::kInvalidArgument, "complete: empty message list");
  }
  if (messages.front().role == Role::kAssistant) {
    fail(ErrorCode::kInvalidArgument, "complete: first message must be system or user");
  }
  for (const auto& message : messages) {
    if (message.role != Role::kSystem && message.content.empty()) {
      fail(ErrorCode::kInvalidArgument, "complete: empty message content");
    }
  }

  CallRecord record;
  record.request = messages;
  record.params = params;
  record.endpoint_id = endpoint_.id();
  record.tag = tag;
  record.timestamp = format_timestamp(clock_());

  auto emit_record = [&]() {
    if (record_out != nullptr) *record_out = record;
    std::lock_guard<std::mutex> lock(sink_mutex_);
    if (sink_) sink_(record);
  };

  gate_->acquire();
  auto started = std::chrono::steady_clock::now();
  const int max_attempts = endpoint_.max_retries + 1;
  std::string last_error;
  ErrorCode last_code = ErrorCode::kEndpointUnreachable;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    record.attempts = attempt;
    try {
      std::string text = backend_->complete(messages, params, tag);
      record.ok = true;
      record.response = text;
      if (!backend_->deterministic()) {
        record.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
      }
      gate_->release();
      emit_record();
      return text;
    } catch (const Error& e) {
      last_error = e.what();
      last_code = e.code();
      // Script exhaustion and config problems are not transient.
      if (e.code() == ErrorCode::kExhaustedScript ||
          e.code() == ErrorCode::kConfigError) {
        break;
      }
      if (attempt < max_attempts) {
        double unit;
        {
          std::lock_guard<std::mutex> lock(jitter_mutex_);
          jitter_state_ = mix64(jitter_state_);
          unit = static_cast<double>(jitter_state_ >> 11) /
                 static_cast<double>(1ULL << 53);
        }
        sleeper_(backoff_delay(attempt, unit));
      }
    }
  }
  record.ok = false;
  record.error = last_error;
  if (!backend_->deterministic()) {
    record.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
  }
  gate_->release();
  emit_record();
  throw Error(last_code, last_error);
}

void append_call_record(JsonlWriter& writer, const CallRecord& record) {
  writer.write(to_json(record));
}

std::vector<CallRecord> load_call_records(const std::filesystem::path& path) {
  std::vector<CallRecord> records;
  for_each_jsonl(path, [&](size_t, const json& j) {
    records.push_back(call_record_from_json(j));
  });
  return records;
}

std::string format_timestamp(std::chrono::system_clock::time_point tp) {
  std::time_t seconds = std::chrono::system_clock::to_time_t(tp);
  std::tm tm_utc{};
  gmtime_r(&seconds, &tm_utc);
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%04d-%02d-%02dT%02d:%02d:%02dZ",
                tm_utc.tm_year + 1900, tm_utc.tm_mon + 1, tm_utc.tm_mday,
                tm_utc.tm_hour, tm_utc.tm_min, tm_utc.tm_sec);
  return buffer;
}

}  // namespace raar
