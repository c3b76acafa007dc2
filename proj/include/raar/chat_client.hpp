#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "raar/jsonl.hpp"

namespace raar {

enum class Role { kSystem, kUser, kAssistant };

const char* to_string(Role role);
Role role_from_string(std::string_view s);

struct ChatMessage {
  Role role = Role::kUser;
  std::string content;
};

struct GenerationParams {
  double temperature = 0.7;
  int max_output_tokens = 4096;
  std::vector<std::string> stop_sequences;
};

struct ModelEndpoint {
  std::string base_url;
  std::string model_name;
  // Name of the environment variable holding the bearer token. The token
  // itself never enters records or logs.
  std::string auth_secret_ref;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;

  std::string id() const { return model_name + "@" + base_url; }
};

// Identifies what a call was for; keyed scripts route on it.
struct CallTag {
  std::string agent;     // sentiment | semantic | style | summary | verify | rephrase | refine
  int round = -1;
  std::string strategy;  // init | double_check | ... | "" for non-round calls
  std::string item_id;

  std::string key() const;
  std::string key_with_item() const;
};

// Audit record of one logical call, including failed ones.
struct CallRecord {
  std::vector<ChatMessage> request;
  GenerationParams params;
  std::string response;
  std::string error;  // empty on success
  std::chrono::milliseconds latency{0};
  int attempts = 0;
  std::string endpoint_id;
  std::string timestamp;
  CallTag tag;
  bool ok = false;
};

json to_json(const CallRecord& record);
CallRecord call_record_from_json(const json& j);

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Returns assistant text or throws Error.
  virtual std::string complete(const std::vector<ChatMessage>& messages,
                               const GenerationParams& params, const CallTag& tag) = 0;

  // Scripted backends are bit-deterministic and drive deterministic clocks.
  virtual bool deterministic() const { return false; }

  // Queue-mode scripts depend on request arrival order, so fan-out must
  // stay sequential for them.
  virtual bool supports_concurrent_calls() const { return true; }
};

// Deterministic canned backend for offline runs and tests.
class ScriptedBackend : public ChatBackend {
 public:
  struct Entry {
    std::string text;
    bool fail = false;
    std::string error = "scripted failure";
  };

  static std::shared_ptr<ScriptedBackend> queue(std::vector<Entry> entries);
  // Keyed entries are looked up by tag (item-specific key first, then the
  // generic one) and may serve any number of calls.
  static std::shared_ptr<ScriptedBackend> keyed(std::map<std::string, Entry> entries);
  // Script file: {"mode":"queue","entries":[...]} or {"mode":"keyed","entries":{...}}.
  // Entries are bare strings or {"text":...}/{"fail":...} objects.
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
  // Replays the responses of a recorded run in order.
  static std::shared_ptr<ScriptedBackend> replay(const std::vector<CallRecord>& records);

  std::string complete(const std::vector<ChatMessage>& messages,
                       const GenerationParams& params, const CallTag& tag) override;
  bool deterministic() const override { return true; }
  bool supports_concurrent_calls() const override { return keyed_mode_; }

  struct LoggedRequest {
    CallTag tag;
    std::vector<ChatMessage> messages;
  };
  std::vector<LoggedRequest> requests() const;
  size_t remaining() const;

 private:
  ScriptedBackend() = default;

  mutable std::mutex mutex_;
  bool keyed_mode_ = false;
  std::deque<Entry> queue_;
  std::map<std::string, Entry> keyed_;
  std::vector<LoggedRequest> requests_;
};

// HTTP + JSON chat-completion transport: POST {model, messages,
// temperature, max_tokens, stop}; the reply is read from the first
// choice's message content.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(ModelEndpoint endpoint);

  std::string complete(const std::vector<ChatMessage>& messages,
                       const GenerationParams& params, const CallTag& tag) override;

 private:
  ModelEndpoint endpoint_;
};

struct RetryPolicy {
  std::chrono::milliseconds base_delay{1000};
  double multiplier = 2.0;
  double jitter = 0.2;  // +/- fraction
  std::chrono::milliseconds max_delay{30000};
};

// Shared, thread-safe client wrapping a backend with retries, a
// parallelism cap, and per-call audit records.
class ChatClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;
  using Clock = std::function<std::chrono::system_clock::time_point()>;
  using RecordSink = std::function<void(const CallRecord&)>;

  ChatClient(std::shared_ptr<ChatBackend> backend, ModelEndpoint endpoint,
             RetryPolicy retry = {}, int parallelism = 4, uint64_t jitter_seed = 0);
  ~ChatClient();

  // Returns assistant text; always fills record_out (also on failure,
  // with the error note) before throwing.
  std::string complete(const std::vector<ChatMessage>& messages,
                       const GenerationParams& params, const CallTag& tag,
                       CallRecord* record_out = nullptr);

  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }
  void set_record_sink(RecordSink sink);

  const ChatBackend& backend() const { return *backend_; }
  const ModelEndpoint& endpoint() const { return endpoint_; }

  // Planned backoff before the given retry attempt (1-based), jitter applied.
  std::chrono::milliseconds backoff_delay(int attempt, double unit_jitter) const;

 private:
  class Gate;

  std::shared_ptr<ChatBackend> backend_;
  ModelEndpoint endpoint_;
  RetryPolicy retry_;
  Sleeper sleeper_;
  Clock clock_;
  RecordSink sink_;
  std::mutex sink_mutex_;
  std::mutex jitter_mutex_;
  uint64_t jitter_state_;
  std::unique_ptr<Gate> gate_;
};

// Serialized CallRecords for one run, line-delimited.
void append_call_record(JsonlWriter& writer, const CallRecord& record);
std::vector<CallRecord> load_call_records(const std::filesystem::path& path);

std::string format_timestamp(std::chrono::system_clock::time_point tp);

}  // namespace raar
