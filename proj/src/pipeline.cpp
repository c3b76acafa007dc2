#include "raar/pipeline.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>
#include <thread>

#include "raar/errors.hpp"

namespace raar {

const char* kToolVersion = "raar 0.1.0";

// ---------------------------------------------------------------------------
// Config

namespace {

// ${VAR} interpolation; a missing variable is a config error so secrets
// cannot silently degrade to empty strings.
std::string interpolate_env(const std::string& value) {
  std::string result;
  size_t cursor = 0;
  while (cursor < value.size()) {
    size_t start = value.find("${", cursor);
    if (start == std::string::npos) {
      result.append(value, cursor, value.size() - cursor);
      break;
    }
    size_t end = value.find('}', start + 2);
    if (end == std::string::npos) {
      result.append(value, cursor, value.size() - cursor);
      break;
    }
    result.append(value, cursor, start - cursor);
    std::string name = value.substr(start + 2, end - start - 2);
    const char* env = std::getenv(name.c_str());
    if (env == nullptr) {
      fail(ErrorCode::kConfigError, "environment variable not set: " + name);
    }
    result += env;
    cursor = end + 1;
  }
  return result;
}

json interpolate_json(const json& j) {
  if (j.is_string()) return interpolate_env(j.get<std::string>());
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [key, value] : j.items()) out[key] = interpolate_json(value);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& value : j) out.push_back(interpolate_json(value));
    return out;
  }
  return j;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& raw) {
  json j = interpolate_json(raw);
  PipelineConfig config;
  if (j.contains("task")) config.task = j["task"].get<std::string>();
  TaskSpec::by_name(config.task);  // validates
  if (j.contains("paths")) {
    const auto& paths = j["paths"];
    if (paths.contains("corpus")) config.corpus_path = paths["corpus"].get<std::string>();
    if (paths.contains("embeddings")) {
      config.embeddings_path = paths["embeddings"].get<std::string>();
    }
    if (paths.contains("output_dir")) {
      config.output_dir = paths["output_dir"].get<std::string>();
    }
    if (paths.contains("templates")) {
      config.templates_dir = paths["templates"].get<std::string>();
    }
  }
  if (j.contains("retrieval")) {
    const auto& retrieval = j["retrieval"];
    if (retrieval.contains("k")) config.retrieval.k = retrieval["k"].get<int>();
    if (retrieval.contains("perspectives")) {
      config.retrieval.perspectives.clear();
      for (const auto& p : retrieval["perspectives"]) {
        config.retrieval.perspectives.push_back(
            perspective_from_string(p.get<std::string>()));
      }
    }
    if (retrieval.contains("source_only")) {
      config.retrieval.source_only = retrieval["source_only"].get<bool>();
    }
  }
  if (j.contains("search")) {
    const auto& search = j["search"];
    if (search.contains("max_rounds")) {
      config.search.max_rounds = search["max_rounds"].get<int>();
    }
    if (search.contains("verifier_mode")) {
      config.search.verifier_mode =
          verifier_mode_from_string(search["verifier_mode"].get<std::string>());
    }
    if (search.contains("include_hint_records")) {
      config.search.include_hint_records = search["include_hint_records"].get<bool>();
    }
  }
  if (j.contains("endpoint")) {
    const auto& endpoint = j["endpoint"];
    if (endpoint.contains("base_url")) {
      config.endpoint.base_url = endpoint["base_url"].get<std::string>();
    }
    if (endpoint.contains("model_name")) {
      config.endpoint.model_name = endpoint["model_name"].get<std::string>();
    }
    if (endpoint.contains("auth_secret_ref")) {
      config.endpoint.auth_secret_ref = endpoint["auth_secret_ref"].get<std::string>();
    }
    if (endpoint.contains("timeout_ms")) {
      config.endpoint.timeout =
          std::chrono::milliseconds(endpoint["timeout_ms"].get<int64_t>());
      if (config.endpoint.timeout.count() <= 0) {
        fail(ErrorCode::kConfigError, "endpoint timeout must be > 0");
      }
    }
    if (endpoint.contains("max_retries")) {
      config.endpoint.max_retries = endpoint["max_retries"].get<int>();
      if (config.endpoint.max_retries < 0) {
        fail(ErrorCode::kConfigError, "endpoint max_retries must be >= 0");
      }
    }
  }
  if (j.contains("generation")) {
    const auto& generation = j["generation"];
    if (generation.contains("temperature")) {
      config.generation.temperature = generation["temperature"].get<double>();
      if (config.generation.temperature < 0) {
        fail(ErrorCode::kConfigError, "generation temperature must be >= 0");
      }
    }
    if (generation.contains("max_output_tokens")) {
      config.generation.max_output_tokens = generation["max_output_tokens"].get<int>();
      if (config.generation.max_output_tokens < 1) {
        fail(ErrorCode::kConfigError, "generation max_output_tokens must be >= 1");
      }
    }
    if (generation.contains("stop_sequences")) {
      config.generation.stop_sequences =
          generation["stop_sequences"].get<std::vector<std::string>>();
    }
  }
  if (j.contains("parallelism")) {
    config.parallelism = j["parallelism"].get<int>();
    if (config.parallelism < 1) {
      fail(ErrorCode::kConfigError, "parallelism must be >= 1");
    }
  }
  if (j.contains("seed")) config.seed = j["seed"].get<uint64_t>();
  if (j.contains("mock_script")) config.mock_script = j["mock_script"].get<std::string>();
  config.search.rng_seed = config.seed;
  config.retrieval.validate();
  config.search.validate();
  return config;
}

PipelineConfig PipelineConfig::load_file(const std::filesystem::path& path,
                                         const Overrides& overrides) {
  json raw = json::parse(read_text_file(path), nullptr, false);
  if (raw.is_discarded()) {
    fail(ErrorCode::kConfigError, "config is not valid JSON: " + path.string());
  }
  PipelineConfig config = from_json(raw);
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.search.rng_seed = config.seed;
  }
  if (overrides.parallelism) config.parallelism = *overrides.parallelism;
  if (overrides.mock_script) config.mock_script = *overrides.mock_script;
  if (overrides.templates_dir) config.templates_dir = *overrides.templates_dir;
  return config;
}

json PipelineConfig::to_json() const {
  json perspectives = json::array();
  for (Perspective p : retrieval.perspectives) perspectives.push_back(to_string(p));
  return json{
      {"task", task},
      {"paths", json{{"corpus", corpus_path},
                     {"embeddings", embeddings_path},
                     {"output_dir", output_dir},
                     {"templates", templates_dir}}},
      {"retrieval", json{{"k", retrieval.k},
                         {"perspectives", perspectives},
                         {"source_only", retrieval.source_only}}},
      {"search", json{{"max_rounds", search.max_rounds},
                      {"verifier_mode", to_string(search.verifier_mode)},
                      {"include_hint_records", search.include_hint_records}}},
      {"endpoint", json{{"base_url", endpoint.base_url},
                        {"model_name", endpoint.model_name},
                        {"auth_secret_ref", endpoint.auth_secret_ref},
                        {"timeout_ms", endpoint.timeout.count()},
                        {"max_retries", endpoint.max_retries}}},
      {"generation", json{{"temperature", generation.temperature},
                          {"max_output_tokens", generation.max_output_tokens},
                          {"stop_sequences", generation.stop_sequences}}},
      {"parallelism", parallelism},
      {"seed", seed},
      {"mock_script", mock_script}};
}

std::string PipelineConfig::semantic_hash() const {
  json perspectives = json::array();
  for (Perspective p : retrieval.perspectives) perspectives.push_back(to_string(p));
  json semantic = json{
      {"task", task},
      {"seed", seed},
      {"retrieval", json{{"k", retrieval.k},
                         {"perspectives", perspectives},
                         {"source_only", retrieval.source_only}}},
      {"search", json{{"max_rounds", search.max_rounds},
                      {"verifier_mode", to_string(search.verifier_mode)},
                      {"include_hint_records", search.include_hint_records}}},
      {"generation", json{{"temperature", generation.temperature},
                          {"max_output_tokens", generation.max_output_tokens},
                          {"stop_sequences", generation.stop_sequences}}},
      {"model", endpoint.model_name},
      {"mock", !mock_script.empty()}};
  return sha256_string(semantic.dump());
}

TemplateRegistry PipelineConfig::load_registry() const {
  if (templates_dir.empty()) return TemplateRegistry::load_default();
  return TemplateRegistry::load(templates_dir);
}

void PipelineConfig::validate_common() const {
  if (output_dir.empty()) {
    fail(ErrorCode::kConfigError, "config paths.output_dir is required");
  }
}

// ---------------------------------------------------------------------------
// Manifest

json RunManifest::to_json() const {
  return json{{"stage", stage},
              {"config_hash", config_hash},
              {"tool_version", tool_version},
              {"counts", counts},
              {"wall_time_s", wall_time_s},
              {"generated_at", generated_at},
              {"inputs", inputs},
              {"outputs", outputs}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest manifest;
  manifest.stage = j.at("stage").get<std::string>();
  manifest.config_hash = j.at("config_hash").get<std::string>();
  manifest.tool_version = j.at("tool_version").get<std::string>();
  manifest.counts = j.at("counts");
  manifest.wall_time_s = j.at("wall_time_s").get<double>();
  manifest.generated_at = j.at("generated_at").get<std::string>();
  manifest.inputs = j.at("inputs");
  manifest.outputs = j.at("outputs");
  return manifest;
}

void RunManifest::save(const std::filesystem::path& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

RunManifest RunManifest::load(const std::filesystem::path& path) {
  json j = json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) {
    fail(ErrorCode::kParseError, "manifest is not valid JSON: " + path.string());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Directory lock

DirectoryLock::DirectoryLock(const std::filesystem::path& output_dir) {
  std::filesystem::create_directories(output_dir);
  path_ = output_dir / ".raar.lock";
  fd_ = ::open(path_.c_str(), O_CREAT | O_RDWR, 0644);
  if (fd_ < 0) {
    fail(ErrorCode::kIoError, "cannot open lock file " + path_.string());
  }
  if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(fd_);
    fd_ = -1;
    fail(ErrorCode::kLockHeld,
         "another command holds the lock on " + output_dir.string());
  }
}

DirectoryLock::~DirectoryLock() {
  if (fd_ >= 0) {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
}

// ---------------------------------------------------------------------------
// Stage helpers

namespace {

struct StageTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

RunManifest make_manifest(const PipelineConfig& config, const std::string& stage) {
  RunManifest manifest;
  manifest.stage = stage;
  manifest.config_hash = config.semantic_hash();
  manifest.tool_version = kToolVersion;
  manifest.generated_at =
      format_timestamp(std::chrono::system_clock::now());
  return manifest;
}

void record_file(json& section, const std::filesystem::path& path) {
  section[path.filename().string()] = sha256_file(path);
}

void require_file(const std::filesystem::path& path, const std::string& what) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::kIoError, what + " not found: " + path.string());
  }
}

std::filesystem::path out_path(const PipelineConfig& config, const char* name) {
  return std::filesystem::path(config.output_dir) / name;
}

// Builds the chat client for search: a scripted backend when a mock
// script is configured, the HTTP transport otherwise.
std::shared_ptr<ChatBackend> make_backend(const PipelineConfig& config) {
  if (!config.mock_script.empty()) {
    require_file(config.mock_script, "mock script");
    return ScriptedBackend::from_file(config.mock_script);
  }
  if (config.endpoint.base_url.empty()) {
    fail(ErrorCode::kConfigError,
         "endpoint.base_url is required unless a mock script is configured");
  }
  return std::make_shared<HttpBackend>(config.endpoint);
}

// Runs fn over [0, n) on `width` workers; results land in submission
// order so downstream files are byte-stable under any parallelism.
template <typename Fn>
void parallel_for_ordered(size_t n, int width, const Fn& fn) {
  if (width <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> workers;
  size_t worker_count = std::min<size_t>(static_cast<size_t>(width), n);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (size_t w = 0; w < worker_count; ++w) {
    workers.emplace_back([&]() {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& worker : workers) worker.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

// ---------------------------------------------------------------------------
// retrieve

RunManifest cmd_retrieve(const PipelineConfig& config) {
  config.validate_common();
  require_file(config.corpus_path, "corpus file");
  require_file(config.embeddings_path, "embeddings file");
  DirectoryLock lock(config.output_dir);
  StageTimer timer;

  const TaskSpec& task = config.task_spec();
  std::vector<LabeledItem> items = load_corpus(config.corpus_path);
  for (const auto& item : items) {
    if (!task.is_canonical(item.label)) {
      fail(ErrorCode::kSchemaError,
           "corpus item " + item.item_id + " has label '" + item.label +
               "' outside the " + task.name + " label set");
    }
  }
  std::vector<EmbeddingRecord> records = load_embeddings(config.embeddings_path);
  PerspectiveIndex index = PerspectiveIndex::build(records, items);

  std::vector<LabeledItem> targets;
  for (const auto& item : items) {
    if (item.origin == Origin::kTarget) targets.push_back(item);
  }
  if (targets.empty()) {
    fail(ErrorCode::kEmptyInput, "corpus has no target-origin items to retrieve for");
  }
  std::sort(targets.begin(), targets.end(),
            [](const LabeledItem& a, const LabeledItem& b) {
              return a.item_id < b.item_id;
            });

  std::vector<RetrievedContext> contexts =
      assemble_contexts(targets, index, config.retrieval, task.name);
  auto [search_half, rl_half] = split_ra(contexts, config.seed);

  save_contexts(out_path(config, stage_files::kContexts), contexts);
  save_contexts(out_path(config, stage_files::kSearchHalf), search_half);
  save_contexts(out_path(config, stage_files::kRlHalf), rl_half);

  RunManifest manifest = make_manifest(config, "retrieve");
  manifest.counts = json{{"items", items.size()},
                         {"targets", targets.size()},
                         {"contexts", contexts.size()},
                         {"search_half", search_half.size()},
                         {"rl_half", rl_half.size()}};
  record_file(manifest.inputs, config.corpus_path);
  record_file(manifest.inputs, config.embeddings_path);
  record_file(manifest.outputs, out_path(config, stage_files::kContexts));
  record_file(manifest.outputs, out_path(config, stage_files::kSearchHalf));
  record_file(manifest.outputs, out_path(config, stage_files::kRlHalf));
  manifest.wall_time_s = timer.seconds();
  manifest.save(out_path(config, "manifest_retrieve.json"));
  return manifest;
}

// ---------------------------------------------------------------------------
// search

RunManifest cmd_search(const PipelineConfig& config) {
  config.validate_common();
  std::filesystem::path search_half_path = out_path(config, stage_files::kSearchHalf);
  require_file(search_half_path, "search-half contexts (run retrieve first)");
  DirectoryLock lock(config.output_dir);
  StageTimer timer;

  const TaskSpec& task = config.task_spec();
  TemplateRegistry registry = config.load_registry();
  std::vector<RetrievedContext> contexts = load_contexts(search_half_path);
  std::sort(contexts.begin(), contexts.end(),
            [](const RetrievedContext& a, const RetrievedContext& b) {
              return a.target.item_id < b.target.item_id;
            });

  // Resume: item_ids already present in the trace file are skipped.
  std::filesystem::path traces_path = out_path(config, stage_files::kTraces);
  std::set<std::string> done;
  if (std::filesystem::exists(traces_path)) {
    for_each_jsonl(traces_path, [&](size_t, const json& j) {
      done.insert(j.at("context").at("target").at("item_id").get<std::string>());
    });
  }
  std::vector<RetrievedContext> pending;
  for (auto& ctx : contexts) {
    if (!done.count(ctx.target.item_id)) pending.push_back(std::move(ctx));
  }

  auto backend = make_backend(config);
  int width = config.parallelism;
  if (!backend->supports_concurrent_calls() && width > 1) {
    std::cerr << "note: queue-mode mock script forces parallelism 1\n";
    width = 1;
  }
  ChatClient client(backend, config.endpoint, RetryPolicy{}, std::max(width, 1),
                    config.seed);
  if (backend->deterministic()) {
    client.set_sleeper([](std::chrono::milliseconds) {});
  }
  SearchEngine engine(registry, task, client, config.search, config.generation);

  std::vector<ReasoningTrace> new_traces(pending.size());
  parallel_for_ordered(pending.size(), width, [&](size_t i) {
    new_traces[i] = engine.search(pending[i]);
  });

  {
    JsonlWriter trace_writer(traces_path, /*append=*/true);
    JsonlWriter call_writer(out_path(config, stage_files::kCallRecords),
                            /*append=*/true);
    for (const auto& trace : new_traces) {
      trace_writer.write(to_json(trace));
      for (const auto& record : trace.call_records) {
        append_call_record(call_writer, record);
      }
    }
  }

  // Derived SFT views over the full trace file.
  std::vector<ReasoningTrace> all_traces;
  for_each_jsonl(traces_path, [&](size_t, const json& j) {
    all_traces.push_back(trace_from_json(j));
  });
  auto [sft_records, emission] = emit_sft(all_traces, config.search, registry);
  {
    JsonlWriter sft_writer(out_path(config, stage_files::kSftRecords));
    JsonlWriter rendered_writer(out_path(config, stage_files::kSftRendered));
    for (const auto& record : sft_records) {
      sft_writer.write(to_json(record));
      rendered_writer.write(
          json{{"item_id", record.provenance.item_id},
               {"input", record.input},
               {"text", render_sft_record(registry, record.think, record.answer)}});
    }
  }

  int64_t solved_no_hint = 0, solved_with_hint = 0, aborted = 0, dropped = 0;
  for (const auto& trace : all_traces) {
    if (trace.solved) {
      (trace.hint_used ? solved_with_hint : solved_no_hint) += 1;
    } else if (!trace.abort_reason.empty()) {
      aborted += 1;
    } else {
      dropped += 1;  // hint round still failed verification
    }
  }

  RunManifest manifest = make_manifest(config, "search");
  manifest.counts = json{{"attempted", all_traces.size()},
                         {"newly_processed", new_traces.size()},
                         {"resumed_skipped", done.size()},
                         {"solved_no_hint", solved_no_hint},
                         {"solved_with_hint", solved_with_hint},
                         {"aborted", aborted},
                         {"dropped", dropped},
                         {"sft_emitted", emission.emitted},
                         {"sft_excluded_hint", emission.excluded_hint}};
  record_file(manifest.inputs, search_half_path);
  record_file(manifest.outputs, traces_path);
  record_file(manifest.outputs, out_path(config, stage_files::kSftRecords));
  record_file(manifest.outputs, out_path(config, stage_files::kSftRendered));
  manifest.wall_time_s = timer.seconds();
  manifest.save(out_path(config, "manifest_search.json"));
  return manifest;
}

// ---------------------------------------------------------------------------
// emit-train

RunManifest cmd_emit_train(const PipelineConfig& config) {
  config.validate_common();
  std::filesystem::path traces_path = out_path(config, stage_files::kTraces);
  std::filesystem::path rl_path = out_path(config, stage_files::kRlHalf);
  require_file(traces_path, "traces (run search first)");
  require_file(rl_path, "RL-half contexts (run retrieve first)");
  DirectoryLock lock(config.output_dir);
  StageTimer timer;

  const TaskSpec& task = config.task_spec();
  TemplateRegistry registry = config.load_registry();

  std::vector<ReasoningTrace> traces;
  for_each_jsonl(traces_path, [&](size_t, const json& j) {
    traces.push_back(trace_from_json(j));
  });
  std::sort(traces.begin(), traces.end(),
            [](const ReasoningTrace& a, const ReasoningTrace& b) {
              return a.context.target.item_id < b.context.target.item_id;
            });
  auto [sft_records, emission] = emit_sft(traces, config.search, registry);

  std::vector<RetrievedContext> rl_contexts = load_contexts(rl_path);
  std::sort(rl_contexts.begin(), rl_contexts.end(),
            [](const RetrievedContext& a, const RetrievedContext& b) {
              return a.target.item_id < b.target.item_id;
            });
  std::vector<RlRecord> rl_records = emit_rl(rl_contexts, registry, task);

  {
    JsonlWriter sft_writer(out_path(config, stage_files::kSftDataset));
    for (const auto& record : sft_records) sft_writer.write(to_json(record));
    JsonlWriter rl_writer(out_path(config, stage_files::kRlDataset));
    for (const auto& record : rl_records) rl_writer.write(to_json(record));
  }

  RunManifest manifest = make_manifest(config, "emit-train");
  manifest.counts = json{{"sft_records", sft_records.size()},
                         {"rl_records", rl_records.size()},
                         {"excluded_hint", emission.excluded_hint},
                         {"skipped_unsolved", emission.skipped_unsolved}};
  record_file(manifest.inputs, traces_path);
  record_file(manifest.inputs, rl_path);
  record_file(manifest.outputs, out_path(config, stage_files::kSftDataset));
  record_file(manifest.outputs, out_path(config, stage_files::kRlDataset));
  manifest.wall_time_s = timer.seconds();
  manifest.save(out_path(config, "manifest_emit_train.json"));
  return manifest;
}

// ---------------------------------------------------------------------------
// reward

RunManifest cmd_reward(const PipelineConfig& config,
                       const std::filesystem::path& outputs_file) {
  config.validate_common();
  require_file(outputs_file, "outputs file");
  DirectoryLock lock(config.output_dir);
  StageTimer timer;

  const TaskSpec& task = config.task_spec();
  int64_t lines = 0;
  JsonlWriter writer(out_path(config, stage_files::kRewardScores));
  for_each_jsonl(outputs_file, [&](size_t line_no, const json& j) {
    if (!j.contains("output") || !j.contains("gold_label")) {
      fail(ErrorCode::kSchemaError,
           outputs_file.string() + ":" + std::to_string(line_no) +
               ": expected {\"output\",\"gold_label\"}");
    }
    RewardScore score = score_output(j["output"].get<std::string>(),
                                     j["gold_label"].get<std::string>(), task);
    writer.write(json{{"format", score.format},
                      {"accuracy", score.accuracy},
                      {"extracted_label", score.extracted_label
                                              ? json(*score.extracted_label)
                                              : json(nullptr)}});
    ++lines;
  });
  writer.flush();

  RunManifest manifest = make_manifest(config, "reward");
  manifest.counts = json{{"scored", lines}};
  record_file(manifest.inputs, outputs_file);
  record_file(manifest.outputs, out_path(config, stage_files::kRewardScores));
  manifest.wall_time_s = timer.seconds();
  manifest.save(out_path(config, "manifest_reward.json"));
  return manifest;
}

// ---------------------------------------------------------------------------
// eval

RunManifest cmd_eval(const PipelineConfig& config,
                     const std::filesystem::path& predictions_file) {
  config.validate_common();
  require_file(predictions_file, "predictions file");
  require_file(config.corpus_path, "corpus file");
  DirectoryLock lock(config.output_dir);
  StageTimer timer;

  const TaskSpec& task = config.task_spec();
  std::vector<Prediction> predictions = load_predictions(predictions_file, task);
  std::vector<LabeledItem> items = load_corpus(config.corpus_path);
  std::map<std::string, std::string> gold_by_id;
  for (const auto& item : items) gold_by_id[item.item_id] = item.label;

  std::map<std::string, std::string> golds;
  for (const auto& prediction : predictions) {
    auto it = gold_by_id.find(prediction.item_id);
    if (it == gold_by_id.end()) {
      fail(ErrorCode::kAlignmentError,
           "prediction item " + prediction.item_id + " is not in the corpus");
    }
    golds[prediction.item_id] = it->second;
  }

  auto [matrix, report] = score(predictions, golds, task);
  json output = json{{"metrics", report.to_json()}, {"confusion", matrix.to_json()}};
  write_text_file(out_path(config, stage_files::kMetricsJson), output.dump(2) + "\n");
  write_text_file(out_path(config, stage_files::kMetricsTable),
                  render_metrics_table(report));

  RunManifest manifest = make_manifest(config, "eval");
  manifest.counts = json{{"predictions", predictions.size()},
                         {"unparsed", matrix.unparsed}};
  record_file(manifest.inputs, predictions_file);
  record_file(manifest.outputs, out_path(config, stage_files::kMetricsJson));
  record_file(manifest.outputs, out_path(config, stage_files::kMetricsTable));
  manifest.wall_time_s = timer.seconds();
  manifest.save(out_path(config, "manifest_eval.json"));
  return manifest;
}

}  // namespace raar
