#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "raar/chat_client.hpp"
#include "raar/evalkit.hpp"
#include "raar/path_search.hpp"
#include "raar/rewards.hpp"
#include "raar/similarity_stats.hpp"
#include "raar/task_spec.hpp"
#include "raar/vector_index.hpp"

namespace raar {

extern const char* kToolVersion;

// Stage-oriented pipeline: retrieve -> search -> emit-train -> reward ->
// eval, one config file, line-oriented resumable outputs, and a manifest
// per stage whose digests chain stages together.

struct PipelineConfig {
  std::string task = "AMTCele";
  std::string corpus_path;
  std::string embeddings_path;
  std::string output_dir;
  std::string templates_dir;  // empty = compiled-in default
  RetrievalConfig retrieval;
  SearchConfig search;  // rng_seed mirrors `seed`
  ModelEndpoint endpoint;
  GenerationParams generation;
  int parallelism = 1;
  uint64_t seed = 0;
  std::string mock_script;  // path to a scripted-backend file; empty = real endpoint

  struct Overrides {
    std::optional<uint64_t> seed;
    std::optional<int> parallelism;
    std::optional<std::string> mock_script;
    std::optional<std::string> templates_dir;
  };

  // JSON config with ${ENV_VAR} interpolation inside string values.
  static PipelineConfig load_file(const std::filesystem::path& path,
                                  const Overrides& overrides = {});
  static PipelineConfig from_json(const json& j);
  json to_json() const;

  // Hash over semantically relevant fields only: paths, parallelism and
  // endpoint operational settings do not change outputs.
  std::string semantic_hash() const;

  const TaskSpec& task_spec() const { return TaskSpec::by_name(task); }
  TemplateRegistry load_registry() const;

  void validate_common() const;
};

struct RunManifest {
  std::string stage;
  std::string config_hash;
  std::string tool_version;
  json counts = json::object();
  double wall_time_s = 0.0;
  std::string generated_at;
  json inputs = json::object();   // basename -> sha256
  json outputs = json::object();  // basename -> sha256

  json to_json() const;
  static RunManifest from_json(const json& j);
  void save(const std::filesystem::path& path) const;
  static RunManifest load(const std::filesystem::path& path);
};

// Holds an exclusive advisory lock on <output_dir>/.raar.lock for the
// lifetime of the object; a second command on the same directory fails.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& output_dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

// Stage outputs, named relative to the config's output directory.
namespace stage_files {
inline constexpr const char* kContexts = "contexts.jsonl";
inline constexpr const char* kSearchHalf = "d_search.jsonl";
inline constexpr const char* kRlHalf = "d_rl.jsonl";
inline constexpr const char* kTraces = "traces.jsonl";
inline constexpr const char* kCallRecords = "call_records.jsonl";
inline constexpr const char* kSftRecords = "sft_records.jsonl";
inline constexpr const char* kSftRendered = "sft_rendered.jsonl";
inline constexpr const char* kSftDataset = "sft_dataset.jsonl";
inline constexpr const char* kRlDataset = "rl_dataset.jsonl";
inline constexpr const char* kRewardScores = "reward_scores.jsonl";
inline constexpr const char* kMetricsJson = "metrics.json";
inline constexpr const char* kMetricsTable = "metrics.txt";
}  // namespace stage_files

RunManifest cmd_retrieve(const PipelineConfig& config);
RunManifest cmd_search(const PipelineConfig& config);
RunManifest cmd_emit_train(const PipelineConfig& config);
RunManifest cmd_reward(const PipelineConfig& config,
                       const std::filesystem::path& outputs_file);
RunManifest cmd_eval(const PipelineConfig& config,
                     const std::filesystem::path& predictions_file);

}  // namespace raar
