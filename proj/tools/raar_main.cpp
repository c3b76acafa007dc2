#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "raar/errors.hpp"
#include "raar/pipeline.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<int> parallelism;
  std::optional<std::string> mock_script;
  std::optional<std::string> templates_dir;
};

raar::PipelineConfig load_config(const GlobalArgs& args) {
  raar::PipelineConfig::Overrides overrides;
  overrides.seed = args.seed;
  overrides.parallelism = args.parallelism;
  overrides.mock_script = args.mock_script;
  overrides.templates_dir = args.templates_dir;
  return raar::PipelineConfig::load_file(args.config_path, overrides);
}

void print_counts(const raar::RunManifest& manifest) {
  std::cout << manifest.stage << " done in " << manifest.wall_time_s << "s: "
            << manifest.counts.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Retrieval-augmented multi-agent reasoning pipeline"};
  app.require_subcommand(1);

  GlobalArgs args;
  app.add_option("--config", args.config_path, "Pipeline config file (JSON)")
      ->required();
  uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Override config seed");
  int parallelism_value = 0;
  auto* par_opt =
      app.add_option("--parallelism", parallelism_value, "Override worker count");
  std::string mock_value;
  auto* mock_opt = app.add_option("--mock-script", mock_value,
                                  "Scripted backend file (offline runs)");
  std::string templates_value;
  auto* templates_opt =
      app.add_option("--templates", templates_value, "Template registry directory");

  auto* retrieve = app.add_subcommand("retrieve", "Build retrieval-augmented contexts");
  auto* search = app.add_subcommand("search", "Run the multi-agent reasoning search");
  auto* emit_train =
      app.add_subcommand("emit-train", "Consolidate SFT and RL dataset files");
  auto* reward = app.add_subcommand("reward", "Score model outputs with rule rewards");
  std::string outputs_file;
  reward->add_option("--outputs", outputs_file, "JSONL of {\"output\",\"gold_label\"}")
      ->required();
  auto* eval = app.add_subcommand("eval", "Compute accuracy and macro metrics");
  std::string predictions_file;
  eval->add_option("--predictions", predictions_file,
                   "JSONL of {\"item_id\",\"raw_output\"}")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) args.seed = seed_value;
  if (*par_opt) args.parallelism = parallelism_value;
  if (*mock_opt) args.mock_script = mock_value;
  if (*templates_opt) args.templates_dir = templates_value;

  try {
    raar::PipelineConfig config = load_config(args);
    raar::RunManifest manifest;
    if (retrieve->parsed()) {
      manifest = raar::cmd_retrieve(config);
    } else if (search->parsed()) {
      manifest = raar::cmd_search(config);
    } else if (emit_train->parsed()) {
      manifest = raar::cmd_emit_train(config);
    } else if (reward->parsed()) {
      manifest = raar::cmd_reward(config, outputs_file);
    } else if (eval->parsed()) {
      manifest = raar::cmd_eval(config, predictions_file);
    }
    print_counts(manifest);
    return 0;
  } catch (const raar::Error& e) {
    raar::json error = raar::json{
        {"error", raar::json{{"code", raar::error_code_name(e.code())},
                             {"message", e.what()}}}};
    std::cerr << error.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    raar::json error = raar::json{
        {"error", raar::json{{"code", "internal"}, {"message", e.what()}}}};
    std::cerr << error.dump() << "\n";
    return 2;
  }
}
