#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raar/agent_output.hpp"
#include "raar/chat_client.hpp"
#include "raar/prompt_builder.hpp"
#include "raar/task_spec.hpp"
#include "raar/templates.hpp"
#include "raar/vector_index.hpp"

namespace raar {

// Multi-agent reasoning-path search: three perspective sub-agents, a
// summary agent, strategy selection, a verifier loop with a fixed round
// budget, and a gold-label hint fallback, distilled into SFT records.

enum class AgentKind { kSentiment, kSemantic, kStyle, kSummary };

enum class SubStrategy { kDoubleCheck, kCommunication, kHint };
enum class SummaryStrategy {
  kConsolidation,
  kReconsideration,
  kDiversification,
  kVerification,
  kRectification,
  kHint,
};

const char* to_string(SubStrategy strategy);
const char* to_string(SummaryStrategy strategy);
SubStrategy sub_strategy_from_string(std::string_view s);
SummaryStrategy summary_strategy_from_string(std::string_view s);

enum class VerifierMode { kExactMatch, kLlm, kLlmWithExactFallback };

const char* to_string(VerifierMode mode);
VerifierMode verifier_mode_from_string(std::string_view s);

struct SearchConfig {
  int max_rounds = 3;
  uint64_t rng_seed = 0;
  VerifierMode verifier_mode = VerifierMode::kLlmWithExactFallback;
  bool include_hint_records = true;

  void validate() const;
};

struct SubAgentOutput {
  AgentJsonResponse response;
  // Judgment of the first response entry, canonicalized by the shared
  // label matcher when possible.
  std::string answer;
  bool canonical = false;
};

// A failed first summary attempt inside a two-phase round.
struct SummaryPhase {
  std::optional<SummaryStrategy> strategy;
  CotActionList cot;
  std::string candidate_answer;
  bool verifier_verdict = false;
};

struct RoundRecord {
  int round_index = 0;
  std::map<Perspective, SubAgentOutput> sub_outputs;
  std::optional<SubStrategy> sub_strategy;          // absent in round 0
  std::optional<SummaryStrategy> summary_strategy;  // absent for plain summary runs
  CotActionList summary_cot;
  std::string candidate_answer;
  bool verifier_verdict = false;
  std::optional<SummaryPhase> interim;
};

struct ReasoningTrace {
  RetrievedContext context;
  std::vector<RoundRecord> rounds;
  bool solved = false;
  bool hint_used = false;
  std::optional<std::string> natural_cot;
  std::optional<std::string> final_answer;
  std::vector<CallRecord> call_records;
  std::string abort_reason;  // non-empty when the item aborted or was downgraded

  int total_model_calls() const { return static_cast<int>(call_records.size()); }
};

json to_json(const ReasoningTrace& trace);
ReasoningTrace trace_from_json(const json& j);

struct SftProvenance {
  std::string item_id;
  int rounds_used = 0;
  bool hint_used = false;
  std::vector<std::string> strategies;
};

struct SftRecord {
  std::string input;  // rendered few-shot prompt (the retrieval-augmented input)
  std::string think;
  std::string answer;
  SftProvenance provenance;
};

json to_json(const SftRecord& record);
SftRecord sft_record_from_json(const json& j);

struct EmissionManifest {
  int64_t emitted = 0;
  int64_t excluded_hint = 0;
  int64_t skipped_unsolved = 0;
};

// One record per solved trace; hint-derived records are emitted only
// when configured, and always provenance-flagged.
std::pair<std::vector<SftRecord>, EmissionManifest> emit_sft(
    const std::vector<ReasoningTrace>& traces, const SearchConfig& config,
    const TemplateRegistry& registry);

class SearchEngine {
 public:
  SearchEngine(const TemplateRegistry& registry, const TaskSpec& task,
               ChatClient& client, SearchConfig config,
               GenerationParams generation = {});

  // Runs the full search for one item. Failures abort the item and are
  // recorded on the trace instead of propagating.
  ReasoningTrace search(const RetrievedContext& ctx) const;

  // True when the candidate's extracted label equals gold (exact mode),
  // or per the LLM verdict in llm modes.
  bool verify(const std::string& candidate, const std::string& gold,
              VerifierMode mode, std::vector<CallRecord>* log,
              const std::string& item_id, int round) const;

  const SearchConfig& config() const { return config_; }

 private:
  struct ItemState;

  std::string ask(ItemState& st, const std::string& prompt, const CallTag& tag) const;
  // One templated re-ask on parse/shape failure, then the item aborts.
  std::string ask_validated(ItemState& st, const std::string& prompt, const CallTag& tag,
                            const std::function<void(const std::string&)>& validate,
                            const char* reask_note) const;

  SubAgentOutput make_sub_output(const AgentJsonResponse& response) const;
  std::map<Perspective, SubAgentOutput> run_subagents_initial(ItemState& st) const;
  std::map<Perspective, SubAgentOutput> run_subagents_strategy(
      ItemState& st, SubStrategy strategy,
      const std::map<Perspective, SubAgentOutput>& previous, int round) const;
  std::pair<CotActionList, std::string> run_summary(
      ItemState& st, const std::map<Perspective, SubAgentOutput>& subs,
      const std::optional<CotActionList>& prior_cot,
      const std::optional<SummaryStrategy>& strategy, int round) const;

  std::string rephrase(ItemState& st, const ReasoningTrace& trace) const;
  std::string refine(ItemState& st, const std::string& natural_cot) const;

  SummaryStrategy random_summary_strategy(ItemState& st) const;
  SubStrategy random_sub_strategy(ItemState& st) const;

  bool unanimous_equals(const std::map<Perspective, SubAgentOutput>& subs,
                        const std::string& failed_candidate) const;

  const TemplateRegistry& registry_;
  const TaskSpec& task_;
  ChatClient& client_;
  SearchConfig config_;
  GenerationParams generation_;
};

}  // namespace raar
