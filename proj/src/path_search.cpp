#include "raar/path_search.hpp"

#include <algorithm>
#include <cctype>
#include <tuple>

#include "raar/errors.hpp"
#include "raar/rewards.hpp"
#include "raar/rng.hpp"

namespace raar {

namespace {

constexpr const char* kReaskNote =
    "Your previous output was not valid JSON; reply with only the JSON object.";
constexpr const char* kRefineReaskNote =
    "Your previous response did not state the predicted label in the first sentence. "
    "Answer again, stating exactly one label in the first sentence.";

const std::vector<Perspective>& sub_perspectives() {
  static const std::vector<Perspective> order = {
      Perspective::kSentiment, Perspective::kSemantic, Perspective::kStyle};
  return order;
}

const char* agent_name(Perspective p) { return to_string(p); }

}  // namespace

const char* to_string(SubStrategy strategy) {
  switch (strategy) {
    case SubStrategy::kDoubleCheck: return "double_check";
    case SubStrategy::kCommunication: return "communication";
    case SubStrategy::kHint: return "hint";
  }
  return "double_check";
}

const char* to_string(SummaryStrategy strategy) {
  switch (strategy) {
    case SummaryStrategy::kConsolidation: return "consolidation";
    case SummaryStrategy::kReconsideration: return "reconsideration";
    case SummaryStrategy::kDiversification: return "diversification";
    case SummaryStrategy::kVerification: return "verification";
    case SummaryStrategy::kRectification: return "rectification";
    case SummaryStrategy::kHint: return "hint";
  }
  return "consolidation";
}

SubStrategy sub_strategy_from_string(std::string_view s) {
  if (s == "double_check") return SubStrategy::kDoubleCheck;
  if (s == "communication") return SubStrategy::kCommunication;
  if (s == "hint") return SubStrategy::kHint;
  fail(ErrorCode::kSchemaError, "unknown sub-agent strategy: " + std::string(s));
}

SummaryStrategy summary_strategy_from_string(std::string_view s) {
  if (s == "consolidation") return SummaryStrategy::kConsolidation;
  if (s == "reconsideration") return SummaryStrategy::kReconsideration;
  if (s == "diversification") return SummaryStrategy::kDiversification;
  if (s == "verification") return SummaryStrategy::kVerification;
  if (s == "rectification") return SummaryStrategy::kRectification;
  if (s == "hint") return SummaryStrategy::kHint;
  fail(ErrorCode::kSchemaError, "unknown summary strategy: " + std::string(s));
}

const char* to_string(VerifierMode mode) {
  switch (mode) {
    case VerifierMode::kExactMatch: return "exact_match";
    case VerifierMode::kLlm: return "llm";
    case VerifierMode::kLlmWithExactFallback: return "llm_with_exact_fallback";
  }
  return "exact_match";
}

VerifierMode verifier_mode_from_string(std::string_view s) {
  if (s == "exact_match") return VerifierMode::kExactMatch;
  if (s == "llm") return VerifierMode::kLlm;
  if (s == "llm_with_exact_fallback") return VerifierMode::kLlmWithExactFallback;
  fail(ErrorCode::kConfigError, "unknown verifier mode: " + std::string(s));
}

void SearchConfig::validate() const {
  if (max_rounds < 1) {
    fail(ErrorCode::kInvalidArgument, "search max_rounds must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json sub_output_to_json(const SubAgentOutput& output) {
  return json{{"response", to_json(output.response)},
              {"answer", output.answer},
              {"canonical", output.canonical}};
}

SubAgentOutput sub_output_from_json(const json& j) {
  SubAgentOutput output;
  output.response = agent_json_from_json(j.at("response"));
  output.answer = j.at("answer").get<std::string>();
  output.canonical = j.at("canonical").get<bool>();
  return output;
}

json round_to_json(const RoundRecord& round) {
  json subs = json::object();
  for (const auto& [perspective, output] : round.sub_outputs) {
    subs[to_string(perspective)] = sub_output_to_json(output);
  }
  json j = json{{"round_index", round.round_index},
                {"sub_outputs", std::move(subs)},
                {"sub_strategy", round.sub_strategy
                                     ? json(to_string(*round.sub_strategy))
                                     : json(nullptr)},
                {"summary_strategy", round.summary_strategy
                                         ? json(to_string(*round.summary_strategy))
                                         : json(nullptr)},
                {"summary_cot", to_json(round.summary_cot)},
                {"candidate_answer", round.candidate_answer},
                {"verifier_verdict", round.verifier_verdict}};
  if (round.interim) {
    j["interim"] = json{{"strategy", round.interim->strategy
                                         ? json(to_string(*round.interim->strategy))
                                         : json(nullptr)},
                        {"summary_cot", to_json(round.interim->cot)},
                        {"candidate_answer", round.interim->candidate_answer},
                        {"verifier_verdict", round.interim->verifier_verdict}};
  }
  return j;
}

RoundRecord round_from_json(const json& j) {
  RoundRecord round;
  round.round_index = j.at("round_index").get<int>();
  for (const auto& [key, value] : j.at("sub_outputs").items()) {
    round.sub_outputs[perspective_from_string(key)] = sub_output_from_json(value);
  }
  if (!j.at("sub_strategy").is_null()) {
    round.sub_strategy = sub_strategy_from_string(j["sub_strategy"].get<std::string>());
  }
  if (!j.at("summary_strategy").is_null()) {
    round.summary_strategy =
        summary_strategy_from_string(j["summary_strategy"].get<std::string>());
  }
  round.summary_cot = cot_from_json(j.at("summary_cot"));
  round.candidate_answer = j.at("candidate_answer").get<std::string>();
  round.verifier_verdict = j.at("verifier_verdict").get<bool>();
  if (j.contains("interim")) {
    SummaryPhase interim;
    if (!j["interim"].at("strategy").is_null()) {
      interim.strategy =
          summary_strategy_from_string(j["interim"]["strategy"].get<std::string>());
    }
    interim.cot = cot_from_json(j["interim"].at("summary_cot"));
    interim.candidate_answer = j["interim"].at("candidate_answer").get<std::string>();
    interim.verifier_verdict = j["interim"].at("verifier_verdict").get<bool>();
    round.interim = std::move(interim);
  }
  return round;
}

}  // namespace

json to_json(const ReasoningTrace& trace) {
  json rounds = json::array();
  for (const auto& round : trace.rounds) rounds.push_back(round_to_json(round));
  json calls = json::array();
  for (const auto& record : trace.call_records) calls.push_back(to_json(record));
  return json{{"context", to_json(trace.context)},
              {"rounds", std::move(rounds)},
              {"solved", trace.solved},
              {"hint_used", trace.hint_used},
              {"natural_cot", trace.natural_cot ? json(*trace.natural_cot) : json(nullptr)},
              {"final_answer",
               trace.final_answer ? json(*trace.final_answer) : json(nullptr)},
              {"abort_reason", trace.abort_reason},
              {"call_records", std::move(calls)}};
}

ReasoningTrace trace_from_json(const json& j) {
  ReasoningTrace trace;
  trace.context = retrieved_context_from_json(j.at("context"));
  for (const auto& round : j.at("rounds")) {
    trace.rounds.push_back(round_from_json(round));
  }
  trace.solved = j.at("solved").get<bool>();
  trace.hint_used = j.at("hint_used").get<bool>();
  if (!j.at("natural_cot").is_null()) {
    trace.natural_cot = j["natural_cot"].get<std::string>();
  }
  if (!j.at("final_answer").is_null()) {
    trace.final_answer = j["final_answer"].get<std::string>();
  }
  trace.abort_reason = j.at("abort_reason").get<std::string>();
  for (const auto& record : j.at("call_records")) {
    trace.call_records.push_back(call_record_from_json(record));
  }
  return trace;
}

json to_json(const SftRecord& record) {
  return json{{"input", record.input},
              {"think", record.think},
              {"answer", record.answer},
              {"provenance", json{{"item_id", record.provenance.item_id},
                                  {"rounds_used", record.provenance.rounds_used},
                                  {"hint_used", record.provenance.hint_used},
                                  {"strategies", record.provenance.strategies}}}};
}

SftRecord sft_record_from_json(const json& j) {
  SftRecord record;
  record.input = j.at("input").get<std::string>();
  record.think = j.at("think").get<std::string>();
  record.answer = j.at("answer").get<std::string>();
  const auto& provenance = j.at("provenance");
  record.provenance.item_id = provenance.at("item_id").get<std::string>();
  record.provenance.rounds_used = provenance.at("rounds_used").get<int>();
  record.provenance.hint_used = provenance.at("hint_used").get<bool>();
  record.provenance.strategies =
      provenance.at("strategies").get<std::vector<std::string>>();
  return record;
}

// ---------------------------------------------------------------------------
// Engine

struct SearchEngine::ItemState {
  const RetrievedContext& ctx;
  DeterministicRng rng;
  std::string gold;
  std::string xra_prompt;
  std::map<Perspective, std::string> questions;
  std::vector<CallRecord> records;

  ItemState(const RetrievedContext& ctx_in, uint64_t seed)
      : ctx(ctx_in), rng(substream_seed(seed, ctx_in.target.item_id)) {}
};

SearchEngine::SearchEngine(const TemplateRegistry& registry, const TaskSpec& task,
                           ChatClient& client, SearchConfig config,
                           GenerationParams generation)
    : registry_(registry),
      task_(task),
      client_(client),
      config_(config),
      generation_(generation) {
  config_.validate();
}

std::string SearchEngine::ask(ItemState& st, const std::string& prompt,
                              const CallTag& tag) const {
  CallRecord record;
  try {
    std::string text =
        client_.complete({ChatMessage{Role::kUser, prompt}}, generation_, tag, &record);
    st.records.push_back(record);
    return text;
  } catch (const Error&) {
    st.records.push_back(record);
    throw;
  }
}

// Sends the prompt, validates the reply, and on a parse/shape failure
// performs exactly one templated re-ask before aborting the item.
std::string SearchEngine::ask_validated(
    ItemState& st, const std::string& prompt, const CallTag& tag,
    const std::function<void(const std::string&)>& validate,
    const char* reask_note) const {
  std::string text = ask(st, prompt, tag);
  try {
    validate(text);
    return text;
  } catch (const Error&) {
    // fall through to the single re-ask
  }
  CallTag reask_tag = tag;
  reask_tag.strategy = tag.strategy + "~reask";
  CallRecord record;
  std::string retried;
  try {
    retried = client_.complete(
        {ChatMessage{Role::kUser, prompt}, ChatMessage{Role::kAssistant, text},
         ChatMessage{Role::kUser, reask_note}},
        generation_, reask_tag, &record);
    st.records.push_back(record);
  } catch (const Error&) {
    st.records.push_back(record);
    throw;
  }
  try {
    validate(retried);
    return retried;
  } catch (const Error& e) {
    fail(ErrorCode::kAgentFailure,
         "invalid agent output after re-ask (" + tag.key() + "): " + e.what());
  }
}

SubAgentOutput SearchEngine::make_sub_output(const AgentJsonResponse& response) const {
  SubAgentOutput output;
  output.response = response;
  const std::string& judgment = response.entries.front().judgment;
  if (auto label = extract_label(judgment, task_)) {
    output.answer = *label;
    output.canonical = true;
  } else {
    output.answer = judgment;
    output.canonical = false;
  }
  return output;
}

std::map<Perspective, SubAgentOutput> SearchEngine::run_subagents_initial(
    ItemState& st) const {
  std::map<Perspective, SubAgentOutput> outputs;
  for (Perspective p : sub_perspectives()) {
    TemplateId id = p == Perspective::kSentiment  ? TemplateId::kSubInitSentiment
                    : p == Perspective::kSemantic ? TemplateId::kSubInitSemantic
                                                  : TemplateId::kSubInitStyle;
    std::string prompt = registry_.render(id, {{"question", st.questions.at(p)}});
    CallTag tag{agent_name(p), 0, "init", st.ctx.target.item_id};
    std::string text = ask_validated(
        st, prompt, tag, [](const std::string& t) { parse_agent_json(t); }, kReaskNote);
    outputs[p] = make_sub_output(parse_agent_json(text));
  }
  return outputs;
}

std::map<Perspective, SubAgentOutput> SearchEngine::run_subagents_strategy(
    ItemState& st, SubStrategy strategy,
    const std::map<Perspective, SubAgentOutput>& previous, int round) const {
  std::map<Perspective, SubAgentOutput> outputs;
  for (Perspective p : sub_perspectives()) {
    std::map<std::string, std::string> slots = {
        {"question", st.questions.at(p)},
        {"previous_response", serialize(previous.at(p).response)},
        {"role", agent_role_text(p)},
    };
    TemplateId id = TemplateId::kSubDoubleCheck;
    if (strategy == SubStrategy::kCommunication) {
      id = TemplateId::kSubCommunication;
      std::vector<Perspective> peers;
      for (Perspective other : sub_perspectives()) {
        if (other != p) peers.push_back(other);
      }
      slots["peer_a_tag"] = peer_tag(peers[0]);
      slots["peer_a_response"] = serialize(previous.at(peers[0]).response);
      slots["peer_a_role"] = peer_role_phrase(peers[0]);
      slots["peer_b_tag"] = peer_tag(peers[1]);
      slots["peer_b_response"] = serialize(previous.at(peers[1]).response);
      slots["peer_b_role"] = peer_role_phrase(peers[1]);
    } else if (strategy == SubStrategy::kHint) {
      id = TemplateId::kSubHint;
      slots["gold_label"] = st.gold;
    }
    std::string prompt = registry_.render(id, slots);
    CallTag tag{agent_name(p), round, to_string(strategy), st.ctx.target.item_id};
    std::string text = ask_validated(
        st, prompt, tag, [](const std::string& t) { parse_agent_json(t); }, kReaskNote);
    outputs[p] = make_sub_output(parse_agent_json(text));
  }
  return outputs;
}

std::pair<CotActionList, std::string> SearchEngine::run_summary(
    ItemState& st, const std::map<Perspective, SubAgentOutput>& subs,
    const std::optional<CotActionList>& prior_cot,
    const std::optional<SummaryStrategy>& strategy, int round) const {
  std::map<std::string, std::string> slots = {
      {"question", st.xra_prompt},
      {"sentiment", serialize(subs.at(Perspective::kSentiment).response)},
      {"semantic", serialize(subs.at(Perspective::kSemantic).response)},
      {"style", serialize(subs.at(Perspective::kStyle).response)},
  };
  TemplateId id = TemplateId::kSumInit;
  std::string strategy_name = "init";
  if (strategy) {
    strategy_name = to_string(*strategy);
    switch (*strategy) {
      case SummaryStrategy::kConsolidation: id = TemplateId::kSumConsolidation; break;
      case SummaryStrategy::kReconsideration: id = TemplateId::kSumReconsideration; break;
      case SummaryStrategy::kDiversification: id = TemplateId::kSumDiversification; break;
      case SummaryStrategy::kVerification: id = TemplateId::kSumVerification; break;
      case SummaryStrategy::kRectification: id = TemplateId::kSumRectification; break;
      case SummaryStrategy::kHint: id = TemplateId::kSumHint; break;
    }
    if (!prior_cot) {
      fail(ErrorCode::kInvalidArgument, "summary strategy requires prior reasoning");
    }
    slots["previous_reasoning"] = serialize(*prior_cot);
    if (*strategy == SummaryStrategy::kHint) {
      slots["gold_label"] = st.gold;
    }
  }
  std::string prompt = registry_.render(id, slots);
  CallTag tag{"summary", round, strategy_name, st.ctx.target.item_id};
  std::string text = ask_validated(
      st, prompt, tag, [](const std::string& t) { parse_summary_cot(t); }, kReaskNote);
  CotActionList cot = parse_summary_cot(text);
  std::string answer = final_answer_of(cot);
  return {std::move(cot), std::move(answer)};
}

bool SearchEngine::verify(const std::string& candidate, const std::string& gold,
                          VerifierMode mode, std::vector<CallRecord>* log,
                          const std::string& item_id, int round) const {
  if (!task_.is_canonical(gold)) {
    fail(ErrorCode::kInvalidArgument, "verify: gold label not canonical: " + gold);
  }
  if (mode == VerifierMode::kExactMatch) {
    auto label = extract_label(candidate, task_);
    return label.has_value() && *label == gold;
  }
  std::string prompt = registry_.render(
      TemplateId::kVerify,
      {{"model_response", candidate}, {"reference_answer", gold}});
  CallRecord record;
  std::string verdict;
  try {
    verdict = client_.complete({ChatMessage{Role::kUser, prompt}}, generation_,
                               CallTag{"verify", round, "", item_id}, &record);
    if (log != nullptr) log->push_back(record);
  } catch (const Error&) {
    if (log != nullptr) log->push_back(record);
    throw;
  }
  std::string folded;
  for (char c : verdict) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      folded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (folded == "true" || folded == "\"true\"") return true;
  if (folded == "false" || folded == "\"false\"") return false;
  if (mode == VerifierMode::kLlmWithExactFallback) {
    auto label = extract_label(candidate, task_);
    return label.has_value() && *label == gold;
  }
  fail(ErrorCode::kVerifierAmbiguous,
       "verifier verdict not in {True, False}: " + verdict.substr(0, 80));
}

SummaryStrategy SearchEngine::random_summary_strategy(ItemState& st) const {
  static const SummaryStrategy pool[] = {
      SummaryStrategy::kConsolidation, SummaryStrategy::kReconsideration,
      SummaryStrategy::kDiversification, SummaryStrategy::kVerification,
      SummaryStrategy::kRectification};
  return pool[st.rng.bounded(5)];
}

SubStrategy SearchEngine::random_sub_strategy(ItemState& st) const {
  static const SubStrategy pool[] = {SubStrategy::kDoubleCheck,
                                     SubStrategy::kCommunication};
  return pool[st.rng.bounded(2)];
}

bool SearchEngine::unanimous_equals(const std::map<Perspective, SubAgentOutput>& subs,
                                    const std::string& failed_candidate) const {
  auto failed_label = extract_label(failed_candidate, task_);
  if (!failed_label) return false;
  for (Perspective p : sub_perspectives()) {
    const auto& output = subs.at(p);
    if (!output.canonical || output.answer != *failed_label) return false;
  }
  return true;
}

ReasoningTrace SearchEngine::search(const RetrievedContext& ctx) const {
  ReasoningTrace trace;
  trace.context = ctx;
  ItemState st(ctx, config_.rng_seed);
  try {
    st.gold = ctx.target.label;
    if (!task_.is_canonical(st.gold)) {
      fail(ErrorCode::kInvalidArgument,
           "item " + ctx.target.item_id + " has non-canonical gold label " + st.gold);
    }
    st.xra_prompt = render_few_shot(registry_, ctx, task_);
    for (Perspective p : sub_perspectives()) {
      st.questions[p] = render_perspective_question(ctx, task_, p);
    }

    auto subs = run_subagents_initial(st);
    CotActionList cot;
    std::string candidate;
    std::tie(cot, candidate) = run_summary(st, subs, std::nullopt, std::nullopt, 0);
    bool verdict = verify(candidate, st.gold, config_.verifier_mode, &st.records,
                          ctx.target.item_id, 0);
    {
      RoundRecord round0;
      round0.round_index = 0;
      round0.sub_outputs = subs;
      round0.summary_cot = cot;
      round0.candidate_answer = candidate;
      round0.verifier_verdict = verdict;
      trace.rounds.push_back(std::move(round0));
    }

    CotActionList previous_cot = cot;
    std::string previous_candidate = candidate;
    int round = 1;
    while (!verdict && round <= config_.max_rounds) {
      RoundRecord record;
      record.round_index = round;
      if (unanimous_equals(subs, previous_candidate)) {
        // Loop avoidance: unanimous sub-agents behind the failed answer
        // are double-checked before the summary moves.
        subs = run_subagents_strategy(st, SubStrategy::kDoubleCheck, subs, round);
        record.sub_strategy = SubStrategy::kDoubleCheck;
        if (unanimous_equals(subs, previous_candidate)) {
          SummaryStrategy strategy = random_summary_strategy(st);
          std::tie(cot, candidate) = run_summary(st, subs, previous_cot, strategy, round);
          record.summary_strategy = strategy;
        } else {
          std::tie(cot, candidate) =
              run_summary(st, subs, std::nullopt, std::nullopt, round);
        }
        verdict = verify(candidate, st.gold, config_.verifier_mode, &st.records,
                         ctx.target.item_id, round);
      } else {
        SummaryStrategy first_strategy = random_summary_strategy(st);
        CotActionList first_cot;
        std::string first_candidate;
        std::tie(first_cot, first_candidate) =
            run_summary(st, subs, previous_cot, first_strategy, round);
        bool first_verdict = verify(first_candidate, st.gold, config_.verifier_mode,
                                    &st.records, ctx.target.item_id, round);
        if (first_verdict) {
          record.summary_strategy = first_strategy;
          cot = first_cot;
          candidate = first_candidate;
          verdict = true;
        } else {
          record.interim =
              SummaryPhase{first_strategy, first_cot, first_candidate, false};
          SubStrategy sub_strategy = random_sub_strategy(st);
          subs = run_subagents_strategy(st, sub_strategy, subs, round);
          record.sub_strategy = sub_strategy;
          SummaryStrategy second_strategy = random_summary_strategy(st);
          std::tie(cot, candidate) =
              run_summary(st, subs, first_cot, second_strategy, round);
          record.summary_strategy = second_strategy;
          verdict = verify(candidate, st.gold, config_.verifier_mode, &st.records,
                           ctx.target.item_id, round);
        }
      }
      record.sub_outputs = subs;
      record.summary_cot = cot;
      record.candidate_answer = candidate;
      record.verifier_verdict = verdict;
      trace.rounds.push_back(std::move(record));
      previous_cot = cot;
      previous_candidate = candidate;
      ++round;
    }

    if (!verdict) {
      // Budget exhausted: one hint round with the gold label injected.
      subs = run_subagents_strategy(st, SubStrategy::kHint, subs, round);
      std::tie(cot, candidate) =
          run_summary(st, subs, previous_cot, SummaryStrategy::kHint, round);
      verdict = verify(candidate, st.gold, config_.verifier_mode, &st.records,
                       ctx.target.item_id, round);
      RoundRecord record;
      record.round_index = round;
      record.sub_outputs = subs;
      record.sub_strategy = SubStrategy::kHint;
      record.summary_strategy = SummaryStrategy::kHint;
      record.summary_cot = cot;
      record.candidate_answer = candidate;
      record.verifier_verdict = verdict;
      trace.rounds.push_back(std::move(record));
      trace.hint_used = true;
    }

    trace.solved = verdict;
    if (trace.solved) {
      try {
        trace.natural_cot = rephrase(st, trace);
        trace.final_answer = refine(st, *trace.natural_cot);
      } catch (const Error& e) {
        // Rephrase/refine failures downgrade the item; the search rounds
        // stay in the trace for audit.
        trace.solved = false;
        trace.natural_cot.reset();
        trace.final_answer.reset();
        trace.abort_reason = std::string("downgraded-for-emission: ") + e.what();
      }
    }
  } catch (const Error& e) {
    trace.solved = false;
    trace.natural_cot.reset();
    trace.final_answer.reset();
    trace.abort_reason = std::string(error_code_name(e.code())) + ": " + e.what();
  }
  trace.call_records = std::move(st.records);
  return trace;
}

std::string SearchEngine::rephrase(ItemState& st, const ReasoningTrace& trace) const {
  std::string thought_process;
  for (const auto& round : trace.rounds) {
    if (round.interim) {
      if (!thought_process.empty()) thought_process += "\n\n";
      thought_process += format_cot_text(round.interim->cot);
    }
    if (!thought_process.empty()) thought_process += "\n\n";
    thought_process += format_cot_text(round.summary_cot);
  }
  std::string prompt = registry_.render(TemplateId::kRephrase,
                                        {{"thought_process", thought_process},
                                         {"question", st.xra_prompt}});
  CallTag tag{"rephrase", -1, "", st.ctx.target.item_id};
  auto validate = [](const std::string& text) {
    json payload = extract_json_payload(text);
    if (!payload.is_object() || !payload.contains("NaturalReasoning") ||
        !payload["NaturalReasoning"].is_string() ||
        payload["NaturalReasoning"].get<std::string>().empty()) {
      fail(ErrorCode::kSchemaError, "rephrase payload lacks NaturalReasoning");
    }
  };
  std::string text = ask_validated(st, prompt, tag, validate, kReaskNote);
  return extract_json_payload(text)["NaturalReasoning"].get<std::string>();
}

std::string SearchEngine::refine(ItemState& st, const std::string& natural_cot) const {
  std::string prompt = registry_.render(TemplateId::kRefine,
                                        {{"internal_thinking", natural_cot},
                                         {"question", st.xra_prompt}});
  CallTag tag{"refine", -1, "", st.ctx.target.item_id};
  // The refined answer must state the verified (gold) label in its first
  // sentence, otherwise emission soundness would not survive this step.
  auto validate = [this, &st](const std::string& text) {
    auto label = extract_label(text, task_);
    if (!label || *label != st.gold) {
      fail(ErrorCode::kSchemaError,
           "refined answer does not state the expected label in its first sentence");
    }
  };
  return ask_validated(st, prompt, tag, validate, kRefineReaskNote);
}

std::pair<std::vector<SftRecord>, EmissionManifest> emit_sft(
    const std::vector<ReasoningTrace>& traces, const SearchConfig& config,
    const TemplateRegistry& registry) {
  std::vector<SftRecord> records;
  EmissionManifest manifest;
  for (const auto& trace : traces) {
    if (!trace.solved || !trace.natural_cot || !trace.final_answer) {
      manifest.skipped_unsolved += 1;
      continue;
    }
    if (trace.hint_used && !config.include_hint_records) {
      manifest.excluded_hint += 1;
      continue;
    }
    const TaskSpec& task = TaskSpec::by_name(trace.context.task_name);
    SftRecord record;
    record.input = render_few_shot(registry, trace.context, task);
    record.think = *trace.natural_cot;
    record.answer = *trace.final_answer;
    record.provenance.item_id = trace.context.target.item_id;
    record.provenance.rounds_used = static_cast<int>(trace.rounds.size());
    record.provenance.hint_used = trace.hint_used;
    for (const auto& round : trace.rounds) {
      if (round.interim && round.interim->strategy) {
        record.provenance.strategies.push_back(
            std::string("sum:") + to_string(*round.interim->strategy));
      }
      if (round.sub_strategy) {
        record.provenance.strategies.push_back(
            std::string("sub:") + to_string(*round.sub_strategy));
      }
      if (round.summary_strategy) {
        record.provenance.strategies.push_back(
            std::string("sum:") + to_string(*round.summary_strategy));
      }
    }
    records.push_back(std::move(record));
    manifest.emitted += 1;
  }
  return {std::move(records), manifest};
}

}  // namespace raar
