#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raar/jsonl.hpp"

namespace raar {

// Structured outputs the agents are instructed to emit, plus tolerant
// parsers for the ways models actually wrap them.

struct AgentJsonEntry {
  std::string judgment;
  std::string reason;
};

struct AgentJsonResponse {
  std::vector<AgentJsonEntry> entries;
};

enum class CotAction { kInnerThinking, kFinalConclusion, kVerification };

struct CotStep {
  CotAction action = CotAction::kInnerThinking;
  std::string title;  // required for Inner Thinking steps
  std::string content;
};

struct CotActionList {
  std::vector<CotStep> steps;
};

const char* to_string(CotAction action);
CotAction cot_action_from_string(std::string_view s);

// First fenced JSON block if present, else the first balanced top-level
// object. Throws kParseError when neither yields parseable JSON.
json extract_json_payload(std::string_view raw);

// Validates the {"response":[{"judgment","reason"},...]} shape.
AgentJsonResponse parse_agent_json(std::string_view raw);

// Validates the {"CoT":[{"action",...},...]} shape: at least one Inner
// Thinking (titled), at least one Final Conclusion, ends with a
// Verification. A leading Verification (continuation replies) is fine.
CotActionList parse_summary_cot(std::string_view raw);

// Content of the last Final Conclusion; with several, the latest wins.
const std::string& final_answer_of(const CotActionList& cot);

json to_json(const AgentJsonResponse& response);
json to_json(const CotActionList& cot);
AgentJsonResponse agent_json_from_json(const json& j);
CotActionList cot_from_json(const json& j);

// Canonical serialized forms used when feeding one agent's output into
// another agent's prompt.
std::string serialize(const AgentJsonResponse& response);
std::string serialize(const CotActionList& cot);

// Readable rendering of a CoT for the rephrase prompt.
std::string format_cot_text(const CotActionList& cot);

}  // namespace raar
