#include "raar/agent_output.hpp"

#include <algorithm>
#include <cctype>

#include "raar/errors.hpp"

namespace raar {

const char* to_string(CotAction action) {
  switch (action) {
    case CotAction::kInnerThinking: return "Inner Thinking";
    case CotAction::kFinalConclusion: return "Final Conclusion";
    case CotAction::kVerification: return "Verification";
  }
  return "Inner Thinking";
}

CotAction cot_action_from_string(std::string_view s) {
  if (s == "Inner Thinking") return CotAction::kInnerThinking;
  if (s == "Final Conclusion") return CotAction::kFinalConclusion;
  if (s == "Verification") return CotAction::kVerification;
  fail(ErrorCode::kSchemaError, "unknown CoT action: " + std::string(s));
}

namespace {

// Strict parse first; if that fails, drop trailing commas before ] or }
// (a common model quirk the instructed format itself exhibits).
json parse_lenient(const std::string& text) {
  json parsed = json::parse(text, nullptr, false);
  if (!parsed.is_discarded()) return parsed;
  std::string cleaned;
  cleaned.reserve(text.size());
  bool in_string = false;
  bool escaped = false;
  for (size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      cleaned += c;
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      cleaned += c;
      continue;
    }
    if (c == ',') {
      size_t j = i + 1;
      while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      if (j < text.size() && (text[j] == ']' || text[j] == '}')) {
        continue;  // skip the trailing comma
      }
    }
    cleaned += c;
  }
  return json::parse(cleaned, nullptr, false);
}

std::optional<std::string> first_fenced_block(std::string_view raw) {
  size_t fence = raw.find("```");
  if (fence == std::string_view::npos) return std::nullopt;
  size_t content_start = fence + 3;
  // Skip an optional language tag up to end of line.
  size_t eol = raw.find('\n', content_start);
  if (eol == std::string_view::npos) return std::nullopt;
  std::string_view tag = raw.substr(content_start, eol - content_start);
  bool tag_is_word = !tag.empty() &&
                     std::all_of(tag.begin(), tag.end(), [](unsigned char c) {
                       return std::isalnum(c) || c == '_' || c == '\r';
                     });
  size_t body_start = tag.empty() || tag_is_word ? eol + 1 : content_start;
  size_t closing = raw.find("```", body_start);
  if (closing == std::string_view::npos) return std::nullopt;
  return std::string(raw.substr(body_start, closing - body_start));
}

std::optional<std::string> first_balanced_object(std::string_view raw) {
  size_t start = raw.find('{');
  while (start != std::string_view::npos) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < raw.size(); ++i) {
      char c = raw[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) {
          return std::string(raw.substr(start, i - start + 1));
        }
      }
    }
    start = raw.find('{', start + 1);
  }
  return std::nullopt;
}

}  // namespace

json extract_json_payload(std::string_view raw) {
  if (auto fenced = first_fenced_block(raw)) {
    json parsed = parse_lenient(*fenced);
    if (!parsed.is_discarded()) return parsed;
    // A fence that is not JSON falls through to the balanced scan.
  }
  if (auto object = first_balanced_object(raw)) {
    json parsed = parse_lenient(*object);
    if (!parsed.is_discarded()) return parsed;
  }
  fail(ErrorCode::kParseError,
       "no parseable JSON payload in model output: " + std::string(raw.substr(0, 200)));
}

AgentJsonResponse agent_json_from_json(const json& j) {
  if (!j.is_object() || !j.contains("response") || !j["response"].is_array()) {
    fail(ErrorCode::kSchemaError, "agent output lacks a \"response\" array");
  }
  AgentJsonResponse response;
  for (const auto& entry : j["response"]) {
    if (!entry.is_object() || !entry.contains("judgment") || !entry.contains("reason") ||
        !entry["judgment"].is_string() || !entry["reason"].is_string()) {
      fail(ErrorCode::kSchemaError, "response entry needs string judgment and reason");
    }
    AgentJsonEntry parsed{entry["judgment"].get<std::string>(),
                          entry["reason"].get<std::string>()};
    if (parsed.judgment.empty() || parsed.reason.empty()) {
      fail(ErrorCode::kSchemaError, "response entry has empty judgment or reason");
    }
    response.entries.push_back(std::move(parsed));
  }
  if (response.entries.empty()) {
    fail(ErrorCode::kSchemaError, "agent output has an empty response list");
  }
  return response;
}

AgentJsonResponse parse_agent_json(std::string_view raw) {
  return agent_json_from_json(extract_json_payload(raw));
}

CotActionList cot_from_json(const json& j) {
  if (!j.is_object() || !j.contains("CoT") || !j["CoT"].is_array()) {
    fail(ErrorCode::kSchemaError, "summary output lacks a \"CoT\" array");
  }
  CotActionList cot;
  for (const auto& entry : j["CoT"]) {
    if (!entry.is_object() || !entry.contains("action") || !entry.contains("content") ||
        !entry["action"].is_string() || !entry["content"].is_string()) {
      fail(ErrorCode::kSchemaError, "CoT entry needs string action and content");
    }
    CotStep step;
    step.action = cot_action_from_string(entry["action"].get<std::string>());
    step.content = entry["content"].get<std::string>();
    if (entry.contains("title")) {
      if (!entry["title"].is_string()) {
        fail(ErrorCode::kSchemaError, "CoT title must be a string");
      }
      step.title = entry["title"].get<std::string>();
    }
    if (step.action == CotAction::kInnerThinking && step.title.empty()) {
      fail(ErrorCode::kSchemaError, "Inner Thinking steps carry a title");
    }
    cot.steps.push_back(std::move(step));
  }
  if (cot.steps.empty()) {
    fail(ErrorCode::kSchemaError, "CoT list is empty");
  }
  bool has_thinking = false, has_conclusion = false;
  for (const auto& step : cot.steps) {
    has_thinking |= step.action == CotAction::kInnerThinking;
    has_conclusion |= step.action == CotAction::kFinalConclusion;
  }
  if (!has_thinking) {
    fail(ErrorCode::kSchemaError, "CoT lacks an Inner Thinking step");
  }
  if (!has_conclusion) {
    fail(ErrorCode::kSchemaError, "CoT lacks a Final Conclusion");
  }
  if (cot.steps.back().action != CotAction::kVerification) {
    fail(ErrorCode::kSchemaError, "CoT must end with a Verification step");
  }
  return cot;
}

CotActionList parse_summary_cot(std::string_view raw) {
  return cot_from_json(extract_json_payload(raw));
}

const std::string& final_answer_of(const CotActionList& cot) {
  const std::string* answer = nullptr;
  for (const auto& step : cot.steps) {
    if (step.action == CotAction::kFinalConclusion) answer = &step.content;
  }
  if (answer == nullptr) {
    fail(ErrorCode::kSchemaError, "CoT has no Final Conclusion");
  }
  return *answer;
}

json to_json(const AgentJsonResponse& response) {
  json entries = json::array();
  for (const auto& entry : response.entries) {
    entries.push_back(json{{"judgment", entry.judgment}, {"reason", entry.reason}});
  }
  return json{{"response", std::move(entries)}};
}

json to_json(const CotActionList& cot) {
  json steps = json::array();
  for (const auto& step : cot.steps) {
    json entry = json::object();
    entry["action"] = to_string(step.action);
    if (step.action == CotAction::kInnerThinking) entry["title"] = step.title;
    entry["content"] = step.content;
    steps.push_back(std::move(entry));
  }
  return json{{"CoT", std::move(steps)}};
}

std::string serialize(const AgentJsonResponse& response) {
  return to_json(response).dump();
}

std::string serialize(const CotActionList& cot) { return to_json(cot).dump(); }

std::string format_cot_text(const CotActionList& cot) {
  std::string text;
  for (const auto& step : cot.steps) {
    if (!text.empty()) text += '\n';
    text += to_string(step.action);
    if (!step.title.empty()) text += " (" + step.title + ")";
    text += ": " + step.content;
  }
  return text;
}

}  // namespace raar
