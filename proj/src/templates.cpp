#include "raar/templates.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "raar/errors.hpp"
#include "raar/jsonl.hpp"

namespace raar {

const std::vector<TemplateId>& all_template_ids() {
  static const std::vector<TemplateId> ids = {
      TemplateId::kZeroShot,          TemplateId::kFewShotRa,
      TemplateId::kSftRecord,         TemplateId::kSubInitSentiment,
      TemplateId::kSubInitSemantic,   TemplateId::kSubInitStyle,
      TemplateId::kSubDoubleCheck,    TemplateId::kSubCommunication,
      TemplateId::kSubHint,           TemplateId::kSumInit,
      TemplateId::kSumConsolidation,  TemplateId::kSumReconsideration,
      TemplateId::kSumDiversification, TemplateId::kSumVerification,
      TemplateId::kSumRectification,  TemplateId::kSumHint,
      TemplateId::kVerify,            TemplateId::kRephrase,
      TemplateId::kRefine,
  };
  return ids;
}

const char* template_file_name(TemplateId id) {
  switch (id) {
    case TemplateId::kZeroShot: return "zero_shot.txt";
    case TemplateId::kFewShotRa: return "few_shot_ra.txt";
    case TemplateId::kSftRecord: return "sft_record.txt";
    case TemplateId::kSubInitSentiment: return "sub_init_sentiment.txt";
    case TemplateId::kSubInitSemantic: return "sub_init_semantic.txt";
    case TemplateId::kSubInitStyle: return "sub_init_style.txt";
    case TemplateId::kSubDoubleCheck: return "sub_double_check.txt";
    case TemplateId::kSubCommunication: return "sub_communication.txt";
    case TemplateId::kSubHint: return "sub_hint.txt";
    case TemplateId::kSumInit: return "sum_init.txt";
    case TemplateId::kSumConsolidation: return "sum_consolidation.txt";
    case TemplateId::kSumReconsideration: return "sum_reconsideration.txt";
    case TemplateId::kSumDiversification: return "sum_diversification.txt";
    case TemplateId::kSumVerification: return "sum_verification.txt";
    case TemplateId::kSumRectification: return "sum_rectification.txt";
    case TemplateId::kSumHint: return "sum_hint.txt";
    case TemplateId::kVerify: return "verify.txt";
    case TemplateId::kRephrase: return "rephrase.txt";
    case TemplateId::kRefine: return "refine.txt";
  }
  return "";
}

namespace {

bool is_marker_start(char c) {
  return (c >= 'a' && c <= 'z') || c == '_';
}

bool is_marker_char(char c) {
  return is_marker_start(c) || (c >= '0' && c <= '9');
}

// {identifier} markers; literal braces in JSON examples never qualify
// because their next character is not a lowercase identifier start.
struct Marker {
  size_t begin;  // position of '{'
  size_t end;    // position one past '}'
  std::string name;
};

std::vector<Marker> scan_markers(const std::string& body) {
  std::vector<Marker> markers;
  size_t i = 0;
  while (i < body.size()) {
    if (body[i] != '{') {
      ++i;
      continue;
    }
    size_t j = i + 1;
    if (j < body.size() && is_marker_start(body[j])) {
      size_t k = j;
      while (k < body.size() && is_marker_char(body[k])) ++k;
      if (k < body.size() && body[k] == '}') {
        markers.push_back(Marker{i, k + 1, body.substr(j, k - j)});
        i = k + 1;
        continue;
      }
    }
    ++i;
  }
  return markers;
}

// Slots the pipeline fills for each template. The loader rejects any
// drift between a body's markers and this table.
const std::map<TemplateId, std::set<std::string>>& expected_slots() {
  static const std::map<TemplateId, std::set<std::string>> table = {
      {TemplateId::kZeroShot, {"task_description", "target_text"}},
      {TemplateId::kFewShotRa,
       {"task_description", "target_text", "sentiment_examples", "semantic_examples",
        "style_examples"}},
      {TemplateId::kSftRecord, {"think", "answer"}},
      {TemplateId::kSubInitSentiment, {"question"}},
      {TemplateId::kSubInitSemantic, {"question"}},
      {TemplateId::kSubInitStyle, {"question"}},
      {TemplateId::kSubDoubleCheck, {"question", "previous_response", "role"}},
      {TemplateId::kSubCommunication,
       {"question", "previous_response", "role", "peer_a_tag", "peer_a_response",
        "peer_a_role", "peer_b_tag", "peer_b_response", "peer_b_role"}},
      {TemplateId::kSubHint, {"question", "previous_response", "role", "gold_label"}},
      {TemplateId::kSumInit, {"question", "sentiment", "semantic", "style"}},
      {TemplateId::kSumConsolidation,
       {"question", "sentiment", "semantic", "style", "previous_reasoning"}},
      {TemplateId::kSumReconsideration,
       {"question", "sentiment", "semantic", "style", "previous_reasoning"}},
      {TemplateId::kSumDiversification,
       {"question", "sentiment", "semantic", "style", "previous_reasoning"}},
      {TemplateId::kSumVerification,
       {"question", "sentiment", "semantic", "style", "previous_reasoning"}},
      {TemplateId::kSumRectification,
       {"question", "sentiment", "semantic", "style", "previous_reasoning"}},
      {TemplateId::kSumHint,
       {"question", "sentiment", "semantic", "style", "previous_reasoning", "gold_label"}},
      {TemplateId::kVerify, {"model_response", "reference_answer"}},
      {TemplateId::kRephrase, {"thought_process", "question"}},
      {TemplateId::kRefine, {"internal_thinking", "question"}},
  };
  return table;
}

}  // namespace

std::vector<std::string> scan_slot_markers(const std::string& body) {
  std::vector<std::string> names;
  for (const auto& marker : scan_markers(body)) {
    if (std::find(names.begin(), names.end(), marker.name) == names.end()) {
      names.push_back(marker.name);
    }
  }
  return names;
}

TemplateRegistry TemplateRegistry::load(const std::filesystem::path& dir) {
  TemplateRegistry registry;
  for (TemplateId id : all_template_ids()) {
    std::filesystem::path path = dir / template_file_name(id);
    if (!std::filesystem::exists(path)) {
      fail(ErrorCode::kTemplateMissing, "missing template body: " + path.string());
    }
    std::string body = read_text_file(path);
    if (!body.empty() && body.back() == '\n') {
      body.pop_back();  // bodies do not include the file's final newline
    }
    auto names = scan_slot_markers(body);
    std::set<std::string> found(names.begin(), names.end());
    const auto& expected = expected_slots().at(id);
    if (found != expected) {
      std::string detail;
      for (const auto& name : found) {
        if (!expected.count(name)) detail += " unexpected:{" + name + "}";
      }
      for (const auto& name : expected) {
        if (!found.count(name)) detail += " missing:{" + name + "}";
      }
      fail(ErrorCode::kSchemaError,
           std::string("template ") + template_file_name(id) +
               " slot markers diverge from call sites:" + detail);
    }
    registry.slots_[id] = std::move(names);
    registry.bodies_[id] = std::move(body);
  }
  return registry;
}

TemplateRegistry TemplateRegistry::load_default() {
  return load(std::filesystem::path(RAAR_DEFAULT_TEMPLATE_DIR));
}

const std::string& TemplateRegistry::body(TemplateId id) const {
  auto it = bodies_.find(id);
  if (it == bodies_.end()) {
    fail(ErrorCode::kTemplateMissing,
         std::string("no body registered for ") + template_file_name(id));
  }
  return it->second;
}

const std::vector<std::string>& TemplateRegistry::slots(TemplateId id) const {
  return slots_.at(id);
}

std::string TemplateRegistry::render(TemplateId id,
                                     const std::map<std::string, std::string>& slots) const {
  const std::string& tpl = body(id);
  auto markers = scan_markers(tpl);
  std::set<std::string> referenced;
  for (const auto& marker : markers) referenced.insert(marker.name);
  for (const auto& [name, value] : slots) {
    if (!referenced.count(name)) {
      fail(ErrorCode::kUnknownSlot,
           std::string("template ") + template_file_name(id) + " has no slot {" + name + "}");
    }
  }
  std::string result;
  result.reserve(tpl.size());
  size_t cursor = 0;
  for (const auto& marker : markers) {
    auto it = slots.find(marker.name);
    if (it == slots.end()) {
      fail(ErrorCode::kMissingSlot,
           std::string("template ") + template_file_name(id) + " requires slot {" +
               marker.name + "}");
    }
    result.append(tpl, cursor, marker.begin - cursor);
    result.append(it->second);
    cursor = marker.end;
  }
  result.append(tpl, cursor, tpl.size() - cursor);
  return result;
}

}  // namespace raar
