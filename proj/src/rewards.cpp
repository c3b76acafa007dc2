#include "raar/rewards.hpp"

#include <algorithm>
#include <cctype>

#include "raar/errors.hpp"
#include "raar/prompt_builder.hpp"

namespace raar {

namespace {

constexpr std::string_view kThinkOpen = "<think>\n";
constexpr std::string_view kThinkToAnswer = "\n</think>\n\n<answer>\n";
constexpr std::string_view kAnswerClose = "</answer>";

std::string_view trim_trailing_whitespace(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

FormatCapture match_output_format(std::string_view output) {
  FormatCapture capture;
  std::string_view s = trim_trailing_whitespace(output);
  if (s.size() < kThinkOpen.size() || s.substr(0, kThinkOpen.size()) != kThinkOpen) {
    return capture;
  }
  if (s.size() < kAnswerClose.size() ||
      s.substr(s.size() - kAnswerClose.size()) != kAnswerClose) {
    return capture;
  }
  std::string_view inner = s.substr(0, s.size() - kAnswerClose.size());

  // Greedy group semantics: take the latest separator positions that
  // still leave every group non-empty.
  size_t separator = inner.rfind(kThinkToAnswer);
  while (separator != std::string_view::npos) {
    if (separator > kThinkOpen.size()) {
      std::string_view think =
          inner.substr(kThinkOpen.size(), separator - kThinkOpen.size());
      std::string_view answer = inner.substr(separator + kThinkToAnswer.size());
      size_t gap = answer.rfind("\n\n");
      while (gap != std::string_view::npos) {
        std::string_view first = answer.substr(0, gap);
        std::string_view rest = answer.substr(gap + 2);
        if (!first.empty() && !rest.empty()) {
          capture.matched = true;
          capture.think = std::string(think);
          capture.answer_first = std::string(first);
          capture.answer_rest = std::string(rest);
          return capture;
        }
        gap = gap == 0 ? std::string_view::npos : answer.rfind("\n\n", gap - 1);
      }
    }
    separator = separator == 0 ? std::string_view::npos
                               : inner.rfind(kThinkToAnswer, separator - 1);
  }
  return capture;
}

std::string first_sentence(std::string_view text) {
  size_t end = text.find_first_of(".!?\n");
  if (end == std::string_view::npos) return std::string(text);
  return std::string(text.substr(0, end));
}

namespace {

// Spelling variants accepted for a canonical label: hyphens may appear
// as spaces or be dropped ("non rumour", "nonrumour").
std::vector<std::string> label_variants(const std::string& label) {
  std::vector<std::string> variants = {lower(label)};
  if (label.find('-') != std::string::npos) {
    std::string spaced = lower(label), fused;
    std::replace(spaced.begin(), spaced.end(), '-', ' ');
    for (char c : lower(label)) {
      if (c != '-') fused += c;
    }
    variants.push_back(spaced);
    variants.push_back(fused);
  }
  return variants;
}

}  // namespace

std::optional<std::string> extract_label(std::string_view text, const TaskSpec& task) {
  std::string sentence = lower(first_sentence(text));

  // Longest canonical label first; matched spans are masked so that a
  // label embedded in a longer one is not double-counted.
  std::vector<std::string> order = task.label_set;
  std::sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a < b;
  });

  std::vector<std::string> found;
  for (const auto& label : order) {
    bool hit = false;
    for (const auto& variant : label_variants(label)) {
      size_t pos = sentence.find(variant);
      while (pos != std::string::npos) {
        hit = true;
        std::fill(sentence.begin() + pos, sentence.begin() + pos + variant.size(), '\0');
        pos = sentence.find(variant, pos + variant.size());
      }
    }
    if (hit) found.push_back(label);
  }
  if (found.size() != 1) return std::nullopt;
  return found.front();
}

double accuracy_reward(std::string_view output, const std::string& gold,
                       const TaskSpec& task) {
  return score_output(output, gold, task).accuracy;
}

RewardScore score_output(std::string_view output, const std::string& gold,
                         const TaskSpec& task) {
  if (!task.is_canonical(gold)) {
    fail(ErrorCode::kInvalidArgument, "gold label is not canonical: " + gold);
  }
  RewardScore score;
  FormatCapture capture = match_output_format(output);
  score.format = capture.matched ? 1 : 0;
  std::string segment = capture.matched ? capture.answer_segment() : std::string(output);
  score.first_sentence = first_sentence(segment);
  score.extracted_label = extract_label(segment, task);
  if (!score.extracted_label) {
    score.accuracy = 0.0;
  } else if (*score.extracted_label == gold) {
    score.accuracy = 1.0;
  } else {
    score.accuracy = 0.1;
  }
  return score;
}

json to_json(const RlRecord& record) {
  return json{{"input", record.input}, {"gold_label", record.gold_label}};
}

RlRecord rl_record_from_json(const json& j) {
  return RlRecord{j.at("input").get<std::string>(), j.at("gold_label").get<std::string>()};
}

std::vector<RlRecord> emit_rl(const std::vector<RetrievedContext>& contexts,
                              const TemplateRegistry& registry, const TaskSpec& task) {
  std::vector<RlRecord> records;
  records.reserve(contexts.size());
  for (const auto& ctx : contexts) {
    if (!task.is_canonical(ctx.target.label)) {
      fail(ErrorCode::kInvalidArgument,
           "context " + ctx.target.item_id + " has non-canonical label " +
               ctx.target.label);
    }
    records.push_back(RlRecord{render_few_shot(registry, ctx, task), ctx.target.label});
  }
  return records;
}

}  // namespace raar
