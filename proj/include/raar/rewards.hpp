#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "raar/task_spec.hpp"
#include "raar/templates.hpp"
#include "raar/vector_index.hpp"

namespace raar {

// Rule-based scoring of model outputs: a binary format reward for the
// <think>/<answer> structure and a {1.0, 0.1, 0.0} accuracy reward from
// the label stated in the answer's first sentence.

// Captured segments of a format-conforming output. The anchored pattern is
//   <think>\n(.+)\n</think>\n\n<answer>\n(.+)\n\n(.+)</answer>
// with dot-matches-newline groups and optional trailing whitespace.
struct FormatCapture {
  bool matched = false;
  std::string think;
  std::string answer_first;  // first paragraph, carries the label sentence
  std::string answer_rest;

  std::string answer_segment() const { return answer_first + "\n\n" + answer_rest; }
};

FormatCapture match_output_format(std::string_view output);

inline int format_reward(std::string_view output) {
  return match_output_format(output).matched ? 1 : 0;
}

// Everything up to the first '.', '!', '?' or newline.
std::string first_sentence(std::string_view text);

// Case-insensitive canonical-label search over the first sentence,
// longest label first so substring pairs like rumour/non-rumour cannot
// collide. Zero or conflicting distinct matches yield nullopt.
std::optional<std::string> extract_label(std::string_view text, const TaskSpec& task);

// 1.0 correct, 0.1 wrong label, 0.0 no label. The scored segment is the
// captured answer block when the format matches, else the whole output.
double accuracy_reward(std::string_view output, const std::string& gold,
                       const TaskSpec& task);

struct RewardScore {
  int format = 0;
  double accuracy = 0.0;
  std::optional<std::string> extracted_label;
  std::string first_sentence;

  // Unweighted convenience sum of the two components.
  double total() const { return static_cast<double>(format) + accuracy; }
};

RewardScore score_output(std::string_view output, const std::string& gold,
                         const TaskSpec& task);

// One RL training record: the retrieval-augmented input and its gold label.
struct RlRecord {
  std::string input;
  std::string gold_label;
};

json to_json(const RlRecord& record);
RlRecord rl_record_from_json(const json& j);

// One record per context from the RL half of the split; inputs rendered
// with the same few-shot template the SFT half uses.
std::vector<RlRecord> emit_rl(const std::vector<RetrievedContext>& contexts,
                              const TemplateRegistry& registry, const TaskSpec& task);

}  // namespace raar
