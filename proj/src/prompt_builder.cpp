#include "raar/prompt_builder.hpp"

#include "raar/errors.hpp"

namespace raar {

std::string example_block(const std::vector<ScoredNeighbor>& neighbors) {
  std::string block;
  for (size_t i = 0; i < neighbors.size(); ++i) {
    if (i > 0) block += '\n';
    block += "Text" + std::to_string(i + 1) + ": " + neighbors[i].item.text +
             ". The label of this text: " + neighbors[i].item.label + ".";
  }
  return block;
}

std::string render_zero_shot(const TemplateRegistry& registry, const TaskSpec& task,
                             const std::string& target_text) {
  return registry.render(TemplateId::kZeroShot,
                         {{"task_description", task.task_description},
                          {"target_text", target_text}});
}

std::string render_few_shot(const TemplateRegistry& registry, const RetrievedContext& ctx,
                            const TaskSpec& task) {
  std::map<std::string, std::string> slots = {
      {"task_description", task.task_description},
      {"target_text", ctx.target.text},
      {"sentiment_examples", example_block(ctx.neighbors_for(Perspective::kSentiment))},
      {"semantic_examples", example_block(ctx.neighbors_for(Perspective::kSemantic))},
      {"style_examples", example_block(ctx.neighbors_for(Perspective::kStyle))},
  };
  return registry.render(TemplateId::kFewShotRa, slots);
}

const char* perspective_heading_phrase(Perspective perspective) {
  switch (perspective) {
    case Perspective::kSentiment: return "sentiment intensity";
    case Perspective::kSemantic: return "semantic information";
    case Perspective::kStyle: return "writing style information";
  }
  return "";
}

std::string render_perspective_question(const RetrievedContext& ctx, const TaskSpec& task,
                                        Perspective perspective) {
  std::string question = "Task: " + task.task_description +
                         "\nTarget text: " + ctx.target.text +
                         "\n\nHere are a few examples retrieved through " +
                         perspective_heading_phrase(perspective) + ":\n" +
                         example_block(ctx.neighbors_for(perspective));
  return question;
}

std::string render_sft_record(const TemplateRegistry& registry, const std::string& think,
                              const std::string& answer) {
  return registry.render(TemplateId::kSftRecord, {{"think", think}, {"answer", answer}});
}

const std::string& agent_role_text(Perspective perspective) {
  static const std::string sentiment =
      "You are an expert in sentiment analysis. You need to collaborate with a semantic "
      "analysis expert and a writing style analysis expert to address the above problem. "
      "Your primary responsibility is the sentiment analysis component. Respond to the "
      "question from the perspective of sentiment analysis, incorporating retrieved "
      "examples. Provide your judgment along with well-reasoned evidence or explanations.";
  static const std::string semantic =
      "You are an expert in semantic analysis. You need to collaborate with a sentiment "
      "analysis expert and a writing style analysis expert to address the above problem. "
      "Your primary responsibility is the semantic analysis component. Respond to the "
      "question from the perspective of semantic analysis, incorporating retrieved "
      "examples. Provide your judgment along with well-reasoned evidence or explanations.";
  static const std::string style =
      "You are an expert in writing style analysis. You need to collaborate with a "
      "sentiment analysis expert and a semantic analysis expert to address the above "
      "problem. Your primary responsibility is the writing style analysis component. "
      "Respond to the question from the perspective of writing style analysis, "
      "incorporating retrieved examples. Provide your judgment along with well-reasoned "
      "evidence or explanations.";
  switch (perspective) {
    case Perspective::kSentiment: return sentiment;
    case Perspective::kSemantic: return semantic;
    case Perspective::kStyle: return style;
  }
  return sentiment;
}

const char* peer_tag(Perspective perspective) {
  switch (perspective) {
    case Perspective::kSentiment: return "sentiment agent";
    case Perspective::kSemantic: return "semantic agent";
    case Perspective::kStyle: return "style agent";
  }
  return "";
}

const char* peer_role_phrase(Perspective perspective) {
  switch (perspective) {
    case Perspective::kSentiment: return "sentiment analysis expert";
    case Perspective::kSemantic: return "semantic analysis expert";
    case Perspective::kStyle: return "writing style analysis expert";
  }
  return "";
}

}  // namespace raar
