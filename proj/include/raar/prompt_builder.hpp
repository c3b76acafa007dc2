#pragma once

#include <string>

#include "raar/task_spec.hpp"
#include "raar/templates.hpp"
#include "raar/vector_index.hpp"

namespace raar {

// Composition helpers that fill the registry templates from retrieval
// contexts. Similarity scores are retained in traces but never shown
// to agents.

// "Text1: ...\nText2: ..." block, one line per neighbor, the label
// appended as "The label of this text: <label>.".
std::string example_block(const std::vector<ScoredNeighbor>& neighbors);

std::string render_zero_shot(const TemplateRegistry& registry, const TaskSpec& task,
                             const std::string& target_text);

// The full retrieval-augmented input: task + target + one example block
// per perspective, in the context's perspective order.
std::string render_few_shot(const TemplateRegistry& registry, const RetrievedContext& ctx,
                            const TaskSpec& task);

// The question one sub-agent sees: task + target + only its own
// perspective's examples.
std::string render_perspective_question(const RetrievedContext& ctx, const TaskSpec& task,
                                        Perspective perspective);

std::string render_sft_record(const TemplateRegistry& registry, const std::string& think,
                              const std::string& answer);

// Role paragraph for a sub-agent, as embedded in its init template and
// passed into the strategy templates' {role} slot.
const std::string& agent_role_text(Perspective perspective);

// Heading used for a perspective's example block ("sentiment intensity",
// "semantic information", "writing style information").
const char* perspective_heading_phrase(Perspective perspective);

// Tag and role naming for the communication template's peer blocks.
const char* peer_tag(Perspective perspective);        // e.g. "semantic agent"
const char* peer_role_phrase(Perspective perspective); // e.g. "semantic analysis expert"

}  // namespace raar
