#pragma once

// Prompt skeletons and tag extraction. Skeleton texts are pinned by golden
// files under tests/golden/; edit both together or byte-exact tests break.

#include <optional>
#include <string>
#include <vector>

#include "kpref/errors.hpp"

namespace kpref {

enum class TemplateKind {
    AlpacaWithInput,
    AlpacaNoInput,
    ContextQA,
    ExplicitAssumptionInQuestion,
    ExplicitAssumptionInInstruction,
    SynthMHQuestion,
    SynthMHPassage,
    SynthMHDerivation,
    SynthSHCounterfactual,
    SynthSHFactual,
};

const char* template_kind_name(TemplateKind kind);
TemplateKind template_kind_from_name(const std::string& name);
std::vector<TemplateKind> all_template_kinds();

// In-context exemplar. `assumption` is only rendered by the
// assumption-in-instruction kind; empty means none.
struct Exemplar {
    std::string input;
    std::string response;
    std::string assumption;
};

struct RenderContext {
    std::optional<std::string> instruction;
    std::optional<std::string> input;
    std::optional<std::string> question;
    std::optional<std::vector<std::string>> passages;
    std::optional<std::string> assumption;
    std::vector<Exemplar> exemplars;
    std::optional<std::string> passage;        // single-hop source passage
    std::optional<std::string> triple;         // rendered "(h, r, t)"
    std::optional<std::string> head_label;
    std::optional<std::string> tail_label;
    std::optional<std::string> other_triples;  // rendered list
    std::optional<std::string> fact_chain;     // rendered list
    std::optional<std::string> answer;
    std::optional<std::string> gold_knowledge; // rendered list
};

// Missing slots raise TemplateError naming the slot. Zero exemplars omit
// the exemplar block entirely.
std::string render(TemplateKind kind, const RenderContext& ctx);

// Context-QA variant with no retrieved block, for parametric probing.
std::string render_closed_book(const RenderContext& ctx);

// The instruction sentence of the context-QA template (reused as the
// training-example instruction).
const std::string& context_qa_instruction();

// The "### Input:" body of the context-QA templates: tagged question line
// plus tagged retrieved block. Training examples reuse this byte-for-byte.
std::string qa_input_block(const std::string& question,
                           const std::vector<std::string>& passages);

// Content of the first <tag>...</tag> span, trimmed; nullopt when absent.
std::optional<std::string> extract_tagged(const std::string& raw, const std::string& tag);

// Every non-overlapping <passage>...</passage> span, in order, trimmed.
std::vector<std::string> extract_all_passages(const std::string& raw);

// Passages are newline-collapsed and joined one-per-line inside the
// <retrieved> block; this recovers the list.
std::vector<std::string> split_retrieved_block(const std::string& block);

std::string trim(const std::string& s);

} // namespace kpref
