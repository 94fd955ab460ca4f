#include "kpref/prompts.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace kpref {

const char* template_kind_name(TemplateKind kind) {
    switch (kind) {
        case TemplateKind::AlpacaWithInput: return "alpaca_with_input";
        case TemplateKind::AlpacaNoInput: return "alpaca_no_input";
        case TemplateKind::ContextQA: return "context_qa";
        case TemplateKind::ExplicitAssumptionInQuestion: return "explicit_assumption_in_question";
        case TemplateKind::ExplicitAssumptionInInstruction: return "explicit_assumption_in_instruction";
        case TemplateKind::SynthMHQuestion: return "synth_mh_question";
        case TemplateKind::SynthMHPassage: return "synth_mh_passage";
        case TemplateKind::SynthMHDerivation: return "synth_mh_derivation";
        case TemplateKind::SynthSHCounterfactual: return "synth_sh_counterfactual";
        case TemplateKind::SynthSHFactual: return "synth_sh_factual";
    }
    return "?";
}

std::vector<TemplateKind> all_template_kinds() {
    return {TemplateKind::AlpacaWithInput, TemplateKind::AlpacaNoInput,
            TemplateKind::ContextQA, TemplateKind::ExplicitAssumptionInQuestion,
            TemplateKind::ExplicitAssumptionInInstruction, TemplateKind::SynthMHQuestion,
            TemplateKind::SynthMHPassage, TemplateKind::SynthMHDerivation,
            TemplateKind::SynthSHCounterfactual, TemplateKind::SynthSHFactual};
}

TemplateKind template_kind_from_name(const std::string& name) {
    for (auto k : all_template_kinds())
        if (name == template_kind_name(k)) return k;
    throw ConfigError("unknown template kind: " + name);
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

namespace {

const std::string kAlpacaPreamble =
    "Below is an instruction that describes a task, paired with an input that "
    "provides further context. Write a response that appropriately completes the request.";

const std::string kAlpacaPreambleNoInput =
    "Below is an instruction that describes a task. Write a response that "
    "appropriately completes the request.";

const std::string kQaInstruction =
    "Answer the **question** using the **retrieved documents** as reference "
    "information. Your answer should be short (a few words or an entity). Output "
    "your final **answer** enclosed by <answer> and </answer> tags.";

const std::string kClosedBookInstruction =
    "Answer the **question**. Your answer should be short (a few words or an "
    "entity). Output your final **answer** enclosed by <answer> and </answer> tags.";

const std::string kAssumptionInQuestionDirective =
    "For ANY knowledge conflicts and ANY information conflicts, STRICTLY "
    "PRIORITIZE assumptions in the input question over retrieved documents, and "
    "STRICTLY PRIORITIZE the retrieved documents over your parametric knowledge.";

const std::string kAssumptionInInstructionDirective =
    "For ANY knowledge conflicts and ANY information conflicts, STRICTLY "
    "PRIORITIZE instruction over input and STRICTLY PRIORITIZE input over your "
    "parametric knowledge.";

template <typename T>
const T& slot(const std::optional<T>& v, const char* name) {
    if (!v) throw TemplateError(std::string("missing template slot: ") + name);
    return *v;
}

std::string collapse_newlines(const std::string& s) {
    std::string out = s;
    std::replace(out.begin(), out.end(), '\n', ' ');
    out.erase(std::remove(out.begin(), out.end(), '\r'), out.end());
    return out;
}

std::string join_passages(const std::vector<std::string>& passages) {
    std::string out;
    for (size_t i = 0; i < passages.size(); ++i) {
        if (i) out += "\n";
        out += collapse_newlines(passages[i]);
    }
    return out;
}

std::string exemplar_block(const std::vector<Exemplar>& exemplars, bool with_assumption) {
    std::string out;
    for (size_t i = 0; i < exemplars.size(); ++i) {
        if (i) out += "\n\n";
        if (with_assumption && !exemplars[i].assumption.empty())
            out += exemplars[i].assumption + "\n\n";
        out += "### Input:\n" + exemplars[i].input + "\n\n### Response:\n"
            + exemplars[i].response;
    }
    return out;
}

std::string qa_shell(const std::string& preamble, const std::string& instruction,
                     const std::vector<Exemplar>& exemplars, bool exemplar_assumptions,
                     const std::string& repeated_line, const std::string& input_body) {
    std::string out = preamble + "\n\n### Instruction:\n" + instruction + "\n\n";
    if (!exemplars.empty())
        out += exemplar_block(exemplars, exemplar_assumptions) + "\n\n";
    if (!repeated_line.empty()) out += repeated_line + "\n\n";
    out += "### Input:\n" + input_body + "\n\n### Response:";
    return out;
}

std::string question_line(const std::string& q) {
    return "<question> " + collapse_newlines(q) + " </question>";
}

std::string retrieved_line(const std::vector<std::string>& passages) {
    return "<retrieved> " + join_passages(passages) + " </retrieved>";
}

} // namespace

const std::string& context_qa_instruction() { return kQaInstruction; }

std::string qa_input_block(const std::string& question,
                           const std::vector<std::string>& passages) {
    return question_line(question) + "\n" + retrieved_line(passages);
}

std::string render(TemplateKind kind, const RenderContext& ctx) {
    switch (kind) {
        case TemplateKind::AlpacaWithInput:
            return kAlpacaPreamble + "\n\n### Instruction:\n"
                + slot(ctx.instruction, "instruction") + "\n\n### Input:\n"
                + slot(ctx.input, "input") + "\n\n### Response:";

        case TemplateKind::AlpacaNoInput:
            return kAlpacaPreambleNoInput + "\n\n### Instruction:\n"
                + slot(ctx.instruction, "instruction") + "\n\n### Response:";

        case TemplateKind::ContextQA:
            return qa_shell(kAlpacaPreamble, kQaInstruction, ctx.exemplars, false, "",
                            question_line(slot(ctx.question, "question")) + "\n"
                            + retrieved_line(slot(ctx.passages, "passages")));

        case TemplateKind::ExplicitAssumptionInQuestion:
            return qa_shell(kAlpacaPreamble,
                            kQaInstruction + " " + kAssumptionInQuestionDirective,
                            ctx.exemplars, false, "",
                            question_line(slot(ctx.question, "question")) + "\n"
                            + retrieved_line(slot(ctx.passages, "passages")));

        case TemplateKind::ExplicitAssumptionInInstruction:
            return qa_shell(kAlpacaPreamble + " " + kAssumptionInInstructionDirective,
                            slot(ctx.assumption, "assumption") + " " + kQaInstruction,
                            ctx.exemplars, true,
                            "Again, " + slot(ctx.assumption, "assumption"),
                            question_line(slot(ctx.question, "question")) + "\n"
                            + retrieved_line(slot(ctx.passages, "passages")));

        case TemplateKind::SynthMHQuestion: {
            const std::string& head = slot(ctx.head_label, "head_label");
            std::string out =
                "You are a powerful multi-hop question generator. Using the provided "
                "fact chain (relation triples in order), generate a multi-hop question "
                "that incorporates only the head entity (" + head + ") and all the "
                "relations from the relation triples. The tail entity ("
                + slot(ctx.tail_label, "tail_label") + ") should serve as the answer "
                "based on the knowledge contained within the fact chain. Ensure that "
                "the generated question excludes all entities from the fact chain, "
                "except for the head entity (" + head + "). Each relation triple "
                "should be treated as a fact.";
            out += "\n\n";
            if (!ctx.exemplars.empty()) out += exemplar_block(ctx.exemplars, false) + "\n\n";
            out += "### Input:\n" + slot(ctx.fact_chain, "fact_chain") + "\n\n### Response:";
            return out;
        }

        case TemplateKind::SynthMHPassage:
            return "Generate a realistic passage of about 50 words that supports the "
                "fact expressed by the following relation triple:\n<relation triple> "
                + slot(ctx.triple, "triple") + " </relation triple>\nYour generated "
                "passage should avoid mentioning any other facts or details that imply "
                "different tail entities for the same head entity ("
                + slot(ctx.head_label, "head_label") + ") and relation ("
                + slot(ctx.tail_label, "tail_label") + ") of the above relation "
                "triple. Meanwhile, your generated passage should avoid mentioning and "
                "also avoid conflicting with the facts expressed by all the following "
                "relation triples:\n" + slot(ctx.other_triples, "other_triples")
                + "\nNow, follow the above requirements and provide your generated "
                "passage enclosed by <passage> and </passage> tags.";

        case TemplateKind::SynthMHDerivation:
            return "Given the multi-hop question, the answer, and the relation triples "
                "as the underlying gold knowledge required to derive the answer, "
                "generate a coherent, concise, and step-by-step explanation for how to "
                "derive the answer based on the question and the knowledge contained "
                "within the relation triples.\nWhile you should leverage the "
                "information encapsulated in the relation triples, avoid explicitly "
                "mentioning the triples themselves. Instead, focus on presenting each "
                "piece of knowledge as if the knowledge was summarized from some "
                "reference documents.\n<question> " + slot(ctx.question, "question")
                + " </question>\n<answer> " + slot(ctx.answer, "answer")
                + " </answer>\n<gold knowledge> " + slot(ctx.gold_knowledge, "gold_knowledge")
                + " </gold knowledge>\nNow, provide your generated answer explanation "
                "enclosed by <explanation> and </explanation> tags.";

        case TemplateKind::SynthSHCounterfactual:
            return "Based on the provided passage and your knowledge, generate a "
                "challenging counterfactual question answer pair and the corresponding "
                "concise and step-by-step answer derivation explanation. The question "
                "must introduce counterfactual and hypothetical conditions or "
                "incidents. The answer must:\n"
                "1. be PRECISE (avoid vagueness, uncertainty, and vague quantifiers "
                "such as 'fewer', 'less', 'longer', 'increased', etc.),\n"
                "2. be CONCISE (an entity or a few words),\n"
                "3. be CHALLENGING to get (avoid simple negation of facts or other "
                "trivial answers), and\n"
                "4. be UNIQUELY DERIVABLE with counterfactual reasoning based on the "
                "passage, the hypothetical question, and commonsense. If the provided "
                "passage lacks sufficient information (e.g., external knowledge or "
                "specific commonsense is needed) to make sure the answer is uniquely "
                "derivable, further provide the additional information as an "
                "additional realistic passage enclosed by <passage> and </passage> "
                "tags.\n\n"
                "The generated question should be enclosed by <question> and "
                "</question> tags, the generated answer should be enclosed by <answer> "
                "and </answer> tags, and the generated answer derivation explanation "
                "should be enclosed by <explanation> and </explanation> tags.\n"
                "Here is the provided passage:\n<passage> "
                + collapse_newlines(slot(ctx.passage, "passage")) + " </passage>";

        case TemplateKind::SynthSHFactual:
            return "Based on the provided passage and your knowledge, generate a "
                "challenging question answer pair and the corresponding concise and "
                "step-by-step answer derivation explanation.\nThe answer must:\n"
                "1. be PRECISE (avoid vagueness, uncertainty, and vague quantifiers "
                "such as 'fewer', 'less', 'longer', 'increased', etc.),\n"
                "2. be CONCISE (an entity or a few words),\n"
                "3. be CHALLENGING to get (avoid trivial answers), and\n"
                "4. be UNIQUELY DERIVABLE with reasoning based on the passage. If the "
                "provided passage lacks sufficient information (e.g., external "
                "knowledge is needed) to make sure the answer is uniquely derivable, "
                "further provide the additional information as an additional realistic "
                "passage enclosed by <passage> and </passage> tags.\n\n"
                "The generated question should be enclosed by <question> and "
                "</question> tags, the generated answer should be enclosed by <answer> "
                "and </answer> tags, and the generated answer derivation explanation "
                "should be enclosed by <explanation> and </explanation> tags.\n"
                "Here is the provided passage:\n<passage> "
                + collapse_newlines(slot(ctx.passage, "passage")) + " </passage>";
    }
    throw TemplateError("unknown template kind");
}

std::string render_closed_book(const RenderContext& ctx) {
    return qa_shell(kAlpacaPreamble, kClosedBookInstruction, ctx.exemplars, false, "",
                    question_line(slot(ctx.question, "question")));
}

std::optional<std::string> extract_tagged(const std::string& raw, const std::string& tag) {
    const std::string open = "<" + tag + ">";
    const std::string close = "</" + tag + ">";
    size_t b = raw.find(open);
    if (b == std::string::npos) return std::nullopt;
    b += open.size();
    size_t e = raw.find(close, b);
    if (e == std::string::npos) return std::nullopt;
    return trim(raw.substr(b, e - b));
}

std::vector<std::string> extract_all_passages(const std::string& raw) {
    const std::string open = "<passage>";
    const std::string close = "</passage>";
    std::vector<std::string> out;
    size_t pos = 0;
    while (true) {
        size_t b = raw.find(open, pos);
        if (b == std::string::npos) break;
        b += open.size();
        size_t e = raw.find(close, b);
        if (e == std::string::npos) break;
        out.push_back(trim(raw.substr(b, e - b)));
        pos = e + close.size();
    }
    return out;
}

std::vector<std::string> split_retrieved_block(const std::string& block) {
    std::vector<std::string> out;
    std::istringstream ss(block);
    std::string line;
    while (std::getline(ss, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

} // namespace kpref
