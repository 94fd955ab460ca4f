#include "kpref/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "kpref/editor.hpp"
#include "kpref/jsonl.hpp"
#include "kpref/prompts.hpp"
#include "kpref/rng.hpp"

namespace kpref {

DerivationPlacement derivation_placement_from_name(const std::string& name) {
    if (name == "none") return DerivationPlacement::None;
    if (name == "before-answer") return DerivationPlacement::BeforeAnswer;
    if (name == "after-answer") return DerivationPlacement::AfterAnswer;
    throw ConfigError("unknown derivation placement: " + name
                      + " (expected none, before-answer, after-answer)");
}

const char* derivation_placement_name(DerivationPlacement p) {
    switch (p) {
        case DerivationPlacement::None: return "none";
        case DerivationPlacement::BeforeAnswer: return "before-answer";
        case DerivationPlacement::AfterAnswer: return "after-answer";
    }
    return "?";
}

namespace {

std::vector<std::string> draw_noise(const std::vector<std::string>& pool, size_t n,
                                    const std::set<std::string>& excluded, Rng& rng,
                                    const std::string& instance_id) {
    if (n == 0) return {};
    std::set<std::string> usable;
    for (const auto& text : pool)
        if (!excluded.count(text)) usable.insert(text);
    if (usable.size() < n)
        throw RangeError("noise pool has " + std::to_string(usable.size())
                         + " usable passages, need " + std::to_string(n)
                         + " for instance " + instance_id);
    std::vector<std::string> drawn;
    std::set<std::string> taken = excluded;
    // Rejection sampling keeps the draw stream aligned with the documented
    // algorithm; the usable-count check above guarantees termination.
    while (drawn.size() < n) {
        const std::string& cand = pool[rng.below(pool.size())];
        if (taken.count(cand)) continue;
        taken.insert(cand);
        drawn.push_back(cand);
    }
    return drawn;
}

void shuffle_assumption(QAInstance& inst, Rng& rng) {
    const size_t n = inst.assumption_hold.size();
    if (n != inst.assumption_retract.size())
        throw IntegrityError("instance " + inst.id
                             + ": assumption hold/retract lists differ in length");
    if (n < 2) return;
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    std::vector<LabelTriple> hold, retract;
    for (size_t i : order) {
        hold.push_back(inst.assumption_hold[i]);
        retract.push_back(inst.assumption_retract[i]);
    }
    std::string old_text = inst.assumption ? *inst.assumption : std::string();
    inst.assumption_hold = std::move(hold);
    inst.assumption_retract = std::move(retract);
    std::string new_text = render_assumption_text(inst.assumption_hold, inst.assumption_retract);
    inst.assumption = new_text;

    // The question carries the assumption as a prefix; rebuild it.
    if (!old_text.empty() && inst.question.rfind(old_text + " ", 0) == 0)
        inst.question = new_text + inst.question.substr(old_text.size());
}

} // namespace

std::vector<QAInstance> augment(const std::vector<QAInstance>& instances,
                                const std::vector<std::string>& noise_pool,
                                const AugmentConfig& cfg) {
    std::vector<QAInstance> out;
    out.reserve(instances.size());
    for (const QAInstance& src : instances) {
        QAInstance inst = src;
        Rng rng(mix_seed(cfg.seed, fnv1a(inst.id)));

        size_t noise_n = is_multi_hop(inst.kind) ? cfg.noise_multi_hop
                                                 : cfg.noise_single_hop;
        std::set<std::string> excluded;
        for (const auto& p : inst.passages) excluded.insert(p.text);
        std::vector<InstancePassage> combined;
        for (const auto& text : draw_noise(noise_pool, noise_n, excluded, rng, inst.id))
            combined.push_back({text, "noise"});
        // Noise stays in front; only the gold passages are permuted.
        std::vector<InstancePassage> gold = std::move(inst.passages);
        if (cfg.shuffle_contexts) rng.shuffle(gold);
        combined.insert(combined.end(), gold.begin(), gold.end());
        inst.passages = std::move(combined);
        if (cfg.shuffle_assumptions) shuffle_assumption(inst, rng);
        out.push_back(std::move(inst));
    }
    return out;
}

TrainingExample to_training_example(const QAInstance& inst, DerivationPlacement placement) {
    std::vector<std::string> texts;
    for (const auto& p : inst.passages) texts.push_back(p.text);

    TrainingExample ex;
    ex.instruction = context_qa_instruction();
    ex.input = qa_input_block(inst.question, texts);

    std::string answer = "<answer> " + inst.answers.front() + " </answer>";
    if (placement == DerivationPlacement::None || !inst.derivation) {
        ex.output = answer;
        return ex;
    }
    std::string derivation = "<derivation> " + *inst.derivation + " </derivation>";
    ex.output = placement == DerivationPlacement::BeforeAnswer
                    ? derivation + "\n" + answer
                    : answer + "\n" + derivation;
    return ex;
}

std::vector<TrainingExample> to_training_examples(const std::vector<QAInstance>& instances,
                                                  DerivationPlacement placement) {
    std::vector<TrainingExample> out;
    out.reserve(instances.size());
    for (const auto& inst : instances) out.push_back(to_training_example(inst, placement));
    return out;
}

void write_training(const std::vector<TrainingExample>& examples, const std::string& path) {
    JsonlWriter out(path);
    for (const auto& ex : examples)
        out.write(json{{"instruction", ex.instruction},
                       {"input", ex.input},
                       {"output", ex.output}});
}

std::vector<TrainingExample> read_training(const std::string& path) {
    std::vector<TrainingExample> out;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        std::string where = path + ":" + std::to_string(line);
        if (!rec.is_object() || rec.size() != 3)
            throw SchemaError(where + ": training record must hold exactly "
                              "instruction, input, output");
        TrainingExample ex;
        ex.instruction = require_string(rec, "instruction", where);
        ex.input = require_string(rec, "input", where);
        ex.output = require_string(rec, "output", where);
        out.push_back(std::move(ex));
    });
    return out;
}

std::vector<EvalItem> to_eval_items(const std::vector<QAInstance>& instances) {
    std::vector<EvalItem> items;
    items.reserve(instances.size());
    for (const auto& inst : instances) {
        EvalItem item;
        item.id = inst.id;
        item.subset = instance_kind_name(inst.kind);
        item.assumption = inst.assumption;
        item.question = inst.question;
        if (inst.assumption) {
            const std::string prefix = *inst.assumption + " ";
            if (inst.question.rfind(prefix, 0) != 0)
                throw IntegrityError("instance " + inst.id
                                     + ": question does not start with its assumption");
            item.question = inst.question.substr(prefix.size());
        }
        for (const auto& p : inst.passages) item.contexts.push_back(p.text);
        item.gold = inst.answers;
        item.alt_gold = inst.alt_answers;
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<TrainingExample> merge_training(const std::vector<TrainingExample>& ours,
                                            const std::vector<TrainingExample>& theirs,
                                            uint64_t seed, MergeStats* stats) {
    std::vector<TrainingExample> merged = ours;
    merged.insert(merged.end(), theirs.begin(), theirs.end());
    Rng rng(seed);
    rng.shuffle(merged);
    if (stats) {
        stats->ours = ours.size();
        stats->theirs = theirs.size();
        stats->total = merged.size();
    }
    return merged;
}

} // namespace kpref
