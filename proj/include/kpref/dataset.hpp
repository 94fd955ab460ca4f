#pragma once

// Turns synthesized QA instances into instruction-tuning examples: noise
// injection, context shuffling, assumption reordering, and serialization
// into {"instruction","input","output"} records.

#include <cstdint>
#include <string>
#include <vector>

#include "kpref/eval.hpp"
#include "kpref/synth.hpp"

namespace kpref {

enum class DerivationPlacement { None, BeforeAnswer, AfterAnswer };

DerivationPlacement derivation_placement_from_name(const std::string& name);
const char* derivation_placement_name(DerivationPlacement p);

struct AugmentConfig {
    size_t noise_single_hop = 2;   // noisy passages added to single-hop items
    size_t noise_multi_hop = 3;    // noisy passages added to multi-hop items
    bool shuffle_contexts = true;  // permute gold passages (noise stays first)
    bool shuffle_assumptions = true; // reorder assumption triple lists
    DerivationPlacement derivation = DerivationPlacement::None;
    uint64_t seed = 0;
};

// Per instance, in draw order: noise passages (rejection-sampled from
// `noise_pool`, never duplicating a text already attached to the instance)
// prepended and kept in front, then an optional seeded permutation of the
// gold passages behind them, then an optional shared permutation of the
// assumption hold/retract lists with the question prefix re-rendered. All
// draws come from one rng seeded by mix_seed(cfg.seed, fnv1a(instance id)),
// so output is independent of instance order. Throws RangeError when the
// pool cannot supply the noise.
std::vector<QAInstance> augment(const std::vector<QAInstance>& instances,
                                const std::vector<std::string>& noise_pool,
                                const AugmentConfig& cfg);

struct TrainingExample {
    std::string instruction;
    std::string input;
    std::string output;
};

// instruction = the context-QA instruction sentence, input = the tagged
// question + retrieved block (same bytes the inference prompt would carry),
// output = the primary answer in <answer> tags, with the derivation in
// <derivation> tags before or after it when requested and present.
TrainingExample to_training_example(const QAInstance& inst, DerivationPlacement placement);

std::vector<TrainingExample> to_training_examples(const std::vector<QAInstance>& instances,
                                                  DerivationPlacement placement);

// Plain JSONL, three string fields per record, no header line.
void write_training(const std::vector<TrainingExample>& examples, const std::string& path);
std::vector<TrainingExample> read_training(const std::string& path);

// Benchmark view of the same instances: the stored question carries the
// assumption as a prefix, which is stripped back out here so eval modes can
// re-place it. Subset label = instance kind name.
std::vector<EvalItem> to_eval_items(const std::vector<QAInstance>& instances);

struct MergeStats {
    size_t ours = 0;
    size_t theirs = 0;
    size_t total = 0;
};

// Concatenates then globally shuffles with the given seed.
std::vector<TrainingExample> merge_training(const std::vector<TrainingExample>& ours,
                                            const std::vector<TrainingExample>& theirs,
                                            uint64_t seed, MergeStats* stats = nullptr);

} // namespace kpref
