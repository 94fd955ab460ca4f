#pragma once

// Recursive counterfactual editing of mined fact chains. Each of the K edits
// replaces one triple's tail with a same-concept entity (the counterfactual
// seed) and factually re-derives every later triple through unique KG tails.
// Edit positions strictly increase so earlier seeds survive later
// propagation; a position is legal only when enough triples remain after it
// for the outstanding edits.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kpref/kg.hpp"
#include "kpref/miner.hpp"
#include "kpref/rng.hpp"

namespace kpref {

struct ChainEdit {
    size_t index = 0;
    Triple original; // triple replaced (relative to the previously edited chain)
    Triple edited;   // counterfactual seed; shares a concept with original.tail
};

struct CounterfactualPair {
    FactChain original;
    FactChain edited;
    std::vector<ChainEdit> edits; // in application order, strictly increasing index

    size_t hops() const { return original.hops(); }
    std::vector<size_t> seed_indices() const;
};

std::string pair_id(const CounterfactualPair& p);

// K recursive edits; absent when candidates run out or downstream
// propagation hits a non-unique tail on every retry.
std::optional<CounterfactualPair> edit_chain(const KnowledgeGraph& g,
                                             const FactChain& chain,
                                             size_t k, uint64_t seed);

// Default K policy: uniform over [1, hops-1] for 3+ hops, always 1 for 2 hops.
size_t choose_k(size_t hops, Rng& rng);

// Display-label triple for verbalization.
struct LabelTriple {
    std::string head, relation, tail;

    bool operator==(const LabelTriple&) const = default;
};

struct Assumption {
    std::vector<LabelTriple> hold;    // listed as holding true
    std::vector<LabelTriple> retract; // listed as not holding any more
    std::string text;
};

// "Assume the following relation triples hold true: [...], and assume the
// following relation triples do not hold true any more: [...]."
// Default lists the pre-edit triples as holding and the seeded edits as
// retracted (the verbatim source form); invert swaps the two lists.
Assumption verbalize_assumption(const KnowledgeGraph& g,
                                const CounterfactualPair& pair,
                                bool invert = false);

std::string render_assumption_text(const std::vector<LabelTriple>& hold,
                                   const std::vector<LabelTriple>& retract);

std::string render_label_triple(const LabelTriple& t);

// Factual triples backing the pair: originals plus non-seeded edited triples,
// deduplicated, original-chain order first.
std::vector<Triple> triples_to_support(const CounterfactualPair& pair);

void write_pairs(const std::vector<CounterfactualPair>& pairs, const std::string& path);
std::vector<CounterfactualPair> read_pairs(const std::string& path);

} // namespace kpref
