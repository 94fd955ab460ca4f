#pragma once

// Mining of linked fact chains (2-4 hops) under the nine heuristic rules:
//   (1) no repeated entities or relations
//   (2) at most 3 distinct entity concepts across the chain
//   (3) country-tail triples only in the last two hops
//   (4) person/location-tail triples form one contiguous index block
//   (5) "headquarters location" heads are organizations, "capital" heads
//       are countries
//   (6) each triple's tail is the unique tail for (head, relation)
//   (7a) edited-tail uniqueness during propagation (editor-side)
//   (7b) BFS explores at most max_children children per node
//   (8) edited tails share a concept with the original (editor-side)
//   (9) no chain entity is itself a concept

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "kpref/kg.hpp"

namespace kpref {

struct FactChain {
    std::vector<Triple> triples; // linked: triples[i].tail == triples[i+1].head

    size_t hops() const { return triples.size(); }
    // head of the first triple followed by every tail, in order
    std::vector<std::string> entity_ids() const;

    bool operator==(const FactChain&) const = default;
};

std::string chain_key(const FactChain& c); // canonical serialization
std::string chain_id(const FactChain& c);  // short content hash

enum class ConceptMode { Union, Canonical };

struct RuleSet {
    bool r1 = true, r2 = true, r3 = true, r4 = true, r5 = true;
    bool r6 = true, r7a = true, r7b = true, r8 = true, r9 = true;

    static RuleSet all() { return {}; }
    static RuleSet none();
    // comma-separated ids, e.g. "1,2,6,9" or "7a,7b"
    static RuleSet from_list(const std::string& list);
};

constexpr size_t kUnboundedChildren = std::numeric_limits<size_t>::max();

struct MiningConfig {
    size_t min_hops = 2;
    size_t max_hops = 4;
    size_t max_children = 5; // rule 7b; kUnboundedChildren disables the cap
    RuleSet rules;
    ConceptMode concept_mode = ConceptMode::Union;
    uint64_t seed = 0;
};

struct RuleViolation {
    std::string rule;   // "rule-1" .. "rule-9", or "structure"
    std::string reason;
};

// Full validation of a chain at its own length. Structural problems
// (broken linkage, hops outside config bounds) are reported as "structure".
std::vector<RuleViolation> check_constraints(const KnowledgeGraph& g,
                                             const FactChain& chain,
                                             const MiningConfig& cfg);

// All rule-satisfying chains reachable by width-capped BFS from every
// eligible start entity, deduplicated and canonically sorted.
std::vector<FactChain> mine_chains(const KnowledgeGraph& g, const MiningConfig& cfg);

// Distinct chain concepts under the configured counting mode.
size_t chain_concept_count(const KnowledgeGraph& g, const FactChain& chain,
                           ConceptMode mode);

void write_chains(const std::vector<FactChain>& chains, const std::string& path);
std::vector<FactChain> read_chains(const std::string& path);

} // namespace kpref
