#pragma once

// In-memory knowledge graph: entities typed by concept, relations, and
// directed labeled edges. Files on disk:
//   triples    TSV   head_id<TAB>relation_id<TAB>tail_id
//   entities   JSONL {"id": "...", "label": "...", "concepts": ["...", ...]}
//   relations  JSONL {"id": "...", "label": "..."}   (optional)
//   roles      JSON  {"concepts": {...}, "relations": {...}}
// When only the triple path is given, sibling files are found by convention:
// g.tsv -> g.entities.jsonl / g.relations.jsonl.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kpref/errors.hpp"

namespace kpref {

struct Entity {
    std::string id;
    std::string label;
    std::vector<std::string> concepts; // sorted, never empty
    bool is_concept = false;           // id appears in the concept vocabulary
};

struct Relation {
    std::string id;
    std::string label;
};

struct Triple {
    std::string head;
    std::string relation;
    std::string tail;

    auto operator<=>(const Triple&) const = default;
};

struct Edge {
    std::string relation;
    std::string tail;

    auto operator<=>(const Edge&) const = default;
};

// Concept and relation ids that rules and editing need to recognize.
// An empty field means "not configured"; operations that need the role
// raise ConfigError.
struct RoleConfig {
    std::string country;      // concept ids
    std::string person;
    std::string location;
    std::string organization;
    std::string headquarters_location; // relation ids
    std::string capital;

    static RoleConfig load(const std::string& path);
};

struct KnowledgeGraph {
    std::map<std::string, Entity> entities;
    std::map<std::string, Relation> relations;
    // Adjacency per head, sorted by (relation id, tail id), deduplicated.
    std::map<std::string, std::vector<Edge>> out_edges;
    // Exact inverse of the entities' concept lists; members sorted.
    std::map<std::string, std::vector<std::string>> concept_index;
    RoleConfig roles;

    const Entity& entity(const std::string& id) const;
    const Relation& relation(const std::string& id) const;
    std::string entity_label(const std::string& id) const;
    std::string relation_label(const std::string& id) const;
    bool has_concept(const std::string& entity_id, const std::string& concept_id) const;
    size_t edge_count() const;
};

KnowledgeGraph load_graph(const std::string& triples_path,
                          const std::string& entities_path,
                          const std::string& relations_path, // "" = labels default to ids
                          const RoleConfig& roles);

// Sibling-file convention variant.
KnowledgeGraph load_graph(const std::string& triples_path, const RoleConfig& roles);

void save_graph(const KnowledgeGraph& g,
                const std::string& triples_path,
                const std::string& entities_path,
                const std::string& relations_path);

bool graphs_equal(const KnowledgeGraph& a, const KnowledgeGraph& b);

// Tail of the single (head, relation, *) edge; nullopt when zero or many.
std::optional<std::string> unique_tail(const KnowledgeGraph& g,
                                       const std::string& head,
                                       const std::string& relation);

// Sorted non-concept members of a concept, minus the exclusion set.
std::vector<std::string> entities_of_concept(const KnowledgeGraph& g,
                                             const std::string& concept_id,
                                             const std::set<std::string>& exclude);

std::string entities_sibling(const std::string& triples_path);
std::string relations_sibling(const std::string& triples_path);

} // namespace kpref
