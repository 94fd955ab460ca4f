#include "kpref/miner.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

#include "kpref/jsonl.hpp"
#include "kpref/rng.hpp"

namespace kpref {

std::vector<std::string> FactChain::entity_ids() const {
    std::vector<std::string> ids;
    if (triples.empty()) return ids;
    ids.push_back(triples.front().head);
    for (const auto& t : triples) ids.push_back(t.tail);
    return ids;
}

std::string chain_key(const FactChain& c) {
    std::string key;
    for (const auto& t : c.triples) {
        if (!key.empty()) key += "|";
        key += t.head + "\t" + t.relation + "\t" + t.tail;
    }
    return key;
}

std::string chain_id(const FactChain& c) {
    std::ostringstream os;
    os << "c" << std::hex << fnv1a(chain_key(c));
    return os.str();
}

RuleSet RuleSet::none() {
    RuleSet r;
    r.r1 = r.r2 = r.r3 = r.r4 = r.r5 = r.r6 = r.r7a = r.r7b = r.r8 = r.r9 = false;
    return r;
}

RuleSet RuleSet::from_list(const std::string& list) {
    RuleSet r = RuleSet::none();
    std::istringstream ss(list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
        if (tok.empty()) continue;
        if (tok == "1") r.r1 = true;
        else if (tok == "2") r.r2 = true;
        else if (tok == "3") r.r3 = true;
        else if (tok == "4") r.r4 = true;
        else if (tok == "5") r.r5 = true;
        else if (tok == "6") r.r6 = true;
        else if (tok == "7" ) { r.r7a = true; r.r7b = true; }
        else if (tok == "7a") r.r7a = true;
        else if (tok == "7b") r.r7b = true;
        else if (tok == "8") r.r8 = true;
        else if (tok == "9") r.r9 = true;
        else throw ConfigError("unknown rule id: " + tok);
    }
    return r;
}

size_t chain_concept_count(const KnowledgeGraph& g, const FactChain& chain,
                           ConceptMode mode) {
    std::set<std::string> concepts;
    for (const auto& id : chain.entity_ids()) {
        const Entity& e = g.entity(id);
        if (mode == ConceptMode::Union) {
            concepts.insert(e.concepts.begin(), e.concepts.end());
        } else {
            concepts.insert(e.concepts.front()); // sorted; smallest is canonical
        }
    }
    return concepts.size();
}

namespace {

void require_roles(const KnowledgeGraph& g, const RuleSet& rules) {
    std::vector<std::string> missing;
    const RoleConfig& rc = g.roles;
    if (rules.r3 && rc.country.empty()) missing.push_back("country");
    if (rules.r4) {
        if (rc.person.empty()) missing.push_back("person");
        if (rc.location.empty()) missing.push_back("location");
    }
    if (rules.r5) {
        if (rc.organization.empty()) missing.push_back("organization");
        if (rc.country.empty()) missing.push_back("country");
        if (rc.headquarters_location.empty()) missing.push_back("headquarters_location");
        if (rc.capital.empty()) missing.push_back("capital");
    }
    if (!missing.empty()) {
        std::sort(missing.begin(), missing.end());
        missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
        std::string msg = "role config missing:";
        for (const auto& m : missing) msg += " " + m;
        throw ConfigError(msg);
    }
}

bool contiguous(const std::vector<size_t>& idx) {
    for (size_t i = 1; i < idx.size(); ++i)
        if (idx[i] != idx[i - 1] + 1) return false;
    return true;
}

} // namespace

std::vector<RuleViolation> check_constraints(const KnowledgeGraph& g,
                                             const FactChain& chain,
                                             const MiningConfig& cfg) {
    std::vector<RuleViolation> out;
    const size_t m = chain.hops();

    if (m < cfg.min_hops || m > cfg.max_hops)
        out.push_back({"structure", "chain has " + std::to_string(m) + " hops, want ["
                       + std::to_string(cfg.min_hops) + "," + std::to_string(cfg.max_hops) + "]"});
    for (size_t i = 0; i + 1 < m; ++i)
        if (chain.triples[i].tail != chain.triples[i + 1].head)
            out.push_back({"structure", "triple " + std::to_string(i + 1)
                           + " does not start at the previous tail"});
    if (m == 0) return out;

    const RoleConfig& rc = g.roles;

    if (cfg.rules.r1) {
        std::set<std::string> ents, rels;
        bool dup_e = false, dup_r = false;
        for (const auto& id : chain.entity_ids())
            if (!ents.insert(id).second) dup_e = true;
        for (const auto& t : chain.triples)
            if (!rels.insert(t.relation).second) dup_r = true;
        if (dup_e) out.push_back({"rule-1", "repeated entity"});
        if (dup_r) out.push_back({"rule-1", "repeated relation"});
    }

    if (cfg.rules.r2) {
        size_t n = chain_concept_count(g, chain, cfg.concept_mode);
        if (n > 3)
            out.push_back({"rule-2", std::to_string(n) + " distinct concepts, max 3"});
    }

    if (cfg.rules.r3 && !rc.country.empty()) {
        for (size_t i = 0; i < m; ++i) {
            if (!g.has_concept(chain.triples[i].tail, rc.country)) continue;
            if (i + 2 < m)
                out.push_back({"rule-3", "country tail at hop " + std::to_string(i + 1)
                               + " of " + std::to_string(m)});
        }
    }

    if (cfg.rules.r4 && !(rc.person.empty() && rc.location.empty())) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < m; ++i) {
            const std::string& tail = chain.triples[i].tail;
            if (g.has_concept(tail, rc.person) || g.has_concept(tail, rc.location))
                idx.push_back(i);
        }
        if (!contiguous(idx))
            out.push_back({"rule-4", "person/location tails are not consecutive"});
    }

    if (cfg.rules.r5) {
        for (size_t i = 0; i < m; ++i) {
            const Triple& t = chain.triples[i];
            if (!rc.headquarters_location.empty() && t.relation == rc.headquarters_location
                && !g.has_concept(t.head, rc.organization))
                out.push_back({"rule-5", "headquarters-location head " + t.head
                               + " is not an organization"});
            if (!rc.capital.empty() && t.relation == rc.capital
                && !g.has_concept(t.head, rc.country))
                out.push_back({"rule-5", "capital head " + t.head + " is not a country"});
        }
    }

    if (cfg.rules.r6) {
        for (size_t i = 0; i < m; ++i) {
            const Triple& t = chain.triples[i];
            auto u = unique_tail(g, t.head, t.relation);
            if (!u || *u != t.tail)
                out.push_back({"rule-6", "(" + t.head + ", " + t.relation
                               + ") has no unique tail matching " + t.tail});
        }
    }

    if (cfg.rules.r9) {
        for (const auto& id : chain.entity_ids())
            if (g.entity(id).is_concept)
                out.push_back({"rule-9", "entity " + id + " is a concept"});
    }

    return out;
}

std::vector<FactChain> mine_chains(const KnowledgeGraph& g, const MiningConfig& cfg) {
    if (cfg.min_hops < 1 || cfg.max_hops < cfg.min_hops)
        throw ConfigError("bad hop bounds");
    if (cfg.max_children < 1) throw ConfigError("max_children must be >= 1");
    require_roles(g, cfg.rules);

    std::set<std::string> seen;
    std::vector<FactChain> out;

    for (const auto& [start, ent] : g.entities) {
        if (cfg.rules.r9 && ent.is_concept) continue;
        std::deque<FactChain> queue;
        queue.push_back(FactChain{});
        while (!queue.empty()) {
            FactChain path = std::move(queue.front());
            queue.pop_front();
            const std::string& cur = path.triples.empty() ? start : path.triples.back().tail;

            auto adj_it = g.out_edges.find(cur);
            if (adj_it == g.out_edges.end()) continue;

            std::vector<Edge> adj = adj_it->second; // deterministic (relation, tail) order
            if (cfg.rules.r7b && cfg.max_children != kUnboundedChildren) {
                Rng rng(mix_seed(cfg.seed, fnv1a(start + "|" + chain_key(path))));
                rng.shuffle(adj);
                if (adj.size() > cfg.max_children) adj.resize(cfg.max_children);
            }

            for (const auto& edge : adj) {
                FactChain next = path;
                next.triples.push_back({cur, edge.relation, edge.tail});
                // Every violation detectable at this length survives any
                // extension, so one check both gates emission and prunes.
                MiningConfig probe = cfg;
                probe.min_hops = 1;
                probe.max_hops = cfg.max_hops;
                if (!check_constraints(g, next, probe).empty()) continue;
                if (next.hops() >= cfg.min_hops) {
                    if (seen.insert(chain_key(next)).second) out.push_back(next);
                }
                if (next.hops() < cfg.max_hops) queue.push_back(next);
            }
        }
    }

    std::sort(out.begin(), out.end(), [](const FactChain& a, const FactChain& b) {
        return chain_key(a) < chain_key(b);
    });
    return out;
}

void write_chains(const std::vector<FactChain>& chains, const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("fact-chains"));
    for (const auto& c : chains) {
        json rec;
        rec["id"] = chain_id(c);
        json triples = json::array();
        for (const auto& t : c.triples)
            triples.push_back(json::array({t.head, t.relation, t.tail}));
        rec["triples"] = triples;
        out.write(rec);
    }
}

std::vector<FactChain> read_chains(const std::string& path) {
    std::vector<FactChain> chains;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        if (!rec.contains("triples") || !rec["triples"].is_array())
            throw ParseError(path, line, "chain record needs a 'triples' array");
        FactChain c;
        for (const auto& t : rec["triples"]) {
            if (!t.is_array() || t.size() != 3)
                throw ParseError(path, line, "each triple must be [head, relation, tail]");
            c.triples.push_back({t[0].get<std::string>(), t[1].get<std::string>(),
                                 t[2].get<std::string>()});
        }
        chains.push_back(std::move(c));
    });
    return chains;
}

} // namespace kpref
