#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "kpref/miner.hpp"
#include "kpref/rng.hpp"
#include "test_util.hpp"

using namespace kpref;
using namespace kpref::testutil;

namespace {

RoleConfig std_roles() {
    RoleConfig rc;
    rc.country = "country";
    rc.person = "person";
    rc.location = "location";
    rc.organization = "organization";
    rc.headquarters_location = "hq";
    rc.capital = "capital";
    return rc;
}

// ---- independent oracle ----
// Direct restatement of each rule over a complete path, no shared code with
// the miner beyond graph lookups.

std::vector<std::string> path_entities(const std::vector<Triple>& path) {
    std::vector<std::string> ids{path.front().head};
    for (const auto& t : path) ids.push_back(t.tail);
    return ids;
}

bool oracle_ok(const KnowledgeGraph& g, const std::vector<Triple>& path,
               const MiningConfig& cfg) {
    const size_t m = path.size();
    if (m < cfg.min_hops || m > cfg.max_hops) return false;
    for (size_t i = 1; i < m; ++i)
        if (path[i].head != path[i - 1].tail) return false;

    auto ids = path_entities(path);
    if (cfg.rules.r1) {
        std::set<std::string> ents(ids.begin(), ids.end());
        if (ents.size() != ids.size()) return false;
        std::set<std::string> rels;
        for (const auto& t : path) rels.insert(t.relation);
        if (rels.size() != m) return false;
    }
    if (cfg.rules.r2) {
        std::set<std::string> concepts;
        for (const auto& id : ids) {
            const Entity& e = g.entity(id);
            if (cfg.concept_mode == ConceptMode::Union)
                concepts.insert(e.concepts.begin(), e.concepts.end());
            else
                concepts.insert(e.concepts.front()); // sorted: lexicographic min
        }
        if (concepts.size() > 3) return false;
    }
    if (cfg.rules.r3) {
        for (size_t i = 0; i < m; ++i)
            if (g.has_concept(path[i].tail, g.roles.country) && i + 2 < m) return false;
    }
    if (cfg.rules.r4) {
        std::vector<size_t> hits;
        for (size_t i = 0; i < m; ++i)
            if (g.has_concept(path[i].tail, g.roles.person)
                || g.has_concept(path[i].tail, g.roles.location))
                hits.push_back(i);
        for (size_t i = 1; i < hits.size(); ++i)
            if (hits[i] != hits[i - 1] + 1) return false;
    }
    if (cfg.rules.r5) {
        for (const auto& t : path) {
            if (t.relation == g.roles.headquarters_location
                && !g.has_concept(t.head, g.roles.organization))
                return false;
            if (t.relation == g.roles.capital && !g.has_concept(t.head, g.roles.country))
                return false;
        }
    }
    if (cfg.rules.r6) {
        for (const auto& t : path) {
            size_t n = 0;
            for (const auto& [rel, tail] : g.out_edges.at(t.head))
                if (rel == t.relation) ++n;
            if (n != 1) return false;
        }
    }
    if (cfg.rules.r9) {
        for (const auto& id : ids)
            if (g.entity(id).is_concept) return false;
    }
    return true;
}

// Exhaustive path enumeration, depth-first, no pruning.
void enumerate_paths(const KnowledgeGraph& g, std::vector<Triple>& path,
                     const std::string& at, size_t max_hops,
                     const MiningConfig& cfg, std::set<std::string>& found) {
    if (path.size() >= max_hops) return;
    auto it = g.out_edges.find(at);
    if (it == g.out_edges.end()) return;
    for (const auto& [rel, tail] : it->second) {
        path.push_back({at, rel, tail});
        if (oracle_ok(g, path, cfg)) found.insert(chain_key(FactChain{path}));
        enumerate_paths(g, path, tail, max_hops, cfg, found);
        path.pop_back();
    }
}

std::set<std::string> oracle_chains(const KnowledgeGraph& g, const MiningConfig& cfg) {
    std::set<std::string> found;
    for (const auto& [id, e] : g.entities) {
        std::vector<Triple> path;
        enumerate_paths(g, path, id, cfg.max_hops, cfg, found);
    }
    return found;
}

std::set<std::string> mined_keys(const std::vector<FactChain>& chains) {
    std::set<std::string> keys;
    for (const auto& c : chains) keys.insert(chain_key(c));
    return keys;
}

// Random worlds with role-bearing concepts and occasional concept entities
// inside the edge set, so every rule can fire.
KnowledgeGraph random_graph(uint64_t seed) {
    Rng rng(seed);
    std::vector<std::string> concepts = {"country", "person", "location",
                                         "organization", "thing", "idea"};
    size_t n_ent = 8 + rng.below(15);
    std::vector<EntitySpec> ents;
    for (size_t i = 0; i < n_ent; ++i) {
        std::vector<std::string> cs{concepts[rng.below(concepts.size())]};
        if (rng.below(3) == 0) cs.push_back(concepts[rng.below(concepts.size())]);
        ents.push_back({"e" + std::to_string(i), "E" + std::to_string(i), cs});
    }
    // Concept entities participating in the graph (rule 9 targets).
    ents.push_back({"thing", "thing-concept", {"idea"}});
    ents.push_back({"idea", "idea-concept", {"idea"}});

    std::vector<std::string> rels = {"hq", "capital", "r2", "r3", "r4"};
    size_t n_edges = n_ent + rng.below(2 * n_ent);
    std::set<std::string> seen;
    std::vector<TripleSpec> triples;
    for (size_t i = 0; i < n_edges; ++i) {
        std::string h = ents[rng.below(ents.size())].id;
        std::string r = rels[rng.below(rels.size())];
        std::string t = ents[rng.below(ents.size())].id;
        if (h == t) continue;
        if (!seen.insert(h + "|" + r + "|" + t).second) continue;
        triples.push_back({h, r, t});
    }
    if (triples.empty()) triples.push_back({"e0", "r2", "e1"});
    return make_graph(ents, triples, std_roles());
}

// Deterministic world with hand-checkable chains.
KnowledgeGraph tiny_world() {
    return make_graph(
        {
            {"ada", "Ada", {"person"}},
            {"acme", "Acme", {"organization"}},
            {"lyon", "Lyon", {"location"}},
            {"france", "France", {"country"}},
            {"paris", "Paris", {"location"}},
        },
        {
            {"ada", "works_for", "acme"},
            {"acme", "hq", "lyon"},
            {"lyon", "in_country", "france"},
            {"france", "capital", "paris"},
        },
        std_roles());
}

} // namespace

TEST_CASE("tiny world mines the hand-enumerated chain set") {
    KnowledgeGraph g = tiny_world();
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    auto chains = mine_chains(g, cfg);
    // Hand-derived: longer subpaths fail rule 2 (ada..france spans 4
    // concepts) or rule 4 (acme..paris has location tails at 0 and 2).
    std::set<std::string> got = mined_keys(chains);
    std::set<std::string> expected = {
        chain_key({{{"ada", "works_for", "acme"}, {"acme", "hq", "lyon"}}}),
        chain_key({{{"acme", "hq", "lyon"}, {"lyon", "in_country", "france"}}}),
        chain_key({{{"lyon", "in_country", "france"}, {"france", "capital", "paris"}}}),
    };
    CHECK(got == expected);
}

TEST_CASE("rule 3 rejects early country tails") {
    // 3-hop chain with country tail at index 0: i+2 = 2 < 3.
    KnowledgeGraph g = make_graph(
        {
            {"a", "A", {"thing"}},
            {"fr", "France", {"country"}},
            {"b", "B", {"thing"}},
            {"c", "C", {"thing"}},
        },
        {{"a", "r1", "fr"}, {"fr", "r2", "b"}, {"b", "r3", "c"}}, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    auto keys = mined_keys(mine_chains(g, cfg));
    CHECK(keys.count(chain_key({{{"a", "r1", "fr"}, {"fr", "r2", "b"}}})));
    CHECK(!keys.count(chain_key(
        {{{"a", "r1", "fr"}, {"fr", "r2", "b"}, {"b", "r3", "c"}}})));
}

TEST_CASE("rule 4 rejects split person/location tails") {
    KnowledgeGraph g = make_graph(
        {
            {"a", "A", {"person"}},
            {"b", "B", {"person"}},
            {"c", "C", {"thing"}},
            {"d", "D", {"location"}},
        },
        {{"a", "r1", "b"}, {"b", "r2", "c"}, {"c", "r3", "d"}}, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    auto keys = mined_keys(mine_chains(g, cfg));
    // person tail at 0, location tail at 2, gap at 1: rejected.
    CHECK(!keys.count(chain_key(
        {{{"a", "r1", "b"}, {"b", "r2", "c"}, {"c", "r3", "d"}}})));
    CHECK(keys.count(chain_key({{{"a", "r1", "b"}, {"b", "r2", "c"}}})));
}

TEST_CASE("rule 5 constrains hq and capital heads") {
    KnowledgeGraph g = make_graph(
        {
            {"a", "A", {"thing"}},
            {"b", "B", {"thing"}},
            {"c", "C", {"thing"}},
        },
        {{"a", "hq", "b"}, {"b", "r2", "c"}}, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    CHECK(mine_chains(g, cfg).empty()); // hq head is not an organization

    KnowledgeGraph g2 = make_graph(
        {
            {"a", "A", {"organization"}},
            {"b", "B", {"thing"}},
            {"c", "C", {"thing"}},
        },
        {{"a", "hq", "b"}, {"b", "r2", "c"}}, std_roles());
    CHECK(mine_chains(g2, cfg).size() == 1);
}

TEST_CASE("rule 6 rejects ambiguous head-relation pairs") {
    KnowledgeGraph g = make_graph(
        {
            {"a", "A", {"thing"}},
            {"b", "B", {"thing"}},
            {"c", "C", {"thing"}},
            {"d", "D", {"thing"}},
        },
        {{"a", "r1", "b"}, {"a", "r1", "c"}, {"b", "r2", "d"}}, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    CHECK(mine_chains(g, cfg).empty());
}

TEST_CASE("rule 2 counts concepts per mode") {
    // Union mode sees 4 concepts; canonical mode sees 3 (first of each
    // entity's sorted list).
    std::vector<EntitySpec> ents = {
        {"a", "A", {"c1"}},
        {"b", "B", {"c2"}},
        {"c", "C", {"c1", "c3"}}, // canonical: c1
        {"d", "D", {"c2", "c4"}}, // canonical: c2
    };
    std::vector<TripleSpec> ts = {{"a", "r1", "b"}, {"b", "r2", "c"}, {"c", "r3", "d"}};
    KnowledgeGraph g = make_graph(ents, ts, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    auto key = chain_key({{{"a", "r1", "b"}, {"b", "r2", "c"}, {"c", "r3", "d"}}});
    CHECK(!mined_keys(mine_chains(g, cfg)).count(key));
    cfg.concept_mode = ConceptMode::Canonical;
    CHECK(mined_keys(mine_chains(g, cfg)).count(key));
}

TEST_CASE("rule 9 keeps concept entities out of chains") {
    std::vector<EntitySpec> ents = {
        {"a", "A", {"thing"}},
        {"thing", "the thing concept", {"meta"}},
        {"b", "B", {"thing"}},
    };
    std::vector<TripleSpec> ts = {{"a", "r1", "thing"}, {"thing", "r2", "b"}};
    KnowledgeGraph g = make_graph(ents, ts, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    CHECK(mine_chains(g, cfg).empty());
    cfg.rules.r9 = false;
    CHECK(mine_chains(g, cfg).size() == 1);
}

TEST_CASE("rule 1 rejects repeated entities and relations") {
    // a -> b -> a cycle repeats entity a.
    KnowledgeGraph g = make_graph({{"a", "A", {"t"}}, {"b", "B", {"t"}}},
                                  {{"a", "r1", "b"}, {"b", "r2", "a"}}, std_roles());
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    CHECK(mine_chains(g, cfg).empty());
    cfg.rules.r1 = false;
    CHECK(!mine_chains(g, cfg).empty());
}

TEST_CASE("mining agrees with the exhaustive oracle on random graphs") {
    for (uint64_t seed = 1; seed <= 12; ++seed) {
        KnowledgeGraph g = random_graph(seed);
        MiningConfig cfg;
        cfg.max_children = kUnboundedChildren;
        cfg.seed = seed;
        CAPTURE(seed);
        CHECK(mined_keys(mine_chains(g, cfg)) == oracle_chains(g, cfg));
    }
}

TEST_CASE("oracle agreement holds under partial rule sets") {
    for (uint64_t seed = 20; seed <= 25; ++seed) {
        KnowledgeGraph g = random_graph(seed);
        for (const char* list : {"1,6,9", "2,3", "4,5", "1,2,3,4,5,6,9"}) {
            MiningConfig cfg;
            cfg.rules = RuleSet::from_list(list);
            cfg.max_children = kUnboundedChildren;
            cfg.seed = seed;
            CAPTURE(seed);
            CAPTURE(list);
            CHECK(mined_keys(mine_chains(g, cfg)) == oracle_chains(g, cfg));
        }
    }
}

TEST_CASE("width cap yields a subset, monotone in the cap") {
    for (uint64_t seed = 30; seed <= 33; ++seed) {
        KnowledgeGraph g = random_graph(seed);
        MiningConfig cfg;
        cfg.seed = 99;
        cfg.max_children = kUnboundedChildren;
        auto unbounded = mined_keys(mine_chains(g, cfg));
        std::set<std::string> prev;
        for (size_t cap : {1, 2, 5}) {
            cfg.max_children = cap;
            auto capped = mined_keys(mine_chains(g, cfg));
            CAPTURE(seed);
            CAPTURE(cap);
            CHECK(std::includes(unbounded.begin(), unbounded.end(),
                                capped.begin(), capped.end()));
            CHECK(std::includes(capped.begin(), capped.end(), prev.begin(), prev.end()));
            prev = capped;
        }
    }
}

TEST_CASE("width-capped mining is deterministic in the seed") {
    KnowledgeGraph g = random_graph(5);
    MiningConfig cfg;
    cfg.max_children = 2;
    cfg.seed = 7;
    auto a = mine_chains(g, cfg);
    auto b = mine_chains(g, cfg);
    CHECK(a == b);
}

TEST_CASE("chains come out sorted by canonical key") {
    KnowledgeGraph g = random_graph(3);
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    auto chains = mine_chains(g, cfg);
    for (size_t i = 1; i < chains.size(); ++i)
        CHECK(chain_key(chains[i - 1]) < chain_key(chains[i]));
}

TEST_CASE("check_constraints names the failing rule") {
    KnowledgeGraph g = make_graph(
        {{"a", "A", {"t"}}, {"b", "B", {"t"}}, {"c", "C", {"t"}}},
        {{"a", "r1", "b"}, {"b", "r2", "c"}, {"b", "r3", "a"}}, std_roles());
    MiningConfig cfg;
    FactChain broken{{{"a", "r1", "b"}, {"b", "r2", "c"}}};
    CHECK(check_constraints(g, broken, cfg).empty());

    FactChain repeat{{{"a", "r1", "b"}, {"b", "r3", "a"}}};
    auto v = check_constraints(g, repeat, cfg);
    REQUIRE(!v.empty());
    CHECK(v[0].rule == "rule-1");

    FactChain unlinked{{{"a", "r1", "b"}, {"a", "r1", "b"}}};
    auto s = check_constraints(g, unlinked, cfg);
    REQUIRE(!s.empty());
    CHECK(s[0].rule == "structure");
}

TEST_CASE("rule set parsing") {
    RuleSet rs = RuleSet::from_list("1,7a,9");
    CHECK(rs.r1);
    CHECK(rs.r7a);
    CHECK(!rs.r7b);
    CHECK(rs.r9);
    CHECK(!rs.r2);
    RuleSet both = RuleSet::from_list("7");
    CHECK(both.r7a);
    CHECK(both.r7b);
    CHECK_THROWS_AS(RuleSet::from_list("1,10"), ConfigError);
    CHECK(RuleSet::none().r1 == false);
}

TEST_CASE("mining without role config fails fast when rules need roles") {
    KnowledgeGraph g = make_graph({{"a", "A", {"t"}}, {"b", "B", {"t"}}},
                                  {{"a", "r1", "b"}});
    MiningConfig cfg;
    CHECK_THROWS_WITH_AS(mine_chains(g, cfg), doctest::Contains("country"), ConfigError);
    cfg.rules = RuleSet::from_list("1,2,6,7,9");
    CHECK_NOTHROW(mine_chains(g, cfg));
}

TEST_CASE("config validation") {
    KnowledgeGraph g = make_graph({{"a", "A", {"t"}}}, {}, std_roles());
    MiningConfig cfg;
    cfg.min_hops = 0;
    CHECK_THROWS_AS(mine_chains(g, cfg), ConfigError);
    cfg.min_hops = 3;
    cfg.max_hops = 2;
    CHECK_THROWS_AS(mine_chains(g, cfg), ConfigError);
    cfg = MiningConfig{};
    cfg.max_children = 0;
    CHECK_THROWS_AS(mine_chains(g, cfg), ConfigError);
}

TEST_CASE("chain ids are stable and content-addressed") {
    FactChain c1{{{"a", "r", "b"}, {"b", "s", "c"}}};
    FactChain c2{{{"a", "r", "b"}, {"b", "s", "d"}}};
    CHECK(chain_id(c1) == chain_id(c1));
    CHECK(chain_id(c1) != chain_id(c2));
    CHECK(chain_id(c1).rfind("c", 0) == 0);
}

TEST_CASE("chain read/write roundtrip") {
    KnowledgeGraph g = random_graph(8);
    MiningConfig cfg;
    cfg.max_children = kUnboundedChildren;
    auto chains = mine_chains(g, cfg);
    TempDir dir;
    write_chains(chains, dir.file("chains.jsonl"));
    auto back = read_chains(dir.file("chains.jsonl"));
    CHECK(chains == back);
}

TEST_CASE("entity_ids walks head then tails") {
    FactChain c{{{"a", "r", "b"}, {"b", "s", "c"}}};
    CHECK(c.entity_ids() == std::vector<std::string>{"a", "b", "c"});
    CHECK(c.hops() == 2);
}
