#include "kpref/editor.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "kpref/jsonl.hpp"

namespace kpref {

std::vector<size_t> CounterfactualPair::seed_indices() const {
    std::vector<size_t> idx;
    for (const auto& e : edits) idx.push_back(e.index);
    return idx;
}

std::string pair_id(const CounterfactualPair& p) {
    std::ostringstream os;
    os << "p" << std::hex << fnv1a(chain_key(p.original) + "||" + chain_key(p.edited));
    return os.str();
}

size_t choose_k(size_t hops, Rng& rng) {
    if (hops <= 2) return 1;
    return 1 + size_t(rng.below(hops - 1));
}

namespace {

// Same-concept replacement candidates for the tail at chain index j,
// excluding every entity already in the chain. Sorted for determinism.
std::vector<std::string> replacement_candidates(const KnowledgeGraph& g,
                                                const FactChain& chain, size_t j) {
    const Entity& tail = g.entity(chain.triples[j].tail);
    std::set<std::string> exclude;
    for (const auto& id : chain.entity_ids()) exclude.insert(id);
    std::set<std::string> cand;
    for (const auto& concept_id : tail.concepts) {
        if (!g.concept_index.count(concept_id)) continue;
        for (const auto& id : entities_of_concept(g, concept_id, exclude))
            cand.insert(id);
    }
    return {cand.begin(), cand.end()};
}

// Seeds new_tail at index j and re-derives triples j+1.. through unique KG
// tails. Fails on a missing/ambiguous tail or a repeated entity.
std::optional<FactChain> apply_seed(const KnowledgeGraph& g, const FactChain& chain,
                                    size_t j, const std::string& new_tail) {
    FactChain next;
    next.triples.assign(chain.triples.begin(), chain.triples.begin() + j);
    next.triples.push_back({chain.triples[j].head, chain.triples[j].relation, new_tail});

    std::set<std::string> ents;
    ents.insert(next.triples.front().head);
    for (const auto& t : next.triples)
        if (!ents.insert(t.tail).second) return std::nullopt;

    for (size_t i = j + 1; i < chain.hops(); ++i) {
        const std::string& head = next.triples.back().tail;
        const std::string& rel = chain.triples[i].relation;
        auto tail = unique_tail(g, head, rel);
        if (!tail) return std::nullopt; // rule 7a: propagation needs a unique tail
        if (!ents.insert(*tail).second) return std::nullopt;
        next.triples.push_back({head, rel, *tail});
    }
    return next;
}

constexpr size_t kMaxCandidateRetries = 10;

} // namespace

std::optional<CounterfactualPair> edit_chain(const KnowledgeGraph& g,
                                             const FactChain& chain,
                                             size_t k, uint64_t seed) {
    const size_t m = chain.hops();
    if (k < 1 || k > m)
        throw RangeError("edit_chain: k = " + std::to_string(k)
                         + " outside [1, " + std::to_string(m) + "]");

    Rng rng(mix_seed(seed, fnv1a(chain_key(chain))));
    CounterfactualPair pair;
    pair.original = chain;
    FactChain current = chain;
    size_t prev_index = 0;
    bool first = true;

    for (size_t t = 1; t <= k; ++t) {
        const size_t remaining = k - t;
        const size_t lo = first ? 0 : prev_index + 1;
        const size_t hi = m - 1 - remaining; // leave one triple per outstanding edit
        const size_t j = lo + size_t(rng.below(hi - lo + 1));

        auto cand = replacement_candidates(g, current, j);
        if (cand.empty()) return std::nullopt;
        rng.shuffle(cand);
        if (cand.size() > kMaxCandidateRetries) cand.resize(kMaxCandidateRetries);

        std::optional<FactChain> next;
        std::string chosen;
        for (const auto& c : cand) {
            next = apply_seed(g, current, j, c);
            if (next) {
                chosen = c;
                break;
            }
        }
        if (!next) return std::nullopt;

        ChainEdit edit;
        edit.index = j;
        edit.original = current.triples[j];
        edit.edited = next->triples[j];
        pair.edits.push_back(edit);
        current = *next;
        prev_index = j;
        first = false;
    }

    pair.edited = current;
    return pair;
}

std::string render_label_triple(const LabelTriple& t) {
    return "(" + t.head + ", " + t.relation + ", " + t.tail + ")";
}

namespace {

std::string render_list(const std::vector<LabelTriple>& ts) {
    std::string out = "[";
    for (size_t i = 0; i < ts.size(); ++i) {
        if (i) out += ", ";
        out += render_label_triple(ts[i]);
    }
    return out + "]";
}

LabelTriple to_labels(const KnowledgeGraph& g, const Triple& t) {
    return {g.entity_label(t.head), g.relation_label(t.relation), g.entity_label(t.tail)};
}

} // namespace

std::string render_assumption_text(const std::vector<LabelTriple>& hold,
                                   const std::vector<LabelTriple>& retract) {
    return "Assume the following relation triples hold true: " + render_list(hold)
        + ", and assume the following relation triples do not hold true any more: "
        + render_list(retract) + ".";
}

Assumption verbalize_assumption(const KnowledgeGraph& g,
                                const CounterfactualPair& pair,
                                bool invert) {
    Assumption a;
    for (const auto& e : pair.edits) {
        a.hold.push_back(to_labels(g, e.original));
        a.retract.push_back(to_labels(g, e.edited));
    }
    if (invert) std::swap(a.hold, a.retract);
    a.text = render_assumption_text(a.hold, a.retract);
    return a;
}

std::vector<Triple> triples_to_support(const CounterfactualPair& pair) {
    const std::vector<size_t> idx = pair.seed_indices();
    std::set<size_t> seeds(idx.begin(), idx.end());
    std::vector<Triple> out;
    std::set<std::string> seen;
    auto add = [&](const Triple& t) {
        std::string key = t.head + "\t" + t.relation + "\t" + t.tail;
        if (seen.insert(key).second) out.push_back(t);
    };
    for (const auto& t : pair.original.triples) add(t);
    for (size_t i = 0; i < pair.edited.hops(); ++i)
        if (!seeds.count(i)) add(pair.edited.triples[i]);
    return out;
}

namespace {

json triple_to_json(const Triple& t) {
    return json::array({t.head, t.relation, t.tail});
}

Triple triple_from_json(const json& j, const std::string& path, size_t line) {
    if (!j.is_array() || j.size() != 3)
        throw ParseError(path, line, "each triple must be [head, relation, tail]");
    return {j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

} // namespace

void write_pairs(const std::vector<CounterfactualPair>& pairs, const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("counterfactual-pairs"));
    for (const auto& p : pairs) {
        json rec;
        rec["id"] = pair_id(p);
        json orig = json::array(), edit = json::array(), edits = json::array();
        for (const auto& t : p.original.triples) orig.push_back(triple_to_json(t));
        for (const auto& t : p.edited.triples) edit.push_back(triple_to_json(t));
        for (const auto& e : p.edits) {
            json je;
            je["index"] = e.index;
            je["original"] = triple_to_json(e.original);
            je["edited"] = triple_to_json(e.edited);
            edits.push_back(je);
        }
        rec["original"] = orig;
        rec["edited"] = edit;
        rec["edits"] = edits;
        out.write(rec);
    }
}

std::vector<CounterfactualPair> read_pairs(const std::string& path) {
    std::vector<CounterfactualPair> pairs;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        CounterfactualPair p;
        for (const char* key : {"original", "edited", "edits"})
            if (!rec.contains(key) || !rec[key].is_array())
                throw ParseError(path, line, std::string("pair record needs array '") + key + "'");
        for (const auto& t : rec["original"])
            p.original.triples.push_back(triple_from_json(t, path, line));
        for (const auto& t : rec["edited"])
            p.edited.triples.push_back(triple_from_json(t, path, line));
        for (const auto& e : rec["edits"]) {
            ChainEdit ce;
            ce.index = e.at("index").get<size_t>();
            ce.original = triple_from_json(e.at("original"), path, line);
            ce.edited = triple_from_json(e.at("edited"), path, line);
            p.edits.push_back(ce);
        }
        pairs.push_back(std::move(p));
    });
    return pairs;
}

} // namespace kpref
