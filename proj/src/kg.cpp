#include "kpref/kg.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "kpref/jsonl.hpp"

namespace kpref {

namespace {

std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) out.push_back(field);
    return out;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace

RoleConfig RoleConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError(path, 1, "invalid JSON");
    RoleConfig rc;
    auto pick = [](const json& obj, const char* key) -> std::string {
        if (obj.is_object() && obj.contains(key) && obj[key].is_string())
            return obj[key].get<std::string>();
        return "";
    };
    if (doc.contains("concepts")) {
        rc.country = pick(doc["concepts"], "country");
        rc.person = pick(doc["concepts"], "person");
        rc.location = pick(doc["concepts"], "location");
        rc.organization = pick(doc["concepts"], "organization");
    }
    if (doc.contains("relations")) {
        rc.headquarters_location = pick(doc["relations"], "headquarters_location");
        rc.capital = pick(doc["relations"], "capital");
    }
    return rc;
}

const Entity& KnowledgeGraph::entity(const std::string& id) const {
    auto it = entities.find(id);
    if (it == entities.end()) throw LookupError("unknown entity id: " + id);
    return it->second;
}

const Relation& KnowledgeGraph::relation(const std::string& id) const {
    auto it = relations.find(id);
    if (it == relations.end()) throw LookupError("unknown relation id: " + id);
    return it->second;
}

std::string KnowledgeGraph::entity_label(const std::string& id) const {
    return entity(id).label;
}

std::string KnowledgeGraph::relation_label(const std::string& id) const {
    return relation(id).label;
}

bool KnowledgeGraph::has_concept(const std::string& entity_id,
                                 const std::string& concept_id) const {
    if (concept_id.empty()) return false;
    const Entity& e = entity(entity_id);
    return std::binary_search(e.concepts.begin(), e.concepts.end(), concept_id);
}

size_t KnowledgeGraph::edge_count() const {
    size_t n = 0;
    for (const auto& [h, edges] : out_edges) n += edges.size();
    return n;
}

std::string entities_sibling(const std::string& triples_path) {
    std::filesystem::path p(triples_path);
    p.replace_extension();
    return p.string() + ".entities.jsonl";
}

std::string relations_sibling(const std::string& triples_path) {
    std::filesystem::path p(triples_path);
    p.replace_extension();
    return p.string() + ".relations.jsonl";
}

KnowledgeGraph load_graph(const std::string& triples_path,
                          const std::string& entities_path,
                          const std::string& relations_path,
                          const RoleConfig& roles) {
    KnowledgeGraph g;
    g.roles = roles;

    for_each_jsonl(entities_path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string())
            throw ParseError(entities_path, line, "entity record needs a string 'id'");
        Entity e;
        e.id = rec["id"].get<std::string>();
        if (e.id.empty()) throw ParseError(entities_path, line, "empty entity id");
        e.label = rec.value("label", e.id);
        if (!rec.contains("concepts") || !rec["concepts"].is_array())
            throw ParseError(entities_path, line, "entity record needs a 'concepts' array");
        for (const auto& c : rec["concepts"]) {
            if (!c.is_string())
                throw ParseError(entities_path, line, "concept ids must be strings");
            e.concepts.push_back(c.get<std::string>());
        }
        std::sort(e.concepts.begin(), e.concepts.end());
        e.concepts.erase(std::unique(e.concepts.begin(), e.concepts.end()), e.concepts.end());
        if (e.concepts.empty())
            throw ParseError(entities_path, line, "entity " + e.id + " has no concepts");
        if (!g.entities.emplace(e.id, e).second)
            throw IntegrityError(entities_path + ": duplicate entity id " + e.id);
    });

    bool explicit_relations = !relations_path.empty()
        && std::filesystem::exists(relations_path);
    if (explicit_relations) {
        for_each_jsonl(relations_path, [&](const json& rec, size_t line) {
            if (is_meta_record(rec)) return;
            if (!rec.is_object() || !rec.contains("id") || !rec["id"].is_string())
                throw ParseError(relations_path, line, "relation record needs a string 'id'");
            Relation r;
            r.id = rec["id"].get<std::string>();
            if (r.id.empty()) throw ParseError(relations_path, line, "empty relation id");
            r.label = rec.value("label", r.id);
            if (!g.relations.emplace(r.id, r).second)
                throw IntegrityError(relations_path + ": duplicate relation id " + r.id);
        });
    }

    std::ifstream in(triples_path);
    if (!in) throw Error("cannot open " + triples_path);
    std::string line;
    size_t line_no = 0;
    std::set<std::string> dangling;
    std::vector<Triple> triples;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_tsv(line);
        if (fields.size() != 3)
            throw ParseError(triples_path, line_no, "expected 3 tab-separated fields, got "
                             + std::to_string(fields.size()));
        const std::string& h = fields[0];
        const std::string& r = fields[1];
        const std::string& t = fields[2];
        if (h.empty() || r.empty() || t.empty())
            throw ParseError(triples_path, line_no, "empty id field");
        if (!g.entities.count(h)) dangling.insert("entity " + h);
        if (!g.entities.count(t)) dangling.insert("entity " + t);
        if (explicit_relations) {
            if (!g.relations.count(r)) dangling.insert("relation " + r);
        } else if (!g.relations.count(r)) {
            g.relations.emplace(r, Relation{r, r});
        }
        triples.push_back({h, r, t});
    }
    if (!dangling.empty()) {
        std::string msg = triples_path + ": triples reference unknown ids:";
        for (const auto& d : dangling) msg += " " + d;
        throw IntegrityError(msg);
    }

    for (const auto& t : triples)
        g.out_edges[t.head].push_back({t.relation, t.tail});
    for (auto& [h, edges] : g.out_edges) {
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }

    std::set<std::string> concept_vocab;
    for (const auto& [id, e] : g.entities)
        for (const auto& c : e.concepts) concept_vocab.insert(c);
    for (auto& [id, e] : g.entities) {
        e.is_concept = concept_vocab.count(id) > 0;
        for (const auto& c : e.concepts) g.concept_index[c].push_back(id);
    }
    for (auto& [c, members] : g.concept_index)
        std::sort(members.begin(), members.end());

    return g;
}

KnowledgeGraph load_graph(const std::string& triples_path, const RoleConfig& roles) {
    return load_graph(triples_path, entities_sibling(triples_path),
                      relations_sibling(triples_path), roles);
}

void save_graph(const KnowledgeGraph& g,
                const std::string& triples_path,
                const std::string& entities_path,
                const std::string& relations_path) {
    std::ofstream tout(triples_path);
    if (!tout) throw Error("cannot open " + triples_path + " for writing");
    for (const auto& [h, edges] : g.out_edges)
        for (const auto& e : edges)
            tout << h << "\t" << e.relation << "\t" << e.tail << "\n";

    JsonlWriter eout(entities_path);
    for (const auto& [id, e] : g.entities) {
        json rec;
        rec["id"] = e.id;
        rec["label"] = e.label;
        rec["concepts"] = e.concepts;
        eout.write(rec);
    }

    JsonlWriter rout(relations_path);
    for (const auto& [id, r] : g.relations) {
        json rec;
        rec["id"] = r.id;
        rec["label"] = r.label;
        rout.write(rec);
    }
}

bool graphs_equal(const KnowledgeGraph& a, const KnowledgeGraph& b) {
    if (a.out_edges != b.out_edges) return false;
    if (a.entities.size() != b.entities.size()) return false;
    for (const auto& [id, e] : a.entities) {
        auto it = b.entities.find(id);
        if (it == b.entities.end()) return false;
        if (e.label != it->second.label || e.concepts != it->second.concepts
            || e.is_concept != it->second.is_concept)
            return false;
    }
    if (a.relations.size() != b.relations.size()) return false;
    for (const auto& [id, r] : a.relations) {
        auto it = b.relations.find(id);
        if (it == b.relations.end() || r.label != it->second.label) return false;
    }
    return true;
}

std::optional<std::string> unique_tail(const KnowledgeGraph& g,
                                       const std::string& head,
                                       const std::string& relation) {
    g.entity(head);
    g.relation(relation);
    auto it = g.out_edges.find(head);
    if (it == g.out_edges.end()) return std::nullopt;
    std::optional<std::string> found;
    for (const auto& e : it->second) {
        if (e.relation != relation) continue;
        if (found) return std::nullopt; // ambiguous
        found = e.tail;
    }
    return found;
}

std::vector<std::string> entities_of_concept(const KnowledgeGraph& g,
                                             const std::string& concept_id,
                                             const std::set<std::string>& exclude) {
    auto it = g.concept_index.find(concept_id);
    if (it == g.concept_index.end())
        throw LookupError("unknown concept id: " + concept_id);
    std::vector<std::string> out;
    for (const auto& id : it->second) {
        if (exclude.count(id)) continue;
        if (g.entities.at(id).is_concept) continue;
        out.push_back(id);
    }
    return out;
}

} // namespace kpref
