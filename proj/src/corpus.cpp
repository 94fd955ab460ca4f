#include "kpref/corpus.hpp"

#include <cctype>
#include <iostream>

#include "kpref/jsonl.hpp"
#include "kpref/rng.hpp"

namespace kpref {

const PassageDoc& Corpus::at(const std::string& id) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw LookupError("unknown passage id: " + id);
    return docs[it->second];
}

namespace {

bool ascii_punct(char c) {
    return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

struct Token {
    std::string core;    // raw token minus leading/trailing punctuation
    bool capitalized = false;
    bool sentence_start = false;
    bool ends_sentence = false;
};

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> toks;
    size_t i = 0;
    bool at_sentence_start = true;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        std::string raw = text.substr(i, j - i);
        i = j;

        size_t b = 0, e = raw.size();
        while (b < e && ascii_punct(raw[b])) ++b;
        while (e > b && ascii_punct(raw[e - 1])) --e;

        Token t;
        t.core = raw.substr(b, e - b);
        t.capitalized = !t.core.empty()
            && std::isupper(static_cast<unsigned char>(t.core[0])) != 0;
        t.sentence_start = at_sentence_start;
        // Trailing .!? (possibly wrapped in quotes/brackets) closes a sentence.
        for (size_t k = raw.size(); k > e; --k) {
            char c = raw[k - 1];
            if (c == '.' || c == '!' || c == '?') {
                t.ends_sentence = true;
                break;
            }
        }
        at_sentence_start = t.ends_sentence || t.core.empty();
        toks.push_back(std::move(t));
    }
    return toks;
}

} // namespace

std::set<std::string> HeuristicNer::entities(const PassageDoc& doc) const {
    auto toks = tokenize(doc.text);
    // mention -> has a non-sentence-initial occurrence
    std::map<std::string, bool> seen;
    size_t i = 0;
    while (i < toks.size()) {
        if (toks[i].core.empty() || !toks[i].capitalized) {
            ++i;
            continue;
        }
        size_t j = i;
        std::string mention = toks[j].core;
        // extend while the next token is capitalized and no sentence break intervenes
        while (j + 1 < toks.size() && !toks[j].ends_sentence
               && toks[j + 1].capitalized && !toks[j + 1].core.empty()) {
            ++j;
            mention += " " + toks[j].core;
        }
        bool initial = toks[i].sentence_start;
        auto [it, inserted] = seen.emplace(mention, !initial);
        if (!inserted && !initial) it->second = true;
        i = j + 1;
    }
    std::set<std::string> out;
    for (const auto& [m, non_initial] : seen)
        if (non_initial) out.insert(m);
    return out;
}

ExternalJsonlNer::ExternalJsonlNer(const std::string& path) {
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string id = require_string(rec, "id", path + ":" + std::to_string(line));
        if (!rec.contains("entities") || !rec["entities"].is_array())
            throw ParseError(path, line, "record needs an 'entities' array");
        auto& set = by_doc_[id];
        for (const auto& e : rec["entities"]) {
            if (!e.is_string()) throw ParseError(path, line, "entities must be strings");
            set.insert(e.get<std::string>());
        }
    });
}

std::set<std::string> ExternalJsonlNer::entities(const PassageDoc& doc) const {
    auto it = by_doc_.find(doc.id);
    if (it == by_doc_.end())
        throw LookupError("no external NER record for doc " + doc.id);
    return it->second;
}

Corpus ingest_passages(const std::string& path) {
    Corpus corpus;
    for_each_jsonl(path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        PassageDoc d;
        d.id = require_string(rec, "id", path + ":" + std::to_string(line));
        d.title = rec.value("title", "");
        if (!rec.contains("text") || !rec["text"].is_string())
            throw ParseError(path, line, "passage record needs a string 'text'");
        d.text = rec["text"].get<std::string>();
        d.distinct_entity_count = rec.value("distinct_entity_count", size_t(0));
        if (corpus.by_id.count(d.id))
            throw IntegrityError(path + ": duplicate passage id " + d.id);
        corpus.by_id[d.id] = corpus.docs.size();
        corpus.docs.push_back(std::move(d));
    });
    return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& path) {
    JsonlWriter out(path);
    out.write(meta_record("passages"));
    for (const auto& d : corpus.docs) {
        json rec;
        rec["id"] = d.id;
        rec["title"] = d.title;
        rec["text"] = d.text;
        if (d.distinct_entity_count > 0)
            rec["distinct_entity_count"] = d.distinct_entity_count;
        out.write(rec);
    }
}

Corpus filter_by_entities(const Corpus& corpus, size_t min_distinct,
                          const NamedEntityRecognizer& ner) {
    Corpus out;
    for (const auto& d : corpus.docs) {
        std::set<std::string> ents;
        try {
            ents = ner.entities(d);
        } catch (const std::exception& e) {
            std::cerr << "warning: dropping doc " << d.id
                      << " (entity recognition failed: " << e.what() << ")\n";
            continue;
        }
        if (ents.size() < min_distinct) continue;
        PassageDoc kept = d;
        kept.distinct_entity_count = ents.size();
        out.by_id[kept.id] = out.docs.size();
        out.docs.push_back(std::move(kept));
    }
    return out;
}

std::vector<PassageDoc> sample_passages(const Corpus& corpus, size_t n, uint64_t seed) {
    if (n > corpus.size())
        throw RangeError("sample_passages: n = " + std::to_string(n)
                         + " exceeds corpus size " + std::to_string(corpus.size()));
    Rng rng(seed);
    auto idx = rng.sample_indices(corpus.size(), n);
    std::vector<PassageDoc> out;
    out.reserve(n);
    for (size_t i : idx) out.push_back(corpus.docs[i]);
    return out;
}

} // namespace kpref
