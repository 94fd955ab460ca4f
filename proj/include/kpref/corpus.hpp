#pragma once

// Passage corpus: ingest, entity-density filtering, seeded sampling.
// Corpus files are JSONL: {"id", "title", "text"[, "distinct_entity_count"]}.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "kpref/errors.hpp"

namespace kpref {

struct PassageDoc {
    std::string id;
    std::string title;
    std::string text;
    size_t distinct_entity_count = 0; // filled by filter_by_entities
};

struct Corpus {
    std::vector<PassageDoc> docs;
    std::map<std::string, size_t> by_id; // id -> index into docs

    const PassageDoc& at(const std::string& id) const;
    size_t size() const { return docs.size(); }
};

class NamedEntityRecognizer {
public:
    virtual ~NamedEntityRecognizer() = default;
    // Distinct surface mentions (case-sensitive). Throws on failure;
    // filter_by_entities drops the doc and logs a warning.
    virtual std::set<std::string> entities(const PassageDoc& doc) const = 0;
};

// Maximal runs of capitalized tokens; a mention is kept only when at least
// one of its occurrences is not sentence-initial. No model, no lexicon.
class HeuristicNer : public NamedEntityRecognizer {
public:
    std::set<std::string> entities(const PassageDoc& doc) const override;
};

// Pre-computed mentions from JSONL {"id": doc_id, "entities": [...]}.
// A doc id absent from the file is a recognizer failure for that doc.
class ExternalJsonlNer : public NamedEntityRecognizer {
public:
    explicit ExternalJsonlNer(const std::string& path);
    std::set<std::string> entities(const PassageDoc& doc) const override;

private:
    std::map<std::string, std::set<std::string>> by_doc_;
};

Corpus ingest_passages(const std::string& path);
void write_corpus(const Corpus& corpus, const std::string& path);

// Keeps docs with >= min_distinct recognized mentions, in input order,
// with distinct_entity_count filled in.
Corpus filter_by_entities(const Corpus& corpus, size_t min_distinct,
                          const NamedEntityRecognizer& ner);

// n distinct docs, uniform without replacement, in draw order.
std::vector<PassageDoc> sample_passages(const Corpus& corpus, size_t n, uint64_t seed);

} // namespace kpref
