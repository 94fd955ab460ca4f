#pragma once

#include <fstream>
#include <functional>
#include <string>

#include <json.hpp>

#include "kpref/errors.hpp"

namespace kpref {

using json = nlohmann::json;

// Calls fn(record, line_no) for every non-blank line. Lines starting with a
// {"_meta": ...} object are provenance headers written by the CLI; they are
// passed through to fn as well so callers can skip or inspect them.
inline void for_each_jsonl(const std::string& path,
                           const std::function<void(const json&, size_t)>& fn) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded())
            throw ParseError(path, line_no, "invalid JSON");
        fn(rec, line_no);
    }
}

inline bool is_meta_record(const json& rec) {
    return rec.is_object() && rec.contains("_meta");
}

// Header line for pipeline-internal JSONL files. External contracts
// (training data, entity/relation interchange, cassettes) never get one.
inline json meta_record(const std::string& format) {
    return json{{"_meta", json{{"format", format}, {"version", 1}}}};
}

class JsonlWriter {
public:
    explicit JsonlWriter(const std::string& path) : path_(path), out_(path) {
        if (!out_) throw Error("cannot open " + path + " for writing");
    }
    void write(const json& rec) { out_ << rec.dump() << "\n"; }
    void flush() { out_.flush(); }

private:
    std::string path_;
    std::ofstream out_;
};

inline std::string require_string(const json& rec, const char* key,
                                  const std::string& where) {
    if (!rec.contains(key) || !rec[key].is_string())
        throw SchemaError(where + ": missing string field '" + std::string(key) + "'");
    return rec[key].get<std::string>();
}

} // namespace kpref
