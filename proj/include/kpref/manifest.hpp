#pragma once

// Run manifests: every CLI subcommand that writes an artifact drops a
// sidecar <output>.manifest.json recording what produced it. Manifests
// carry no timestamps so identical runs produce identical bytes.

#include <cstdint>
#include <map>
#include <string>

#include "kpref/jsonl.hpp"

namespace kpref {

struct Manifest {
    std::string subcommand;
    std::map<std::string, std::string> inputs; // role -> path
    uint64_t seed = 0;
    std::map<std::string, size_t> counts;      // stat name -> value
    json config = json::object();              // effective settings
};

// Hex digest of the canonical (sorted-key, no-whitespace) serialization.
std::string config_hash(const json& config);

json manifest_to_json(const Manifest& m);
Manifest manifest_from_json(const json& doc);

// Sidecar path for an artifact: "<artifact>.manifest.json".
std::string manifest_path_for(const std::string& artifact_path);

void write_manifest(const Manifest& m, const std::string& artifact_path);
Manifest read_manifest(const std::string& artifact_path);

} // namespace kpref
