#include "kpref/manifest.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "kpref/errors.hpp"
#include "kpref/rng.hpp"

namespace kpref {

std::string config_hash(const json& config) {
    std::ostringstream out;
    out << std::hex << std::setfill('0') << std::setw(16) << fnv1a(config.dump());
    return out.str();
}

json manifest_to_json(const Manifest& m) {
    return json{{"subcommand", m.subcommand},
                {"inputs", m.inputs},
                {"seed", m.seed},
                {"counts", m.counts},
                {"config", m.config},
                {"config_hash", config_hash(m.config)}};
}

Manifest manifest_from_json(const json& doc) {
    Manifest m;
    m.subcommand = doc.at("subcommand").get<std::string>();
    for (const auto& [k, v] : doc.at("inputs").items())
        m.inputs[k] = v.get<std::string>();
    m.seed = doc.at("seed").get<uint64_t>();
    for (const auto& [k, v] : doc.at("counts").items())
        m.counts[k] = v.get<size_t>();
    m.config = doc.at("config");
    std::string recorded = doc.value("config_hash", "");
    if (!recorded.empty() && recorded != config_hash(m.config))
        throw IntegrityError("manifest config hash mismatch: recorded " + recorded
                             + ", computed " + config_hash(m.config));
    return m;
}

std::string manifest_path_for(const std::string& artifact_path) {
    return artifact_path + ".manifest.json";
}

void write_manifest(const Manifest& m, const std::string& artifact_path) {
    const std::string path = manifest_path_for(artifact_path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << manifest_to_json(m).dump(2) << "\n";
}

Manifest read_manifest(const std::string& artifact_path) {
    const std::string path = manifest_path_for(artifact_path);
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ParseError(path, 1, "invalid JSON");
    return manifest_from_json(doc);
}

} // namespace kpref
