#pragma once

// Chat-completion access. HttpGateway talks to an OpenAI-style
// /chat/completions endpoint; ReplayGateway serves recorded prompt->response
// pairs for offline, deterministic runs. The API key is read from the env
// var named in the config at request time and appears only in the
// Authorization header, never in bodies, logs, or errors.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kpref/errors.hpp"

namespace kpref {

struct GenerationConfig {
    double temperature = 0.6;
    double top_p = 1.0;
    int max_tokens = 4096;

    static GenerationConfig synth_mh() { return {0.6, 1.0, 4096}; }
    static GenerationConfig synth_sh() { return {0.9, 1.0, 4096}; }
    static GenerationConfig infer256() { return {0.6, 0.9, 256}; }
    static GenerationConfig infer128() { return {0.6, 0.9, 128}; }
};

struct RetryPolicy {
    int max_attempts = 4;
    int base_backoff_ms = 250; // doubles per attempt
};

struct EndpointConfig {
    std::string base_url;                 // e.g. "http://127.0.0.1:8080/v1"
    std::string model;
    std::string api_key_env = "LLM_API_KEY"; // "" = send no Authorization header
    int max_in_flight = 4;
    int timeout_ms = 60000;
    RetryPolicy retry;
};

struct CompletionResult {
    bool ok = false;
    std::string text;
    std::string error;
    int status = 0;
};

class Gateway {
public:
    virtual ~Gateway() = default;

    // First choice text. Throws CredentialError (never retried) or
    // TransportError (after retries for 429/5xx/timeouts are exhausted).
    virtual std::string complete(const std::string& prompt,
                                 const GenerationConfig& gen) = 0;

    // Order-preserving; per-item failures land in the result slots.
    virtual std::vector<CompletionResult>
    complete_batch(const std::vector<std::string>& prompts, const GenerationConfig& gen);
};

class HttpGateway : public Gateway {
public:
    explicit HttpGateway(EndpointConfig cfg);

    std::string complete(const std::string& prompt, const GenerationConfig& gen) override;
    // Bounded concurrency: at most cfg.max_in_flight requests at once.
    std::vector<CompletionResult>
    complete_batch(const std::vector<std::string>& prompts, const GenerationConfig& gen) override;

    const EndpointConfig& config() const { return cfg_; }

private:
    EndpointConfig cfg_;
    std::string origin_;      // scheme://host[:port]
    std::string path_prefix_; // anything after the origin
};

// Cassette: JSONL of {"prompt": ..., "response": ...}. Identical prompts may
// be recorded multiple times and replay in order; the final recording is
// sticky so bounded retries replay deterministically. Batches run
// sequentially so runs are byte-reproducible.
class ReplayGateway : public Gateway {
public:
    explicit ReplayGateway(const std::string& cassette_path);

    std::string complete(const std::string& prompt, const GenerationConfig& gen) override;
    size_t recorded_prompts() const { return tapes_.size(); }

private:
    std::map<std::string, std::pair<std::vector<std::string>, size_t>> tapes_;
    std::string path_;
};

// Test/fixture helper: append one prompt->response record.
void append_cassette_record(const std::string& cassette_path,
                            const std::string& prompt, const std::string& response);

} // namespace kpref
