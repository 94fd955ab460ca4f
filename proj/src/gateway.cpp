#include "kpref/gateway.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "kpref/jsonl.hpp"

namespace kpref {

std::vector<CompletionResult>
Gateway::complete_batch(const std::vector<std::string>& prompts, const GenerationConfig& gen) {
    std::vector<CompletionResult> out(prompts.size());
    for (size_t i = 0; i < prompts.size(); ++i) {
        try {
            out[i].text = complete(prompts[i], gen);
            out[i].ok = true;
        } catch (const TransportError& e) {
            out[i].error = e.what();
            out[i].status = e.status;
        } catch (const std::exception& e) {
            out[i].error = e.what();
        }
    }
    return out;
}

HttpGateway::HttpGateway(EndpointConfig cfg) : cfg_(std::move(cfg)) {
    auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("base_url must include a scheme: " + cfg_.base_url);
    auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = cfg_.base_url;
    } else {
        origin_ = cfg_.base_url.substr(0, path_start);
        path_prefix_ = cfg_.base_url.substr(path_start);
        while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
}

namespace {

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

} // namespace

std::string HttpGateway::complete(const std::string& prompt, const GenerationConfig& gen) {
    std::string api_key;
    if (!cfg_.api_key_env.empty()) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (!key || !*key)
            throw CredentialError("environment variable " + cfg_.api_key_env + " is not set");
        api_key = key;
    }

    json body;
    body["model"] = cfg_.model;
    body["messages"] = json::array({json{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = gen.temperature;
    body["top_p"] = gen.top_p;
    body["max_tokens"] = gen.max_tokens;
    const std::string payload = body.dump();

    int last_status = 0;
    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            int delay = cfg_.retry.base_backoff_ms << (attempt - 2);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }

        httplib::Client client(origin_);
        client.set_connection_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg_.timeout_ms / 1000, (cfg_.timeout_ms % 1000) * 1000);
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

        auto res = client.Post(path_prefix_ + "/chat/completions", headers,
                               payload, "application/json");
        if (!res) {
            last_status = 0;
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue; // connect/read timeouts are retryable
        }
        last_status = res->status;
        if (res->status == 401 || res->status == 403)
            throw CredentialError("endpoint rejected credentials (HTTP "
                                  + std::to_string(res->status) + ")");
        if (retryable_status(res->status)) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw TransportError("HTTP " + std::to_string(res->status), res->status);

        json doc = json::parse(res->body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()
            || !doc["choices"][0].contains("message"))
            throw TransportError("malformed completion response", res->status);
        return doc["choices"][0]["message"].value("content", "");
    }
    throw TransportError("retries exhausted: " + last_error, last_status);
}

std::vector<CompletionResult>
HttpGateway::complete_batch(const std::vector<std::string>& prompts,
                            const GenerationConfig& gen) {
    std::vector<CompletionResult> out(prompts.size());
    const size_t workers = std::min<size_t>(std::max(1, cfg_.max_in_flight), prompts.size());
    std::atomic<size_t> next{0};
    auto work = [&] {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= prompts.size()) return;
            try {
                out[i].text = complete(prompts[i], gen);
                out[i].ok = true;
            } catch (const TransportError& e) {
                out[i].error = e.what();
                out[i].status = e.status;
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    return out;
}

ReplayGateway::ReplayGateway(const std::string& cassette_path) : path_(cassette_path) {
    for_each_jsonl(cassette_path, [&](const json& rec, size_t line) {
        if (is_meta_record(rec)) return;
        std::string where = cassette_path + ":" + std::to_string(line);
        std::string prompt = require_string(rec, "prompt", where);
        std::string response = require_string(rec, "response", where);
        tapes_[prompt].first.push_back(response);
    });
}

std::string ReplayGateway::complete(const std::string& prompt, const GenerationConfig&) {
    auto it = tapes_.find(prompt);
    if (it == tapes_.end())
        throw TransportError("cassette " + path_ + " has no response for prompt ("
                             + std::to_string(prompt.size()) + " bytes)", 0);
    auto& [responses, cursor] = it->second;
    std::string text = responses[std::min(cursor, responses.size() - 1)];
    if (cursor + 1 < responses.size()) ++cursor;
    return text;
}

void append_cassette_record(const std::string& cassette_path,
                            const std::string& prompt, const std::string& response) {
    std::ofstream out(cassette_path, std::ios::app);
    if (!out) throw Error("cannot open " + cassette_path + " for appending");
    json rec;
    rec["prompt"] = prompt;
    rec["response"] = response;
    out << rec.dump() << "\n";
}

} // namespace kpref
