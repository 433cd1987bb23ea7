#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "cequel/errors.hpp"
#include "cequel/jsonl.hpp"
#include "cequel/oracle.hpp"

namespace cequel {

struct HttpOracleConfig {
    std::string base_url = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    std::string api_key_env = "CEQUEL_API_KEY";  // name of the env var holding the key
    int timeout_seconds = 60;
};

/// Chat-completions client. The API key is read from the environment at
/// construction and is never persisted anywhere.
class HttpChatBackend : public OracleBackend {
public:
    explicit HttpChatBackend(HttpOracleConfig config) : cfg_(std::move(config)) {
        const char* key = std::getenv(cfg_.api_key_env.c_str());
        if (key == nullptr || *key == '\0')
            throw ValidationError("environment variable " + cfg_.api_key_env +
                                  " must hold the API key for the HTTP oracle");
        api_key_ = key;
    }

    std::string kind() const override { return "http-llm"; }
    std::string model() const override { return cfg_.model; }
    double temperature() const override { return cfg_.temperature; }

    std::string answer(const OracleQuery& q) override {
        const json body = {{"model", cfg_.model},
                           {"temperature", cfg_.temperature},
                           {"messages", json::array({json{{"role", "user"}, {"content", q.prompt}}})}};
        httplib::Client client(cfg_.base_url);
        client.set_connection_timeout(cfg_.timeout_seconds, 0);
        client.set_read_timeout(cfg_.timeout_seconds, 0);
        client.set_bearer_token_auth(api_key_);
        auto res = client.Post(cfg_.path, body.dump(), "application/json");
        if (!res)
            throw TransportError("HTTP request failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw TransportError("HTTP " + std::to_string(res->status) + ": " +
                                 res->body.substr(0, 200));
        const json envelope = json::parse(res->body, nullptr, false);
        if (envelope.is_discarded() || !envelope.contains("choices") ||
            !envelope["choices"].is_array() || envelope["choices"].empty() ||
            !envelope["choices"][0].contains("message") ||
            !envelope["choices"][0]["message"].contains("content") ||
            !envelope["choices"][0]["message"]["content"].is_string())
            throw TransportError("malformed completion envelope");
        return envelope["choices"][0]["message"]["content"].get<std::string>();
    }

private:
    HttpOracleConfig cfg_;
    std::string api_key_;
};

}  // namespace cequel
