// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/providers/llm.hpp"

namespace cascadec {

/// Request and response shapes are configuration, so no vendor API is
/// hard-coded. `body_template` is sent with the prompt written at
/// `prompt_pointer`; the answer is read from `response_pointer`.
struct HttpLlmConfig {
    std::string endpoint; // e.g. http://localhost:8080/v1/chat/completions
    std::string api_key;
    std::string model;
    int max_tokens = 256;
    double temperature = 0.0;
    std::string auth_header = "Authorization";
    std::string auth_prefix = "Bearer ";
    std::string prompt_pointer = "/messages/0/content";
    std::string response_pointer = "/choices/0/message/content";
    nlohmann::json body_template;
    int timeout_seconds = 60;

    /// Reads CASCADEC_HTTP_{ENDPOINT,API_KEY,MODEL,MAX_TOKENS,TEMPERATURE,
    /// PROMPT_POINTER,RESPONSE_POINTER}.
    static HttpLlmConfig from_env()
    {
        auto env = [](const char* name) -> std::optional<std::string> {
            if (const char* v = std::getenv(name))
                return std::string(v);
            return std::nullopt;
        };
        HttpLlmConfig c;
        auto endpoint = env("CASCADEC_HTTP_ENDPOINT");
        if (!endpoint)
            throw Error(Errc::provider_unavailable, "CASCADEC_HTTP_ENDPOINT is not set");
        c.endpoint = *endpoint;
        c.api_key = env("CASCADEC_HTTP_API_KEY").value_or("");
        c.model = env("CASCADEC_HTTP_MODEL").value_or("");
        if (auto v = env("CASCADEC_HTTP_MAX_TOKENS"))
            c.max_tokens = std::stoi(*v);
        if (auto v = env("CASCADEC_HTTP_TEMPERATURE"))
            c.temperature = std::stod(*v);
        if (auto v = env("CASCADEC_HTTP_PROMPT_POINTER"))
            c.prompt_pointer = *v;
        if (auto v = env("CASCADEC_HTTP_RESPONSE_POINTER"))
            c.response_pointer = *v;
        return c;
    }
};

class HttpLlm final : public LlmProvider {
public:
    explicit HttpLlm(HttpLlmConfig config) : config_(std::move(config))
    {
        auto scheme_end = config_.endpoint.find("://");
        auto path_start = config_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
        base_ = config_.endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
    }

    nlohmann::json request_body(std::string_view prompt) const
    {
        auto body = config_.body_template;
        if (body.is_null())
            body = {{"model", config_.model}, {"max_tokens", config_.max_tokens},
                {"temperature", config_.temperature},
                {"messages", nlohmann::json::array({{{"role", "user"}, {"content", ""}}})}};
        body[nlohmann::json::json_pointer(config_.prompt_pointer)] = std::string(prompt);
        return body;
    }

protected:
    std::string respond(std::string_view prompt) override
    {
        httplib::Client client(base_);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        httplib::Headers headers;
        if (!config_.api_key.empty())
            headers.emplace(config_.auth_header, config_.auth_prefix + config_.api_key);
        auto res = client.Post(path_, headers, request_body(prompt).dump(), "application/json");
        if (!res)
            throw Error(Errc::provider_unavailable, "request to " + config_.endpoint + " failed: " + httplib::to_string(res.error()));
        if (res->status != 200)
            throw Error(Errc::provider_unavailable, "HTTP " + std::to_string(res->status) + " from " + config_.endpoint);
        try {
            auto j = nlohmann::json::parse(res->body);
            return j.at(nlohmann::json::json_pointer(config_.response_pointer)).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::provider_unavailable, std::string("malformed response: ") + e.what());
        }
    }

private:
    HttpLlmConfig config_;
    std::string base_;
    std::string path_;
};

} // namespace cascadec
