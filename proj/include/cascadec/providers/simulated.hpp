// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <functional>
#include <mutex>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/providers/llm.hpp"

namespace cascadec {

/// Deterministic offline provider base: records every prompt it answers.
class SimulatedLlm : public LlmProvider {
public:
    std::vector<std::string> call_log() const
    {
        std::lock_guard lock(log_mutex_);
        return log_;
    }

    std::size_t call_count() const
    {
        std::lock_guard lock(log_mutex_);
        return log_.size();
    }

protected:
    std::string respond(std::string_view prompt) final
    {
        auto out = answer(prompt);
        std::lock_guard lock(log_mutex_);
        log_.emplace_back(prompt);
        return out;
    }

    virtual std::string answer(std::string_view prompt) = 0;

private:
    mutable std::mutex log_mutex_;
    std::vector<std::string> log_;
};

/// Answers with a caller-supplied pure function of the prompt.
class CallbackLlm final : public SimulatedLlm {
public:
    explicit CallbackLlm(std::function<std::string(std::string_view)> fn) : fn_(std::move(fn)) {}

protected:
    std::string answer(std::string_view prompt) override { return fn_(prompt); }

private:
    std::function<std::string(std::string_view)> fn_;
};

struct ScriptRule {
    std::string pattern;
    std::string response; // may reference capture groups as $1, $2, ...
    bool icase = false;
};

/// Ordered (pattern -> response) rules; the first rule whose regex matches
/// anywhere in the prompt wins. With `per_instance`, batched prompts are split
/// into their "Instance #i:" blocks and each block is answered separately as
/// if it were a single-instance prompt.
class ScriptedLlm final : public SimulatedLlm {
public:
    ScriptedLlm(std::vector<ScriptRule> rules, std::string default_response, bool per_instance = false)
        : default_response_(std::move(default_response)), per_instance_(per_instance)
    {
        for (auto& r : rules) {
            auto flags = std::regex::ECMAScript;
            if (r.icase)
                flags |= std::regex::icase;
            try {
                compiled_.push_back({std::regex(r.pattern, flags), r.response});
            } catch (const std::regex_error& e) {
                throw Error(Errc::invalid_config, "bad script pattern '" + r.pattern + "': " + e.what());
            }
        }
    }

    static ScriptedLlm from_json(const nlohmann::json& j)
    {
        std::vector<ScriptRule> rules;
        for (const auto& r : j.value("rules", nlohmann::json::array()))
            rules.push_back({r.at("pattern").get<std::string>(), r.at("response").get<std::string>(), r.value("icase", false)});
        ScriptedLlm llm(std::move(rules), j.value("default_response", std::string {}), j.value("per_instance", false));
        if (j.contains("token_limit"))
            llm.set_token_limit(j.at("token_limit").get<std::size_t>());
        return llm;
    }

    static std::unique_ptr<ScriptedLlm> load(const std::string& path)
    {
        std::ifstream in(path);
        if (!in)
            throw Error(Errc::io_error, "cannot open script " + path);
        try {
            auto j = nlohmann::json::parse(in);
            return std::make_unique<ScriptedLlm>(from_json(j));
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::invalid_config, "script " + path + ": " + e.what());
        }
    }

    ScriptedLlm(ScriptedLlm&& other) noexcept
        : compiled_(std::move(other.compiled_)),
          default_response_(std::move(other.default_response_)),
          per_instance_(other.per_instance_)
    {
        set_token_limit(other.token_limit());
    }

protected:
    std::string answer(std::string_view prompt) override
    {
        static constexpr std::string_view batch_marker = "Now consider the following instances:\n";
        auto at = prompt.find(batch_marker);
        if (!per_instance_ || at == std::string_view::npos)
            return match(std::string(prompt));

        // Split the instance section into "Instance #i:" blocks.
        auto body = prompt.substr(at + batch_marker.size());
        auto end = body.find("\nPlease respond with the answer only");
        if (end != std::string_view::npos)
            body = body.substr(0, end);
        std::string out;
        std::size_t pos = 0;
        while (pos < body.size()) {
            auto next = body.find("\nInstance #", pos + 1);
            auto block = body.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
            if (!block.empty() && block.front() == '\n')
                block.remove_prefix(1);
            auto colon = block.find(":\n");
            if (block.rfind("Instance #", 0) == 0 && colon != std::string_view::npos) {
                auto index = block.substr(10, colon - 10);
                auto single = std::string("Now consider the following instance:\n") + std::string(block.substr(colon + 2));
                if (!out.empty())
                    out += "\n";
                out += "Output #" + std::string(index) + ": " + match(single);
            }
            if (next == std::string_view::npos)
                break;
            pos = next;
        }
        return out;
    }

private:
    std::string match(const std::string& text) const
    {
        for (const auto& [re, response] : compiled_) {
            std::smatch m;
            if (std::regex_search(text, m, re))
                return m.format(response);
        }
        return default_response_;
    }

    std::vector<std::pair<std::regex, std::string>> compiled_;
    std::string default_response_;
    bool per_instance_ = false;
};

} // namespace cascadec
