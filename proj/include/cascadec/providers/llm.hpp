// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "cascadec/core/error.hpp"

namespace cascadec {

/// Whitespace-delimited token count.
inline std::size_t token_estimate(std::string_view text) noexcept
{
    std::size_t count = 0;
    bool in_token = false;
    for (char c : text) {
        bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
        if (!space && !in_token)
            ++count;
        in_token = !space;
    }
    return count;
}

struct LlmExchange {
    std::string prompt;
    std::string response;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;

    friend bool operator==(const LlmExchange&, const LlmExchange&) = default;
};

struct ProviderUsage {
    std::size_t calls = 0;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
};

/// Boundary to a language model. Implementations must tolerate concurrent
/// complete() calls.
class LlmProvider {
public:
    virtual ~LlmProvider() = default;

    LlmExchange complete(std::string_view prompt)
    {
        if (prompt.empty())
            throw std::invalid_argument("complete(): empty prompt");
        auto tokens_in = token_estimate(prompt);
        if (token_limit_ && tokens_in > *token_limit_)
            throw Error(Errc::context_overflow,
                std::to_string(tokens_in) + " prompt tokens exceed limit " + std::to_string(*token_limit_));
        LlmExchange ex;
        ex.prompt = std::string(prompt);
        ex.response = respond(prompt);
        ex.tokens_in = tokens_in;
        ex.tokens_out = token_estimate(ex.response);
        calls_.fetch_add(1, std::memory_order_relaxed);
        tokens_in_.fetch_add(ex.tokens_in, std::memory_order_relaxed);
        tokens_out_.fetch_add(ex.tokens_out, std::memory_order_relaxed);
        return ex;
    }

    ProviderUsage usage() const noexcept
    {
        return {calls_.load(), tokens_in_.load(), tokens_out_.load()};
    }

    void set_token_limit(std::optional<std::size_t> limit) noexcept { token_limit_ = limit; }
    std::optional<std::size_t> token_limit() const noexcept { return token_limit_; }

protected:
    virtual std::string respond(std::string_view prompt) = 0;

private:
    std::optional<std::size_t> token_limit_;
    std::atomic<std::size_t> calls_ {0};
    std::atomic<std::size_t> tokens_in_ {0};
    std::atomic<std::size_t> tokens_out_ {0};
};

} // namespace cascadec
