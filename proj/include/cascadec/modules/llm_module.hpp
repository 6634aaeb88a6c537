// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>

#include "cascadec/cache/cache_store.hpp"
#include "cascadec/core/error.hpp"
#include "cascadec/modules/config.hpp"
#include "cascadec/modules/few_shot.hpp"
#include "cascadec/modules/verdict.hpp"
#include "cascadec/providers/llm.hpp"
#include "cascadec/task/prompts.hpp"

namespace cascadec {

/// Parsed response. `value` is empty when the text cannot be coerced to the
/// output kind (only possible for categorical and number outputs).
struct LlmAnswer {
    std::optional<Value> value;
    std::string raw;
};

inline LlmAnswer parse_llm_answer(const TaskSpec& spec, std::string_view response)
{
    LlmAnswer a;
    a.raw = extract_single_answer(response);
    a.value = coerce_output(spec.output, a.raw);
    return a;
}

/// Single-instance prompting stage. One provider call per record; every
/// exchange is written to the store, indexed by the record text when the
/// answer parses.
class LlmExecutor {
public:
    LlmExecutor(const TaskSpec& spec, LlmCfg cfg, LlmProvider& provider, CacheStore& store, std::size_t few_shot_k = 3,
        std::uint64_t seed = 0)
        : spec_(spec), cfg_(cfg), provider_(provider), store_(store), seed_(seed)
    {
        k_ = std::min(few_shot_k, spec_.examples.size());
        if (cfg_.examples_sample_mode == SampleMode::fixed)
            fixed_profile_ = render_task_profile(spec_, std::span(spec_.examples.data(), k_));
    }

    const TaskSpec& spec() const noexcept { return spec_; }
    const LlmCfg& config() const noexcept { return cfg_; }
    LlmProvider& provider() noexcept { return provider_; }
    CacheStore& store() noexcept { return store_; }

    std::string profile_for(const Record& record) const
    {
        if (fixed_profile_)
            return *fixed_profile_;
        auto shots = sample_few_shot_examples(spec_, record, cfg_.examples_sample_mode, k_, store_.embedder(), seed_);
        return render_task_profile(spec_, shots);
    }

    std::string prompt_for(const Record& record) const { return render_query_prompt(profile_for(record), spec_, record); }

    /// Calls the provider once and stores the exchange.
    LlmAnswer query(const Record& record)
    {
        auto prompt = prompt_for(record);
        auto ex = provider_.complete(prompt);
        auto ans = parse_llm_answer(spec_, ex.response);
        remember(prompt, record, ex, ans.value);
        return ans;
    }

    /// Throws ParseFailure when a categorical or number answer does not parse.
    ModuleVerdict execute(const Record& record)
    {
        auto ans = query(record);
        if (!ans.value)
            throw Error(Errc::parse_failure, "response '" + ans.raw + "' is not a valid " + spec_.output.name);
        return ModuleVerdict::answered(*ans.value, 1.0);
    }

    void remember(const std::string& prompt, const Record& record, const LlmExchange& ex, const std::optional<Value>& answer)
    {
        if (answer)
            store_.put_exchange(prompt, record_text(record), ex, answer);
        else
            store_.put_exchange(prompt, std::nullopt, ex);
    }

private:
    TaskSpec spec_;
    LlmCfg cfg_;
    LlmProvider& provider_;
    CacheStore& store_;
    std::uint64_t seed_;
    std::size_t k_ = 0;
    std::optional<std::string> fixed_profile_;
};

} // namespace cascadec
