// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "cascadec/batching/batching.hpp"
#include "cascadec/modules/llm_module.hpp"

namespace cascadec {

struct BatchingConfig {
    std::size_t batch_size = 1;
    BatchStrategy strategy = BatchStrategy::random;
    std::uint64_t seed = 0;
};

struct BatchedRun {
    std::vector<LlmAnswer> answers; // aligned with the input records
    std::size_t provider_calls = 0;
    std::size_t retried = 0; // indices re-asked one at a time
};

/// Answers every record through the LLM executor, B instances per call.
/// Indices whose line is missing or unparseable are retried once as single
/// queries. Each record's exchange is stored under its single-query prompt
/// with the batch's token counts split across members.
inline BatchedRun run_llm_batched(LlmExecutor& llm, std::span<const Record> records, const BatchingConfig& cfg)
{
    BatchedRun run;
    run.answers.resize(records.size());
    std::vector<Embedding> emb;
    if (cfg.batch_size > 1 && cfg.strategy != BatchStrategy::random)
        for (const auto& r : records)
            emb.push_back(llm.store().embedder().embed(record_text(r)));
    auto batches = form_batches(records.size(), emb, cfg.strategy, cfg.batch_size, cfg.seed);
    auto before = llm.provider().usage().calls;
    for (const auto& b : batches) {
        if (b.members.size() == 1) {
            run.answers[b.members[0]] = llm.query(records[b.members[0]]);
            continue;
        }
        std::vector<Record> members;
        for (auto i : b.members)
            members.push_back(records[i]);
        auto prompt = render_batched_prompt(llm.spec(), llm.profile_for(members.front()), members);
        auto ex = llm.provider().complete(prompt);
        auto parsed = parse_batched_response(ex.response, members.size(), llm.spec().output);
        auto share = [&](std::size_t total, std::size_t j) {
            auto q = total / members.size(), r = total % members.size();
            return q + (j < r ? 1 : 0);
        };
        for (std::size_t j = 0; j < members.size(); ++j) {
            const auto& item = parsed.at(j + 1);
            if (!item.value) {
                ++run.retried;
                run.answers[b.members[j]] = llm.query(members[j]);
                continue;
            }
            LlmExchange part {llm.prompt_for(members[j]), item.raw, share(ex.tokens_in, j), share(ex.tokens_out, j)};
            llm.remember(part.prompt, members[j], part, item.value);
            run.answers[b.members[j]] = {item.value, item.raw};
        }
    }
    run.provider_calls = llm.provider().usage().calls - before;
    return run;
}

} // namespace cascadec
