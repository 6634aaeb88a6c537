// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cascadec/codegen/rule_program.hpp"
#include "cascadec/task/task_spec.hpp"

namespace cascadec {

inline constexpr std::chrono::milliseconds default_run_timeout {100};

struct Lineage {
    std::string parent_id; // empty for initial snippets
    std::string advice;
    std::string error_subset_digest;
};

struct Snippet {
    std::string id;
    std::uint64_t serial = 0; // creation order; smaller is older
    std::string source;
    std::shared_ptr<const Program> program;
    Lineage lineage;
    bool quarantined = false;
};

struct SnippetOutcome {
    RunStatus status = RunStatus::abstained;
    std::optional<Value> value;
};

/// Runs one snippet under the timeout and coerces its output. Output that does
/// not fit the task's output kind counts as an abstention.
inline SnippetOutcome run_snippet(const Snippet& s, const TaskSpec& spec, const Record& record,
    std::chrono::milliseconds timeout = default_run_timeout)
{
    auto r = s.program->run(record, Clock::now() + timeout);
    if (r.status != RunStatus::answered)
        return {r.status, std::nullopt};
    auto v = coerce_output(spec.output, r.output);
    if (!v)
        return {RunStatus::abstained, std::nullopt};
    return {RunStatus::answered, std::move(v)};
}

struct ErrorCase {
    Record record;
    Value expected;
    std::optional<Value> produced;
};

struct SnippetScorecard {
    std::vector<bool> correct_set;
    std::size_t abstain_count = 0;
    std::size_t timeout_count = 0;
    std::size_t answered = 0;
    double accuracy = 0; // correct / answered, 0 when nothing answered
    std::vector<ErrorCase> errors;

    std::size_t correct_count() const
    {
        std::size_t n = 0;
        for (bool b : correct_set)
            n += b ? 1 : 0;
        return n;
    }
};

/// Runs a snippet over every validation record. Abstentions and timeouts are
/// not errors.
inline SnippetScorecard verify_snippet(const Snippet& s, const TaskSpec& spec, std::span<const LabeledRecord> validation,
    std::chrono::milliseconds timeout = default_run_timeout)
{
    if (validation.empty())
        throw Error(Errc::empty_validation, "verify_snippet() needs validation records");
    SnippetScorecard card;
    card.correct_set.assign(validation.size(), false);
    for (std::size_t i = 0; i < validation.size(); ++i) {
        auto out = run_snippet(s, spec, validation[i].record, timeout);
        if (out.status == RunStatus::timed_out) {
            ++card.timeout_count;
        } else if (out.status == RunStatus::abstained) {
            ++card.abstain_count;
        } else {
            ++card.answered;
            if (values_match(*out.value, validation[i].label))
                card.correct_set[i] = true;
            else
                card.errors.push_back({validation[i].record, validation[i].label, out.value});
        }
    }
    card.accuracy = card.answered ? static_cast<double>(card.correct_count()) / static_cast<double>(card.answered) : 0.0;
    return card;
}

} // namespace cascadec
