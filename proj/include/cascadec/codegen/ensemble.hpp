// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cascadec/codegen/evolution.hpp"
#include "cascadec/modules/verdict.hpp"

namespace cascadec {

enum class EnsembleMode { parallel, sequential };

constexpr const char* to_string(EnsembleMode m) noexcept { return m == EnsembleMode::parallel ? "parallel" : "sequential"; }

/// Categorical outputs vote; text and numbers try snippets in accuracy order.
inline EnsembleMode default_ensemble_mode(const TaskSpec& spec)
{
    return spec.output.kind == ValueKind::categorical ? EnsembleMode::parallel : EnsembleMode::sequential;
}

/// Votes over non-abstaining snippets. Unit weights unless `weights` is
/// given. A tied top vote or no answers at all falls back.
inline ModuleVerdict parallel_ensemble_execute(const Record& record, std::span<const Snippet> ensemble, const TaskSpec& spec,
    std::span<const double> weights = {}, std::chrono::milliseconds timeout = default_run_timeout)
{
    std::vector<std::pair<Value, double>> tally;
    double total = 0;
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        auto out = run_snippet(ensemble[i], spec, record, timeout);
        if (out.status != RunStatus::answered)
            continue;
        double w = weights.empty() ? 1.0 : weights[i];
        total += w;
        auto it = std::find_if(tally.begin(), tally.end(), [&](const auto& t) { return values_match(t.first, *out.value); });
        if (it == tally.end())
            tally.emplace_back(*out.value, w);
        else
            it->second += w;
    }
    if (tally.empty() || total <= 0)
        return ModuleVerdict::fallback();
    std::stable_sort(tally.begin(), tally.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (tally.size() > 1 && tally[0].second == tally[1].second)
        return ModuleVerdict::fallback();
    return ModuleVerdict::answered(tally[0].first, std::clamp(tally[0].second / total, 0.0, 1.0));
}

/// First answering snippet wins; its validation accuracy is the confidence.
/// `executed`, when given, counts the snippets actually run.
inline ModuleVerdict sequential_ensemble_execute(const Record& record, std::span<const Snippet> ensemble,
    std::span<const double> accuracies, const TaskSpec& spec, std::size_t* executed = nullptr,
    std::chrono::milliseconds timeout = default_run_timeout)
{
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        if (executed)
            ++*executed;
        auto out = run_snippet(ensemble[i], spec, record, timeout);
        if (out.status == RunStatus::answered)
            return ModuleVerdict::answered(*out.value, std::clamp(accuracies[i], 0.0, 1.0));
    }
    return ModuleVerdict::fallback();
}

/// The deployable result of evolution: member programs with their accuracy.
class CodeEnsemble {
public:
    CodeEnsemble() = default;

    CodeEnsemble(std::vector<Snippet> members, std::vector<double> accuracies, EnsembleMode mode)
        : members_(std::move(members)), accuracies_(std::move(accuracies)), mode_(mode)
    {
        if (members_.size() != accuracies_.size())
            throw std::invalid_argument("one accuracy per member");
    }

    static CodeEnsemble from_state(const EnsembleState& st, EnsembleMode mode)
    {
        std::vector<double> acc;
        for (const auto& s : st.ensemble)
            acc.push_back(st.scorecards.at(s.id).accuracy);
        return CodeEnsemble(st.ensemble, std::move(acc), mode);
    }

    const std::vector<Snippet>& members() const noexcept { return members_; }
    const std::vector<double>& accuracies() const noexcept { return accuracies_; }
    EnsembleMode mode() const noexcept { return mode_; }

    ModuleVerdict execute(const Record& record, const TaskSpec& spec) const
    {
        if (mode_ == EnsembleMode::parallel)
            return parallel_ensemble_execute(record, members_, spec);
        return sequential_ensemble_execute(record, members_, accuracies_, spec);
    }

    nlohmann::json to_json() const
    {
        nlohmann::json members = nlohmann::json::array();
        for (std::size_t i = 0; i < members_.size(); ++i)
            members.push_back({{"id", members_[i].id}, {"source", members_[i].source}, {"accuracy", accuracies_[i]},
                {"parent", members_[i].lineage.parent_id}});
        return {{"mode", to_string(mode_)}, {"members", members}};
    }

    static CodeEnsemble from_json(const nlohmann::json& j)
    {
        auto mode = j.at("mode").get<std::string>() == "parallel" ? EnsembleMode::parallel : EnsembleMode::sequential;
        std::vector<Snippet> members;
        std::vector<double> acc;
        std::uint64_t serial = 0;
        for (const auto& m : j.at("members")) {
            Snippet s;
            s.id = m.at("id").get<std::string>();
            s.serial = ++serial;
            s.source = m.at("source").get<std::string>();
            s.program = compile_program(s.source, &s.quarantined);
            s.lineage.parent_id = m.value("parent", "");
            members.push_back(std::move(s));
            acc.push_back(m.at("accuracy").get<double>());
        }
        return CodeEnsemble(std::move(members), std::move(acc), mode);
    }

private:
    std::vector<Snippet> members_;
    std::vector<double> accuracies_;
    EnsembleMode mode_ = EnsembleMode::parallel;
};

} // namespace cascadec
