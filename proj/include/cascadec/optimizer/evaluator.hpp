// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "cascadec/optimizer/plan.hpp"

namespace cascadec {

/// Measures a candidate plan (stages in execution order).
class PlanEvaluator {
public:
    virtual ~PlanEvaluator() = default;
    virtual PlanMetrics evaluate(const std::vector<ModuleConfig>& stages) = 0;
};

/// Memoising front for an evaluator; counts the distinct plans explored.
/// The empty plan is free and not counted.
class ExploringEvaluator {
public:
    explicit ExploringEvaluator(PlanEvaluator& inner) : inner_(inner) {}

    PlanMetrics evaluate(const std::vector<ModuleConfig>& stages)
    {
        if (stages.empty())
            return {};
        auto key = plan_key(stages);
        if (auto it = memo_.find(key); it != memo_.end())
            return it->second;
        auto m = inner_.evaluate(stages);
        memo_.emplace(key, m);
        return m;
    }

    Plan make_plan(std::vector<ModuleConfig> stages)
    {
        Plan p;
        p.metrics = evaluate(stages);
        p.stages = std::move(stages);
        return p;
    }

    std::size_t explored() const noexcept { return memo_.size(); }

private:
    PlanEvaluator& inner_;
    std::unordered_map<std::string, PlanMetrics> memo_;
};

struct StageProfile {
    double cost = 1;
    double fallback = 0;
    double accuracy = 1; // on the records the stage answers
};

/// Analytic evaluator: each configured module answers a (1 - p) share of the
/// records reaching it, independently of earlier stages, with a fixed
/// accuracy. Records no stage answers count as wrong.
class StatModelEvaluator final : public PlanEvaluator {
public:
    void set(const ModuleConfig& cfg, StageProfile profile) { profiles_[params_digest(cfg)] = profile; }

    const StageProfile& profile(const ModuleConfig& cfg) const
    {
        auto it = profiles_.find(params_digest(cfg));
        if (it == profiles_.end())
            throw std::out_of_range("no profile for " + describe(cfg));
        return it->second;
    }

    PlanMetrics evaluate(const std::vector<ModuleConfig>& stages) override
    {
        ++calls_;
        PlanMetrics m;
        double reach = 1.0;
        for (const auto& cfg : stages) {
            const auto& pr = profile(cfg);
            m.effectiveness += reach * (1.0 - pr.fallback) * pr.accuracy;
            m.stages.push_back({pr.cost, pr.fallback});
            reach *= pr.fallback;
        }
        m.cost = plan_cost(m.stages);
        return m;
    }

    std::size_t calls() const noexcept { return calls_; }

private:
    std::unordered_map<std::string, StageProfile> profiles_;
    std::size_t calls_ = 0;
};

} // namespace cascadec
