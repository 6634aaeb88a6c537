// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/modules/config.hpp"

namespace cascadec {

/// Cost charged to stages that never call a provider, so priority stays finite.
inline constexpr double non_llm_stage_cost = 1e-3;

struct StageMetrics {
    double cost = 0;     // expected provider calls per record reaching the stage
    double fallback = 1; // fraction of reaching records passed on
    friend bool operator==(const StageMetrics&, const StageMetrics&) = default;
};

struct PlanMetrics {
    double effectiveness = 0;
    double cost = 0; // expected provider calls per input record
    std::vector<StageMetrics> stages;
    friend bool operator==(const PlanMetrics&, const PlanMetrics&) = default;
};

struct Plan {
    std::vector<ModuleConfig> stages; // execution order
    PlanMetrics metrics;

    bool empty() const noexcept { return stages.empty(); }
    bool uses(ModuleKind k) const
    {
        return std::any_of(stages.begin(), stages.end(), [&](const ModuleConfig& c) { return kind_of(c) == k; });
    }
    friend bool operator==(const Plan&, const Plan&) = default;
};

/// Identity of a plan's structure (stages and hyperparameters, in order).
inline std::string plan_key(const std::vector<ModuleConfig>& stages)
{
    std::string s;
    for (const auto& c : stages)
        s += config_to_json(c).dump() + ";";
    return digest(s);
}

inline std::string describe(const Plan& p)
{
    if (p.stages.empty())
        return "[]";
    std::string s = "[";
    for (std::size_t i = 0; i < p.stages.size(); ++i)
        s += (i ? " -> " : "") + describe(p.stages[i]);
    return s + "]";
}

/// sum_i (prod_{j<i} p_j) * C_i
inline double plan_cost(std::span<const StageMetrics> stages)
{
    double reach = 1.0, total = 0.0;
    for (const auto& s : stages) {
        if (!(s.fallback >= 0 && s.fallback <= 1) || !(s.cost >= 0))
            throw std::invalid_argument("plan_cost(): need p in [0,1] and C >= 0");
        total += reach * s.cost;
        reach *= s.fallback;
    }
    return total;
}

/// (1 - p) / C
inline double module_priority(double cost, double fallback)
{
    if (!(cost > 0))
        throw Error(Errc::zero_cost, "module cost must be positive");
    return (1.0 - fallback) / cost;
}

/// Indices of `stages` in descending priority; ties by lower cost, then input
/// order. This order minimises plan_cost over all permutations.
inline std::vector<std::size_t> priority_order(std::span<const StageMetrics> stages)
{
    std::vector<double> prio;
    for (const auto& s : stages)
        prio.push_back(module_priority(s.cost, s.fallback));
    std::vector<std::size_t> idx(stages.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (prio[a] != prio[b])
            return prio[a] > prio[b];
        return stages[a].cost < stages[b].cost;
    });
    return idx;
}

inline std::vector<StageMetrics> order_by_priority(std::span<const StageMetrics> stages)
{
    std::vector<StageMetrics> out;
    for (auto i : priority_order(stages))
        out.push_back(stages[i]);
    return out;
}

/// Strictly cheaper and strictly more effective.
inline bool dominates(const PlanMetrics& a, const PlanMetrics& b)
{
    return a.cost < b.cost && a.effectiveness > b.effectiveness;
}
inline bool dominates(const Plan& a, const Plan& b) { return dominates(a.metrics, b.metrics); }

/// Effectiveness bucket used to compare real-valued metrics.
inline long long effectiveness_key(double a) { return std::llround(a * 1e4); }

/// Cheapest plan within `gap` of the most effective one; ties go to higher
/// effectiveness, then to the earlier plan.
inline const Plan& select_final_plan(std::span<const Plan> frontier, double gap)
{
    if (frontier.empty())
        throw std::invalid_argument("select_final_plan(): empty frontier");
    double best_a = frontier[0].metrics.effectiveness;
    for (const auto& p : frontier)
        best_a = std::max(best_a, p.metrics.effectiveness);
    const Plan* chosen = nullptr;
    for (const auto& p : frontier) {
        if (best_a - p.metrics.effectiveness > gap)
            continue;
        if (!chosen || p.metrics.cost < chosen->metrics.cost
            || (p.metrics.cost == chosen->metrics.cost && p.metrics.effectiveness > chosen->metrics.effectiveness))
            chosen = &p;
    }
    return *chosen;
}

/// Most effective plan; ties go to lower cost, then to the earlier plan.
inline const Plan& max_effectiveness_plan(std::span<const Plan> plans)
{
    if (plans.empty())
        throw std::invalid_argument("max_effectiveness_plan(): no plans");
    const Plan* best = &plans[0];
    for (const auto& p : plans)
        if (p.metrics.effectiveness > best->metrics.effectiveness
            || (p.metrics.effectiveness == best->metrics.effectiveness && p.metrics.cost < best->metrics.cost))
            best = &p;
    return *best;
}

inline nlohmann::json metrics_to_json(const PlanMetrics& m)
{
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : m.stages)
        stages.push_back({{"cost", s.cost}, {"fallback", s.fallback}});
    return {{"effectiveness", m.effectiveness}, {"cost", m.cost}, {"stages", stages}};
}

inline PlanMetrics metrics_from_json(const nlohmann::json& j)
{
    PlanMetrics m;
    m.effectiveness = j.at("effectiveness").get<double>();
    m.cost = j.at("cost").get<double>();
    for (const auto& s : j.at("stages"))
        m.stages.push_back({s.at("cost").get<double>(), s.at("fallback").get<double>()});
    return m;
}

inline nlohmann::json plan_to_json(const Plan& p)
{
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& c : p.stages)
        stages.push_back(config_to_json(c));
    return {{"stages", stages}, {"metrics", metrics_to_json(p.metrics)}};
}

inline Plan plan_from_json(const nlohmann::json& j)
{
    try {
        Plan p;
        for (const auto& s : j.at("stages"))
            p.stages.push_back(config_from_json(s));
        p.metrics = metrics_from_json(j.at("metrics"));
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::schema_mismatch, std::string("plan: ") + e.what());
    }
}

} // namespace cascadec
