// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cascadec/optimizer/evaluator.hpp"
#include "cascadec/optimizer/skyline.hpp"

namespace cascadec {

/// Candidate hyperparameter settings per module kind.
using ModuleGrids = std::map<ModuleKind, std::vector<ModuleConfig>>;

/// Frontiers of the LLM and CodeGen levels plus the standalone stage figures
/// they were built with; reusable while the signature matches.
struct LevelCache {
    std::string signature;
    std::map<ModuleKind, std::vector<Plan>> frontiers;
    std::map<std::string, StageMetrics> standalone; // by params digest
};

struct OptimizeResult {
    std::string mode;
    double gap = 0;
    std::vector<Plan> frontier; // non-empty plans, descending effectiveness
    Plan max_plan;
    Plan chosen;
    std::size_t explored = 0;
    std::size_t levels_reloaded = 0;
    LevelCache level_cache;
    ModuleGrids grids;
};

namespace detail {

inline std::vector<Plan> without_empty(std::vector<Plan> plans)
{
    std::erase_if(plans, [](const Plan& p) { return p.empty(); });
    return plans;
}

inline void finish(OptimizeResult& r)
{
    if (r.frontier.empty())
        throw std::invalid_argument("optimizer: no candidate plan (all grids empty?)");
    r.max_plan = max_effectiveness_plan(r.frontier);
    r.chosen = select_final_plan(r.frontier, r.gap);
}

} // namespace detail

/// Level-wise skyline search: every frontier plan is extended by each unused
/// module and grid point (appended last), dominated plans are pruned, and the
/// loop stops at a fixpoint or after one level per module kind. The empty
/// plan only seeds the search.
inline OptimizeResult generic_optimize(const ModuleGrids& grids, ExploringEvaluator& ev, double gap)
{
    OptimizeResult r;
    r.mode = "generic";
    r.gap = gap;
    r.grids = grids;
    std::size_t kinds = 0;
    for (const auto& [_, g] : grids)
        kinds += g.empty() ? 0 : 1;
    SkylineFrontier f;
    f.insert(Plan {});
    for (std::size_t level = 1; level <= kinds; ++level) {
        SkylineFrontier next = f;
        for (const auto& p : f.plans()) {
            for (const auto& [kind, grid] : grids) {
                if (p.uses(kind))
                    continue;
                for (const auto& theta : grid) {
                    auto stages = p.stages;
                    stages.push_back(theta);
                    next.insert(ev.make_plan(std::move(stages)));
                }
            }
        }
        bool fixpoint = next.same_plans(f);
        f = std::move(next);
        if (fixpoint)
            break;
    }
    r.frontier = detail::without_empty(f.plans());
    r.explored = ev.explored();
    detail::finish(r);
    return r;
}

/// Returns the midpoint of the final bracket after `iters` shrink steps of
/// a maximising ternary search (two evaluations per step).
inline double ternary_search_threshold(const std::function<double(double)>& evaluate, double lo, double hi, int iters)
{
    if (!(lo < hi))
        throw std::invalid_argument("ternary search needs lo < hi");
    for (int i = 0; i < iters; ++i) {
        double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
        if (evaluate(m1) < evaluate(m2))
            lo = m1;
        else
            hi = m2;
    }
    return (lo + hi) / 2.0;
}

struct SpecializedOptions {
    double gap = 0.05;
    std::optional<std::size_t> beam;
    bool ternary = false; // replaces the ModelGen/CacheReuse grids
    int ternary_iters = 8;
    std::string context; // folded into the level-cache signature
    const LevelCache* prior = nullptr;
};

inline constexpr std::array<ModuleKind, 4> specialized_level_order {
    ModuleKind::llm, ModuleKind::codegen, ModuleKind::modelgen, ModuleKind::cache_reuse};

inline std::string level_cache_signature(const ModuleGrids& grids, const SpecializedOptions& opt)
{
    std::string s = opt.context + "|" + format_number(opt.gap) + "|" + (opt.beam ? std::to_string(*opt.beam) : "inf");
    for (auto k : {ModuleKind::llm, ModuleKind::codegen}) {
        s += "|";
        if (auto it = grids.find(k); it != grids.end())
            for (const auto& c : it->second)
                s += config_to_json(c).dump();
    }
    return digest(s);
}

namespace detail {

inline void set_threshold(ModuleConfig& cfg, double t)
{
    if (auto* c = std::get_if<CacheReuseCfg>(&cfg))
        c->distance_threshold = t;
    else if (auto* m = std::get_if<ModelGenCfg>(&cfg))
        m->confidence_threshold = t;
}

inline double get_threshold(const ModuleConfig& cfg)
{
    if (auto* c = std::get_if<CacheReuseCfg>(&cfg))
        return c->distance_threshold;
    if (auto* m = std::get_if<ModelGenCfg>(&cfg))
        return m->confidence_threshold;
    return 0;
}

} // namespace detail

/// Module-at-a-time search in the fixed order LLM, CodeGen, ModelGen,
/// CacheReuse. Each candidate is put in priority order using standalone
/// stage figures; after every level, plans beyond the gap and plans beaten
/// by a cheaper, at-least-as-effective plan are dropped, then the beam
/// keeps the most effective. LLM and CodeGen levels are cached for reuse.
inline OptimizeResult specialized_optimize(const ModuleGrids& grids, ExploringEvaluator& ev, const SpecializedOptions& opt)
{
    OptimizeResult r;
    r.mode = "specialized";
    r.gap = opt.gap;
    r.grids = grids;
    r.level_cache.signature = level_cache_signature(grids, opt);
    bool reuse = opt.prior && opt.prior->signature == r.level_cache.signature;
    if (reuse) {
        // only the cached levels carry over; continuous modules see new data
        for (auto k : {ModuleKind::llm, ModuleKind::codegen})
            if (auto g = grids.find(k); g != grids.end())
                for (const auto& c : g->second)
                    if (auto it = opt.prior->standalone.find(params_digest(c)); it != opt.prior->standalone.end())
                        r.level_cache.standalone.insert(*it);
    }

    auto standalone = [&](const ModuleConfig& c) {
        auto d = params_digest(c);
        if (auto it = r.level_cache.standalone.find(d); it != r.level_cache.standalone.end())
            return it->second;
        auto m = ev.evaluate({c}).stages.at(0);
        r.level_cache.standalone.emplace(d, m);
        return m;
    };
    auto sorted = [&](std::vector<ModuleConfig> stages) {
        std::vector<StageMetrics> sm;
        for (const auto& c : stages)
            sm.push_back(standalone(c));
        std::vector<ModuleConfig> out;
        for (auto i : priority_order(sm))
            out.push_back(stages[i]);
        return out;
    };

    std::vector<Plan> prev {Plan {}};
    for (auto kind : specialized_level_order) {
        auto git = grids.find(kind);
        if (git == grids.end() || git->second.empty())
            continue;
        const auto& grid = git->second;
        if (reuse && opt.prior->frontiers.count(kind)) {
            prev = opt.prior->frontiers.at(kind);
            r.level_cache.frontiers[kind] = prev;
            ++r.levels_reloaded;
            continue;
        }
        for (const auto& c : grid)
            standalone(c);

        std::map<long long, Plan> f;
        auto upsert = [&](Plan p) {
            auto key = effectiveness_key(p.metrics.effectiveness);
            auto it = f.find(key);
            if (it == f.end())
                f.emplace(key, std::move(p));
            else if (p.metrics.cost < it->second.metrics.cost)
                it->second = std::move(p);
        };
        for (const auto& p : prev)
            upsert(p);
        for (const auto& p : prev) {
            auto extend = [&](const ModuleConfig& theta) {
                auto stages = p.stages;
                stages.push_back(theta);
                return ev.make_plan(sorted(std::move(stages)));
            };
            bool continuous = kind == ModuleKind::modelgen || kind == ModuleKind::cache_reuse;
            if (opt.ternary && continuous && grid.size() >= 2) {
                double lo = detail::get_threshold(grid.front()), hi = detail::get_threshold(grid.back());
                if (lo > hi)
                    std::swap(lo, hi);
                auto probe = grid.front();
                auto best = ternary_search_threshold(
                    [&](double t) {
                        detail::set_threshold(probe, t);
                        return extend(probe).metrics.effectiveness;
                    },
                    lo, hi, opt.ternary_iters);
                detail::set_threshold(probe, best);
                upsert(extend(probe));
            } else {
                for (const auto& theta : grid)
                    upsert(extend(theta));
            }
        }

        std::vector<Plan> level;
        for (auto& [_, p] : f)
            level.push_back(std::move(p));
        double best_a = 0;
        for (const auto& p : level)
            best_a = std::max(best_a, p.metrics.effectiveness);
        std::erase_if(level, [&](const Plan& p) { return best_a - p.metrics.effectiveness > opt.gap; });
        std::vector<Plan> kept;
        for (const auto& p : level) {
            bool beaten = std::any_of(level.begin(), level.end(), [&](const Plan& q) {
                return q.metrics.effectiveness >= p.metrics.effectiveness && q.metrics.cost < p.metrics.cost;
            });
            if (!beaten)
                kept.push_back(p);
        }
        std::stable_sort(kept.begin(), kept.end(), [](const Plan& a, const Plan& b) {
            if (a.metrics.effectiveness != b.metrics.effectiveness)
                return a.metrics.effectiveness > b.metrics.effectiveness;
            return a.metrics.cost < b.metrics.cost;
        });
        if (opt.beam && kept.size() > *opt.beam)
            kept.resize(*opt.beam);
        if (kind == ModuleKind::llm || kind == ModuleKind::codegen)
            r.level_cache.frontiers[kind] = kept;
        prev = std::move(kept);
    }
    r.frontier = detail::without_empty(prev);
    r.explored = ev.explored();
    if (r.frontier.empty())
        throw std::invalid_argument("optimizer: no candidate plan (all grids empty?)");
    r.max_plan = max_effectiveness_plan(r.frontier);
    r.chosen = select_final_plan(r.frontier, r.gap);
    return r;
}

/// Keeps, per continuous module, only the grid points within one step of the
/// value chosen last time. Modules absent from the prior plan keep their grid.
inline ModuleGrids narrow_grids(const ModuleGrids& grids, const Plan& prior)
{
    ModuleGrids out = grids;
    for (auto kind : {ModuleKind::modelgen, ModuleKind::cache_reuse}) {
        auto it = out.find(kind);
        if (it == out.end())
            continue;
        auto& grid = it->second;
        auto used = std::find_if(prior.stages.begin(), prior.stages.end(), [&](const ModuleConfig& c) { return kind_of(c) == kind; });
        if (used == prior.stages.end())
            continue;
        auto pos = std::find(grid.begin(), grid.end(), *used);
        if (pos == grid.end())
            continue;
        auto i = static_cast<std::size_t>(pos - grid.begin());
        auto lo = i == 0 ? 0 : i - 1, hi = std::min(grid.size() - 1, i + 1);
        grid = std::vector<ModuleConfig>(grid.begin() + static_cast<std::ptrdiff_t>(lo), grid.begin() + static_cast<std::ptrdiff_t>(hi) + 1);
    }
    return out;
}

/// Re-runs the specialized search with cached LLM/CodeGen levels and narrowed
/// continuous grids. Without new data the prior result stands.
inline OptimizeResult reoptimize(const OptimizeResult& prior, const ModuleGrids& grids, ExploringEvaluator& ev,
    SpecializedOptions opt, bool has_new_data)
{
    if (!has_new_data)
        return prior;
    opt.prior = &prior.level_cache;
    auto r = specialized_optimize(narrow_grids(grids, prior.chosen), ev, opt);
    r.grids = grids;
    return r;
}

} // namespace cascadec
