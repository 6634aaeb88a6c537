// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "cascadec/optimizer/optimizer.hpp"

#include "../support/brute_force.hpp"
#include "../support/synthetic.hpp"

using namespace cascadec;
using namespace testsupport;

namespace {

Plan plan_with(double a, double c, std::vector<ModuleConfig> stages = {LlmCfg {}})
{
    Plan p;
    p.stages = std::move(stages);
    p.metrics.effectiveness = a;
    p.metrics.cost = c;
    return p;
}

double brute_min_cost(std::vector<StageMetrics> s)
{
    std::sort(s.begin(), s.end(), [](auto& a, auto& b) { return std::tie(a.cost, a.fallback) < std::tie(b.cost, b.fallback); });
    double best = std::numeric_limits<double>::infinity();
    do
        best = std::min(best, plan_cost(s));
    while (std::next_permutation(s.begin(), s.end(), [](auto& a, auto& b) { return std::tie(a.cost, a.fallback) < std::tie(b.cost, b.fallback); }));
    return best;
}

} // namespace

// --- cost and priority ------------------------------------------------------------

TEST(PlanCost, Examples)
{
    std::vector<StageMetrics> two {{0.001, 0.5}, {1.0, 0.0}};
    EXPECT_DOUBLE_EQ(plan_cost(two), 0.501);
    std::vector<StageMetrics> one {{2.0, 0.3}};
    EXPECT_DOUBLE_EQ(plan_cost(one), 2.0);
    EXPECT_DOUBLE_EQ(plan_cost({}), 0.0);
    std::vector<StageMetrics> bad {{1.0, 1.5}};
    EXPECT_THROW(plan_cost(bad), std::invalid_argument);
}

TEST(ModulePriority, ExamplesAndZeroCost)
{
    EXPECT_DOUBLE_EQ(module_priority(0.5, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(module_priority(1.0, 0.0), 1.0);
    EXPECT_NEAR(module_priority(0.001, 0.9), 100.0, 1e-9);
    try {
        module_priority(0.0, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::zero_cost);
    }
}

TEST(PriorityOrder, TiesByCostThenInput)
{
    std::vector<StageMetrics> s {{2.0, 0.0}, {1.0, 0.5}, {1.0, 0.5}};
    EXPECT_EQ(priority_order(s), (std::vector<std::size_t> {1, 2, 0}));
}

TEST(PriorityOrder, MinimisesCostAgainstPermutations)
{
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<StageMetrics> s(1 + rng() % 6);
        for (auto& x : s)
            x = {0.001 + u(rng), u(rng)};
        auto ordered = order_by_priority(s);
        EXPECT_LE(plan_cost(ordered), brute_min_cost(s) * (1 + 1e-12) + 1e-15);
    }
}

// --- dominance, skyline, selection ----------------------------------------------

TEST(Dominates, StrictOnBothAxes)
{
    auto a = plan_with(0.9, 1.0), b = plan_with(0.8, 2.0), c = plan_with(0.9, 2.0);
    EXPECT_TRUE(dominates(a, b));
    EXPECT_FALSE(dominates(b, a));
    EXPECT_FALSE(dominates(a, c)); // equal effectiveness
    EXPECT_FALSE(dominates(a, a));
}

TEST(Skyline, KeepsCheapestPerBucketAndDropsDominated)
{
    SkylineFrontier f;
    EXPECT_TRUE(f.insert(plan_with(0.80, 2.0)));
    EXPECT_FALSE(f.insert(plan_with(0.80004, 2.0))); // same bucket, not cheaper
    EXPECT_TRUE(f.insert(plan_with(0.80, 1.5)));
    EXPECT_EQ(f.size(), 1u);
    EXPECT_TRUE(f.insert(plan_with(0.90, 1.0))); // dominates the 0.80 plan
    EXPECT_EQ(f.size(), 1u);
    EXPECT_FALSE(f.insert(plan_with(0.70, 3.0)));
    EXPECT_TRUE(f.insert(plan_with(0.95, 4.0)));
    auto plans = f.plans();
    ASSERT_EQ(plans.size(), 2u);
    EXPECT_DOUBLE_EQ(plans[0].metrics.effectiveness, 0.95);
}

TEST(Skyline, NoMemberDominatesAnotherOnRandomInserts)
{
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        SkylineFrontier f;
        for (int i = 0; i < 200; ++i)
            f.insert(plan_with(std::round(u(rng) * 100) / 100, u(rng)));
        auto plans = f.plans();
        for (const auto& a : plans)
            for (const auto& b : plans)
                EXPECT_FALSE(dominates(a, b));
    }
}

TEST(SelectFinalPlan, CheapestWithinGap)
{
    std::vector<Plan> f {plan_with(0.9, 10), plan_with(0.87, 3), plan_with(0.84, 1)};
    EXPECT_DOUBLE_EQ(select_final_plan(f, 0.05).metrics.cost, 3);
    EXPECT_DOUBLE_EQ(select_final_plan(f, 0.0).metrics.cost, 10);
    EXPECT_DOUBLE_EQ(select_final_plan(f, 1.0).metrics.cost, 1);
    std::vector<Plan> tie {plan_with(0.85, 2), plan_with(0.88, 2)};
    EXPECT_DOUBLE_EQ(select_final_plan(tie, 0.1).metrics.effectiveness, 0.88);
    EXPECT_THROW(select_final_plan({}, 0.1), std::invalid_argument);
}

TEST(PlanJson, RoundTrip)
{
    auto p = plan_with(0.8, 0.3, {CacheReuseCfg {true, 0.4}, CodeGenCfg {true, 2, 4, 1}, LlmCfg {true, SampleMode::random}});
    p.metrics.stages = {{0.001, 0.5}, {0.001, 0.6}, {1.0, 0.0}};
    EXPECT_EQ(plan_from_json(plan_to_json(p)), p);
    EXPECT_THROW(plan_from_json({{"stages", 3}}), Error);
}

// --- ternary search ---------------------------------------------------------------

TEST(TernarySearch, FindsUnimodalPeak)
{
    auto x = ternary_search_threshold([](double t) { return -(t - 0.37) * (t - 0.37); }, 0, 1, 40);
    EXPECT_NEAR(x, 0.37, 1e-6);
    int calls = 0;
    ternary_search_threshold([&](double) { return ++calls, 0.0; }, 0, 1, 8);
    EXPECT_EQ(calls, 16);
    EXPECT_THROW(ternary_search_threshold([](double) { return 0.0; }, 1, 1, 3), std::invalid_argument);
}

// --- searches ---------------------------------------------------------------------

TEST(GenericOptimize, SingleModuleFrontierIsItsGrid)
{
    SyntheticInstance inst;
    for (std::size_t i = 0; i < 3; ++i) {
        auto c = synthetic_config(ModuleKind::llm, i);
        inst.stats.set(c, {1.0 + 0.1 * static_cast<double>(i), 0.0, 0.7 + 0.1 * static_cast<double>(i)});
        inst.grids[ModuleKind::llm].push_back(c);
    }
    ExploringEvaluator ev(inst.stats);
    auto r = generic_optimize(inst.grids, ev, 0.05);
    EXPECT_EQ(r.frontier.size(), 3u);
    EXPECT_EQ(r.explored, 3u);
    EXPECT_NEAR(r.max_plan.metrics.effectiveness, 0.9, 1e-12);
}

TEST(GenericOptimize, FrontierMembersMutuallyUndominated)
{
    std::mt19937_64 rng(5);
    for (int t = 0; t < 30; ++t) {
        auto inst = random_instance(rng, 4, 3);
        ExploringEvaluator ev(inst.stats);
        auto r = generic_optimize(inst.grids, ev, 0.05);
        for (const auto& a : r.frontier) {
            EXPECT_FALSE(a.empty());
            for (const auto& b : r.frontier)
                EXPECT_FALSE(dominates(a, b));
        }
    }
}

TEST(SpecializedOptimize, StagesInPriorityOrder)
{
    auto inst = standard_instance();
    ExploringEvaluator ev(inst.stats);
    auto r = specialized_optimize(inst.grids, ev, {0.05});
    for (const auto& p : r.frontier) {
        std::vector<StageMetrics> standalone;
        for (const auto& c : p.stages)
            standalone.push_back(inst.stats.evaluate({c}).stages[0]);
        auto order = priority_order(standalone);
        for (std::size_t i = 0; i < order.size(); ++i)
            EXPECT_EQ(order[i], i) << describe(p);
    }
}

TEST(SpecializedOptimize, BeamOfOneKeepsSinglePlan)
{
    auto inst = standard_instance();
    ExploringEvaluator ev(inst.stats);
    SpecializedOptions opt;
    opt.beam = 1;
    auto r = specialized_optimize(inst.grids, ev, opt);
    EXPECT_EQ(r.frontier.size(), 1u);
    ExploringEvaluator ev2(inst.stats);
    auto wide = specialized_optimize(inst.grids, ev2, {0.05});
    EXPECT_LT(r.explored, wide.explored);
}

TEST(SpecializedOptimize, GapFilterKeepsLevelsNearTheBest)
{
    auto inst = standard_instance();
    for (double gap : {0.0, 0.02, 0.1}) {
        ExploringEvaluator ev(inst.stats);
        SpecializedOptions opt;
        opt.gap = gap;
        auto r = specialized_optimize(inst.grids, ev, opt);
        for (const auto& p : r.frontier)
            EXPECT_LE(r.max_plan.metrics.effectiveness - p.metrics.effectiveness, gap + 1e-12);
        EXPECT_LE(r.max_plan.metrics.effectiveness - r.chosen.metrics.effectiveness, gap + 1e-12);
    }
}

TEST(SpecializedOptimize, LevelCacheReloadsLlmAndCodeGen)
{
    auto inst = standard_instance();
    ExploringEvaluator ev(inst.stats);
    SpecializedOptions opt;
    opt.context = "task-a";
    auto first = specialized_optimize(inst.grids, ev, opt);
    EXPECT_EQ(first.levels_reloaded, 0u);
    EXPECT_EQ(first.level_cache.frontiers.size(), 2u);

    auto calls = inst.stats.calls();
    opt.prior = &first.level_cache;
    ExploringEvaluator fresh(inst.stats);
    auto again = specialized_optimize(inst.grids, fresh, opt);
    EXPECT_EQ(again.levels_reloaded, 2u);
    EXPECT_EQ(plan_key(again.chosen.stages), plan_key(first.chosen.stages));
    // only the ModelGen and CacheReuse levels were evaluated again
    EXPECT_LT(inst.stats.calls() - calls, first.explored);

    opt.context = "task-b";
    ExploringEvaluator other(inst.stats);
    EXPECT_EQ(specialized_optimize(inst.grids, other, opt).levels_reloaded, 0u);
}

namespace {

/// LLM answers everything at 0.8; ModelGen at threshold t answers a (1 - t)
/// share with accuracy 0.7 + 0.3t, so effectiveness peaks inside (0, 1).
class ThresholdEvaluator final : public PlanEvaluator {
public:
    PlanMetrics evaluate(const std::vector<ModuleConfig>& stages) override
    {
        PlanMetrics m;
        double reach = 1;
        for (const auto& c : stages) {
            double p = 0, acc = 0.8, cost = 1.0;
            if (auto* g = std::get_if<ModelGenCfg>(&c)) {
                p = g->confidence_threshold;
                acc = 0.7 + 0.3 * g->confidence_threshold;
                cost = non_llm_stage_cost;
                thresholds.push_back(g->confidence_threshold);
            }
            m.effectiveness += reach * (1 - p) * acc;
            m.stages.push_back({cost, p});
            reach *= p;
        }
        m.cost = plan_cost(m.stages);
        return m;
    }
    std::vector<double> thresholds;
};

} // namespace

TEST(SpecializedOptimize, TernaryProbesInsideTheGridRange)
{
    ModuleGrids grids;
    grids[ModuleKind::llm] = {LlmCfg {}};
    grids[ModuleKind::modelgen] = {ModelGenCfg {true, 0.1}, ModelGenCfg {true, 0.9}};
    ThresholdEvaluator te;
    ExploringEvaluator ev(te);
    SpecializedOptions opt;
    opt.ternary = true;
    opt.ternary_iters = 30;
    opt.gap = 1.0;
    auto r = specialized_optimize(grids, ev, opt);
    ASSERT_FALSE(te.thresholds.empty());
    for (double t : te.thresholds) {
        EXPECT_GE(t, 0.1);
        EXPECT_LE(t, 0.9);
    }
    // grid endpoints were never tried as plans
    EXPECT_FALSE(std::count(te.thresholds.begin(), te.thresholds.end(), 0.9) > 1);
    EXPECT_FALSE(r.frontier.empty());
}

TEST(Reoptimize, NoNewDataKeepsPrior)
{
    auto inst = standard_instance();
    ExploringEvaluator ev(inst.stats);
    auto first = specialized_optimize(inst.grids, ev, {0.05});
    ExploringEvaluator ev2(inst.stats);
    auto same = reoptimize(first, inst.grids, ev2, {0.05}, false);
    EXPECT_EQ(same.chosen, first.chosen);
    EXPECT_EQ(ev2.explored(), 0u);
    auto redo = reoptimize(first, inst.grids, ev2, {0.05}, true);
    EXPECT_EQ(redo.levels_reloaded, 2u);
    EXPECT_GT(ev2.explored(), 0u);
}

TEST(NarrowGrids, OneStepAroundChosenValue)
{
    ModuleGrids grids;
    for (double d : {0.2, 0.4, 0.6, 0.8, 1.0})
        grids[ModuleKind::cache_reuse].push_back(CacheReuseCfg {true, d});
    for (double t : {0.5, 0.7})
        grids[ModuleKind::modelgen].push_back(ModelGenCfg {true, t});
    Plan prior;
    prior.stages = {CacheReuseCfg {true, 0.6}, LlmCfg {}};
    auto n = narrow_grids(grids, prior);
    EXPECT_EQ(n[ModuleKind::cache_reuse],
        (std::vector<ModuleConfig> {CacheReuseCfg {true, 0.4}, CacheReuseCfg {true, 0.6}, CacheReuseCfg {true, 0.8}}));
    EXPECT_EQ(n[ModuleKind::modelgen].size(), 2u); // absent from the prior plan
    prior.stages = {CacheReuseCfg {true, 0.2}};
    EXPECT_EQ(narrow_grids(grids, prior)[ModuleKind::cache_reuse].size(), 2u);
}

TEST(SpecializedOptimize, CannotReachLlmFreePlans)
{
    // With cheap stages covering nearly every record, the exhaustive optimum
    // drops the LLM. The in-level gap filter removes the empty seed at the
    // LLM level, so every specialized plan keeps an LLM stage while the
    // generic search is free to find the LLM-free one.
    auto inst = llm_optional_instance();
    auto bf = exhaustive_search(inst.grids, inst.stats, 0.05);
    ASSERT_FALSE(bf.opt.uses(ModuleKind::llm));

    ExploringEvaluator ev(inst.stats);
    auto spec = specialized_optimize(inst.grids, ev, {0.05});
    for (const auto& p : spec.frontier)
        EXPECT_TRUE(p.uses(ModuleKind::llm)) << describe(p);

    ExploringEvaluator ev2(inst.stats);
    auto gen = generic_optimize(inst.grids, ev2, 0.05);
    EXPECT_FALSE(gen.chosen.uses(ModuleKind::llm));
    EXPECT_LT(gen.chosen.metrics.cost, spec.chosen.metrics.cost);
}

TEST(StatModelEvaluator, EffectivenessAndMissingProfile)
{
    StatModelEvaluator s;
    s.set(CacheReuseCfg {true, 0.4}, {0.001, 0.6, 0.95});
    s.set(LlmCfg {}, {1.0, 0.0, 0.8});
    auto m = s.evaluate({CacheReuseCfg {true, 0.4}, LlmCfg {}});
    EXPECT_NEAR(m.effectiveness, 0.4 * 0.95 + 0.6 * 0.8, 1e-15);
    EXPECT_NEAR(m.cost, 0.001 + 0.6, 1e-15);
    EXPECT_THROW(s.evaluate({CacheReuseCfg {true, 0.8}}), std::out_of_range);
}
