// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "cascadec/optimizer/optimizer.hpp"
#include "cascadec/runtime/pipeline.hpp"
#include "cascadec/runtime/validation_evaluator.hpp"

namespace cascadec {

/// Candidate grids from the task's optimizer options. CodeGen needs a
/// code-generation provider and ModelGen needs labeled cache entries before
/// the horizon; without them the module is left out of the search.
inline ModuleGrids default_grids(const TaskSpec& spec, bool with_codegen, bool with_modelgen)
{
    const auto& o = spec.options;
    ModuleGrids g;
    for (const auto& m : o.llm_sample_modes) {
        LlmCfg c;
        if (m == "fixed")
            c.examples_sample_mode = SampleMode::fixed;
        else if (m == "random")
            c.examples_sample_mode = SampleMode::random;
        else if (m == "nearest")
            c.examples_sample_mode = SampleMode::nearest;
        else
            throw Error(Errc::invalid_config, "unknown examples sample mode '" + m + "'");
        g[ModuleKind::llm].push_back(c);
    }
    if (with_codegen)
        for (int b : o.codegen_branches)
            g[ModuleKind::codegen].push_back(CodeGenCfg {true, b, o.codegen_preserved, o.codegen_iterations});
    if (with_modelgen)
        for (double t : o.modelgen_thresholds)
            g[ModuleKind::modelgen].push_back(ModelGenCfg {true, t});
    for (double t : o.cache_thresholds)
        g[ModuleKind::cache_reuse].push_back(CacheReuseCfg {true, t});
    for (auto& [_, grid] : g)
        for (const auto& c : grid)
            validate(c);
    return g;
}

struct OptimizeRequest {
    std::string mode = "specialized"; // or "generic"
    double gap = 0.05;
    std::optional<std::size_t> beam;
    bool ternary = false;
    FactoryOptions factory;
    std::optional<ModuleGrids> grids; // default_grids() when absent
    const OptimizeResult* prior = nullptr; // reuse its cached levels
    std::map<std::string, std::shared_ptr<const CodeEnsemble>> ensembles; // already evolved, by config digest
};

struct OptimizeOutcome {
    OptimizeResult result;
    std::map<std::string, std::shared_ptr<const CodeEnsemble>> ensembles;
    std::size_t llm_calls = 0;     // on the LLM provider during this optimization
    std::size_t codegen_calls = 0; // spent evolving ensembles
    std::size_t replay_hits = 0;
    std::uint64_t horizon = 0;
};

/// Runs the plan search against labeled records. CacheReuse and ModelGen
/// only see cache entries stored before the search began, so the LLM
/// answers produced while scoring validation records cannot leak into them.
inline OptimizeOutcome optimize_task(const TaskSpec& spec, ProviderSet providers, CacheStore& store,
    std::vector<LabeledRecord> validation, OptimizeRequest req = {})
{
    OptimizeOutcome out;
    if (req.factory.horizon == CacheStore::all)
        req.factory.horizon = store.next_seq();
    out.horizon = req.factory.horizon;
    if (!req.grids) {
        bool codegen = providers.codegen || providers.llm;
        bool modelgen = !store.labeled_entries(out.horizon).empty();
        req.grids = default_grids(spec, codegen, modelgen);
    }

    StageFactory factory(spec, providers, store, req.factory);
    factory.set_validation(validation);
    for (const auto& [k, e] : req.ensembles)
        factory.install_ensemble(k, e);
    ValidationEvaluator inner(factory, std::move(validation));
    ExploringEvaluator ev(inner);
    auto before = providers.llm ? providers.llm->usage().calls : 0;

    if (req.mode == "generic") {
        out.result = generic_optimize(*req.grids, ev, req.gap);
    } else if (req.mode == "specialized") {
        SpecializedOptions opt;
        opt.gap = req.gap;
        opt.beam = req.beam;
        opt.ternary = req.ternary;
        opt.context = spec.name + "|" + std::to_string(req.factory.seed);
        if (req.prior)
            out.result = reoptimize(*req.prior, *req.grids, ev, opt, true);
        else
            out.result = specialized_optimize(*req.grids, ev, opt);
    } else {
        throw Error(Errc::invalid_config, "unknown optimizer mode '" + req.mode + "'");
    }

    out.ensembles = factory.ensembles();
    out.codegen_calls = factory.codegen_provider_calls();
    out.llm_calls = (providers.llm ? providers.llm->usage().calls : 0) - before;
    if (providers.codegen == nullptr)
        out.llm_calls -= std::min(out.llm_calls, out.codegen_calls);
    out.replay_hits = inner.replay_hits();
    return out;
}

/// Rebuild hook for PipelineRunner: re-runs the search over the grown cache
/// and compiles the new chosen plan. Keeps the latest result so successive
/// rounds keep reusing the cached LLM/CodeGen levels and evolved ensembles.
class Reoptimizer {
public:
    Reoptimizer(TaskSpec spec, ProviderSet providers, CacheStore& store, std::vector<LabeledRecord> validation,
        OptimizeRequest req, OptimizeResult prior, ReoptPolicy policy)
        : spec_(std::move(spec)), providers_(providers), store_(store), validation_(std::move(validation)),
          req_(std::move(req)), prior_(std::move(prior)), policy_(policy)
    {
    }

    const OptimizeResult& latest() const noexcept { return prior_; }
    std::size_t rounds() const noexcept { return rounds_; }

    std::shared_ptr<CompiledPipeline> operator()(const CacheStore&)
    {
        auto req = req_;
        req.factory.horizon = CacheStore::all;
        req.prior = &prior_;
        auto grids = prior_.grids;
        if (!grids.count(ModuleKind::modelgen) && !store_.labeled_entries().empty())
            for (double t : spec_.options.modelgen_thresholds)
                grids[ModuleKind::modelgen].push_back(ModelGenCfg {true, t});
        req.grids = grids;
        auto out = optimize_task(spec_, providers_, store_, validation_, req);
        prior_ = out.result;
        req_.ensembles = out.ensembles;
        ++rounds_;

        auto fopt = req_.factory;
        fopt.horizon = CacheStore::all;
        StageFactory runtime(spec_, providers_, store_, fopt);
        for (const auto& [k, e] : req_.ensembles)
            runtime.install_ensemble(k, e);
        return compile_pipeline(prior_.chosen, runtime, policy_);
    }

private:
    TaskSpec spec_;
    ProviderSet providers_;
    CacheStore& store_;
    std::vector<LabeledRecord> validation_;
    OptimizeRequest req_;
    OptimizeResult prior_;
    ReoptPolicy policy_;
    std::size_t rounds_ = 0;
};

} // namespace cascadec
