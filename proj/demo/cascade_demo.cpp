// SPDX-License-Identifier: Apache-2.0
//
// Entity-resolution walk-through on the bundled fixtures: warm the cache with
// a few LLM answers, search for a cascade, then run it over the test split
// and compare against an LLM-only run.
//
//   demo_cascade [repo-root]

#include <cstdio>
#include <iostream>

#include "cascadec/cascadec.hpp"

using namespace cascadec;

namespace {

double score(const TaskSpec& spec, const Dataset& ds, const std::vector<RecordResult>& results)
{
    std::vector<std::optional<Value>> pred;
    std::vector<Value> gold;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!ds.labels[i])
            continue;
        pred.push_back(results[i].output);
        gold.push_back(*ds.labels[i]);
    }
    return effectiveness(pred, gold, spec.metric, spec.output);
}

void report(const char* title, const TaskSpec& spec, const Dataset& ds, const DatasetRun& run)
{
    std::printf("%-10s F1 %.3f  provider calls %4zu  reached LLM %5.1f%%  tokens in %zu\n", title,
        score(spec, ds, run.results), run.summary.provider_calls, 100.0 * run.summary.llm_ratio, run.summary.tokens_in);
}

} // namespace

int main(int argc, char** argv)
{
    std::string root = argc > 1 ? argv[1] : CASCADEC_DEMO_ROOT;
    auto at = [&](const std::string& rel) { return root + "/fixtures/" + rel; };

    try {
        auto spec = load_config(at("tasks/entity_resolution.json"));
        auto llm = ScriptedLlm::load(at("scripts/er_llm.json"));
        auto coder = ScriptedLlm::load(at("scripts/er_codegen.json"));
        CacheStore store(std::make_shared<const HashEmbedder>());

        auto warmup = read_dataset(at("data/er_warmup.csv"), spec);
        LlmExecutor warm(spec, LlmCfg {true, SampleMode::fixed}, *llm, store, static_cast<std::size_t>(spec.options.few_shot_k), 11);
        for (const auto& r : warmup.records)
            warm.query(r);
        std::printf("warm-up: %zu exchanges cached\n", store.stats().exchanges);

        auto validation = read_dataset(at("data/er_validation.csv"), spec);
        OptimizeRequest req;
        req.factory.few_shot_k = static_cast<std::size_t>(spec.options.few_shot_k);
        req.factory.seed = 11;
        auto out = optimize_task(spec, {llm.get(), coder.get(), nullptr}, store, validation.labeled(), req);
        const auto& r = out.result;
        std::printf("search: %zu plans explored, %zu on the frontier, %zu llm + %zu codegen calls\n", r.explored,
            r.frontier.size(), out.llm_calls, out.codegen_calls);
        for (const auto& p : r.frontier)
            std::printf("  A=%.4f C=%.4f  %s\n", p.metrics.effectiveness, p.metrics.cost, describe(p).c_str());
        std::printf("chosen: %s\n\n", describe(r.chosen).c_str());

        FactoryOptions fopt = req.factory;
        StageFactory factory(spec, {llm.get(), coder.get(), nullptr}, store, fopt);
        for (const auto& [k, e] : out.ensembles)
            factory.install_ensemble(k, e);
        auto test = read_dataset(at("data/er_test.csv"), spec);

        // baseline first, in a scratch store, so it does not feed the cache
        CacheStore scratch(std::make_shared<const HashEmbedder>());
        StageFactory plain(spec, {llm.get(), nullptr, nullptr}, scratch, fopt);
        Plan llm_only;
        llm_only.stages = {LlmCfg {true, SampleMode::fixed}};
        report("LLM only", spec, test, compile_pipeline(llm_only, plain)->execute_dataset(test.records));

        auto pipeline = compile_pipeline(r.chosen, factory);
        auto run = pipeline->execute_dataset(test.records);
        report("cascade", spec, test, run);
        for (const auto& st : run.summary.per_stage)
            std::printf("  %-12s answered %4zu  passed on %4zu\n", st.module.c_str(), st.stats.answered, st.stats.fallbacks);

        auto batched = compile_pipeline(r.chosen, factory)->execute_dataset(test.records, {8, BatchStrategy::proximal, 11});
        report("cascade/8", spec, test, batched);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
