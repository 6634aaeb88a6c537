// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "cascadec/providers/http_llm.hpp"
#include "cascadec/providers/simulated.hpp"
#include "cascadec/runtime/dataset_io.hpp"
#include "cascadec/runtime/plan_file.hpp"
#include "cascadec/tools/table_catalog.hpp"

namespace cascadec::cli {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int provider = 3;
inline constexpr int schema = 4;
inline constexpr int cache = 5;
} // namespace exit_code

struct Options {
    std::string config;
    std::string plan;
    std::string data;
    std::string out;
    std::string provider;         // simulated:<script.json> | http
    std::string codegen_provider; // same forms; defaults to the LLM provider
    std::string cache;            // directory holding cache.jsonl; in-memory when empty
    std::string validation;       // labeled records for re-optimization during run
    std::string warmup;           // records answered by the LLM before optimizing
    std::optional<double> gap;
    std::optional<std::string> mode;
    std::size_t batch_size = 1;
    std::string batch_strategy = "RND";
    std::optional<std::uint64_t> seed;
    std::optional<int> reopt_threshold;
};

inline int exit_code_for(Errc e)
{
    switch (e) {
    case Errc::missing_field:
    case Errc::kind_mismatch:
    case Errc::empty_inputs:
    case Errc::unknown_key:
    case Errc::invalid_config:
    case Errc::not_enough_examples:
    case Errc::io_error:
        return exit_code::config;
    case Errc::provider_unavailable:
    case Errc::context_overflow:
    case Errc::missing_provider:
        return exit_code::provider;
    case Errc::schema_mismatch:
    case Errc::untrainable_model:
    case Errc::empty_validation:
        return exit_code::schema;
    case Errc::corrupt_cache:
        return exit_code::cache;
    default:
        return exit_code::failure;
    }
}

/// Same path with a different final extension: "a/plan.json" -> "a/plan" + ext.
inline std::string sibling_path(const std::string& path, const std::string& ext)
{
    std::filesystem::path p(path);
    return (p.parent_path() / p.stem()).string() + ext;
}

inline std::unique_ptr<LlmProvider> make_provider(const std::string& profile)
{
    static constexpr std::string_view sim = "simulated:";
    if (profile.rfind(sim, 0) == 0) {
        try {
            return ScriptedLlm::load(profile.substr(sim.size()));
        } catch (const Error& e) {
            throw Error(Errc::provider_unavailable, e.what());
        }
    }
    if (profile == "http")
        return std::make_unique<HttpLlm>(HttpLlmConfig::from_env());
    throw Error(Errc::provider_unavailable, "unknown provider profile '" + profile + "' (want simulated:<script> or http)");
}

/// Providers, cache and tool registry shared by one command invocation.
struct Environment {
    std::unique_ptr<LlmProvider> llm;
    std::unique_ptr<LlmProvider> codegen;
    std::unique_ptr<CacheStore> store;
    std::unique_ptr<ToolRegistry> tools;

    ProviderSet providers() const { return {llm.get(), codegen ? codegen.get() : llm.get(), tools.get()}; }
};

inline std::unique_ptr<CacheStore> open_cache(const std::string& dir)
{
    auto embedder = std::make_shared<const HashEmbedder>();
    if (dir.empty())
        return std::make_unique<CacheStore>(embedder);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw Error(Errc::corrupt_cache, "cannot create cache directory " + dir + ": " + ec.message());
    return CacheStore::open((std::filesystem::path(dir) / "cache.jsonl").string(), embedder);
}

inline Environment make_environment(const Options& o, const TaskSpec& spec)
{
    Environment env;
    if (!o.provider.empty())
        env.llm = make_provider(o.provider);
    if (!o.codegen_provider.empty())
        env.codegen = make_provider(o.codegen_provider);
    env.store = open_cache(o.cache);
    if (!spec.tools.empty()) {
        static const auto catalog = tools::demo_catalog();
        auto all = tools::make_registry(catalog);
        env.tools = std::make_unique<ToolRegistry>();
        for (const auto& name : spec.tools) {
            if (!all.contains(name))
                throw Error(Errc::invalid_config, "unknown tool '" + name + "'");
            env.tools->add(name, all.at(name));
        }
    }
    return env;
}

inline BatchingConfig batching_from(const Options& o, std::uint64_t seed)
{
    if (o.batch_size < 1)
        throw Error(Errc::invalid_config, "--batch-size must be >= 1");
    return {o.batch_size, batch_strategy_from_string(o.batch_strategy), seed};
}

inline void write_json(const std::string& path, const nlohmann::json& j)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(Errc::io_error, "cannot write " + path);
    out << j.dump(2) << "\n";
}

/// Answers the warmup records with a fixed-profile LLM so CacheReuse and
/// ModelGen have labeled cache entries to work from.
inline std::size_t run_warmup(const Options& o, const TaskSpec& spec, Environment& env, std::uint64_t seed)
{
    if (o.warmup.empty())
        return 0;
    if (!env.llm)
        throw Error(Errc::missing_provider, "--warmup needs --provider");
    auto ds = read_dataset(o.warmup, spec);
    LlmExecutor exec(spec, LlmCfg {true, SampleMode::fixed}, *env.llm, *env.store,
        static_cast<std::size_t>(spec.options.few_shot_k), seed);
    for (const auto& r : ds.records)
        exec.query(r);
    return ds.records.size();
}

struct OptimizeRun {
    TaskSpec spec;
    OptimizeOutcome outcome;
    std::uint64_t seed = 0;
};

inline OptimizeRun optimize_from_options(const Options& o, Environment& env, std::ostream& log)
{
    if (o.config.empty() || o.data.empty())
        throw Error(Errc::invalid_config, "optimize needs --config and --data");
    OptimizeRun run;
    run.spec = load_config(o.config);
    env = make_environment(o, run.spec);
    run.seed = o.seed.value_or(run.spec.options.seed);
    auto ds = read_dataset(o.data, run.spec);
    auto validation = ds.labeled();
    if (validation.size() != ds.records.size())
        throw Error(Errc::schema_mismatch, o.data + ": every validation record needs a '" + run.spec.output.name + "' label");
    if (auto n = run_warmup(o, run.spec, env, run.seed))
        log << "warmup: " << n << " records answered\n";

    OptimizeRequest req;
    req.mode = o.mode.value_or(run.spec.options.mode);
    req.gap = o.gap.value_or(run.spec.options.gap);
    if (run.spec.options.beam)
        req.beam = static_cast<std::size_t>(*run.spec.options.beam);
    req.factory.few_shot_k = static_cast<std::size_t>(run.spec.options.few_shot_k);
    req.factory.seed = run.seed;
    if (!env.llm)
        throw Error(Errc::missing_provider, "optimize needs --provider");
    run.outcome = optimize_task(run.spec, env.providers(), *env.store, std::move(validation), req);
    return run;
}

inline PlanFile plan_file_of(const OptimizeRun& run)
{
    return {run.spec, run.outcome.result, run.outcome.ensembles, run.seed, run.outcome.horizon};
}

template <class Body>
int guarded(std::ostream& err, Body&& body)
{
    try {
        return body();
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::failure;
    }
}

/// Searches for a plan; writes the plan file and `<plan>.frontier.json`.
inline int cmd_optimize(const Options& o, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        auto plan_path = !o.plan.empty() ? o.plan : o.out;
        if (plan_path.empty())
            throw Error(Errc::invalid_config, "optimize needs --plan (output path)");
        Environment env;
        auto run = optimize_from_options(o, env, out);
        save_plan_file(plan_path, plan_file_of(run));
        const auto& r = run.outcome.result;
        write_json(sibling_path(plan_path, ".frontier.json"), frontier_report(r));
        out << "mode: " << r.mode << "\n"
            << "explored: " << r.explored << "\n"
            << "frontier: " << r.frontier.size() << " plans\n"
            << "max effectiveness: " << format_number(r.max_plan.metrics.effectiveness) << "\n"
            << "chosen: " << describe(r.chosen) << " A=" << format_number(r.chosen.metrics.effectiveness)
            << " C=" << format_number(r.chosen.metrics.cost) << "\n"
            << "provider calls: " << run.outcome.llm_calls << " llm, " << run.outcome.codegen_calls << " codegen\n";
        return exit_code::ok;
    });
}

/// Optimizes, then builds the pipeline without running any data, and prints
/// the stage layout. The plan file is written when --plan is given.
inline int cmd_compile(const Options& o, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        Environment env;
        auto run = optimize_from_options(o, env, out);
        auto pf = plan_file_of(run);
        if (!o.plan.empty())
            save_plan_file(o.plan, pf);
        FactoryOptions fopt;
        fopt.few_shot_k = static_cast<std::size_t>(run.spec.options.few_shot_k);
        fopt.seed = run.seed;
        StageFactory factory(run.spec, env.providers(), *env.store, fopt);
        for (const auto& [k, e] : pf.ensembles)
            factory.install_ensemble(k, e);
        auto pipeline = compile_pipeline(pf.result.chosen, factory);
        nlohmann::json stages = nlohmann::json::array();
        for (std::size_t i = 0; i < pipeline->size(); ++i)
            stages.push_back({{"module", pipeline->stage(i).module_id()}, {"config", config_to_json(pipeline->stage(i).config())},
                {"params_digest", pipeline->stage(i).params_digest()}});
        out << nlohmann::json {{"plan", plan_to_json(pipeline->plan())}, {"stages", stages}}.dump(2) << "\n";
        return exit_code::ok;
    });
}

/// Executes a plan file over a dataset; writes results (JSONL) and
/// `<out>.summary.json`, and prints the summary.
inline int cmd_run(const Options& o, std::ostream& out, std::ostream& err)
{
    return guarded(err, [&] {
        if (o.plan.empty() || o.data.empty() || o.out.empty())
            throw Error(Errc::invalid_config, "run needs --plan, --data and --out");
        auto pf = load_plan_file(o.plan);
        if (!o.config.empty() && to_config_json(load_config(o.config)) != to_config_json(pf.spec))
            throw Error(Errc::schema_mismatch, "plan was optimized for a different task configuration");
        auto env = make_environment(o, pf.spec);
        auto seed = o.seed.value_or(pf.seed);
        auto ds = read_dataset(o.data, pf.spec);

        FactoryOptions fopt;
        fopt.few_shot_k = static_cast<std::size_t>(pf.spec.options.few_shot_k);
        fopt.seed = seed;
        StageFactory factory(pf.spec, env.providers(), *env.store, fopt);
        for (const auto& [k, e] : pf.ensembles)
            factory.install_ensemble(k, e);

        ReoptPolicy policy;
        policy.new_exchange_threshold = static_cast<std::size_t>(o.reopt_threshold.value_or(pf.spec.options.reopt_threshold));
        policy.enabled = o.reopt_threshold.has_value() && !o.validation.empty();
        if (policy.new_exchange_threshold < 1)
            throw Error(Errc::invalid_config, "--reopt-threshold must be >= 1");
        auto pipeline = compile_pipeline(pf.result.chosen, factory, policy);

        DatasetRun run;
        std::size_t reopts = 0;
        if (policy.enabled) {
            if (o.batch_size > 1)
                throw Error(Errc::invalid_config, "re-optimization runs records one at a time; drop --batch-size");
            auto vds = read_dataset(o.validation, pf.spec);
            OptimizeRequest req;
            req.mode = "specialized";
            req.gap = pf.result.gap;
            req.factory = fopt;
            req.ensembles = pf.ensembles;
            auto reopt = std::make_shared<Reoptimizer>(pf.spec, env.providers(), *env.store, vds.labeled(), req, pf.result, policy);
            PipelineRunner runner(pipeline, *env.store, policy, [reopt](const CacheStore& s) { return (*reopt)(s); });
            auto before = env.llm ? env.llm->usage() : ProviderUsage {};
            std::vector<std::shared_ptr<CompiledPipeline>> used;
            for (const auto& r : ds.records) {
                auto p = runner.current();
                if (used.empty() || used.back() != p)
                    used.push_back(p);
                run.results.push_back(runner.execute_record(r));
            }
            reopts = runner.trigger().fired();
            // totals span every pipeline used; per-stage figures come from the last one
            auto& s = run.summary;
            s.n = ds.records.size();
            for (const auto& r : run.results)
                (r.abstained() ? s.abstained : s.answered) += 1;
            std::size_t reached = 0;
            double calls = 0;
            for (const auto& p : used)
                for (std::size_t i = 0; i < p->size(); ++i) {
                    auto st = p->stats(i);
                    calls += st.provider_calls;
                    if (p->stage(i).kind() == ModuleKind::llm)
                        reached += st.reached();
                }
            auto last = used.empty() ? pipeline : used.back();
            for (std::size_t i = 0; i < last->size(); ++i)
                s.per_stage.push_back({last->stage(i).module_id(), describe(last->plan().stages[i]), last->stats(i)});
            s.reached_llm = reached;
            s.provider_calls = static_cast<std::size_t>(std::llround(calls));
            s.llm_ratio = s.n ? static_cast<double>(reached) / static_cast<double>(s.n) : 0.0;
            if (env.llm) {
                auto after = env.llm->usage();
                s.tokens_in = after.tokens_in - before.tokens_in;
                s.tokens_out = after.tokens_out - before.tokens_out;
            }
        } else {
            run = pipeline->execute_dataset(ds.records, batching_from(o, seed));
        }

        write_results(o.out, run.results);
        auto summary = summary_to_json(run.summary);
        if (policy.enabled)
            summary["reoptimizations"] = reopts;
        write_json(sibling_path(o.out, ".summary.json"), summary);
        out << summary.dump(2) << "\n";
        return exit_code::ok;
    });
}

/// Reports what a cache directory holds. Exit 5 when it cannot be read.
inline int cmd_stats(const Options& o, std::ostream& out, std::ostream& err)
{
    try {
        if (o.cache.empty())
            throw Error(Errc::invalid_config, "stats needs --cache");
        if (!std::filesystem::is_directory(o.cache))
            throw Error(Errc::corrupt_cache, "cache directory " + o.cache + " does not exist");
        auto store = CacheStore::open((std::filesystem::path(o.cache) / "cache.jsonl").string(),
            std::make_shared<const HashEmbedder>());
        auto s = store->stats();
        nlohmann::json mio = nlohmann::json::object();
        for (const auto& [k, n] : s.module_io)
            mio[k] = n;
        out << nlohmann::json {{"exchanges", s.exchanges}, {"index_size", s.index_size}, {"module_io", mio}}.dump(2)
            << "\n";
        return exit_code::ok;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return e.code() == Errc::invalid_config ? exit_code::config : exit_code::cache;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_code::cache;
    }
}

} // namespace cascadec::cli
