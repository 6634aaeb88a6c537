// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cascadec/batching/batched_llm.hpp"
#include "cascadec/runtime/stage_factory.hpp"

namespace cascadec {

struct ModuleStatsSnapshot {
    std::size_t answered = 0;
    std::size_t fallbacks = 0;
    double provider_calls = 0;

    std::size_t reached() const noexcept { return answered + fallbacks; }
    double p_hat() const noexcept { return reached() ? static_cast<double>(fallbacks) / static_cast<double>(reached()) : 0.0; }
    double c_hat() const noexcept { return reached() ? provider_calls / static_cast<double>(reached()) : 0.0; }
};

/// Live per-stage counters, safe to bump from concurrent records.
class ModuleStats {
public:
    void add(bool answered, double calls) noexcept
    {
        (answered ? answered_ : fallbacks_).fetch_add(1, std::memory_order_relaxed);
        calls_milli_.fetch_add(static_cast<std::uint64_t>(calls * 1000.0 + 0.5), std::memory_order_relaxed);
    }
    ModuleStatsSnapshot snapshot() const noexcept
    {
        return {answered_.load(), fallbacks_.load(), static_cast<double>(calls_milli_.load()) / 1000.0};
    }

private:
    std::atomic<std::size_t> answered_ {0};
    std::atomic<std::size_t> fallbacks_ {0};
    std::atomic<std::uint64_t> calls_milli_ {0};
};

struct ReoptPolicy {
    std::size_t new_exchange_threshold = 256;
    bool enabled = false;
};

struct RecordResult {
    std::optional<Value> output; // empty: every stage abstained
    double confidence = 0;
    std::vector<ModuleVerdict> trace;
    std::optional<std::size_t> answered_by;

    bool abstained() const noexcept { return !output.has_value(); }
};

struct StageSummary {
    std::string module;
    std::string config;
    ModuleStatsSnapshot stats;
};

struct RunSummary {
    std::size_t n = 0;
    std::size_t answered = 0;
    std::size_t abstained = 0;
    std::size_t reached_llm = 0;
    double llm_ratio = 0;
    std::size_t provider_calls = 0;
    std::size_t tokens_in = 0;
    std::size_t tokens_out = 0;
    std::vector<StageSummary> per_stage;
};

inline nlohmann::json summary_to_json(const RunSummary& s)
{
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& st : s.per_stage)
        stages.push_back({{"module", st.module}, {"config", st.config}, {"answered", st.stats.answered},
            {"fallbacks", st.stats.fallbacks}, {"provider_calls", st.stats.provider_calls}, {"p_hat", st.stats.p_hat()},
            {"c_hat", st.stats.c_hat()}});
    return {{"n", s.n}, {"answered", s.answered}, {"abstained", s.abstained}, {"llm_ratio", s.llm_ratio},
        {"provider_calls", s.provider_calls}, {"tokens_in", s.tokens_in}, {"tokens_out", s.tokens_out},
        {"per_stage", stages}};
}

struct DatasetRun {
    std::vector<RecordResult> results;
    RunSummary summary;
};

class CompiledPipeline {
public:
    CompiledPipeline(Plan plan, std::vector<std::unique_ptr<Stage>> stages, LlmProvider* usage_source = nullptr,
        ReoptPolicy reopt = {})
        : plan_(std::move(plan)), stages_(std::move(stages)), stats_(stages_.size()), usage_(usage_source), reopt_(reopt)
    {
        if (stages_.size() != plan_.stages.size())
            throw std::invalid_argument("one executor per plan stage");
        for (std::size_t i = 0; i < stages_.size(); ++i)
            if (config_to_json(stages_[i]->config()) != config_to_json(plan_.stages[i]))
                throw std::invalid_argument("executor " + std::to_string(i) + " does not match its plan stage");
    }

    const Plan& plan() const noexcept { return plan_; }
    std::size_t size() const noexcept { return stages_.size(); }
    const Stage& stage(std::size_t i) const { return *stages_.at(i); }
    ModuleStatsSnapshot stats(std::size_t i) const { return stats_.at(i).snapshot(); }
    const ReoptPolicy& reopt() const noexcept { return reopt_; }

    /// Runs stages in order until one answers.
    RecordResult execute_record(const Record& record)
    {
        RecordResult r;
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            auto out = stages_[i]->run(record);
            stats_[i].add(out.verdict.is_answered(), out.provider_calls);
            r.trace.push_back(out.verdict);
            if (out.verdict.is_answered()) {
                r.output = out.verdict.value();
                r.confidence = out.verdict.confidence();
                r.answered_by = i;
                break;
            }
        }
        return r;
    }

    /// With batch_size 1 records run one at a time through the whole cascade.
    /// Larger batches run stage by stage so the records falling through to a
    /// prompt-only LLM stage can be grouped.
    DatasetRun execute_dataset(std::span<const Record> records, const BatchingConfig& batching = {})
    {
        DatasetRun run;
        auto before = usage_ ? usage_->usage() : ProviderUsage {};
        std::vector<ModuleStatsSnapshot> local(stages_.size());
        run.results.resize(records.size());

        auto note = [&](std::size_t rec, std::size_t i, const StageOutcome& out) {
            stats_[i].add(out.verdict.is_answered(), out.provider_calls);
            auto& l = local[i];
            (out.verdict.is_answered() ? l.answered : l.fallbacks) += 1;
            l.provider_calls += out.provider_calls;
            auto& r = run.results[rec];
            r.trace.push_back(out.verdict);
            if (out.verdict.is_answered()) {
                r.output = out.verdict.value();
                r.confidence = out.verdict.confidence();
                r.answered_by = i;
            }
        };

        if (batching.batch_size <= 1) {
            for (std::size_t rec = 0; rec < records.size(); ++rec)
                for (std::size_t i = 0; i < stages_.size(); ++i) {
                    auto out = stages_[i]->run(records[rec]);
                    note(rec, i, out);
                    if (out.verdict.is_answered())
                        break;
                }
        } else {
            std::vector<std::size_t> pending(records.size());
            for (std::size_t k = 0; k < pending.size(); ++k)
                pending[k] = k;
            for (std::size_t i = 0; i < stages_.size() && !pending.empty(); ++i) {
                std::vector<std::size_t> next;
                auto* llm = dynamic_cast<LlmStage*>(stages_[i].get());
                if (llm && !llm->uses_tools()) {
                    std::vector<Record> subset;
                    for (auto k : pending)
                        subset.push_back(records[k]);
                    auto br = run_llm_batched(llm->executor(), subset, batching);
                    for (std::size_t j = 0; j < pending.size(); ++j) {
                        const auto& a = br.answers[j];
                        auto v = a.value ? ModuleVerdict::answered(*a.value, 1.0)
                                         : ModuleVerdict::answered(Value::text(a.raw), 0.0);
                        // the stage's calls are booked on its first record
                        note(pending[j], i, {v, j == 0 ? static_cast<double>(br.provider_calls) : 0.0});
                    }
                } else {
                    for (auto k : pending) {
                        auto out = stages_[i]->run(records[k]);
                        note(k, i, out);
                        if (!out.verdict.is_answered())
                            next.push_back(k);
                    }
                }
                pending = std::move(next);
            }
        }

        auto& s = run.summary;
        s.n = records.size();
        for (const auto& r : run.results)
            (r.abstained() ? s.abstained : s.answered) += 1;
        double calls = 0;
        for (std::size_t i = 0; i < stages_.size(); ++i) {
            calls += local[i].provider_calls;
            if (stages_[i]->kind() == ModuleKind::llm)
                s.reached_llm += local[i].reached();
            s.per_stage.push_back({stages_[i]->module_id(), describe(plan_.stages[i]), local[i]});
        }
        s.provider_calls = static_cast<std::size_t>(std::llround(calls));
        s.llm_ratio = s.n ? static_cast<double>(s.reached_llm) / static_cast<double>(s.n) : 0.0;
        if (usage_) {
            auto after = usage_->usage();
            s.tokens_in = after.tokens_in - before.tokens_in;
            s.tokens_out = after.tokens_out - before.tokens_out;
        }
        return run;
    }

private:
    Plan plan_;
    std::vector<std::unique_ptr<Stage>> stages_;
    std::vector<ModuleStats> stats_;
    LlmProvider* usage_;
    ReoptPolicy reopt_;
};

/// Throws MissingProvider or UntrainableModel from the factory.
inline std::shared_ptr<CompiledPipeline> compile_pipeline(const Plan& plan, StageFactory& factory, ReoptPolicy reopt = {})
{
    if (plan.stages.empty())
        throw std::invalid_argument("cannot compile an empty plan");
    std::vector<std::unique_ptr<Stage>> stages;
    for (const auto& c : plan.stages)
        stages.push_back(factory.make(c));
    return std::make_shared<CompiledPipeline>(plan, std::move(stages), factory.providers().llm, reopt);
}

/// Counts exchanges stored since the last optimization.
class ReoptTrigger {
public:
    ReoptTrigger(ReoptPolicy policy, std::uint64_t baseline_seq) : policy_(policy), baseline_(baseline_seq)
    {
        if (policy_.new_exchange_threshold < 1)
            throw std::invalid_argument("reopt threshold must be >= 1");
    }

    std::size_t pending(const CacheStore& store) const { return store.exchanges_since(baseline_); }
    bool should_fire(const CacheStore& store) const
    {
        return policy_.enabled && pending(store) >= policy_.new_exchange_threshold;
    }
    void reset(const CacheStore& store)
    {
        baseline_ = store.next_seq();
        ++fired_;
    }
    std::size_t fired() const noexcept { return fired_; }
    std::uint64_t baseline() const noexcept { return baseline_; }

private:
    ReoptPolicy policy_;
    std::uint64_t baseline_;
    std::size_t fired_ = 0;
};

/// Holds the live pipeline. Callers take a reference per record, so a swap
/// lets in-flight records finish on the pipeline they started with.
class PipelineRunner {
public:
    using Rebuild = std::function<std::shared_ptr<CompiledPipeline>(const CacheStore&)>;

    PipelineRunner(std::shared_ptr<CompiledPipeline> pipeline, CacheStore& store, ReoptPolicy policy, Rebuild rebuild = {})
        : pipeline_(std::move(pipeline)), store_(store), trigger_(policy, store.next_seq()), rebuild_(std::move(rebuild))
    {
    }

    std::shared_ptr<CompiledPipeline> current() const
    {
        std::lock_guard lock(mutex_);
        return pipeline_;
    }

    void swap(std::shared_ptr<CompiledPipeline> next)
    {
        std::lock_guard lock(mutex_);
        pipeline_ = std::move(next);
    }

    const ReoptTrigger& trigger() const noexcept { return trigger_; }

    /// Rebuilds and swaps the pipeline once enough new exchanges accumulated.
    bool maybe_reoptimize()
    {
        if (!rebuild_ || !trigger_.should_fire(store_))
            return false;
        auto next = rebuild_(store_);
        trigger_.reset(store_);
        if (next)
            swap(std::move(next));
        return true;
    }

    RecordResult execute_record(const Record& record)
    {
        auto p = current();
        auto r = p->execute_record(record);
        maybe_reoptimize();
        return r;
    }

private:
    mutable std::mutex mutex_;
    std::shared_ptr<CompiledPipeline> pipeline_;
    CacheStore& store_;
    ReoptTrigger trigger_;
    Rebuild rebuild_;
};

} // namespace cascadec
