// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <string>

#include "cascadec/cache/cache_store.hpp"
#include "cascadec/codegen/ensemble.hpp"
#include "cascadec/modules/cache_reuse.hpp"
#include "cascadec/modules/distilled_model.hpp"
#include "cascadec/modules/llm_module.hpp"
#include "cascadec/modules/tool_loop.hpp"
#include "cascadec/optimizer/plan.hpp"

namespace cascadec {

struct StageOutcome {
    ModuleVerdict verdict = ModuleVerdict::fallback();
    double provider_calls = 0;
};

/// One configured module inside a cascade.
class Stage {
public:
    virtual ~Stage() = default;
    virtual const ModuleConfig& config() const = 0;
    virtual StageOutcome run(const Record& record) = 0;

    ModuleKind kind() const { return kind_of(config()); }
    std::string module_id() const { return to_string(kind()); }
    /// Identifies everything that determines the stage's answers.
    virtual std::string params_digest() const { return cascadec::params_digest(config()); }
};

class CacheReuseStage final : public Stage {
public:
    CacheReuseStage(CacheReuseCfg cfg, const CacheStore& store, std::uint64_t horizon = CacheStore::all)
        : cfg_(cfg), store_(store), horizon_(horizon)
    {
    }
    const ModuleConfig& config() const override { return cfg_; }
    std::string params_digest() const override
    {
        return digest(cascadec::params_digest(cfg_) + "@" + std::to_string(horizon_));
    }
    StageOutcome run(const Record& record) override { return {cache_reuse_execute(record, std::get<CacheReuseCfg>(cfg_), store_, horizon_), 0}; }

private:
    ModuleConfig cfg_;
    const CacheStore& store_;
    std::uint64_t horizon_;
};

class ModelGenStage final : public Stage {
public:
    ModelGenStage(ModelGenCfg cfg, std::shared_ptr<const DistilledModel> model, std::shared_ptr<const Embedder> embedder,
        std::string model_tag)
        : cfg_(cfg), model_(std::move(model)), embedder_(std::move(embedder)), tag_(std::move(model_tag))
    {
    }
    const ModuleConfig& config() const override { return cfg_; }
    std::string params_digest() const override { return digest(cascadec::params_digest(cfg_) + "@" + tag_); }
    StageOutcome run(const Record& record) override
    {
        return {modelgen_execute(embedder_->embed(record_text(record)), *model_, std::get<ModelGenCfg>(cfg_)), 0};
    }
    const DistilledModel& model() const { return *model_; }

private:
    ModuleConfig cfg_;
    std::shared_ptr<const DistilledModel> model_;
    std::shared_ptr<const Embedder> embedder_;
    std::string tag_;
};

class CodeGenStage final : public Stage {
public:
    CodeGenStage(CodeGenCfg cfg, std::shared_ptr<const CodeEnsemble> ensemble, TaskSpec spec)
        : cfg_(cfg), ensemble_(std::move(ensemble)), spec_(std::move(spec))
    {
    }
    const ModuleConfig& config() const override { return cfg_; }
    std::string params_digest() const override
    {
        return digest(cascadec::params_digest(cfg_) + "@" + ensemble_->to_json().dump());
    }
    StageOutcome run(const Record& record) override { return {ensemble_->execute(record, spec_), 0}; }
    const CodeEnsemble& ensemble() const { return *ensemble_; }

private:
    ModuleConfig cfg_;
    std::shared_ptr<const CodeEnsemble> ensemble_;
    TaskSpec spec_;
};

/// Provider stage. With a tool registry it runs the tool loop, otherwise a
/// single prompt. An unparseable answer is passed through as raw text with
/// confidence 0 so the stage never fails a record.
class LlmStage final : public Stage {
public:
    LlmStage(LlmCfg cfg, const TaskSpec& spec, LlmProvider& provider, CacheStore& store, std::size_t few_shot_k,
        std::uint64_t seed, const ToolRegistry* tools = nullptr, std::size_t max_tool_steps = 8)
        : cfg_(cfg), exec_(spec, cfg, provider, store, few_shot_k, seed), tools_(tools), max_steps_(max_tool_steps)
    {
    }
    const ModuleConfig& config() const override { return cfg_; }
    LlmExecutor& executor() { return exec_; }
    bool uses_tools() const { return tools_ != nullptr; }

    StageOutcome run(const Record& record) override
    {
        if (tools_) {
            auto res = tool_loop_execute(record, exec_.spec(), *tools_, exec_.provider(), max_steps_);
            return {res.verdict, static_cast<double>(res.transcript.size())};
        }
        auto ans = exec_.query(record);
        if (ans.value)
            return {ModuleVerdict::answered(*ans.value, 1.0), 1};
        return {ModuleVerdict::answered(Value::text(ans.raw), 0.0), 1};
    }

private:
    ModuleConfig cfg_;
    LlmExecutor exec_;
    const ToolRegistry* tools_;
    std::size_t max_steps_;
};

/// Test double with a configured fallback probability and per-record call
/// count. Whether a record falls back is a pure function of (seed, record).
class SimulatedStage final : public Stage {
public:
    SimulatedStage(ModuleConfig label, std::string name, double fallback, std::size_t calls, LlmProvider* provider,
        std::uint64_t seed, std::function<Value(const Record&)> answer)
        : cfg_(std::move(label)), name_(std::move(name)), p_(fallback), calls_(calls), provider_(provider), seed_(seed),
          answer_(std::move(answer))
    {
    }
    const ModuleConfig& config() const override { return cfg_; }
    std::string params_digest() const override { return digest("simulated:" + name_); }

    StageOutcome run(const Record& record) override
    {
        for (std::size_t i = 0; i < calls_; ++i)
            provider_->complete(name_ + " " + std::to_string(i) + "\n" + record_text(record));
        auto u = static_cast<double>(mix64(seed_ ^ fnv1a64(record_text(record))) >> 11) * 0x1.0p-53;
        if (u < p_)
            return {ModuleVerdict::fallback(), static_cast<double>(calls_)};
        return {ModuleVerdict::answered(answer_(record), 1.0), static_cast<double>(calls_)};
    }

private:
    ModuleConfig cfg_;
    std::string name_;
    double p_;
    std::size_t calls_;
    LlmProvider* provider_;
    std::uint64_t seed_;
    std::function<Value(const Record&)> answer_;
};

} // namespace cascadec
