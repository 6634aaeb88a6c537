// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "cascadec/codegen/evolution.hpp"
#include "cascadec/runtime/stage.hpp"

namespace cascadec {

struct ProviderSet {
    LlmProvider* llm = nullptr;
    LlmProvider* codegen = nullptr; // defaults to llm
    const ToolRegistry* tools = nullptr;
};

struct FactoryOptions {
    std::size_t few_shot_k = 3;
    std::uint64_t seed = 0;
    std::uint64_t horizon = CacheStore::all; // CacheReuse and ModelGen see entries before this seq
    CodegenSettings codegen;
    std::size_t max_tool_steps = 8;
};

/// Builds stage executors for module configs. Evolved ensembles and the
/// distilled model are built once and shared by every stage that needs them.
class StageFactory {
public:
    StageFactory(TaskSpec spec, ProviderSet providers, CacheStore& store, FactoryOptions opt = {})
        : spec_(std::move(spec)), providers_(providers), store_(store), opt_(opt)
    {
    }

    const TaskSpec& spec() const noexcept { return spec_; }
    CacheStore& store() noexcept { return store_; }
    const FactoryOptions& options() const noexcept { return opt_; }
    const ProviderSet& providers() const noexcept { return providers_; }

    /// Labeled records used to evolve CodeGen ensembles.
    void set_validation(std::vector<LabeledRecord> v) { validation_ = std::move(v); }

    void install_ensemble(const std::string& config_digest, std::shared_ptr<const CodeEnsemble> e)
    {
        std::lock_guard lock(mutex_);
        ensembles_[config_digest] = std::move(e);
    }
    void install_ensemble(const CodeGenCfg& cfg, std::shared_ptr<const CodeEnsemble> e)
    {
        install_ensemble(params_digest(ModuleConfig {cfg}), std::move(e));
    }

    /// Ensembles keyed by CodeGen config digest.
    std::map<std::string, std::shared_ptr<const CodeEnsemble>> ensembles() const
    {
        std::lock_guard lock(mutex_);
        return ensembles_;
    }

    std::size_t codegen_provider_calls() const noexcept { return codegen_calls_; }

    std::unique_ptr<Stage> make(const ModuleConfig& cfg)
    {
        validate(cfg);
        switch (kind_of(cfg)) {
        case ModuleKind::cache_reuse:
            return std::make_unique<CacheReuseStage>(std::get<CacheReuseCfg>(cfg), store_, opt_.horizon);
        case ModuleKind::modelgen: {
            auto [model, tag] = distilled_model();
            return std::make_unique<ModelGenStage>(std::get<ModelGenCfg>(cfg), model, store_.embedder_ptr(), tag);
        }
        case ModuleKind::codegen:
            return std::make_unique<CodeGenStage>(std::get<CodeGenCfg>(cfg), ensemble_for(std::get<CodeGenCfg>(cfg)), spec_);
        case ModuleKind::llm:
            if (!providers_.llm)
                throw Error(Errc::missing_provider, "plan has an LLM stage but no LLM provider is configured");
            return std::make_unique<LlmStage>(std::get<LlmCfg>(cfg), spec_, *providers_.llm, store_, opt_.few_shot_k,
                opt_.seed, providers_.tools, opt_.max_tool_steps);
        }
        throw std::logic_error("unreachable module kind");
    }

private:
    std::pair<std::shared_ptr<const DistilledModel>, std::string> distilled_model()
    {
        std::lock_guard lock(mutex_);
        if (!model_) {
            auto labeled = store_.labeled_entries(opt_.horizon);
            model_ = std::make_shared<const DistilledModel>(
                modelgen_train_from_store(store_, infer_task_kind(spec_), opt_.horizon));
            model_tag_ = std::to_string(labeled.size()) + "@" + std::to_string(opt_.horizon);
        }
        return {model_, model_tag_};
    }

    std::shared_ptr<const CodeEnsemble> ensemble_for(const CodeGenCfg& cfg)
    {
        std::lock_guard lock(mutex_);
        auto key = params_digest(ModuleConfig {cfg});
        if (auto it = ensembles_.find(key); it != ensembles_.end())
            return it->second;
        auto* provider = providers_.codegen ? providers_.codegen : providers_.llm;
        if (!provider)
            throw Error(Errc::missing_provider, "plan has a CodeGen stage but no code-generation provider is configured");
        if (validation_.empty())
            throw Error(Errc::empty_validation, "CodeGen stage needs labeled records to evolve its ensemble");
        CodeEvolver evolver(spec_, *provider, &store_, opt_.codegen);
        auto state = evolver.evolve(validation_, cfg);
        codegen_calls_ += evolver.provider_calls();
        auto e = std::make_shared<const CodeEnsemble>(CodeEnsemble::from_state(state, default_ensemble_mode(spec_)));
        ensembles_.emplace(key, e);
        return e;
    }

    TaskSpec spec_;
    ProviderSet providers_;
    CacheStore& store_;
    FactoryOptions opt_;
    std::vector<LabeledRecord> validation_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const CodeEnsemble>> ensembles_;
    std::shared_ptr<const DistilledModel> model_;
    std::string model_tag_;
    std::size_t codegen_calls_ = 0;
};

} // namespace cascadec
