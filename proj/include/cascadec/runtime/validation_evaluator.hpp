// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "cascadec/optimizer/evaluator.hpp"
#include "cascadec/runtime/metrics.hpp"
#include "cascadec/runtime/stage_factory.hpp"

namespace cascadec {

inline std::string input_digest(const Record& record) { return digest(canonical(record)); }

/// Scores plans by running them over labeled records. Every (stage, record)
/// verdict is recorded in the store and replayed on later evaluations, so a
/// config is executed at most once per record no matter how many plans use it.
class ValidationEvaluator final : public PlanEvaluator {
public:
    ValidationEvaluator(StageFactory& factory, std::vector<LabeledRecord> validation)
        : factory_(factory), validation_(std::move(validation))
    {
        if (validation_.empty())
            throw Error(Errc::empty_validation, "validation set is empty");
        for (const auto& v : validation_)
            digests_.push_back(input_digest(v.record));
        for (const auto& v : validation_)
            labels_.push_back(v.label);
    }

    std::size_t replay_hits() const noexcept { return replay_hits_; }
    std::size_t stage_runs() const noexcept { return stage_runs_; }
    const std::vector<LabeledRecord>& validation() const noexcept { return validation_; }

    PlanMetrics evaluate(const std::vector<ModuleConfig>& stages) override
    {
        std::vector<Stage*> exec;
        for (const auto& c : stages)
            exec.push_back(&stage_for(c));

        std::vector<std::size_t> reached(stages.size(), 0), fell(stages.size(), 0);
        std::vector<double> calls(stages.size(), 0);
        std::vector<std::optional<Value>> preds(validation_.size());
        for (std::size_t r = 0; r < validation_.size(); ++r) {
            for (std::size_t i = 0; i < exec.size(); ++i) {
                ++reached[i];
                auto out = outcome(*exec[i], validation_[r].record, digests_[r]);
                calls[i] += out.provider_calls;
                if (out.verdict.is_answered()) {
                    preds[r] = out.verdict.value();
                    break;
                }
                ++fell[i];
            }
        }

        PlanMetrics m;
        m.effectiveness = effectiveness(preds, labels_, factory_.spec().metric, factory_.spec().output);
        for (std::size_t i = 0; i < stages.size(); ++i) {
            bool llm = kind_of(stages[i]) == ModuleKind::llm;
            StageMetrics s;
            if (reached[i] == 0) {
                s.fallback = 1.0;
                s.cost = llm ? 1.0 : non_llm_stage_cost;
            } else {
                s.fallback = static_cast<double>(fell[i]) / static_cast<double>(reached[i]);
                s.cost = llm ? calls[i] / static_cast<double>(reached[i]) : non_llm_stage_cost;
            }
            m.stages.push_back(s);
        }
        m.cost = plan_cost(m.stages);
        return m;
    }

private:
    Stage& stage_for(const ModuleConfig& c)
    {
        auto key = config_to_json(c).dump();
        auto it = stages_.find(key);
        if (it == stages_.end())
            it = stages_.emplace(key, factory_.make(c)).first;
        return *it->second;
    }

    StageOutcome outcome(Stage& stage, const Record& record, const std::string& in)
    {
        auto& store = factory_.store();
        auto id = stage.module_id();
        auto pd = stage.params_digest();
        if (auto hit = store.replay_module_io(id, pd, in)) {
            ++replay_hits_;
            return {hit->verdict, hit->provider_calls};
        }
        ++stage_runs_;
        auto out = stage.run(record);
        store.record_module_io({id, pd, in, out.verdict, out.provider_calls});
        return out;
    }

    StageFactory& factory_;
    std::vector<LabeledRecord> validation_;
    std::vector<std::string> digests_;
    std::vector<Value> labels_;
    std::map<std::string, std::unique_ptr<Stage>> stages_;
    std::size_t replay_hits_ = 0;
    std::size_t stage_runs_ = 0;
};

} // namespace cascadec
