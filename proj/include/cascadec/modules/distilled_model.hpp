// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "cascadec/cache/cache_store.hpp"
#include "cascadec/core/error.hpp"
#include "cascadec/modules/confidence.hpp"
#include "cascadec/modules/config.hpp"
#include "cascadec/providers/embedding.hpp"
#include "cascadec/task/task_spec.hpp"

namespace cascadec {

struct Prediction {
    Value value;
    double confidence = 0;
};

struct LabeledEmbedding {
    Embedding embedding;
    Value label;
};

/// Small model trained on provider answers used as pseudo-labels.
///   classification: cosine centroid per class, softmax over similarities
///   seq2seq:        k-nearest label vote with per-token agreement shares
///   regression:     distance-weighted mean of the k nearest labels
/// Immutable after train().
class DistilledModel {
public:
    static constexpr std::size_t neighbors = 5;
    static constexpr double temperature = 0.1;

    static DistilledModel train(std::vector<LabeledEmbedding> examples, TaskKind kind)
    {
        if (examples.empty())
            throw Error(Errc::empty_training_set, "no pseudo-labeled examples");
        DistilledModel m;
        m.kind_ = kind;
        m.training_size_ = examples.size();
        std::set<std::pair<std::vector<double>, Value>> seen;
        for (auto& ex : examples) {
            if (kind == TaskKind::regression && !ex.label.is_number())
                throw Error(Errc::kind_mismatch, "regression label '" + ex.label.render() + "' is not a number");
            if (seen.emplace(ex.embedding.values, ex.label).second)
                m.points_.push_back(std::move(ex));
        }
        if (kind == TaskKind::classification)
            m.fit_centroids();
        return m;
    }

    TaskKind kind() const noexcept { return kind_; }
    std::size_t training_size() const noexcept { return training_size_; }
    std::size_t distinct_points() const noexcept { return points_.size(); }
    const std::vector<std::pair<Value, Embedding>>& centroids() const noexcept { return centroids_; }

    Prediction predict(const Embedding& x) const
    {
        switch (kind_) {
        case TaskKind::classification: return predict_class(x);
        case TaskKind::regression: return predict_regression(x);
        case TaskKind::seq2seq: break;
        }
        return predict_sequence(x);
    }

    /// Class distribution in centroid order (classification only).
    std::vector<double> class_distribution(const Embedding& x) const
    {
        std::vector<double> logits;
        for (const auto& [_, c] : centroids_)
            logits.push_back((1.0 - cosine_distance(x, c)) / temperature);
        double top = *std::max_element(logits.begin(), logits.end());
        double z = 0;
        for (auto& l : logits) {
            l = std::exp(l - top);
            z += l;
        }
        for (auto& l : logits)
            l /= z;
        return logits;
    }

private:
    void fit_centroids()
    {
        std::map<Value, std::pair<std::vector<double>, std::size_t>> acc;
        for (const auto& p : points_) {
            auto& [sum, n] = acc[p.label];
            if (sum.empty())
                sum.assign(p.embedding.dim(), 0.0);
            if (sum.size() != p.embedding.dim())
                throw Error(Errc::dim_mismatch, "training embeddings differ in dimension");
            for (std::size_t i = 0; i < sum.size(); ++i)
                sum[i] += p.embedding.values[i];
            ++n;
        }
        for (auto& [label, sn] : acc) {
            auto& [sum, n] = sn;
            for (auto& v : sum)
                v /= static_cast<double>(n);
            centroids_.emplace_back(label, Embedding {std::move(sum)});
        }
    }

    Prediction predict_class(const Embedding& x) const
    {
        if (centroids_.size() == 1)
            return {centroids_.front().first, 1.0};
        auto dist = class_distribution(x);
        auto best = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        return {centroids_[best].first, classification_confidence(dist)};
    }

    struct Scored {
        double distance;
        std::size_t index;
    };

    std::vector<Scored> knn(const Embedding& x) const
    {
        std::vector<Scored> all;
        all.reserve(points_.size());
        for (std::size_t i = 0; i < points_.size(); ++i)
            all.push_back({cosine_distance(x, points_[i].embedding), i});
        auto k = std::min(neighbors, all.size());
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
            [](const Scored& a, const Scored& b) { return a.distance != b.distance ? a.distance < b.distance : a.index < b.index; });
        all.resize(k);
        return all;
    }

    static double weight(double d) { return 1.0 / (d + 0.05); }

    static std::vector<std::string> tokens(const std::string& s)
    {
        std::vector<std::string> out;
        std::istringstream in(s);
        for (std::string t; in >> t;)
            out.push_back(t);
        return out;
    }

    Prediction predict_sequence(const Embedding& x) const
    {
        auto nn = knn(x);
        std::vector<std::pair<Value, double>> votes; // first-seen order = nearest first
        double total = 0;
        for (const auto& s : nn) {
            const auto& label = points_[s.index].label;
            double w = weight(s.distance);
            total += w;
            auto it = std::find_if(votes.begin(), votes.end(), [&](const auto& v) { return v.first == label; });
            if (it == votes.end())
                votes.emplace_back(label, w);
            else
                it->second += w;
        }
        auto best = votes.begin();
        for (auto it = votes.begin(); it != votes.end(); ++it)
            if (it->second > best->second)
                best = it;
        auto predicted = tokens(best->first.render());
        if (predicted.empty())
            return {best->first, best->second / total};
        std::vector<double> probs;
        for (std::size_t t = 0; t < predicted.size(); ++t) {
            double agree = 0;
            for (const auto& s : nn) {
                auto toks = tokens(points_[s.index].label.render());
                if (t < toks.size() && toks[t] == predicted[t])
                    agree += weight(s.distance);
            }
            probs.push_back(agree / total);
        }
        return {best->first, seq2seq_confidence(probs)};
    }

    Prediction predict_regression(const Embedding& x) const
    {
        auto nn = knn(x);
        double wsum = 0, mean = 0;
        for (const auto& s : nn) {
            double w = weight(s.distance);
            wsum += w;
            mean += w * points_[s.index].label.as_number();
        }
        mean /= wsum;
        double var = 0;
        for (const auto& s : nn) {
            double d = points_[s.index].label.as_number() - mean;
            var += weight(s.distance) * d * d;
        }
        double sd = std::sqrt(var / wsum);
        return {Value::number(mean), 1.0 / (1.0 + sd / (std::abs(mean) + 1.0))};
    }

    TaskKind kind_ = TaskKind::classification;
    std::size_t training_size_ = 0;
    std::vector<LabeledEmbedding> points_;
    std::vector<std::pair<Value, Embedding>> centroids_;
};

inline DistilledModel modelgen_train(
    std::span<const std::pair<Record, Value>> examples, TaskKind kind, const Embedder& embedder)
{
    std::vector<LabeledEmbedding> data;
    data.reserve(examples.size());
    for (const auto& [rec, label] : examples)
        data.push_back({embedder.embed(record_text(rec)), label});
    return DistilledModel::train(std::move(data), kind);
}

/// Trains on answered exchanges stored before `horizon`.
inline DistilledModel modelgen_train_from_store(const CacheStore& store, TaskKind kind, std::uint64_t horizon = CacheStore::all)
{
    std::vector<LabeledEmbedding> data;
    for (auto& e : store.labeled_entries(horizon)) {
        if (kind == TaskKind::regression && !e.answer->is_number())
            continue;
        data.push_back({std::move(*e.embedding), std::move(*e.answer)});
    }
    if (data.empty())
        throw Error(Errc::untrainable_model, "no cached answers to learn from");
    return DistilledModel::train(std::move(data), kind);
}

inline ModuleVerdict modelgen_execute(const Embedding& x, const DistilledModel& model, const ModelGenCfg& cfg)
{
    auto p = model.predict(x);
    if (p.confidence >= cfg.confidence_threshold)
        return ModuleVerdict::answered(p.value, std::clamp(p.confidence, 0.0, 1.0));
    return ModuleVerdict::fallback();
}

} // namespace cascadec
