// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "cascadec/core/error.hpp"
#include "cascadec/core/hash.hpp"
#include "cascadec/modules/config.hpp"
#include "cascadec/providers/embedding.hpp"
#include "cascadec/task/task_spec.hpp"

namespace cascadec {

/// Picks k task examples to show in the prompt.
///   fixed   first k in declaration order
///   random  seeded sample, reproducible per (seed, record)
///   nearest k smallest cosine distances to the record, ties by position
inline std::vector<ExampleRecord> sample_few_shot_examples(const TaskSpec& spec, const Record& record, SampleMode mode,
    std::size_t k, const Embedder& embedder, std::uint64_t seed = 0)
{
    const auto& ex = spec.examples;
    if (k > ex.size())
        throw Error(Errc::not_enough_examples,
            "requested " + std::to_string(k) + " examples, task has " + std::to_string(ex.size()));
    std::vector<std::size_t> order(ex.size());
    std::iota(order.begin(), order.end(), 0);
    switch (mode) {
    case SampleMode::fixed:
        break;
    case SampleMode::random: {
        std::mt19937_64 rng(mix64(seed ^ fnv1a64(record_text(record))));
        for (std::size_t i = 0; i < k; ++i) {
            auto j = i + static_cast<std::size_t>(rng() % (order.size() - i));
            std::swap(order[i], order[j]);
        }
        break;
    }
    case SampleMode::nearest: {
        auto q = embedder.embed(record_text(record));
        std::vector<double> d(ex.size());
        for (std::size_t i = 0; i < ex.size(); ++i)
            d[i] = cosine_distance(q, embedder.embed(record_text(ex[i].values)));
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
        break;
    }
    }
    std::vector<ExampleRecord> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        out.push_back(ex[order[i]]);
    return out;
}

} // namespace cascadec
