// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cascadec/batching/clustering.hpp"
#include "cascadec/core/error.hpp"
#include "cascadec/task/prompts.hpp"

namespace cascadec {

enum class BatchStrategy { random, diverse, proximal, farthest, closest };

constexpr const char* to_string(BatchStrategy s) noexcept
{
    switch (s) {
    case BatchStrategy::random: return "RND";
    case BatchStrategy::diverse: return "DIV";
    case BatchStrategy::proximal: return "PRX";
    case BatchStrategy::farthest: return "FAR";
    case BatchStrategy::closest: return "CLS";
    }
    return "?";
}

/// Accepts the short names; SIM is another name for PRX.
inline BatchStrategy batch_strategy_from_string(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (s == "RND")
        return BatchStrategy::random;
    if (s == "DIV")
        return BatchStrategy::diverse;
    if (s == "PRX" || s == "SIM")
        return BatchStrategy::proximal;
    if (s == "FAR")
        return BatchStrategy::farthest;
    if (s == "CLS")
        return BatchStrategy::closest;
    throw Error(Errc::invalid_config, "unknown batch strategy '" + s + "'");
}

struct Batch {
    std::vector<std::size_t> members; // record indices, ascending
};

namespace detail {

inline std::vector<Batch> chunk(const std::vector<std::size_t>& order, std::size_t B)
{
    std::vector<Batch> out;
    for (std::size_t i = 0; i < order.size(); i += B) {
        Batch b;
        b.members.assign(order.begin() + static_cast<std::ptrdiff_t>(i),
            order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + B)));
        std::sort(b.members.begin(), b.members.end());
        out.push_back(std::move(b));
    }
    return out;
}

inline std::vector<Batch> accrete(std::span<const Embedding> emb, std::size_t B, std::uint64_t seed, bool farthest)
{
    auto n = emb.size();
    std::mt19937_64 rng(seed);
    std::vector<bool> used(n, false);
    std::vector<double> gap(n); // min distance to the current batch
    std::size_t remaining = n;
    std::vector<Batch> out;
    while (remaining > 0) {
        auto pick = rng() % remaining;
        std::size_t start = 0;
        for (std::size_t i = 0, seen = 0; i < n; ++i)
            if (!used[i] && seen++ == pick) {
                start = i;
                break;
            }
        Batch b;
        b.members.push_back(start);
        used[start] = true;
        --remaining;
        for (std::size_t i = 0; i < n; ++i)
            if (!used[i])
                gap[i] = cosine_distance(emb[i], emb[start]);
        while (b.members.size() < B && remaining > 0) {
            std::size_t best = n;
            for (std::size_t i = 0; i < n; ++i) {
                if (used[i])
                    continue;
                if (best == n || (farthest ? gap[i] > gap[best] : gap[i] < gap[best]))
                    best = i;
            }
            b.members.push_back(best);
            used[best] = true;
            --remaining;
            for (std::size_t i = 0; i < n; ++i)
                if (!used[i])
                    gap[i] = std::min(gap[i], cosine_distance(emb[i], emb[best]));
        }
        std::sort(b.members.begin(), b.members.end());
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace detail

/// Partitions n records into ceil(n/B) batches.
///   RND  seeded shuffle, then consecutive chunks
///   DIV  B balanced clusters; batch j takes the j-th member of every cluster
///   PRX  ceil(n/B) balanced clusters, one batch each
///   FAR  greedy accretion of the point farthest from the batch so far
///   CLS  greedy accretion of the point closest to the batch so far
/// `embeddings` may be empty for RND. B = 1 yields singletons in index order.
inline std::vector<Batch> form_batches(
    std::size_t n, std::span<const Embedding> embeddings, BatchStrategy strategy, std::size_t B, std::uint64_t seed)
{
    if (B == 0)
        throw std::invalid_argument("batch size must be >= 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (n == 0)
        return {};
    if (B == 1)
        return detail::chunk(order, 1);
    if (strategy != BatchStrategy::random && embeddings.size() != n)
        throw std::invalid_argument("embeddings must align with records");
    auto num_batches = (n + B - 1) / B;
    switch (strategy) {
    case BatchStrategy::random: {
        std::mt19937_64 rng(seed);
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[rng() % (i + 1)]);
        return detail::chunk(order, B);
    }
    case BatchStrategy::diverse: {
        auto k = std::min(B, n);
        auto assign = balanced_kmeans(embeddings, k, seed);
        std::vector<std::vector<std::size_t>> clusters(k);
        for (std::size_t i = 0; i < n; ++i)
            clusters[assign[i]].push_back(i);
        std::vector<Batch> out(num_batches);
        for (const auto& c : clusters)
            for (std::size_t j = 0; j < c.size(); ++j)
                out[j].members.push_back(c[j]);
        for (auto& b : out)
            std::sort(b.members.begin(), b.members.end());
        return out;
    }
    case BatchStrategy::proximal: {
        auto assign = balanced_kmeans(embeddings, num_batches, seed);
        std::vector<Batch> out(num_batches);
        for (std::size_t i = 0; i < n; ++i)
            out[assign[i]].members.push_back(i);
        return out;
    }
    case BatchStrategy::farthest: return detail::accrete(embeddings, B, seed, true);
    case BatchStrategy::closest: return detail::accrete(embeddings, B, seed, false);
    }
    return {};
}

/// Task profile once, then the instances numbered from 1.
inline std::string render_batched_prompt(const TaskSpec& spec, const std::string& task_profile, std::span<const Record> members)
{
    if (members.empty())
        throw std::invalid_argument("empty batch");
    std::string instances;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (i)
            instances += "\n";
        instances += "Instance #" + std::to_string(i + 1) + ":\n" + render_field_lines(spec, members[i]);
    }
    return fill_template(templates::batched_query, {{"task_profile", task_profile}, {"instances", instances}});
}

struct BatchedAnswer {
    std::optional<Value> value; // empty: missing or unparseable line
    std::string raw;
};

/// Maps "Output #i: ..." lines back to instance indices 1..n. The first line
/// for an index wins; lines may come in any order.
inline std::map<std::size_t, BatchedAnswer> parse_batched_response(std::string_view text, std::size_t n, const FieldSpec& output)
{
    static const std::regex line_re(R"(^\s*Output\s*#\s*(\d+)\s*:\s*(.*?)\s*$)");
    std::map<std::size_t, BatchedAnswer> out;
    for (std::size_t i = 1; i <= n; ++i)
        out[i] = {};
    std::set<std::size_t> seen;
    std::istringstream in {std::string(text)};
    for (std::string line; std::getline(in, line);) {
        std::smatch m;
        if (!std::regex_match(line, m, line_re))
            continue;
        auto idx = static_cast<std::size_t>(std::stoull(m[1].str()));
        if (idx < 1 || idx > n || !seen.insert(idx).second)
            continue;
        auto raw = m[2].str();
        if (raw.rfind("- ", 0) == 0)
            raw = trim(raw.substr(2));
        out[idx] = {coerce_output(output, raw), raw};
    }
    return out;
}

} // namespace cascadec
