// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "cascadec/core/error.hpp"
#include "cascadec/providers/embedding.hpp"

namespace cascadec {

inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// k-means whose cluster sizes differ by at most one. Seeded k-means++
/// initialisation, then up to `iterations` rounds of greedy size-capped
/// assignment (globally nearest pairs first) and centroid update.
/// Returns the cluster index of every point.
inline std::vector<std::size_t> balanced_kmeans(
    std::span<const Embedding> points, std::size_t k, std::uint64_t seed, int iterations = 20)
{
    auto n = points.size();
    if (k == 0)
        throw std::invalid_argument("k must be >= 1");
    k = std::min(k, n);
    std::vector<std::size_t> assign(n, 0);
    if (n == 0 || k == 1)
        return assign;
    auto dim = points[0].dim();
    for (const auto& p : points)
        if (p.dim() != dim)
            throw Error(Errc::dim_mismatch, "points differ in dimension");

    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[rng() % n].values);
    std::vector<double> d2(n);
    while (centroids.size() < k) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::numeric_limits<double>::max();
            for (const auto& c : centroids)
                d2[i] = std::min(d2[i], squared_distance(points[i].values, c));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0) {
            double r = unit_uniform(rng) * total;
            for (pick = 0; pick + 1 < n; ++pick) {
                r -= d2[pick];
                if (r < 0)
                    break;
            }
        } else {
            pick = centroids.size(); // all points coincide
        }
        centroids.push_back(points[pick].values);
    }

    auto q = n / k, big_allowed = n % k;
    for (int it = 0; it < iterations; ++it) {
        std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
        pairs.reserve(n * k);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c)
                pairs.emplace_back(squared_distance(points[i].values, centroids[c]), i, c);
        std::sort(pairs.begin(), pairs.end());
        std::vector<std::size_t> next(n, k), size(k, 0);
        std::size_t big = 0;
        for (const auto& [_, i, c] : pairs) {
            if (next[i] != k)
                continue;
            if (size[c] < q || (size[c] == q && big < big_allowed)) {
                if (size[c] == q)
                    ++big;
                next[i] = c;
                ++size[c];
            }
        }
        bool changed = it == 0 || next != assign;
        assign = std::move(next);
        for (std::size_t c = 0; c < k; ++c)
            std::fill(centroids[c].begin(), centroids[c].end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t d = 0; d < dim; ++d)
                centroids[assign[i]][d] += points[i].values[d];
        for (std::size_t c = 0; c < k; ++c)
            for (auto& v : centroids[c])
                v /= static_cast<double>(size[c]);
        if (!changed)
            break;
    }
    return assign;
}

} // namespace cascadec
