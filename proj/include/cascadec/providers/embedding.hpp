// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cascadec/core/error.hpp"
#include "cascadec/core/hash.hpp"

namespace cascadec {

struct Embedding {
    std::vector<double> values;

    std::size_t dim() const noexcept { return values.size(); }
    friend bool operator==(const Embedding&, const Embedding&) = default;
};

/// Cosine distance in [0, 2].
inline double cosine_distance(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw Error(Errc::dim_mismatch, std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0)
        return 1.0;
    if (std::equal(a.begin(), a.end(), b.begin()))
        return 0.0; // exact repeats must compare at distance 0, not rounding noise
    return std::clamp(1.0 - dot / std::sqrt(na * nb), 0.0, 2.0);
}

inline double cosine_distance(const Embedding& a, const Embedding& b) { return cosine_distance(a.values, b.values); }

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Embedding embed(std::string_view text) const = 0;
    virtual std::size_t dim() const noexcept = 0;
};

/// Hashed character-trigram counts, L2-normalized. Text is lower-cased and
/// padded with boundary markers so every input (including "") has at least
/// one trigram.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 256) : dim_(dim) {}

    Embedding embed(std::string_view text) const override
    {
        std::string padded = "\x02\x02";
        for (char c : text)
            padded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        padded += "\x03\x03";
        Embedding e;
        e.values.assign(dim_, 0.0);
        for (std::size_t i = 0; i + 3 <= padded.size(); ++i)
            e.values[fnv1a64(std::string_view(padded).substr(i, 3)) % dim_] += 1.0;
        double norm = 0;
        for (double v : e.values)
            norm += v * v;
        norm = std::sqrt(norm);
        for (double& v : e.values)
            v /= norm;
        return e;
    }

    std::size_t dim() const noexcept override { return dim_; }

private:
    std::size_t dim_;
};

} // namespace cascadec
