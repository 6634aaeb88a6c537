// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "cascadec/core/error.hpp"

namespace cascadec {

/// (K * max p - 1) / (K - 1): 1 for a one-hot distribution, 0 for uniform.
inline double classification_confidence(std::span<const double> dist)
{
    auto k = dist.size();
    if (k < 2)
        throw Error(Errc::bad_distribution, "need at least 2 classes");
    double sum = 0;
    for (double p : dist) {
        if (!(p >= 0))
            throw Error(Errc::bad_distribution, "negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw Error(Errc::bad_distribution, "probabilities sum to " + std::to_string(sum));
    double top = *std::max_element(dist.begin(), dist.end());
    auto kd = static_cast<double>(k);
    return std::clamp((kd * top - 1.0) / (kd - 1.0), 0.0, 1.0);
}

/// Inverse perplexity, i.e. the geometric mean of the token probabilities.
inline double seq2seq_confidence(std::span<const double> token_probs)
{
    if (token_probs.empty())
        throw Error(Errc::empty_sequence, "no tokens");
    double log_sum = 0;
    for (double p : token_probs) {
        if (!(p > 0 && p <= 1))
            throw Error(Errc::non_positive_prob, "token probability " + std::to_string(p) + " outside (0,1]");
        log_sum += std::log(p);
    }
    return std::exp(log_sum / static_cast<double>(token_probs.size()));
}

} // namespace cascadec
