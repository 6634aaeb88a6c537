// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <vector>

#include "cascadec/optimizer/plan.hpp"

namespace cascadec {

/// Pareto frontier of plans over (cost, effectiveness). One plan per
/// effectiveness bucket (the cheapest; the incumbent wins ties), and no plan
/// strictly dominated by another.
class SkylineFrontier {
public:
    /// Returns true when `p` was kept.
    bool insert(const Plan& p)
    {
        auto key = effectiveness_key(p.metrics.effectiveness);
        auto same = entries_.find(key);
        if (same != entries_.end() && !(p.metrics.cost < same->second.metrics.cost))
            return false;
        for (const auto& [_, e] : entries_)
            if (dominates(e, p))
                return false;
        if (same != entries_.end())
            entries_.erase(same);
        for (auto it = entries_.begin(); it != entries_.end();)
            it = dominates(p, it->second) ? entries_.erase(it) : std::next(it);
        entries_.emplace(key, p);
        return true;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    /// Plans by descending effectiveness.
    std::vector<Plan> plans() const
    {
        std::vector<Plan> out;
        for (auto it = entries_.rbegin(); it != entries_.rend(); ++it)
            out.push_back(it->second);
        return out;
    }

    /// Structural identity: same plan in every bucket.
    bool same_plans(const SkylineFrontier& other) const
    {
        if (entries_.size() != other.entries_.size())
            return false;
        for (auto a = entries_.begin(), b = other.entries_.begin(); a != entries_.end(); ++a, ++b)
            if (a->first != b->first || plan_key(a->second.stages) != plan_key(b->second.stages))
                return false;
        return true;
    }

private:
    std::map<long long, Plan> entries_;
};

} // namespace cascadec
