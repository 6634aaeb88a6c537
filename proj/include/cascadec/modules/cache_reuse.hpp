// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>

#include "cascadec/cache/cache_store.hpp"
#include "cascadec/modules/config.hpp"
#include "cascadec/modules/verdict.hpp"

namespace cascadec {

/// Reuses the answer of the nearest cached query when it lies within the
/// distance threshold. Never calls a provider.
inline ModuleVerdict cache_reuse_execute(
    const Embedding& query, const CacheReuseCfg& cfg, const CacheStore& store, std::uint64_t horizon = CacheStore::all)
{
    for (const auto& n : store.nearest(query, 1, horizon)) {
        if (n.distance > cfg.distance_threshold || !n.entry.answer)
            break;
        double conf = cfg.distance_threshold > 0 ? 1.0 - n.distance / cfg.distance_threshold : 1.0;
        return ModuleVerdict::answered(*n.entry.answer, std::clamp(conf, 0.0, 1.0));
    }
    return ModuleVerdict::fallback();
}

inline ModuleVerdict cache_reuse_execute(
    const Record& record, const CacheReuseCfg& cfg, const CacheStore& store, std::uint64_t horizon = CacheStore::all)
{
    return cache_reuse_execute(store.embedder().embed(record_text(record)), cfg, store, horizon);
}

} // namespace cascadec
