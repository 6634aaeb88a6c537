// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <variant>

#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/core/hash.hpp"
#include "cascadec/core/value.hpp"

namespace cascadec {

enum class ModuleKind { llm, codegen, modelgen, cache_reuse };

inline constexpr std::array<ModuleKind, 4> all_module_kinds {
    ModuleKind::llm, ModuleKind::codegen, ModuleKind::modelgen, ModuleKind::cache_reuse};

constexpr const char* to_string(ModuleKind k) noexcept
{
    switch (k) {
    case ModuleKind::llm: return "llm";
    case ModuleKind::codegen: return "codegen";
    case ModuleKind::modelgen: return "modelgen";
    case ModuleKind::cache_reuse: return "cache_reuse";
    }
    return "?";
}

inline ModuleKind module_kind_from_string(const std::string& s)
{
    for (auto k : all_module_kinds)
        if (s == to_string(k))
            return k;
    throw Error(Errc::schema_mismatch, "unknown module kind '" + s + "'");
}

enum class SampleMode { fixed, random, nearest };

constexpr const char* to_string(SampleMode m) noexcept
{
    switch (m) {
    case SampleMode::fixed: return "fixed";
    case SampleMode::random: return "random";
    case SampleMode::nearest: return "nearest";
    }
    return "?";
}

inline SampleMode sample_mode_from_string(const std::string& s)
{
    if (s == "fixed")
        return SampleMode::fixed;
    if (s == "random")
        return SampleMode::random;
    if (s == "nearest")
        return SampleMode::nearest;
    throw Error(Errc::invalid_config, "unknown examples sample mode '" + s + "'");
}

struct CacheReuseCfg {
    bool activate = true;
    double distance_threshold = 0.6;
    friend bool operator==(const CacheReuseCfg&, const CacheReuseCfg&) = default;
};

struct CodeGenCfg {
    bool activate = true;
    int num_branches = 1;  // m
    int num_preserved = 8; // M
    int num_iterations = 2; // T
    friend bool operator==(const CodeGenCfg&, const CodeGenCfg&) = default;
};

struct ModelGenCfg {
    bool activate = true;
    double confidence_threshold = 0.7;
    friend bool operator==(const ModelGenCfg&, const ModelGenCfg&) = default;
};

struct LlmCfg {
    bool activate = true;
    SampleMode examples_sample_mode = SampleMode::fixed;
    friend bool operator==(const LlmCfg&, const LlmCfg&) = default;
};

using ModuleConfig = std::variant<LlmCfg, CodeGenCfg, ModelGenCfg, CacheReuseCfg>;

inline ModuleKind kind_of(const ModuleConfig& cfg) noexcept
{
    switch (cfg.index()) {
    case 0: return ModuleKind::llm;
    case 1: return ModuleKind::codegen;
    case 2: return ModuleKind::modelgen;
    default: return ModuleKind::cache_reuse;
    }
}

/// Throws InvalidConfig when a hyperparameter is outside its domain.
inline void validate(const ModuleConfig& cfg)
{
    if (auto* c = std::get_if<CacheReuseCfg>(&cfg); c && !(c->distance_threshold >= 0))
        throw Error(Errc::invalid_config, "distance_threshold must be >= 0");
    if (auto* c = std::get_if<ModelGenCfg>(&cfg); c && !(c->confidence_threshold >= 0 && c->confidence_threshold <= 1))
        throw Error(Errc::invalid_config, "confidence_threshold must be in [0,1]");
    if (auto* c = std::get_if<CodeGenCfg>(&cfg)) {
        if (c->num_branches < 1 || c->num_iterations < 0)
            throw Error(Errc::invalid_config, "num_branches must be >= 1 and num_iterations >= 0");
        if (c->num_preserved < c->num_branches)
            throw Error(Errc::invalid_config, "num_preserved must be >= num_branches");
    }
}

inline nlohmann::json config_to_json(const ModuleConfig& cfg)
{
    nlohmann::json j;
    j["module"] = to_string(kind_of(cfg));
    std::visit(
        [&](const auto& c) {
            using T = std::decay_t<decltype(c)>;
            j["activate"] = c.activate;
            if constexpr (std::is_same_v<T, CacheReuseCfg>)
                j["distance_threshold"] = c.distance_threshold;
            else if constexpr (std::is_same_v<T, CodeGenCfg>) {
                j["num_branches"] = c.num_branches;
                j["num_preserved"] = c.num_preserved;
                j["num_iterations"] = c.num_iterations;
            } else if constexpr (std::is_same_v<T, ModelGenCfg>)
                j["confidence_threshold"] = c.confidence_threshold;
            else
                j["examples_sample_mode"] = to_string(c.examples_sample_mode);
        },
        cfg);
    return j;
}

inline ModuleConfig config_from_json(const nlohmann::json& j)
{
    try {
        auto kind = module_kind_from_string(j.at("module").get<std::string>());
        bool act = j.value("activate", true);
        ModuleConfig cfg;
        switch (kind) {
        case ModuleKind::llm:
            cfg = LlmCfg {act, sample_mode_from_string(j.at("examples_sample_mode").get<std::string>())};
            break;
        case ModuleKind::codegen:
            cfg = CodeGenCfg {act, j.at("num_branches").get<int>(), j.at("num_preserved").get<int>(),
                j.at("num_iterations").get<int>()};
            break;
        case ModuleKind::modelgen:
            cfg = ModelGenCfg {act, j.at("confidence_threshold").get<double>()};
            break;
        case ModuleKind::cache_reuse:
            cfg = CacheReuseCfg {act, j.at("distance_threshold").get<double>()};
            break;
        }
        validate(cfg);
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::schema_mismatch, std::string("module config: ") + e.what());
    }
}

/// Short human label, e.g. `cache_reuse(d=0.6)`.
inline std::string describe(const ModuleConfig& cfg)
{
    return std::visit(
        [](const auto& c) -> std::string {
            using T = std::decay_t<decltype(c)>;
            if constexpr (std::is_same_v<T, CacheReuseCfg>)
                return "cache_reuse(d=" + format_number(c.distance_threshold) + ")";
            else if constexpr (std::is_same_v<T, CodeGenCfg>)
                return "codegen(m=" + std::to_string(c.num_branches) + ",M=" + std::to_string(c.num_preserved)
                    + ",T=" + std::to_string(c.num_iterations) + ")";
            else if constexpr (std::is_same_v<T, ModelGenCfg>)
                return "modelgen(c=" + format_number(c.confidence_threshold) + ")";
            else
                return std::string("llm(") + to_string(c.examples_sample_mode) + ")";
        },
        cfg);
}

inline std::string params_digest(const ModuleConfig& cfg) { return digest(config_to_json(cfg).dump()); }

} // namespace cascadec
