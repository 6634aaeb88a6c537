// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cascadec/runtime/session.hpp"
#include "cascadec/task/config.hpp"

namespace cascadec {

inline constexpr const char* plan_file_format = "cascadec-plan/1";

/// Everything needed to rebuild a pipeline without re-running the search.
struct PlanFile {
    TaskSpec spec;
    OptimizeResult result;
    std::map<std::string, std::shared_ptr<const CodeEnsemble>> ensembles;
    std::uint64_t seed = 0;
    std::uint64_t horizon = 0;
};

inline nlohmann::json plans_to_json(const std::vector<Plan>& plans)
{
    auto a = nlohmann::json::array();
    for (const auto& p : plans)
        a.push_back(plan_to_json(p));
    return a;
}

inline std::vector<Plan> plans_from_json(const nlohmann::json& j)
{
    std::vector<Plan> out;
    for (const auto& p : j)
        out.push_back(plan_from_json(p));
    return out;
}

inline nlohmann::json grids_to_json(const ModuleGrids& g)
{
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, grid] : g) {
        auto a = nlohmann::json::array();
        for (const auto& c : grid)
            a.push_back(config_to_json(c));
        j[to_string(k)] = a;
    }
    return j;
}

inline ModuleGrids grids_from_json(const nlohmann::json& j)
{
    ModuleGrids g;
    for (const auto& [k, a] : j.items())
        for (const auto& c : a)
            g[module_kind_from_string(k)].push_back(config_from_json(c));
    return g;
}

inline nlohmann::json level_cache_to_json(const LevelCache& lc)
{
    nlohmann::json fr = nlohmann::json::object();
    for (const auto& [k, plans] : lc.frontiers)
        fr[to_string(k)] = plans_to_json(plans);
    nlohmann::json st = nlohmann::json::object();
    for (const auto& [d, m] : lc.standalone)
        st[d] = {{"cost", m.cost}, {"fallback", m.fallback}};
    return {{"signature", lc.signature}, {"frontiers", fr}, {"standalone", st}};
}

inline LevelCache level_cache_from_json(const nlohmann::json& j)
{
    LevelCache lc;
    lc.signature = j.at("signature").get<std::string>();
    for (const auto& [k, plans] : j.at("frontiers").items())
        lc.frontiers[module_kind_from_string(k)] = plans_from_json(plans);
    for (const auto& [d, m] : j.at("standalone").items())
        lc.standalone[d] = {m.at("cost").get<double>(), m.at("fallback").get<double>()};
    return lc;
}

inline nlohmann::json plan_file_to_json(const PlanFile& pf)
{
    nlohmann::json ens = nlohmann::json::object();
    for (const auto& [k, e] : pf.ensembles)
        ens[k] = e->to_json();
    const auto& r = pf.result;
    return {{"format", plan_file_format}, {"task", to_config_json(pf.spec)}, {"plan", plan_to_json(r.chosen)},
        {"max_plan", plan_to_json(r.max_plan)}, {"frontier", plans_to_json(r.frontier)}, {"ensembles", ens},
        {"grids", grids_to_json(r.grids)},
        {"optimizer",
            {{"mode", r.mode}, {"gap", r.gap}, {"explored", r.explored}, {"levels_reloaded", r.levels_reloaded},
                {"seed", pf.seed}, {"horizon", pf.horizon}}},
        {"level_cache", level_cache_to_json(r.level_cache)}};
}

/// Throws SchemaMismatch for anything that is not a plan file of this format.
inline PlanFile plan_file_from_json(const nlohmann::json& j)
{
    try {
        if (!j.is_object() || j.value("format", "") != plan_file_format)
            throw Error(Errc::schema_mismatch, std::string("not a ") + plan_file_format + " document");
        PlanFile pf;
        pf.spec = parse_config(j.at("task"));
        auto& r = pf.result;
        r.chosen = plan_from_json(j.at("plan"));
        r.max_plan = plan_from_json(j.at("max_plan"));
        r.frontier = plans_from_json(j.at("frontier"));
        r.grids = grids_from_json(j.at("grids"));
        const auto& o = j.at("optimizer");
        r.mode = o.at("mode").get<std::string>();
        r.gap = o.at("gap").get<double>();
        r.explored = o.at("explored").get<std::size_t>();
        r.levels_reloaded = o.at("levels_reloaded").get<std::size_t>();
        pf.seed = o.at("seed").get<std::uint64_t>();
        pf.horizon = o.at("horizon").get<std::uint64_t>();
        r.level_cache = level_cache_from_json(j.at("level_cache"));
        for (const auto& [k, e] : j.at("ensembles").items())
            pf.ensembles[k] = std::make_shared<const CodeEnsemble>(CodeEnsemble::from_json(e));
        for (const auto& c : r.chosen.stages)
            if (kind_of(c) == ModuleKind::codegen && !pf.ensembles.count(params_digest(c)))
                throw Error(Errc::schema_mismatch, "plan has a CodeGen stage without its ensemble");
        return pf;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::schema_mismatch, std::string("plan file: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == Errc::schema_mismatch)
            throw;
        throw Error(Errc::schema_mismatch, std::string("plan file: ") + e.what());
    }
}

inline void save_plan_file(const std::string& path, const PlanFile& pf)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(Errc::io_error, "cannot write " + path);
    out << plan_file_to_json(pf).dump(2) << "\n";
}

inline PlanFile load_plan_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::schema_mismatch, "cannot read plan file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::schema_mismatch, path + ": " + e.what());
    }
    return plan_file_from_json(j);
}

/// Frontier report: every skyline plan with its figures, plus search effort.
inline nlohmann::json frontier_report(const OptimizeResult& r)
{
    auto plans = nlohmann::json::array();
    for (const auto& p : r.frontier)
        plans.push_back({{"plan", describe(p)}, {"effectiveness", p.metrics.effectiveness}, {"cost", p.metrics.cost},
            {"chosen", p == r.chosen}});
    return {{"mode", r.mode}, {"gap", r.gap}, {"explored", r.explored},
        {"max_effectiveness", r.max_plan.metrics.effectiveness}, {"chosen", describe(r.chosen)},
        {"chosen_effectiveness", r.chosen.metrics.effectiveness}, {"chosen_cost", r.chosen.metrics.cost},
        {"plans", plans}};
}

} // namespace cascadec
