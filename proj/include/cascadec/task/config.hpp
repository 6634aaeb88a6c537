// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cascadec/core/error.hpp"
#include "cascadec/task/task_spec.hpp"

namespace cascadec {

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where)
{
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a)
                known = true;
        if (!known)
            throw Error(Errc::unknown_key, "'" + key + "' in " + where);
    }
}

inline const json& require(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw Error(Errc::missing_field, std::string(key) + " in " + where);
    return obj.at(key);
}

inline std::string require_string(const json& obj, const char* key, const std::string& where)
{
    const auto& v = require(obj, key, where);
    if (!v.is_string())
        throw Error(Errc::invalid_config, std::string(key) + " in " + where + " must be a string");
    return v.get<std::string>();
}

inline std::string optional_string(const json& obj, const char* key)
{
    if (obj.contains(key) && obj.at(key).is_string())
        return obj.at(key).get<std::string>();
    return {};
}

inline FieldSpec parse_field(const json& j, const std::string& where)
{
    if (!j.is_object())
        throw Error(Errc::invalid_config, where + " must be an object");
    reject_unknown_keys(j, {"name", "type", "labels", "description"}, where);
    FieldSpec f;
    f.name = require_string(j, "name", where);
    f.description = optional_string(j, "description");
    auto type = require_string(j, "type", where);
    if (type == "text" || type == "str" || type == "string") {
        f.kind = ValueKind::text;
    } else if (type == "number" || type == "float" || type == "int") {
        f.kind = ValueKind::number;
    } else if (type == "bool" || type == "boolean") {
        f.kind = ValueKind::categorical;
        f.labels = {"0", "1"};
    } else if (type == "categorical") {
        f.kind = ValueKind::categorical;
        for (const auto& l : require(j, "labels", where))
            f.labels.push_back(l.is_string() ? l.get<std::string>() : l.dump());
        std::set<std::string> distinct(f.labels.begin(), f.labels.end());
        if (distinct.size() < 2 || distinct.size() != f.labels.size())
            throw Error(Errc::invalid_config, where + ": categorical needs at least 2 distinct labels");
    } else {
        throw Error(Errc::invalid_config, where + ": unknown type '" + type + "'");
    }
    if (f.kind != ValueKind::categorical && j.contains("labels"))
        throw Error(Errc::invalid_config, where + ": labels only apply to categorical fields");
    return f;
}

inline Value parse_label(const json& j, const FieldSpec& output, const std::string& where)
{
    switch (output.kind) {
    case ValueKind::number:
        if (!j.is_number())
            throw Error(Errc::kind_mismatch, where + ": label must be a number");
        return Value::number(j.get<double>());
    case ValueKind::text:
        if (!j.is_string())
            throw Error(Errc::kind_mismatch, where + ": label must be text");
        return Value::text(j.get<std::string>());
    case ValueKind::categorical: {
        std::string raw = j.is_string() ? j.get<std::string>() : (j.is_boolean() ? (j.get<bool>() ? "1" : "0") : j.dump());
        auto v = coerce_output(output, raw);
        if (!v)
            throw Error(Errc::kind_mismatch, where + ": label '" + raw + "' is not one of the declared labels");
        return *v;
    }
    }
    throw Error(Errc::kind_mismatch, where);
}

inline const char* kind_name(ValueKind k)
{
    switch (k) {
    case ValueKind::text: return "text";
    case ValueKind::number: return "number";
    case ValueKind::categorical: return "categorical";
    }
    return "text";
}

inline json field_to_json(const FieldSpec& f)
{
    json j = {{"name", f.name}, {"type", kind_name(f.kind)}, {"description", f.description}};
    if (f.kind == ValueKind::categorical)
        j["labels"] = f.labels;
    return j;
}

template <typename T>
std::vector<T> read_list(const json& obj, const char* key, std::vector<T> fallback)
{
    if (!obj.contains(key))
        return fallback;
    return obj.at(key).get<std::vector<T>>();
}

inline TaskOptions parse_options(const json& j)
{
    reject_unknown_keys(j,
        {"gap", "mode", "beam", "cache_thresholds", "modelgen_thresholds", "llm_sample_modes", "codegen_branches",
            "codegen_preserved", "codegen_iterations", "few_shot_k", "seed", "reopt_threshold"},
        "optimizer");
    TaskOptions o;
    o.gap = j.value("gap", o.gap);
    o.mode = j.value("mode", o.mode);
    if (j.contains("beam") && !j.at("beam").is_null())
        o.beam = j.at("beam").get<int>();
    o.cache_thresholds = read_list(j, "cache_thresholds", o.cache_thresholds);
    o.modelgen_thresholds = read_list(j, "modelgen_thresholds", o.modelgen_thresholds);
    o.llm_sample_modes = read_list(j, "llm_sample_modes", o.llm_sample_modes);
    o.codegen_branches = read_list(j, "codegen_branches", o.codegen_branches);
    o.codegen_preserved = j.value("codegen_preserved", o.codegen_preserved);
    o.codegen_iterations = j.value("codegen_iterations", o.codegen_iterations);
    o.few_shot_k = j.value("few_shot_k", o.few_shot_k);
    o.seed = j.value("seed", o.seed);
    o.reopt_threshold = j.value("reopt_threshold", o.reopt_threshold);

    if (o.gap < 0 || o.gap > 1)
        throw Error(Errc::invalid_config, "optimizer.gap must be in [0,1]");
    if (o.mode != "generic" && o.mode != "specialized")
        throw Error(Errc::invalid_config, "optimizer.mode must be generic or specialized");
    if (o.beam && *o.beam < 1)
        throw Error(Errc::invalid_config, "optimizer.beam must be positive");
    for (double t : o.cache_thresholds)
        if (t < 0)
            throw Error(Errc::invalid_config, "cache thresholds must be >= 0");
    for (double t : o.modelgen_thresholds)
        if (t < 0 || t > 1)
            throw Error(Errc::invalid_config, "modelgen thresholds must be in [0,1]");
    for (const auto& m : o.llm_sample_modes)
        if (m != "fixed" && m != "random" && m != "nearest")
            throw Error(Errc::invalid_config, "unknown examples sample mode '" + m + "'");
    for (int m : o.codegen_branches)
        if (m < 1 || m > o.codegen_preserved)
            throw Error(Errc::invalid_config, "codegen branches must satisfy 1 <= m <= preserved");
    if (o.codegen_iterations < 0 || o.few_shot_k < 0 || o.reopt_threshold < 1)
        throw Error(Errc::invalid_config, "negative iteration/shot count or reopt threshold < 1");
    return o;
}

inline json options_to_json(const TaskOptions& o)
{
    json j = {{"gap", o.gap}, {"mode", o.mode}, {"cache_thresholds", o.cache_thresholds},
        {"modelgen_thresholds", o.modelgen_thresholds}, {"llm_sample_modes", o.llm_sample_modes},
        {"codegen_branches", o.codegen_branches}, {"codegen_preserved", o.codegen_preserved},
        {"codegen_iterations", o.codegen_iterations}, {"few_shot_k", o.few_shot_k}, {"seed", o.seed},
        {"reopt_threshold", o.reopt_threshold}};
    j["beam"] = o.beam ? json(*o.beam) : json(nullptr);
    return j;
}

} // namespace detail

/// Builds a validated TaskSpec from a configuration tree. Unknown keys at any
/// level are rejected.
inline TaskSpec parse_config(const nlohmann::json& doc)
{
    using namespace detail;
    if (!doc.is_object())
        throw Error(Errc::invalid_config, "configuration must be an object");
    reject_unknown_keys(doc, {"task", "inputs", "output", "hint", "examples", "tools", "optimizer"}, "configuration");

    TaskSpec spec;
    const auto& task = require(doc, "task", "configuration");
    reject_unknown_keys(task, {"name", "description", "api", "metric"}, "task");
    spec.name = require_string(task, "name", "task");
    spec.description = optional_string(task, "description");
    spec.api = optional_string(task, "api");
    auto metric = task.value("metric", std::string("accuracy"));
    if (metric == "accuracy")
        spec.metric = MetricKind::accuracy;
    else if (metric == "f1")
        spec.metric = MetricKind::f1;
    else
        throw Error(Errc::invalid_config, "task.metric must be accuracy or f1");

    const auto& inputs = require(doc, "inputs", "configuration");
    if (!inputs.is_array())
        throw Error(Errc::invalid_config, "inputs must be a list");
    if (inputs.empty())
        throw Error(Errc::empty_inputs, "at least one input field is required");
    std::set<std::string> names;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto f = parse_field(inputs[i], "inputs[" + std::to_string(i) + "]");
        if (!names.insert(f.name).second)
            throw Error(Errc::invalid_config, "duplicate input field '" + f.name + "'");
        spec.inputs.push_back(std::move(f));
    }

    const auto& output = require(doc, "output", "configuration");
    if (output.is_array())
        throw Error(Errc::invalid_config, "exactly one output field is expected");
    spec.output = parse_field(output, "output");

    if (doc.contains("hint") && !doc.at("hint").is_null())
        spec.hint = doc.at("hint").get<std::string>();

    if (doc.contains("examples")) {
        const auto& examples = doc.at("examples");
        for (std::size_t i = 0; i < examples.size(); ++i) {
            const auto& e = examples[i];
            auto where = "examples[" + std::to_string(i) + "]";
            reject_unknown_keys(e, {"values", "label"}, where);
            ExampleRecord ex;
            const auto& values = require(e, "values", where);
            for (const auto& f : spec.inputs) {
                if (!values.contains(f.name))
                    throw Error(Errc::missing_field, where + " lacks input '" + f.name + "'");
                ex.values.emplace(f.name, value_from_json(values.at(f.name)));
            }
            if (e.contains("label") && !e.at("label").is_null())
                ex.label = parse_label(e.at("label"), spec.output, where);
            spec.examples.push_back(std::move(ex));
        }
    }

    if (doc.contains("tools"))
        spec.tools = doc.at("tools").get<std::vector<std::string>>();
    if (doc.contains("optimizer"))
        spec.options = parse_options(doc.at("optimizer"));
    return spec;
}

inline TaskSpec parse_config_text(const std::string& text)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::invalid_config, e.what());
    }
    try {
        return parse_config(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::invalid_config, e.what());
    }
}

inline TaskSpec load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(Errc::io_error, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

/// Canonical configuration document; parse_config() of the result yields an
/// equal TaskSpec.
inline nlohmann::json to_config_json(const TaskSpec& spec)
{
    using namespace detail;
    json doc;
    doc["task"] = {{"name", spec.name}, {"description", spec.description},
        {"metric", spec.metric == MetricKind::f1 ? "f1" : "accuracy"}};
    if (!spec.api.empty())
        doc["task"]["api"] = spec.api;
    doc["inputs"] = json::array();
    for (const auto& f : spec.inputs)
        doc["inputs"].push_back(field_to_json(f));
    doc["output"] = field_to_json(spec.output);
    if (spec.hint)
        doc["hint"] = *spec.hint;
    doc["examples"] = json::array();
    for (const auto& e : spec.examples) {
        json ej = {{"values", to_json(e.values)}};
        if (e.label)
            ej["label"] = to_json(*e.label);
        doc["examples"].push_back(std::move(ej));
    }
    doc["tools"] = spec.tools;
    doc["optimizer"] = options_to_json(spec.options);
    return doc;
}

} // namespace cascadec
