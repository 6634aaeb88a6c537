// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <variant>

#include <json.hpp>

#include "cascadec/core/value.hpp"

namespace cascadec {

/// Either an answer with confidence in [0,1], or a deferral to the next stage.
class ModuleVerdict {
public:
    struct Answered {
        Value value;
        double confidence = 1.0;
        friend bool operator==(const Answered&, const Answered&) = default;
    };
    struct Fallback {
        friend bool operator==(const Fallback&, const Fallback&) = default;
    };

    static ModuleVerdict answered(Value v, double confidence)
    {
        if (!(confidence >= 0.0 && confidence <= 1.0))
            throw std::invalid_argument("confidence outside [0,1]");
        return ModuleVerdict(Answered {std::move(v), confidence});
    }
    static ModuleVerdict fallback() { return ModuleVerdict(Fallback {}); }

    bool is_answered() const noexcept { return std::holds_alternative<Answered>(v_); }
    bool is_fallback() const noexcept { return !is_answered(); }
    const Value& value() const { return std::get<Answered>(v_).value; }
    double confidence() const { return std::get<Answered>(v_).confidence; }

    friend bool operator==(const ModuleVerdict&, const ModuleVerdict&) = default;

    nlohmann::json to_json() const
    {
        if (is_fallback())
            return {{"outcome", "fallback"}};
        return {{"outcome", "answered"}, {"value", cascadec::to_json(value())}, {"confidence", confidence()}};
    }

    static ModuleVerdict from_json(const nlohmann::json& j)
    {
        if (j.at("outcome").get<std::string>() == "fallback")
            return fallback();
        return answered(value_from_json(j.at("value")), j.at("confidence").get<double>());
    }

private:
    explicit ModuleVerdict(std::variant<Fallback, Answered> v) : v_(std::move(v)) {}
    std::variant<Fallback, Answered> v_;
};

} // namespace cascadec
