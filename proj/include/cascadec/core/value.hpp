// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

namespace cascadec {

/// Shortest decimal form that round-trips; integral values print without a
/// fractional part ("39" rather than "39.0").
inline std::string format_number(double x)
{
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, end);
}

inline std::optional<double> parse_number(std::string_view text)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r' || text.back() == '\n'))
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    if (text.empty())
        return std::nullopt;
    double out = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        return std::nullopt;
    return out;
}

inline std::string trim(std::string_view s)
{
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return std::string(s);
}

/// A scalar field or output value: either text or a number.
class Value {
public:
    Value() = default;

    static Value text(std::string s) { return Value(Storage(std::move(s))); }
    static Value number(double x) { return Value(Storage(x)); }

    bool is_number() const noexcept { return std::holds_alternative<double>(v_); }
    bool is_text() const noexcept { return std::holds_alternative<std::string>(v_); }

    const std::string& as_text() const { return std::get<std::string>(v_); }
    double as_number() const { return std::get<double>(v_); }

    /// Rendering used inside prompts and result files.
    std::string render() const { return is_number() ? format_number(as_number()) : as_text(); }

    friend bool operator==(const Value&, const Value&) = default;
    friend auto operator<=>(const Value&, const Value&) = default;

private:
    using Storage = std::variant<std::string, double>;
    explicit Value(Storage v) : v_(std::move(v)) {}
    Storage v_ {std::string {}};
};

/// Label comparison used for scoring: numbers within 1e-9, text after trimming.
inline bool values_match(const Value& a, const Value& b)
{
    if (a.is_number() && b.is_number())
        return std::fabs(a.as_number() - b.as_number()) <= 1e-9 * std::max(1.0, std::fabs(b.as_number()));
    return trim(a.render()) == trim(b.render());
}

/// A data record: field name to value, ordered by name.
using Record = std::map<std::string, Value>;

inline nlohmann::json to_json(const Value& v)
{
    if (v.is_number())
        return v.as_number();
    return v.as_text();
}

inline Value value_from_json(const nlohmann::json& j)
{
    if (j.is_number())
        return Value::number(j.get<double>());
    if (j.is_string())
        return Value::text(j.get<std::string>());
    if (j.is_boolean())
        return Value::text(j.get<bool>() ? "1" : "0");
    return Value::text(j.dump());
}

inline nlohmann::json to_json(const Record& r)
{
    auto obj = nlohmann::json::object();
    for (const auto& [k, v] : r)
        obj[k] = to_json(v);
    return obj;
}

inline Record record_from_json(const nlohmann::json& j)
{
    Record r;
    for (const auto& [k, v] : j.items())
        r.emplace(k, value_from_json(v));
    return r;
}

/// Canonical serialization: keys sorted, numbers in shortest round-trip form.
inline std::string canonical(const Record& r) { return to_json(r).dump(); }

/// Text used for embedding a record: the values in field-name order.
inline std::string record_text(const Record& r)
{
    std::string out;
    for (const auto& [k, v] : r) {
        if (!out.empty())
            out += " | ";
        out += v.render();
    }
    return out;
}

} // namespace cascadec
