// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cascadec/core/error.hpp"
#include "cascadec/task/task_spec.hpp"

namespace cascadec {

/// Items of a text answer: the elements of a "[a, 'b']" list, otherwise the
/// lower-cased whitespace tokens.
inline std::set<std::string> answer_items(const std::string& text)
{
    std::set<std::string> out;
    auto t = trim(text);
    auto clean = [](std::string s) {
        s = trim(s);
        if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front())
            s = s.substr(1, s.size() - 2);
        for (auto& c : s)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return trim(s);
    };
    if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
        std::string cur;
        for (char c : t.substr(1, t.size() - 2)) {
            if (c == ',') {
                if (auto s = clean(cur); !s.empty())
                    out.insert(s);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (auto s = clean(cur); !s.empty())
            out.insert(s);
        return out;
    }
    std::string cur;
    for (char c : t + " ") {
        if (c == ' ' || c == '\t' || c == '\n') {
            if (!cur.empty())
                out.insert(clean(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    return out;
}

inline double set_f1(const std::set<std::string>& pred, const std::set<std::string>& gold)
{
    if (pred.empty() && gold.empty())
        return 1.0;
    std::size_t tp = 0;
    for (const auto& p : pred)
        tp += gold.count(p);
    if (tp == 0)
        return 0.0;
    double precision = static_cast<double>(tp) / static_cast<double>(pred.size());
    double recall = static_cast<double>(tp) / static_cast<double>(gold.size());
    return 2 * precision * recall / (precision + recall);
}

/// Task metric over predictions (empty = abstained, counted as wrong).
///   accuracy  share of exact matches
///   f1        categorical: binary F1 with the last declared label positive;
///             otherwise the mean per-record set F1 of answer items
inline double effectiveness(std::span<const std::optional<Value>> predictions, std::span<const Value> labels,
    MetricKind metric, const FieldSpec& output)
{
    if (predictions.size() != labels.size())
        throw std::invalid_argument("one prediction per label");
    if (labels.empty())
        throw Error(Errc::empty_validation, "no labeled records");
    auto n = static_cast<double>(labels.size());
    if (metric == MetricKind::accuracy) {
        double hits = 0;
        for (std::size_t i = 0; i < labels.size(); ++i)
            hits += predictions[i] && values_match(*predictions[i], labels[i]) ? 1 : 0;
        return hits / n;
    }
    if (output.kind == ValueKind::categorical && !output.labels.empty()) {
        auto positive = Value::text(output.labels.back());
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            bool pred_pos = predictions[i] && values_match(*predictions[i], positive);
            bool gold_pos = values_match(labels[i], positive);
            tp += pred_pos && gold_pos;
            fp += pred_pos && !gold_pos;
            fn += !pred_pos && gold_pos;
        }
        if (tp + fp + fn == 0)
            return 1.0;
        return 2 * tp / (2 * tp + fp + fn);
    }
    double sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
        sum += predictions[i] ? set_f1(answer_items(predictions[i]->render()), answer_items(labels[i].render())) : 0.0;
    return sum / n;
}

} // namespace cascadec
