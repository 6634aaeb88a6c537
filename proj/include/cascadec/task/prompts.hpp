// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>

#include "cascadec/task/task_spec.hpp"
#include "cascadec/task/templates.hpp"

namespace cascadec {

/// Substitutes `<key>` slots in one left-to-right pass. Slots whose key is not
/// in `slots` (e.g. the literal `<index>`) are copied verbatim, and inserted
/// text is never re-scanned.
inline std::string fill_template(std::string_view tpl, const std::map<std::string, std::string>& slots)
{
    std::string out;
    out.reserve(tpl.size() + 256);
    std::size_t i = 0;
    while (i < tpl.size()) {
        if (tpl[i] == '<') {
            auto close = tpl.find('>', i + 1);
            if (close != std::string_view::npos) {
                auto key = std::string(tpl.substr(i + 1, close - i - 1));
                if (auto it = slots.find(key); it != slots.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tpl[i++];
    }
    return out;
}

inline std::string render_field_lines(const TaskSpec& spec, const Record& values)
{
    std::string out;
    for (const auto& f : spec.inputs) {
        out += "- " + f.name + ": ";
        if (auto it = values.find(f.name); it != values.end())
            out += it->second.render();
        out += "\n";
    }
    if (!out.empty())
        out.pop_back();
    return out;
}

/// Task description, attribute descriptions, expected output, and numbered
/// examples. No trailing newline.
inline std::string render_task_profile(const TaskSpec& spec, std::span<const ExampleRecord> shots)
{
    std::string out = spec.description.empty() ? spec.name : spec.description;
    out += "\nThe input contains the following attributes:\n";
    for (const auto& f : spec.inputs)
        out += "- " + f.name + ": " + f.description + "\n";
    out += "You are expected to output:\n";
    out += "- " + (spec.output.description.empty() ? spec.output.name : spec.output.description);
    if (spec.hint && !spec.hint->empty())
        out += "\nHint: " + *spec.hint;
    if (!shots.empty()) {
        out += "\nExamples:";
        for (std::size_t i = 0; i < shots.size(); ++i) {
            out += "\nExample #" + std::to_string(i) + ":\nInputs:\n";
            out += render_field_lines(spec, shots[i].values);
            if (shots[i].label)
                out += "\nOutput:\n- " + shots[i].label->render();
        }
    }
    return out;
}

inline std::string render_query_prompt(const std::string& task_profile, const TaskSpec& spec, const Record& record)
{
    return fill_template(templates::llm_query,
        {{"task_profile", task_profile}, {"instance", render_field_lines(spec, record)}});
}

/// Tools profile lines, `- <api>: <description>`, one per tool.
inline std::string render_tools_profile(const std::map<std::string, std::string>& tool_descriptions)
{
    std::string out;
    for (const auto& [api, desc] : tool_descriptions)
        out += "- " + api + ": " + desc + "\n";
    if (!out.empty())
        out.pop_back();
    return out;
}

/// Extracts the answer text from a single-query response. Accepts a leading
/// "Output #1:" tag and a "- " bullet so a one-instance batched reply also parses.
inline std::string extract_single_answer(std::string_view response)
{
    auto text = trim(response);
    if (text.rfind("Output #", 0) == 0) {
        auto colon = text.find(':');
        if (colon != std::string::npos)
            text = trim(std::string_view(text).substr(colon + 1));
    }
    if (text.rfind("- ", 0) == 0)
        text = trim(std::string_view(text).substr(2));
    return text;
}

} // namespace cascadec
