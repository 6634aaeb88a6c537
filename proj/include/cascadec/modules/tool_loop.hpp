// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "cascadec/core/error.hpp"
#include "cascadec/modules/verdict.hpp"
#include "cascadec/providers/llm.hpp"
#include "cascadec/task/prompts.hpp"

namespace cascadec {

struct Tool {
    std::string signature; // e.g. "GET_SCHEMA(table_name)"
    std::string description;
    std::function<std::string(const std::string&)> call;
};

/// Named tools plus the reserved SUBMIT action, which ends the loop.
class ToolRegistry {
public:
    static constexpr const char* submit = "SUBMIT";

    ToolRegistry()
    {
        tools_[submit] = Tool {"SUBMIT(answer)", "Submit the final answer and end the interaction.", nullptr};
    }

    void add(const std::string& name, Tool tool)
    {
        if (name == submit)
            throw std::invalid_argument("SUBMIT is reserved");
        if (!tools_.emplace(name, std::move(tool)).second)
            throw std::invalid_argument("duplicate tool '" + name + "'");
    }

    bool contains(const std::string& name) const { return tools_.count(name) != 0; }
    const Tool& at(const std::string& name) const { return tools_.at(name); }

    std::vector<std::string> names() const
    {
        std::vector<std::string> out;
        for (const auto& [n, _] : tools_)
            out.push_back(n);
        return out;
    }

    /// `- SIGNATURE: description` lines.
    std::string profile() const
    {
        std::map<std::string, std::string> lines;
        for (const auto& [_, t] : tools_)
            lines[t.signature] = t.description;
        return render_tools_profile(lines);
    }

private:
    std::map<std::string, Tool> tools_;
};

struct ToolLoopStep {
    std::string thought;
    std::string action_name; // empty when the action line could not be parsed
    std::string action_param;
    std::string observation;
    friend bool operator==(const ToolLoopStep&, const ToolLoopStep&) = default;
};

struct ToolLoopResult {
    ModuleVerdict verdict = ModuleVerdict::fallback();
    std::vector<ToolLoopStep> transcript;
    std::size_t error_observations = 0;
};

struct ParsedAction {
    std::string thought;
    std::optional<std::pair<std::string, std::string>> action;
};

/// Reads "Thought: ..." and "Action: NAME(param)" from a response. A quoted
/// parameter is unquoted; anything else is kept verbatim.
inline ParsedAction parse_tool_response(const std::string& response)
{
    static const std::regex thought_re(R"(Thought:\s*([^\n]*))");
    static const std::regex action_re(R"(Action:\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$)");
    ParsedAction out;
    std::smatch m;
    if (std::regex_search(response, m, thought_re))
        out.thought = trim(m[1].str());
    std::istringstream lines(response);
    for (std::string line; std::getline(lines, line);) {
        line = trim(line);
        if (std::regex_search(line, m, action_re) && m.position(0) == 0) {
            auto param = trim(m[2].str());
            if (param.size() >= 2 && (param.front() == '\'' || param.front() == '"') && param.back() == param.front())
                param = param.substr(1, param.size() - 2);
            out.action = std::make_pair(m[1].str(), param);
            break;
        }
    }
    return out;
}

inline std::string render_tool_loop_prompt(const TaskSpec& spec, const std::string& task_profile,
    const ToolRegistry& registry, const Record& record, const std::string& interaction_examples,
    const std::vector<ToolLoopStep>& transcript)
{
    auto out = fill_template(templates::tool_loop,
        {{"task_profile", task_profile}, {"tools_profile", registry.profile()},
            {"interaction_examples", interaction_examples}, {"instance", render_field_lines(spec, record)}});
    for (const auto& s : transcript) {
        out += "\nThought: " + s.thought;
        out += "\nAction: " + (s.action_name.empty() ? std::string("(unparsed)") : s.action_name + "(" + s.action_param + ")");
        out += "\nObservation: " + s.observation;
    }
    return out;
}

/// Thought/action/observation loop. Unknown or unparseable actions get an
/// error observation and still use up a step.
inline ToolLoopResult tool_loop_execute(const Record& record, const TaskSpec& spec, const ToolRegistry& registry,
    LlmProvider& provider, std::size_t max_steps, const std::string& interaction_examples = {})
{
    if (max_steps == 0)
        throw std::invalid_argument("max_steps must be >= 1");
    for (const auto& t : spec.tools)
        if (!registry.contains(t))
            throw Error(Errc::missing_field, "tool '" + t + "' is not registered");
    auto profile = render_task_profile(spec, {});
    ToolLoopResult res;
    while (res.transcript.size() < max_steps) {
        auto prompt = render_tool_loop_prompt(spec, profile, registry, record, interaction_examples, res.transcript);
        auto reply = provider.complete(prompt).response;
        auto parsed = parse_tool_response(reply);
        ToolLoopStep step;
        step.thought = parsed.thought;
        if (!parsed.action) {
            step.observation = "Error: could not parse an action. Reply with `Action: NAME(parameter)`.";
            ++res.error_observations;
        } else {
            step.action_name = parsed.action->first;
            step.action_param = parsed.action->second;
            if (step.action_name == ToolRegistry::submit) {
                res.transcript.push_back(step);
                auto value = coerce_output(spec.output, step.action_param);
                res.verdict = value ? ModuleVerdict::answered(*value, 1.0) : ModuleVerdict::fallback();
                return res;
            }
            if (!registry.contains(step.action_name)) {
                step.observation = "Error: unknown action '" + step.action_name + "'. Available: ";
                auto names = registry.names();
                for (std::size_t i = 0; i < names.size(); ++i)
                    step.observation += (i ? ", " : "") + names[i];
                step.observation += ".";
                ++res.error_observations;
            } else {
                step.observation = registry.at(step.action_name).call(step.action_param);
            }
        }
        res.transcript.push_back(std::move(step));
    }
    return res;
}

} // namespace cascadec
