// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cascadec/core/error.hpp"
#include "cascadec/core/value.hpp"

namespace cascadec {

using Clock = std::chrono::steady_clock;

enum class RunStatus { answered, abstained, timed_out };

struct RunResult {
    RunStatus status = RunStatus::abstained;
    std::string output; // set when answered

    static RunResult answer(std::string s) { return {RunStatus::answered, std::move(s)}; }
    static RunResult abstain() { return {RunStatus::abstained, {}}; }
    static RunResult timeout() { return {RunStatus::timed_out, {}}; }
};

/// Executable unit behind a code snippet. run() must return by the deadline
/// (checked cooperatively) and never throw for ordinary inputs.
class Program {
public:
    virtual ~Program() = default;
    virtual RunResult run(const Record& record, Clock::time_point deadline) const = 0;
};

/// Always abstains; stands in for code that failed to parse.
class QuarantinedProgram final : public Program {
public:
    RunResult run(const Record&, Clock::time_point) const override { return RunResult::abstain(); }
};

/// Ordered rule list, first match wins, no match abstains.
///
///   # comment
///   title ~ contains "sony" : Sony
///   title ~ regex "(\d+) ?gb" : $1
///   name_l ~ overlap name_r 0.8 : 1
///   name_l ~ same name_r : 1
///   * ~ equals "n/a" : abstain
///   default : 0
///
/// Field `*` tries every field. equals/contains/regex ignore case. Outputs may
/// use $N for regex groups and ${field} for field values; `sleep N` burns N ms
/// (used to exercise timeouts).
class RuleProgram final : public Program {
public:
    enum class Matcher { equals, contains, regex, same, overlap, always };
    enum class Action { emit, abstain, sleep };

    struct Rule {
        std::string field;
        Matcher matcher = Matcher::always;
        std::string literal; // pattern or other field
        double threshold = 0;
        std::optional<std::regex> re;
        Action action = Action::abstain;
        std::string output;
        int sleep_ms = 0;
    };

    static RuleProgram parse(std::string_view source)
    {
        RuleProgram p;
        std::istringstream in {std::string(source)};
        std::size_t line_no = 0;
        for (std::string line; std::getline(in, line);) {
            ++line_no;
            auto t = trim(line);
            if (t.empty() || t[0] == '#' || t.rfind("def ", 0) == 0 || t.rfind("'''", 0) == 0)
                continue;
            try {
                p.rules_.push_back(parse_rule(t));
            } catch (const Error& e) {
                throw Error(Errc::parse_failure, "line " + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (p.rules_.empty())
            throw Error(Errc::parse_failure, "no rules");
        return p;
    }

    const std::vector<Rule>& rules() const noexcept { return rules_; }

    RunResult run(const Record& record, Clock::time_point deadline) const override
    {
        for (const auto& r : rules_) {
            if (Clock::now() >= deadline)
                return RunResult::timeout();
            std::string subject;
            std::smatch m;
            bool matched = false;
            if (r.matcher == Matcher::always) {
                matched = true;
            } else if (r.field == "*") {
                for (const auto& [name, _] : record)
                    if ((matched = match(r, record, name, subject, m)))
                        break;
            } else {
                matched = match(r, record, r.field, subject, m);
            }
            if (!matched)
                continue;
            switch (r.action) {
            case Action::abstain:
                return RunResult::abstain();
            case Action::sleep: {
                auto until = Clock::now() + std::chrono::milliseconds(r.sleep_ms);
                while (Clock::now() < until) {
                    if (Clock::now() >= deadline)
                        return RunResult::timeout();
                    std::this_thread::sleep_for(std::chrono::milliseconds(1));
                }
                continue;
            }
            case Action::emit:
                return RunResult::answer(expand(r.output, record, m));
            }
        }
        return RunResult::abstain();
    }

private:
    static std::string lower(std::string s)
    {
        for (auto& c : s)
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    }

    static std::vector<std::string> token_set(const std::string& s)
    {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s + " ") {
            if (std::isalnum(static_cast<unsigned char>(c))) {
                cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            } else if (!cur.empty()) {
                if (std::find(out.begin(), out.end(), cur) == out.end())
                    out.push_back(cur);
                cur.clear();
            }
        }
        return out;
    }

    static double jaccard(const std::string& a, const std::string& b)
    {
        auto ta = token_set(a), tb = token_set(b);
        if (ta.empty() && tb.empty())
            return 1.0;
        std::size_t inter = 0;
        for (const auto& t : ta)
            inter += std::find(tb.begin(), tb.end(), t) != tb.end() ? 1 : 0;
        return static_cast<double>(inter) / static_cast<double>(ta.size() + tb.size() - inter);
    }

    // `m` keeps iterators into `subject`, which must outlive it.
    static bool match(const Rule& r, const Record& rec, const std::string& field, std::string& subject, std::smatch& m)
    {
        auto it = rec.find(field);
        if (it == rec.end())
            return false;
        subject = it->second.render();
        switch (r.matcher) {
        case Matcher::equals: return lower(trim(subject)) == lower(r.literal);
        case Matcher::contains: return lower(subject).find(lower(r.literal)) != std::string::npos;
        case Matcher::regex: return std::regex_search(subject, m, *r.re);
        case Matcher::same: {
            auto o = rec.find(r.literal);
            return o != rec.end() && lower(trim(subject)) == lower(trim(o->second.render()));
        }
        case Matcher::overlap: {
            auto o = rec.find(r.literal);
            return o != rec.end() && jaccard(subject, o->second.render()) >= r.threshold;
        }
        case Matcher::always: return true;
        }
        return false;
    }

    static std::string expand(const std::string& tpl, const Record& rec, const std::smatch& m)
    {
        std::string out;
        for (std::size_t i = 0; i < tpl.size(); ++i) {
            if (tpl[i] == '$' && i + 1 < tpl.size()) {
                if (std::isdigit(static_cast<unsigned char>(tpl[i + 1]))) {
                    auto g = static_cast<std::size_t>(tpl[i + 1] - '0');
                    if (g < m.size())
                        out += m[g].str();
                    ++i;
                    continue;
                }
                if (tpl[i + 1] == '{') {
                    auto close = tpl.find('}', i + 2);
                    if (close != std::string::npos) {
                        auto it = rec.find(tpl.substr(i + 2, close - i - 2));
                        if (it != rec.end())
                            out += it->second.render();
                        i = close;
                        continue;
                    }
                }
            }
            out += tpl[i];
        }
        return trim(out);
    }

    static std::string read_quoted(std::string_view s, std::size_t& pos)
    {
        if (pos >= s.size() || s[pos] != '"')
            throw Error(Errc::parse_failure, "expected a quoted string");
        std::string out;
        for (++pos; pos < s.size(); ++pos) {
            if (s[pos] == '\\' && pos + 1 < s.size() && (s[pos + 1] == '"' || s[pos + 1] == '\\')) {
                out += s[++pos];
            } else if (s[pos] == '"') {
                ++pos;
                return out;
            } else {
                out += s[pos];
            }
        }
        throw Error(Errc::parse_failure, "unterminated string");
    }

    static std::string read_word(std::string_view s, std::size_t& pos)
    {
        while (pos < s.size() && s[pos] == ' ')
            ++pos;
        auto start = pos;
        while (pos < s.size() && s[pos] != ' ' && s[pos] != ':' && s[pos] != '~')
            ++pos;
        return std::string(s.substr(start, pos - start));
    }

    static void skip_spaces(std::string_view s, std::size_t& pos)
    {
        while (pos < s.size() && s[pos] == ' ')
            ++pos;
    }

    static void parse_output(Rule& r, std::string_view rest)
    {
        auto t = trim(rest);
        if (t == "abstain") {
            r.action = Action::abstain;
        } else if (t.rfind("sleep ", 0) == 0) {
            auto ms = parse_number(std::string_view(t).substr(6));
            if (!ms || *ms < 0)
                throw Error(Errc::parse_failure, "bad sleep duration");
            r.action = Action::sleep;
            r.sleep_ms = static_cast<int>(*ms);
        } else {
            r.action = Action::emit;
            if (!t.empty() && t.front() == '"') {
                std::size_t pos = 0;
                r.output = read_quoted(t, pos);
            } else {
                r.output = t;
            }
            if (trim(r.output).empty())
                throw Error(Errc::parse_failure, "empty output");
        }
    }

    static Rule parse_rule(std::string_view line)
    {
        Rule r;
        std::size_t pos = 0;
        auto head = read_word(line, pos);
        skip_spaces(line, pos);
        if (head == "default") {
            if (pos >= line.size() || line[pos] != ':')
                throw Error(Errc::parse_failure, "expected ':' after default");
            parse_output(r, line.substr(pos + 1));
            return r;
        }
        if (head.empty() || pos >= line.size() || line[pos] != '~')
            throw Error(Errc::parse_failure, "expected 'field ~ matcher'");
        r.field = head;
        ++pos;
        auto matcher = read_word(line, pos);
        skip_spaces(line, pos);
        if (matcher == "equals" || matcher == "contains" || matcher == "regex") {
            r.literal = read_quoted(line, pos);
            r.matcher = matcher == "equals" ? Matcher::equals : matcher == "contains" ? Matcher::contains : Matcher::regex;
            if (r.matcher == Matcher::regex) {
                try {
                    r.re.emplace(r.literal, std::regex::ECMAScript | std::regex::icase);
                } catch (const std::regex_error& e) {
                    throw Error(Errc::parse_failure, std::string("bad regex: ") + e.what());
                }
            }
        } else if (matcher == "same") {
            r.matcher = Matcher::same;
            r.literal = read_word(line, pos);
        } else if (matcher == "overlap") {
            r.matcher = Matcher::overlap;
            r.literal = read_word(line, pos);
            auto th = parse_number(read_word(line, pos));
            if (!th)
                throw Error(Errc::parse_failure, "overlap needs a threshold");
            r.threshold = *th;
        } else {
            throw Error(Errc::parse_failure, "unknown matcher '" + matcher + "'");
        }
        if (r.literal.empty() && r.matcher != Matcher::equals && r.matcher != Matcher::contains)
            throw Error(Errc::parse_failure, "missing matcher argument");
        skip_spaces(line, pos);
        if (pos >= line.size() || line[pos] != ':')
            throw Error(Errc::parse_failure, "expected ':' before output");
        parse_output(r, line.substr(pos + 1));
        return r;
    }

    std::vector<Rule> rules_;
};

/// Pulls the body of the first fenced block out of a code response; the
/// whole text when there is no fence.
inline std::string extract_code_block(std::string_view response)
{
    auto open = response.find("```");
    if (open == std::string_view::npos)
        return trim(response);
    auto body_start = response.find('\n', open);
    if (body_start == std::string_view::npos)
        return {};
    auto close = response.find("```", body_start + 1);
    auto body = response.substr(body_start + 1, close == std::string_view::npos ? std::string_view::npos : close - body_start - 1);
    return trim(body);
}

/// Parses a program, or returns a quarantined one when the source is unusable.
inline std::shared_ptr<const Program> compile_program(std::string_view source, bool* quarantined = nullptr)
{
    try {
        auto p = std::make_shared<RuleProgram>(RuleProgram::parse(source));
        if (quarantined)
            *quarantined = false;
        return p;
    } catch (const Error&) {
        if (quarantined)
            *quarantined = true;
        return std::make_shared<QuarantinedProgram>();
    }
}

} // namespace cascadec
