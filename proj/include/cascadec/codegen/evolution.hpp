// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cascadec/cache/cache_store.hpp"
#include "cascadec/codegen/snippet.hpp"
#include "cascadec/core/hash.hpp"
#include "cascadec/modules/config.hpp"
#include "cascadec/providers/llm.hpp"
#include "cascadec/task/prompts.hpp"

namespace cascadec {

struct CodegenSettings {
    std::size_t advices_per_subset = 1;
    std::size_t max_single_errors = 8; // single-error subsets offered per snippet
    double costly_abstain_limit = 0.95;
    std::chrono::milliseconds timeout = default_run_timeout;
    std::size_t few_shot_k = 3;
};

struct GenerationLog {
    std::size_t children = 0;
    std::vector<std::string> survivors;
    std::size_t provider_calls = 0;
};

struct EnsembleState {
    std::size_t generation = 0; // completed branch/filter rounds
    std::vector<Snippet> population;
    std::vector<Snippet> ensemble; // top-m of the population
    int m = 1;
    int M = 1;
    int T = 0;
    std::map<std::string, SnippetScorecard> scorecards;
    std::vector<GenerationLog> history;
    std::size_t provider_calls = 0;
};

/// Snippet generation, branching and filtering against a validation set.
/// Provider traffic goes through the store's exact-prompt cache when a store
/// is given, so rebuilding the same ensemble is free.
class CodeEvolver {
public:
    static constexpr std::array<std::string_view, 4> tool_hints {
        templates::default_tools_profile,
        "- regular expressions: Prefer pattern matching over the input text with regular expressions.",
        "- string similarity: Compare attribute values with token overlap or edit distance.",
        "- keyword lists: Map distinctive keywords in the input to outputs.",
    };

    CodeEvolver(const TaskSpec& spec, LlmProvider& provider, CacheStore* store = nullptr, CodegenSettings settings = {})
        : spec_(spec), provider_(provider), store_(store), settings_(settings)
    {
        auto k = std::min(settings_.few_shot_k, spec_.examples.size());
        profile_ = render_task_profile(spec_, std::span(spec_.examples.data(), k));
    }

    const CodegenSettings& settings() const noexcept { return settings_; }
    std::size_t provider_calls() const noexcept { return calls_; }

    /// m snippets, each from a distinct (tool hint, phrasing) pair; one advice
    /// and one code request per snippet.
    std::vector<Snippet> generate_initial_snippets(int m)
    {
        if (m < 1)
            throw std::invalid_argument("m must be >= 1");
        std::vector<Snippet> out;
        for (int i = 0; i < m; ++i) {
            auto idx = static_cast<std::size_t>(i);
            std::string tools(tool_hints[idx % tool_hints.size()]);
            auto phrasing = idx / tool_hints.size();
            std::string profile = profile_;
            if (phrasing == 1)
                profile = "In other words, the goal is the following. " + profile_;
            else if (phrasing >= 2)
                profile = profile_ + "\n(Variant #" + std::to_string(phrasing) + " of this request.)";
            auto advice = trim(ask(fill_template(templates::advice, {{"task_profile", profile}, {"tools_profile", tools}})));
            auto code = ask(fill_template(templates::code_generation,
                {{"task_api", spec_.task_api()}, {"task_profile", profile}, {"tools_profile", tools}, {"advice", advice}}));
            out.push_back(make_snippet(extract_code_block(code), {"", advice, ""}));
        }
        return out;
    }

    SnippetScorecard verify(const Snippet& s, std::span<const LabeledRecord> validation) const
    {
        return verify_snippet(s, spec_, validation, settings_.timeout);
    }

    /// One child per (error subset, advice): each single error (up to the cap)
    /// plus the full error set. Failed provider requests drop that child.
    std::vector<Snippet> branch_snippet(const Snippet& s, const SnippetScorecard& card)
    {
        std::vector<Snippet> out;
        if (card.errors.empty())
            return out;
        std::vector<std::vector<const ErrorCase*>> subsets;
        for (std::size_t i = 0; i < card.errors.size() && i < settings_.max_single_errors; ++i)
            subsets.push_back({&card.errors[i]});
        std::vector<const ErrorCase*> all;
        for (const auto& e : card.errors)
            all.push_back(&e);
        subsets.push_back(all);
        for (const auto& subset : subsets) {
            auto info = error_info(subset);
            auto subset_digest = digest(info);
            for (std::size_t a = 0; a < settings_.advices_per_subset; ++a) {
                try {
                    auto prompt = fill_template(templates::fix_advice,
                        {{"task_profile", profile_}, {"task_api", spec_.task_api()}, {"code", s.source}, {"error_info", info}});
                    if (a > 0)
                        prompt += "\nPlease give a different advice from the obvious one (alternative #" + std::to_string(a + 1) + ").";
                    auto advice = trim(ask(prompt));
                    auto code = ask(fill_template(templates::fix_code,
                        {{"task_profile", profile_}, {"task_api", spec_.task_api()}, {"code", s.source}, {"error_info", info},
                            {"advice", advice}}));
                    out.push_back(make_snippet(extract_code_block(code), {s.id, advice, subset_digest}));
                } catch (const Error&) {
                    // provider failure: this branch is dropped
                }
            }
        }
        return out;
    }

    /// Drops costly and dominated snippets, then keeps the M most accurate.
    /// Ties: fewer abstentions, then older.
    static std::vector<Snippet> filter_snippets(std::vector<Snippet> population,
        const std::map<std::string, SnippetScorecard>& cards, std::size_t M, double costly_abstain_limit)
    {
        auto card_of = [&](const Snippet& s) -> const SnippetScorecard& { return cards.at(s.id); };
        std::vector<Snippet> cheap;
        for (auto& s : population) {
            const auto& c = card_of(s);
            auto n = static_cast<double>(c.correct_set.size());
            if (c.timeout_count > 0 || (n > 0 && static_cast<double>(c.abstain_count) / n > costly_abstain_limit))
                continue;
            cheap.push_back(std::move(s));
        }
        auto strict_superset = [](const std::vector<bool>& a, const std::vector<bool>& b) {
            bool bigger = false;
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (b[i] && !a[i])
                    return false;
                bigger = bigger || (a[i] && !b[i]);
            }
            return bigger;
        };
        std::vector<Snippet> kept;
        for (std::size_t i = 0; i < cheap.size(); ++i) {
            bool dominated = false;
            for (std::size_t j = 0; j < cheap.size() && !dominated; ++j)
                dominated = j != i && strict_superset(card_of(cheap[j]).correct_set, card_of(cheap[i]).correct_set);
            if (!dominated)
                kept.push_back(cheap[i]);
        }
        std::sort(kept.begin(), kept.end(), [&](const Snippet& a, const Snippet& b) {
            const auto &ca = card_of(a), &cb = card_of(b);
            if (ca.accuracy != cb.accuracy)
                return ca.accuracy > cb.accuracy;
            if (ca.abstain_count != cb.abstain_count)
                return ca.abstain_count < cb.abstain_count;
            return a.serial < b.serial;
        });
        if (kept.size() > M)
            kept.resize(M);
        return kept;
    }

    /// generate, then up to T rounds of branch + filter; stops early once a
    /// round leaves the population unchanged.
    EnsembleState evolve(std::span<const LabeledRecord> validation, const CodeGenCfg& cfg)
    {
        validate(ModuleConfig {cfg});
        EnsembleState st;
        st.m = cfg.num_branches;
        st.M = cfg.num_preserved;
        st.T = cfg.num_iterations;
        auto calls_before = calls_;
        auto initial = generate_initial_snippets(cfg.num_branches);
        for (const auto& s : initial)
            score(s, validation, st);
        st.population = filter_snippets(initial, st.scorecards, static_cast<std::size_t>(cfg.num_preserved), settings_.costly_abstain_limit);
        for (int t = 0; t < cfg.num_iterations; ++t) {
            GenerationLog log;
            auto round_start = calls_;
            std::vector<Snippet> next = st.population;
            std::set<std::string> sources;
            for (const auto& s : st.population)
                sources.insert(s.source);
            for (const auto& s : st.population) {
                for (auto& child : branch_snippet(s, st.scorecards.at(s.id))) {
                    ++log.children;
                    if (!sources.insert(child.source).second)
                        continue; // identical program already present
                    score(child, validation, st);
                    next.push_back(std::move(child));
                }
            }
            next = filter_snippets(std::move(next), st.scorecards, static_cast<std::size_t>(cfg.num_preserved), settings_.costly_abstain_limit);
            log.provider_calls = calls_ - round_start;
            for (const auto& s : next)
                log.survivors.push_back(s.id);
            st.history.push_back(log);
            bool unchanged = ids(next) == ids(st.population);
            st.population = std::move(next);
            st.generation = static_cast<std::size_t>(t + 1);
            if (unchanged)
                break;
        }
        auto m = std::min(st.population.size(), static_cast<std::size_t>(cfg.num_branches));
        st.ensemble.assign(st.population.begin(), st.population.begin() + static_cast<std::ptrdiff_t>(m));
        st.provider_calls = calls_ - calls_before;
        return st;
    }

    static std::string error_info(const std::vector<const ErrorCase*>& errors)
    {
        std::string out;
        for (std::size_t i = 0; i < errors.size(); ++i) {
            const auto& e = *errors[i];
            if (i)
                out += "\n";
            out += "Case #" + std::to_string(i + 1) + ":\nInputs:\n";
            for (const auto& [k, v] : e.record)
                out += "- " + k + ": " + v.render() + "\n";
            out += "Expected output: " + e.expected.render() + "\n";
            out += "Actual output: " + (e.produced ? e.produced->render() : std::string("None"));
        }
        return out;
    }

private:
    static std::vector<std::string> ids(const std::vector<Snippet>& v)
    {
        std::vector<std::string> out;
        for (const auto& s : v)
            out.push_back(s.id);
        return out;
    }

    void score(const Snippet& s, std::span<const LabeledRecord> validation, EnsembleState& st) const
    {
        st.scorecards.emplace(s.id, verify(s, validation));
    }

    std::string ask(const std::string& prompt)
    {
        if (store_) {
            if (auto hit = store_->lookup_exact(prompt))
                return hit->exchange.response;
        }
        auto ex = provider_.complete(prompt);
        ++calls_;
        if (store_)
            store_->put_exchange(prompt, std::nullopt, ex);
        return ex.response;
    }

    Snippet make_snippet(std::string source, Lineage lineage)
    {
        Snippet s;
        s.serial = ++serial_;
        s.id = "snippet-" + std::to_string(s.serial);
        s.program = compile_program(source, &s.quarantined);
        s.source = std::move(source);
        s.lineage = std::move(lineage);
        return s;
    }

    TaskSpec spec_;
    LlmProvider& provider_;
    CacheStore* store_;
    CodegenSettings settings_;
    std::string profile_;
    std::uint64_t serial_ = 0;
    std::size_t calls_ = 0;
};

} // namespace cascadec
