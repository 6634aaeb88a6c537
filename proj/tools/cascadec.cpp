// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include <CLI11.hpp>

#include "cascadec/cli/commands.hpp"

int main(int argc, char** argv)
{
    using namespace cascadec::cli;
    CLI::App app {"cascadec: optimize and run LLM data-curation cascades"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    double gap = 0;
    std::string mode;
    int reopt = 0;

    auto common = [&](CLI::App* c) {
        c->add_option("--config", o.config, "task configuration (JSON)");
        c->add_option("--plan", o.plan, "plan file");
        c->add_option("--data", o.data, "dataset (CSV with header, or JSONL)");
        c->add_option("--out", o.out, "output path");
        c->add_option("--provider", o.provider, "simulated:<script.json> | http");
        c->add_option("--codegen-provider", o.codegen_provider, "provider for code generation (default: --provider)");
        c->add_option("--cache", o.cache, "cache directory (default: in-memory)");
        c->add_option("--seed", seed, "random seed");
    };
    auto search = [&](CLI::App* c) {
        c->add_option("--gap", gap, "effectiveness gap G");
        c->add_option("--mode", mode, "generic | specialized")->check(CLI::IsMember({"generic", "specialized"}));
        c->add_option("--warmup", o.warmup, "records to answer with the LLM before optimizing");
    };

    auto* optimize = app.add_subcommand("optimize", "search for a plan; writes the plan file and a frontier report");
    common(optimize);
    search(optimize);
    auto* compile = app.add_subcommand("compile", "optimize, then build the pipeline without running it");
    common(compile);
    search(compile);
    auto* run = app.add_subcommand("run", "execute a plan file over a dataset");
    common(run);
    run->add_option("--batch-size", o.batch_size, "instances per LLM call")->check(CLI::PositiveNumber);
    run->add_option("--batch-strategy", o.batch_strategy, "RND | DIV | PRX | SIM | FAR | CLS");
    run->add_option("--reopt-threshold", reopt, "re-optimize after this many new exchanges (needs --validation)");
    run->add_option("--validation", o.validation, "labeled records used when re-optimizing");
    auto* stats = app.add_subcommand("stats", "report what a cache directory holds");
    stats->add_option("--cache", o.cache, "cache directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        auto code = app.exit(e);
        return code == 0 ? 0 : exit_code::config;
    }
    auto* sub = app.get_subcommands().front();
    if (sub->get_option_no_throw("--seed") && sub->count("--seed"))
        o.seed = seed;
    if (sub->get_option_no_throw("--gap") && sub->count("--gap"))
        o.gap = gap;
    if (sub->get_option_no_throw("--mode") && sub->count("--mode"))
        o.mode = mode;
    if (sub->get_option_no_throw("--reopt-threshold") && sub->count("--reopt-threshold"))
        o.reopt_threshold = reopt;

    if (sub == optimize)
        return cmd_optimize(o, std::cout, std::cerr);
    if (sub == compile)
        return cmd_compile(o, std::cout, std::cerr);
    if (sub == run)
        return cmd_run(o, std::cout, std::cerr);
    return cmd_stats(o, std::cout, std::cerr);
}
