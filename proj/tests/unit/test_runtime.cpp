// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "cascadec/providers/simulated.hpp"
#include "cascadec/runtime/dataset_io.hpp"
#include "cascadec/runtime/metrics.hpp"
#include "cascadec/runtime/plan_file.hpp"
#include "cascadec/runtime/session.hpp"
#include "cascadec/runtime/validation_evaluator.hpp"
#include "cascadec/task/config.hpp"

#include "../support/paths.hpp"

using namespace cascadec;
using testsupport::fixture;

namespace {

std::shared_ptr<const Embedder> hashing() { return std::make_shared<const HashEmbedder>(); }

TaskSpec er_spec() { return load_config(fixture("tasks/entity_resolution.json")); }

template <typename F>
Errc code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return Errc::io_error;
}

Record rec(int i) { return {{"entity1", Value::text("left " + std::to_string(i))}, {"entity2", Value::text("right")}}; }

std::unique_ptr<Stage> simulated(ModuleConfig label, const std::string& name, double p, std::size_t calls, LlmProvider* llm,
    std::uint64_t seed = 1)
{
    return std::make_unique<SimulatedStage>(label, name, p, calls, llm, seed, [name](const Record&) { return Value::text(name); });
}

Plan plan_of(std::vector<ModuleConfig> stages)
{
    Plan p;
    p.stages = std::move(stages);
    return p;
}

} // namespace

// --- compiled pipelines ------------------------------------------------------------

TEST(CompiledPipeline, FirstAnsweringStageWins)
{
    ScriptedLlm llm({}, "x");
    std::vector<std::unique_ptr<Stage>> stages;
    stages.push_back(simulated(CacheReuseCfg {true, 0.4}, "never", 1.0, 0, &llm));
    stages.push_back(simulated(CodeGenCfg {true, 1, 1, 0}, "always", 0.0, 0, &llm));
    stages.push_back(simulated(LlmCfg {}, "llm", 0.0, 1, &llm));
    CompiledPipeline p(plan_of({CacheReuseCfg {true, 0.4}, CodeGenCfg {true, 1, 1, 0}, LlmCfg {}}), std::move(stages), &llm);
    auto r = p.execute_record(rec(0));
    EXPECT_EQ(r.output, Value::text("always"));
    EXPECT_EQ(r.answered_by, 1u);
    ASSERT_EQ(r.trace.size(), 2u);
    EXPECT_TRUE(r.trace[0].is_fallback());
    EXPECT_EQ(llm.call_count(), 0u);
    EXPECT_EQ(p.stats(0).fallbacks, 1u);
    EXPECT_EQ(p.stats(2).reached(), 0u);
}

TEST(CompiledPipeline, AllStagesAbstain)
{
    ScriptedLlm llm({}, "x");
    std::vector<std::unique_ptr<Stage>> stages;
    stages.push_back(simulated(CacheReuseCfg {true, 0.4}, "never", 1.0, 0, &llm));
    CompiledPipeline p(plan_of({CacheReuseCfg {true, 0.4}}), std::move(stages));
    auto r = p.execute_record(rec(0));
    EXPECT_TRUE(r.abstained());
    EXPECT_FALSE(r.answered_by);
}

TEST(CompiledPipeline, ExecutorsMustMatchPlan)
{
    ScriptedLlm llm({}, "x");
    std::vector<std::unique_ptr<Stage>> stages;
    stages.push_back(simulated(CacheReuseCfg {true, 0.4}, "s", 1.0, 0, &llm));
    EXPECT_THROW(CompiledPipeline(plan_of({CacheReuseCfg {true, 0.6}}), std::move(stages)), std::invalid_argument);
}

TEST(CompiledPipeline, StatsConvergeToConfiguredFallback)
{
    ScriptedLlm llm({}, "x");
    std::vector<std::unique_ptr<Stage>> stages;
    stages.push_back(simulated(CacheReuseCfg {true, 0.4}, "a", 0.7, 0, &llm, 3));
    stages.push_back(simulated(ModelGenCfg {true, 0.8}, "b", 0.4, 0, &llm, 4));
    stages.push_back(simulated(LlmCfg {}, "c", 0.0, 2, &llm, 5));
    CompiledPipeline p(plan_of({CacheReuseCfg {true, 0.4}, ModelGenCfg {true, 0.8}, LlmCfg {}}), std::move(stages), &llm);
    std::vector<Record> records;
    for (int i = 0; i < 10000; ++i)
        records.push_back(rec(i));
    auto run = p.execute_dataset(records);
    auto s0 = p.stats(0), s1 = p.stats(1), s2 = p.stats(2);
    EXPECT_EQ(s0.reached(), 10000u);
    auto se = [](double p, std::size_t n) { return std::sqrt(p * (1 - p) / static_cast<double>(n)); };
    EXPECT_NEAR(s0.p_hat(), 0.7, 3 * se(0.7, s0.reached()));
    EXPECT_NEAR(s1.p_hat(), 0.4, 3 * se(0.4, s1.reached()));
    EXPECT_DOUBLE_EQ(s2.c_hat(), 2.0);
    EXPECT_EQ(run.summary.provider_calls, 2 * s2.reached());
    EXPECT_EQ(llm.call_count(), run.summary.provider_calls);
    EXPECT_DOUBLE_EQ(run.summary.llm_ratio, static_cast<double>(s2.reached()) / 10000.0);
    EXPECT_EQ(run.summary.answered, 10000u);
}

TEST(CompiledPipeline, BatchedFallThroughUsesOneCallPerBatch)
{
    auto spec = er_spec();
    CacheStore store(hashing());
    auto llm = ScriptedLlm::load(fixture("scripts/er_llm.json"));
    StageFactory factory(spec, {llm.get()}, store);
    auto p = compile_pipeline(plan_of({CacheReuseCfg {true, 0.2}, LlmCfg {}}), factory);
    std::vector<Record> records;
    for (int i = 0; i < 64; ++i)
        records.push_back({{"entity1", Value::text("item AB-" + std::to_string(1000 + i))},
            {"entity2", Value::text("AB-" + std::to_string(1000 + i) + " thing")}});
    auto run = p->execute_dataset(records, {32, BatchStrategy::random, 1});
    EXPECT_EQ(llm->call_count(), 2u);
    EXPECT_EQ(run.summary.provider_calls, 2u);
    EXPECT_EQ(run.summary.reached_llm, 64u);
    for (const auto& r : run.results)
        EXPECT_EQ(r.output, Value::text("1"));
    // every member was stored under its single-query prompt
    EXPECT_EQ(store.exchange_count(), 64u);
    auto again = p->execute_dataset(records, {32, BatchStrategy::random, 1});
    EXPECT_EQ(llm->call_count(), 2u); // answered by the cache stage now
    EXPECT_EQ(again.summary.reached_llm, 0u);
}

TEST(LlmStage, UnparseableAnswerPassedThroughWithZeroConfidence)
{
    auto spec = er_spec();
    CacheStore store(hashing());
    ScriptedLlm llm({}, "perhaps");
    StageFactory factory(spec, {&llm}, store);
    auto p = compile_pipeline(plan_of({LlmCfg {}}), factory);
    auto r = p->execute_record(rec(1));
    EXPECT_EQ(r.output, Value::text("perhaps"));
    EXPECT_DOUBLE_EQ(r.confidence, 0.0);
}

TEST(StageFactory, MissingProviderAndUntrainableModel)
{
    auto spec = er_spec();
    CacheStore store(hashing());
    StageFactory factory(spec, {}, store);
    EXPECT_EQ(code_of([&] { factory.make(LlmCfg {}); }), Errc::missing_provider);
    EXPECT_EQ(code_of([&] { factory.make(CodeGenCfg {true, 1, 1, 0}); }), Errc::missing_provider);
    EXPECT_EQ(code_of([&] { factory.make(ModelGenCfg {true, 0.5}); }), Errc::untrainable_model);
    ScriptedLlm llm({}, "default : 1");
    StageFactory with_llm(spec, {&llm}, store);
    EXPECT_EQ(code_of([&] { with_llm.make(CodeGenCfg {true, 1, 1, 0}); }), Errc::empty_validation);
    EXPECT_THROW(compile_pipeline(Plan {}, factory), std::invalid_argument);
}

// --- re-optimization trigger and hot swap ----------------------------------------------

TEST(ReoptTrigger, FiresAtThresholdAndResets)
{
    CacheStore store(hashing());
    ReoptTrigger t({150, true}, store.next_seq());
    for (int i = 0; i < 99; ++i)
        store.put_exchange("p" + std::to_string(i), std::nullopt, {"p", "r", 1, 1});
    EXPECT_EQ(t.pending(store), 99u);
    EXPECT_FALSE(t.should_fire(store));
    for (int i = 99; i < 150; ++i)
        store.put_exchange("p" + std::to_string(i), std::nullopt, {"p", "r", 1, 1});
    EXPECT_TRUE(t.should_fire(store));
    t.reset(store);
    EXPECT_EQ(t.pending(store), 0u);
    EXPECT_EQ(t.fired(), 1u);
    ReoptTrigger off({1, false}, 0);
    EXPECT_FALSE(off.should_fire(store));
    EXPECT_THROW(ReoptTrigger({0, true}, 0), std::invalid_argument);
}

TEST(PipelineRunner, SwapKeepsInFlightPipeline)
{
    ScriptedLlm llm({}, "x");
    CacheStore store(hashing());
    auto make = [&](const std::string& name) {
        std::vector<std::unique_ptr<Stage>> stages;
        stages.push_back(simulated(LlmCfg {}, name, 0.0, 1, &llm));
        return std::make_shared<CompiledPipeline>(plan_of({LlmCfg {}}), std::move(stages), &llm);
    };
    int rebuilds = 0;
    PipelineRunner runner(make("old"), store, {3, true}, [&](const CacheStore&) {
        ++rebuilds;
        return make("new");
    });
    auto held = runner.current();
    EXPECT_EQ(runner.execute_record(rec(0)).output, Value::text("old"));
    for (int i = 0; i < 3; ++i)
        store.put_exchange("q" + std::to_string(i), std::nullopt, {"q", "r", 1, 1});
    EXPECT_EQ(runner.execute_record(rec(1)).output, Value::text("old")); // rebuilt after this record
    EXPECT_EQ(rebuilds, 1);
    EXPECT_EQ(runner.execute_record(rec(2)).output, Value::text("new"));
    EXPECT_EQ(held->execute_record(rec(3)).output, Value::text("old"));
    EXPECT_EQ(runner.trigger().fired(), 1u);
}

// --- validation evaluator and sessions ------------------------------------------------

TEST(ValidationEvaluator, ReplaysModuleOutputs)
{
    auto spec = er_spec();
    CacheStore store(hashing());
    auto llm = ScriptedLlm::load(fixture("scripts/er_llm.json"));
    auto ds = read_dataset(fixture("data/er_validation.csv"), spec);
    StageFactory factory(spec, {llm.get()}, store);
    ValidationEvaluator first(factory, ds.labeled());
    auto m1 = first.evaluate({LlmCfg {}});
    auto calls = llm->call_count();
    EXPECT_EQ(calls, ds.records.size());
    ValidationEvaluator second(factory, ds.labeled());
    auto m2 = second.evaluate({LlmCfg {}});
    EXPECT_EQ(llm->call_count(), calls);
    EXPECT_EQ(m1, m2);
    EXPECT_EQ(second.replay_hits(), ds.records.size());
    EXPECT_DOUBLE_EQ(m1.effectiveness, 1.0); // the script knows the matching rule
    EXPECT_DOUBLE_EQ(m1.cost, 1.0);
}

TEST(DefaultGrids, FollowOptions)
{
    auto spec = er_spec();
    auto g = default_grids(spec, false, false);
    EXPECT_EQ(g.count(ModuleKind::codegen), 0u);
    EXPECT_EQ(g.count(ModuleKind::modelgen), 0u);
    EXPECT_EQ(g.at(ModuleKind::llm).size(), spec.options.llm_sample_modes.size());
    EXPECT_EQ(g.at(ModuleKind::cache_reuse).size(), spec.options.cache_thresholds.size());
    auto full = default_grids(spec, true, true);
    EXPECT_EQ(full.at(ModuleKind::codegen).size(), spec.options.codegen_branches.size());
    EXPECT_EQ(full.at(ModuleKind::modelgen).size(), spec.options.modelgen_thresholds.size());
}

TEST(OptimizeTask, EndToEndOnEntityResolution)
{
    auto spec = er_spec();
    CacheStore store(hashing());
    auto llm = ScriptedLlm::load(fixture("scripts/er_llm.json"));
    auto codegen = ScriptedLlm::load(fixture("scripts/er_codegen.json"));
    auto ds = read_dataset(fixture("data/er_validation.csv"), spec);
    auto out = optimize_task(spec, {llm.get(), codegen.get()}, store, ds.labeled());
    EXPECT_FALSE(out.result.frontier.empty());
    EXPECT_LE(out.result.max_plan.metrics.effectiveness - out.result.chosen.metrics.effectiveness, spec.options.gap + 1e-12);
    EXPECT_GT(out.codegen_calls, 0u);
    EXPECT_LE(out.llm_calls, ds.records.size() * spec.options.llm_sample_modes.size());

    // a second search over the same cache and ensembles replays everything
    OptimizeRequest again;
    again.ensembles = out.ensembles;
    again.factory.horizon = out.horizon;
    auto calls = llm->call_count();
    auto second = optimize_task(spec, {llm.get(), codegen.get()}, store, ds.labeled(), again);
    EXPECT_EQ(llm->call_count(), calls);
    EXPECT_EQ(plan_key(second.result.chosen.stages), plan_key(out.result.chosen.stages));
    EXPECT_EQ(code_of([&] {
        OptimizeRequest bad;
        bad.mode = "greedy";
        optimize_task(spec, {llm.get()}, store, ds.labeled(), bad);
    }),
        Errc::invalid_config);
}

// --- metrics ------------------------------------------------------------------------

TEST(Effectiveness, AccuracyCountsAbstentionsWrong)
{
    FieldSpec out {"o", ValueKind::text, {}, ""};
    std::vector<std::optional<Value>> pred {Value::text("a"), std::nullopt, Value::text("c"), Value::text("x")};
    std::vector<Value> gold {Value::text("a"), Value::text("b"), Value::text("c"), Value::text("d")};
    EXPECT_DOUBLE_EQ(effectiveness(pred, gold, MetricKind::accuracy, out), 0.5);
    EXPECT_THROW(effectiveness(std::span<const std::optional<Value>>(), std::span<const Value>(), MetricKind::accuracy, out), Error);
}

TEST(Effectiveness, BinaryF1OnLastLabel)
{
    FieldSpec out {"o", ValueKind::categorical, {"0", "1"}, ""};
    // tp=2, fp=1, fn=1 (one abstained positive) -> F1 = 4/6
    std::vector<std::optional<Value>> pred {Value::text("1"), Value::text("1"), Value::text("1"), std::nullopt, Value::text("0")};
    std::vector<Value> gold {Value::text("1"), Value::text("1"), Value::text("0"), Value::text("1"), Value::text("0")};
    EXPECT_NEAR(effectiveness(pred, gold, MetricKind::f1, out), 4.0 / 6.0, 1e-15);
}

TEST(Effectiveness, SetF1ForListAnswers)
{
    EXPECT_EQ(answer_items("['hr_1-jobs', \"HR_1-employees\"]"), (std::set<std::string> {"hr_1-jobs", "hr_1-employees"}));
    EXPECT_DOUBLE_EQ(set_f1({"a", "b"}, {"a", "b"}), 1.0);
    EXPECT_DOUBLE_EQ(set_f1({"a"}, {"a", "b"}), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(set_f1({"c"}, {"a"}), 0.0);
    FieldSpec out {"o", ValueKind::text, {}, ""};
    std::vector<std::optional<Value>> pred {Value::text("['a']"), std::nullopt};
    std::vector<Value> gold {Value::text("['a', 'b']"), Value::text("['c']")};
    EXPECT_NEAR(effectiveness(pred, gold, MetricKind::f1, out), (2.0 / 3.0) / 2.0, 1e-15);
}

// --- dataset and plan files ----------------------------------------------------------

TEST(DatasetIo, ReadsLabeledCsv)
{
    auto spec = er_spec();
    auto ds = read_dataset(fixture("data/er_validation.csv"), spec);
    EXPECT_EQ(ds.records.size(), 60u);
    EXPECT_TRUE(ds.has_labels);
    EXPECT_EQ(ds.labeled().size(), 60u);
    EXPECT_EQ(ds.records[0].at("entity1"), Value::text("acer pro keyboard HW-8629 ultra"));
    EXPECT_EQ(ds.labels[0], Value::text("0"));
}

TEST(DatasetIo, MissingColumnIsSchemaMismatch)
{
    auto spec = er_spec();
    EXPECT_EQ(code_of([&] { read_dataset(fixture("data/er_missing_column.csv"), spec); }), Errc::schema_mismatch);
}

TEST(DatasetIo, CsvQuotingRoundTrip)
{
    auto rows = parse_csv("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n");
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[1][0], "x, y");
    EXPECT_EQ(rows[1][1], "he said \"hi\"");
    EXPECT_EQ(rows[2][0], "multi\nline");
    for (const std::string s : {"plain", "x, y", "q\"q", "a\nb"})
        EXPECT_EQ(parse_csv(csv_escape(s) + "\n").at(0).at(0), s);
}

TEST(DatasetIo, JsonlRecordsAndResults)
{
    auto spec = er_spec();
    auto dir = testsupport::scratch_dir("jsonl");
    {
        std::ofstream out(dir + "/d.jsonl");
        out << R"({"entity1": "a", "entity2": "b", "is_same": 1})" << "\n\n" << R"({"entity1": "c", "entity2": "d"})" << "\n";
    }
    auto ds = read_dataset(dir + "/d.jsonl", spec);
    ASSERT_EQ(ds.records.size(), 2u);
    EXPECT_EQ(ds.labels[0], Value::text("1"));
    EXPECT_FALSE(ds.labels[1]);
    {
        std::ofstream out(dir + "/bad.jsonl");
        out << R"({"entity1": "a"})" << "\n";
    }
    EXPECT_EQ(code_of([&] { read_dataset(dir + "/bad.jsonl", spec); }), Errc::schema_mismatch);

    RecordResult r;
    r.output = Value::text("1");
    r.confidence = 0.5;
    r.answered_by = 0;
    r.trace = {ModuleVerdict::answered(Value::text("1"), 0.5)};
    write_results(dir + "/out.jsonl", {r, RecordResult {}});
    std::ifstream in(dir + "/out.jsonl");
    std::string l1, l2;
    std::getline(in, l1);
    std::getline(in, l2);
    EXPECT_EQ(nlohmann::json::parse(l1)["answered_by"], 0);
    EXPECT_EQ(nlohmann::json::parse(l2)["abstained"], true);
}

TEST(PlanFile, RoundTripAndValidation)
{
    auto spec = er_spec();
    CacheStore store(hashing());
    auto llm = ScriptedLlm::load(fixture("scripts/er_llm.json"));
    auto codegen = ScriptedLlm::load(fixture("scripts/er_codegen.json"));
    auto ds = read_dataset(fixture("data/er_validation.csv"), spec);
    auto out = optimize_task(spec, {llm.get(), codegen.get()}, store, ds.labeled());
    PlanFile pf {spec, out.result, out.ensembles, 7, out.horizon};
    auto dir = testsupport::scratch_dir("planfile");
    save_plan_file(dir + "/plan.json", pf);
    auto back = load_plan_file(dir + "/plan.json");
    EXPECT_EQ(back.spec, spec);
    EXPECT_EQ(back.result.chosen, out.result.chosen);
    EXPECT_EQ(back.result.frontier, out.result.frontier);
    EXPECT_EQ(back.seed, 7u);
    EXPECT_EQ(back.result.level_cache.signature, out.result.level_cache.signature);
    EXPECT_EQ(plan_file_to_json(back), plan_file_to_json(pf));

    auto j = plan_file_to_json(pf);
    j["format"] = "other/9";
    EXPECT_EQ(code_of([&] { plan_file_from_json(j); }), Errc::schema_mismatch);
    EXPECT_EQ(code_of([&] { load_plan_file(dir + "/absent.json"); }), Errc::schema_mismatch);
    if (out.result.chosen.uses(ModuleKind::codegen)) {
        auto k = plan_file_to_json(pf);
        k["ensembles"] = nlohmann::json::object();
        EXPECT_EQ(code_of([&] { plan_file_from_json(k); }), Errc::schema_mismatch);
    }
}
