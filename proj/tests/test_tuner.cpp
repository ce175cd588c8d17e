// Tuning sessions: the diagnose/select/advise/apply/update loop, re-mining
// cadence, best-so-far tracking, reproducibility, and trace replay.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "knobtune/tuner.hpp"

using namespace knobtune;

namespace {

std::filesystem::path fixture(const std::string& rel) {
    return std::filesystem::path(KNOBTUNE_FIXTURES_DIR) / rel;
}

/// Scripted adapter: performance follows a fixed sequence, the context is a
/// fixed snapshot per call (repeating the last one when the script runs out).
class MockAdapter : public SystemAdapter {
public:
    MockAdapter(std::map<std::string, KnobSpec> specs, std::vector<double> perfs,
                std::vector<ContextSnapshot> contexts)
        : specs_(std::move(specs)), perfs_(std::move(perfs)), contexts_(std::move(contexts)) {}

    ApplyOutcome apply(const std::map<std::string, KnobValue>& configuration) override {
        last_configs.push_back(configuration);
        ApplyOutcome out;
        if (fail_at >= 0 && static_cast<int>(calls_) == fail_at) {
            ++calls_;
            out.error = "injected adapter failure";
            return out;
        }
        out.ok = true;
        out.performance = perfs_[std::min(calls_, perfs_.size() - 1)];
        out.context = contexts_[std::min(calls_, contexts_.size() - 1)];
        ++calls_;
        return out;
    }

    const std::map<std::string, KnobSpec>& knob_specs() const override { return specs_; }
    Performance performance_template() const override {
        return Performance{"throughput", 0.0, MetricDirection::HigherBetter};
    }

    std::vector<std::map<std::string, KnobValue>> last_configs;
    int fail_at = -1;

private:
    std::map<std::string, KnobSpec> specs_;
    std::vector<double> perfs_;
    std::vector<ContextSnapshot> contexts_;
    std::size_t calls_ = 0;
};

std::map<std::string, KnobSpec> spin_specs() {
    KnobSpec s;
    s.name = "spin_wait_delay";
    s.kind = KnobKind::Integer;
    s.min = 0;
    s.max = 100;
    s.default_value = 0.0;
    return {{s.name, s}};
}

ContextSnapshot snapshot(std::map<std::string, double> rates) {
    ContextSnapshot c;
    c.function_rates = std::move(rates);
    c.hardware = {16ll * 1024 * 1024 * 1024, 8};
    return c;
}

Rulebook spin_book() {
    Rulebook book;
    TuningRule r;
    r.id = "seed-spin";
    r.antecedent.push_back(RatePredicate{"sync_array_wait_event", Interval{0.10, 1.0}});
    r.consequent.push_back(KnobAdjustment{"spin_wait_delay", AdjustmentForm::Relative,
                                          Direction::Increase, Interval{0.0, 0.1}});
    r.trial_count = 10;
    r.success_count = 9;
    r.improvement_sum = 1.0;
    book.rules.push_back(r);
    return book;
}

struct CompositeSetup {
    Scenario scenario;
    FunctionKnobMap map;
    Rulebook rulebook;
    HypothesisStore hypotheses;
};

CompositeSetup composite_setup() {
    CompositeSetup s;
    s.scenario = load_scenario(fixture("scenarios/composite.json"));
    s.map = scenario_function_knob_map(s.scenario);
    s.rulebook = load_rulebook(fixture("rulebooks/composite_seed.json"));
    s.hypotheses = load_hypothesis_store(fixture("hypotheses/composite.json"));
    return s;
}

}  // namespace

TEST_CASE("budget 1 appends exactly one observation after the baseline") {
    MockAdapter adapter(spin_specs(), {100, 100, 100}, {snapshot({{"f", 0.5}})});
    SessionOptions opt;
    opt.budget = 1;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, Rulebook{}, HypothesisStore{}, opt);
    auto result = session.run();
    CHECK(result.traces.size() == 1);
    CHECK(result.history.size() == 2);  // iteration-0 baseline + one step
    CHECK(result.history[0].id == "iter-0");
    CHECK(result.history[1].id == "iter-1");
}

TEST_CASE("no flags and no matching rules record a no-op step") {
    MockAdapter adapter(spin_specs(), {100, 101, 99}, {snapshot({{"f", 0.5}})});
    SessionOptions opt;
    opt.budget = 2;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, Rulebook{}, HypothesisStore{}, opt);
    auto result = session.run();
    for (const auto& t : result.traces) {
        CHECK(t.policy == "no-op");
        CHECK(t.delta.empty());
        CHECK(t.flagged.empty());
    }
    // no-op steps still evaluate the unchanged configuration
    CHECK(adapter.last_configs.size() == 3);
    CHECK(adapter.last_configs[0] == adapter.last_configs[1]);
}

TEST_CASE("rule regression decrements confidence on the next step's book") {
    // rate stays above the rule threshold; the scripted performance regresses
    // after the first rule application.
    auto ctx = snapshot({{"sync_array_wait_event", 0.5}});
    MockAdapter adapter(spin_specs(), {100, 80, 70}, {ctx});
    SessionOptions opt;
    opt.budget = 1;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, spin_book(), HypothesisStore{}, opt);
    session.bootstrap();
    auto trace = session.step();
    CHECK(trace.policy == "rule-exploit");
    CHECK(trace.rule_id == "seed-spin");
    CHECK(!trace.improved);
    const TuningRule* rule = session.rulebook().find("seed-spin");
    REQUIRE(rule);
    CHECK(rule->trial_count == 11);    // denominator incremented
    CHECK(rule->success_count == 9);   // numerator untouched
    CHECK(rule->confidence().value() < 0.9);
}

TEST_CASE("rule improvement increments both confidence counters") {
    auto ctx = snapshot({{"sync_array_wait_event", 0.5}});
    MockAdapter adapter(spin_specs(), {100, 130}, {ctx});
    SessionOptions opt;
    opt.budget = 1;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, spin_book(), HypothesisStore{}, opt);
    session.bootstrap();
    auto trace = session.step();
    CHECK(trace.improved);
    CHECK(trace.improvement == doctest::Approx(0.3));
    const TuningRule* rule = session.rulebook().find("seed-spin");
    CHECK(rule->trial_count == 11);
    CHECK(rule->success_count == 10);
    CHECK(rule->improvement_sum == doctest::Approx(1.3));
}

TEST_CASE("adapter failure marks the iteration failed and keeps state") {
    auto ctx = snapshot({{"sync_array_wait_event", 0.5}});
    MockAdapter adapter(spin_specs(), {100, 120, 140}, {ctx});
    adapter.fail_at = 1;  // the first tune step's evaluation fails
    SessionOptions opt;
    opt.budget = 2;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, spin_book(), HypothesisStore{}, opt);
    auto result = session.run();
    REQUIRE(result.traces.size() == 2);
    CHECK(result.traces[0].failed);
    CHECK(!result.traces[0].error.empty());
    CHECK(result.report.failed_iterations == 1);
    CHECK(result.report.iterations == 2);      // failures count against budget
    CHECK(result.history.size() == 2);         // baseline + the one success
    // rulebook untouched by the failed iteration
    CHECK(result.rulebook.find("seed-spin")->trial_count == 11);
}

TEST_CASE("invalid adapter observations fail the iteration, not the session") {
    auto good = snapshot({{"f", 0.4}});
    ContextSnapshot broken = good;
    broken.function_rates["f"] = 1.7;  // invariant violation in the reply
    MockAdapter adapter(spin_specs(), {100, 100, 100}, {good, broken, good});
    SessionOptions opt;
    opt.budget = 2;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, Rulebook{}, HypothesisStore{}, opt);
    auto result = session.run();
    REQUIRE(result.traces.size() == 2);
    CHECK(result.traces[0].failed);
    CHECK(result.traces[0].error.find("sampling rate") != std::string::npos);
    CHECK(!result.traces[1].failed);
    CHECK(result.history.size() == 2);  // baseline + the valid step
}

TEST_CASE("remine cadence: budget 12 with period 5 mines after steps 5 and 10") {
    auto setup = composite_setup();
    SimulatorAdapter adapter(setup.scenario, 3);
    SessionOptions opt;
    opt.budget = 12;
    opt.remine_period = 5;
    opt.seed = 3;
    TuningSession session(adapter, setup.map, setup.rulebook, setup.hypotheses, opt);
    auto result = session.run();
    CHECK(result.report.remine_invocations == 2);
    std::vector<int> remined_at;
    for (const auto& t : result.traces)
        if (t.remined) remined_at.push_back(t.iteration);
    CHECK(remined_at == std::vector<int>{5, 10});
    // merged rules enter unverified: mining-time confidence, zero trials
    for (const auto& t : result.traces)
        for (const auto& r : t.merged_rules) {
            CHECK(r.trial_count == 0);
            CHECK(r.success_count == 0);
            CHECK(r.mined_confidence > 0);
        }
}

TEST_CASE("composite first step exploits the buffer-pool rule") {
    auto setup = composite_setup();
    SimulatorAdapter adapter(setup.scenario, 7);
    SessionOptions opt;
    opt.budget = 1;
    opt.seed = 7;
    TuningSession session(adapter, setup.map, setup.rulebook, setup.hypotheses, opt);
    session.bootstrap();
    auto trace = session.step();
    CHECK(trace.policy == "rule-exploit");
    CHECK(trace.rule_id == "seed-buffer-pool");
    REQUIRE(trace.delta.count("buffer_pool_size"));
    double next = std::get<double>(trace.delta.at("buffer_pool_size"));
    CHECK(next > 2147483648.0);  // rule-guided increase from the default
    CHECK(trace.improved);
}

TEST_CASE("best-so-far performance is monotone across a session") {
    auto setup = composite_setup();
    SimulatorAdapter adapter(setup.scenario, 11);
    SessionOptions opt;
    opt.budget = 10;
    opt.seed = 11;
    TuningSession session(adapter, setup.map, setup.rulebook, setup.hypotheses, opt);
    session.bootstrap();
    double best = session.report().best_performance;
    for (int i = 0; i < opt.budget; ++i) {
        session.step();
        CHECK(session.report().best_performance >= best);
        best = session.report().best_performance;
    }
    // final report never falls below the default
    CHECK(best >= session.report().default_performance);
}

TEST_CASE("sessions are bit-reproducible under a fixed seed and stub advisor") {
    auto setup = composite_setup();
    auto run_once = [&]() {
        SimulatorAdapter adapter(setup.scenario, 21);
        SessionOptions opt;
        opt.budget = 8;
        opt.seed = 21;
        TuningSession session(adapter, setup.map, setup.rulebook, setup.hypotheses, opt);
        return session_history_lines(session.run());
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("rulebook statistics equal a replay of the recorded trace") {
    auto setup = composite_setup();
    SimulatorAdapter adapter(setup.scenario, 5);
    SessionOptions opt;
    opt.budget = 12;
    opt.remine_period = 5;
    opt.seed = 5;
    TuningSession session(adapter, setup.map, setup.rulebook, setup.hypotheses, opt);
    auto result = session.run();

    Rulebook replica = setup.rulebook;
    const auto& specs = adapter.knob_specs();
    std::size_t obs = 0;  // index into history of the observation BEFORE each step
    for (const auto& t : result.traces) {
        if (!t.failed) {
            const auto& from = result.history[obs];
            const auto& to = result.history[obs + 1];
            auto applied = applied_between(from.configuration, to.configuration, specs,
                                           from.context.hardware, to.context.hardware);
            std::vector<std::string> ids;
            for (const auto& [id, _] : t.matched_rules) ids.push_back(id);
            update_rule_stats(replica, ids, applied, t.improved, t.improvement);
            ++obs;
        }
        if (t.remined)
            for (const auto& r : t.merged_rules)
                if (!replica.find(r.id)) replica.rules.push_back(r);
    }
    REQUIRE(replica.rules.size() == result.rulebook.rules.size());
    for (std::size_t i = 0; i < replica.rules.size(); ++i) {
        CHECK(replica.rules[i].id == result.rulebook.rules[i].id);
        CHECK(replica.rules[i].trial_count == result.rulebook.rules[i].trial_count);
        CHECK(replica.rules[i].success_count == result.rulebook.rules[i].success_count);
        CHECK(replica.rules[i].improvement_sum ==
              doctest::Approx(result.rulebook.rules[i].improvement_sum));
    }
    for (const auto& r : result.rulebook.rules) CHECK(r.success_count <= r.trial_count);
}

TEST_CASE("session history lines interleave observations and traces") {
    MockAdapter adapter(spin_specs(), {100, 110}, {snapshot({{"f", 0.3}})});
    SessionOptions opt;
    opt.budget = 1;
    opt.remine_period = 0;
    TuningSession session(adapter, FunctionKnobMap{}, Rulebook{}, HypothesisStore{}, opt);
    auto lines = session_history_lines(session.run());
    std::istringstream in(lines);
    std::string line;
    std::vector<std::string> types;
    while (std::getline(in, line)) types.push_back(json::parse(line).at("type").get<std::string>());
    CHECK(types == std::vector<std::string>{"observation", "trace", "observation"});
}

TEST_CASE("command adapter exchanges JSON over a shell command") {
    auto specs = spin_specs();
    Performance tmpl{"throughput", 0.0, MetricDirection::HigherBetter};

    SUBCASE("well-formed reply") {
        json reply{{"performance", {{"value", 123.5}}},
                   {"context",
                    {{"workload_predicates", json::object()},
                     {"function_rates", {{"f", 0.4}}},
                     {"hardware", {{"total_memory_bytes", 1024}, {"cores", 2}}}}}};
        CommandAdapter adapter("cat > /dev/null; printf '%s' '" + reply.dump() + "'", specs, tmpl);
        auto out = adapter.apply({{"spin_wait_delay", 5.0}});
        REQUIRE(out.ok);
        CHECK(out.performance == doctest::Approx(123.5));
        CHECK(out.context.function_rates.at("f") == doctest::Approx(0.4));
    }
    SUBCASE("nonzero exit is a failed application") {
        CommandAdapter adapter("exit 3", specs, tmpl);
        auto out = adapter.apply({{"spin_wait_delay", 5.0}});
        CHECK(!out.ok);
        CHECK(!out.error.empty());
    }
    SUBCASE("malformed reply is a failed application") {
        CommandAdapter adapter("cat > /dev/null; echo not-json", specs, tmpl);
        auto out = adapter.apply({{"spin_wait_delay", 5.0}});
        CHECK(!out.ok);
    }
}

TEST_CASE("remote transport replies flow through the session with stub fallback") {
    auto ctx = snapshot({{"sync_array_wait_event", 0.5}});

    SUBCASE("valid remote delta is applied") {
        MockAdapter adapter(spin_specs(), {100, 120}, {ctx});
        SessionOptions opt;
        opt.budget = 1;
        opt.remine_period = 0;
        RemoteTransport remote = [](const json&) -> std::optional<json> {
            return json{{"configuration", {{"spin_wait_delay", 42}}}};
        };
        TuningSession session(adapter, FunctionKnobMap{}, spin_book(), HypothesisStore{}, opt,
                              remote);
        session.bootstrap();
        auto trace = session.step();
        CHECK(trace.policy == "remote");
        CHECK(std::get<double>(trace.delta.at("spin_wait_delay")) == 42.0);
    }
    SUBCASE("transport failure falls back to the stub policy") {
        MockAdapter adapter(spin_specs(), {100, 120}, {ctx});
        SessionOptions opt;
        opt.budget = 1;
        opt.remine_period = 0;
        RemoteTransport remote = [](const json&) -> std::optional<json> { return std::nullopt; };
        TuningSession session(adapter, FunctionKnobMap{}, spin_book(), HypothesisStore{}, opt,
                              remote);
        session.bootstrap();
        auto trace = session.step();
        CHECK(trace.policy == "rule-exploit");  // the stub exploited the seed rule
        CHECK(std::get<double>(trace.delta.at("spin_wait_delay")) == doctest::Approx(5.0));
        CHECK(!trace.warnings.empty());
    }
}

TEST_CASE("exploration halves after consecutive non-improving hypothesis steps") {
    // The context shifts after bootstrap so ut_delay gets flagged, the
    // hypothesis keeps firing, and the scripted performance always regresses.
    auto specs = spin_specs();
    auto ctx0 = snapshot({{"ut_delay", 0.1}});
    auto ctx1 = snapshot({{"ut_delay", 0.5}});
    MockAdapter adapter(specs, {100, 90, 85, 80}, {ctx0, ctx1});

    HypothesisStore store;
    Hypothesis h;
    h.knob = "spin_wait_delay";
    h.functions = {"ut_delay"};
    h.triggers = {{"ut_delay", RateSignal::HighRate, Direction::Increase}};
    store.hypotheses.push_back(h);

    FunctionKnobMap map;
    map.by_function["ut_delay"]["spin_wait_delay"] = ControlKind::Implicit;
    map.by_knob["spin_wait_delay"] = {"ut_delay"};

    SessionOptions opt;
    opt.budget = 3;
    opt.remine_period = 0;
    TuningSession session(adapter, map, Rulebook{}, store, opt);
    session.bootstrap();

    auto t1 = session.step();  // baseline context unchanged: nothing flagged yet
    CHECK(t1.policy == "no-op");

    auto t2 = session.step();  // flagged, full quarter-range step: 0 -> 25
    CHECK(t2.policy == "hypothesis-explore");
    REQUIRE(t2.delta.count("spin_wait_delay"));
    CHECK(std::get<double>(t2.delta.at("spin_wait_delay")) == doctest::Approx(25.0));
    CHECK(!t2.improved);

    auto t3 = session.step();  // halved step after the regression: 25 -> 38
    CHECK(t3.policy == "hypothesis-explore");
    REQUIRE(t3.delta.count("spin_wait_delay"));
    CHECK(std::get<double>(t3.delta.at("spin_wait_delay")) == doctest::Approx(38.0));
}
