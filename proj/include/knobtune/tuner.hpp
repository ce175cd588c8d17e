#pragma once

// The online tuning loop: diagnose -> select knobs -> retrieve hypotheses and
// rules -> advise -> apply -> observe -> update statistics -> periodically
// re-mine rules from the accumulated history.
//
// A session talks to the system through the SystemAdapter boundary:
// apply(configuration) -> (performance, context snapshot). The simulator
// implements it natively; an external-process adapter shells out to a user
// command exchanging the same JSON documents on stdin/stdout.

#include <cstdio>
#include <functional>
#include <random>
#include <unistd.h>

#include "knobtune/diagnosis.hpp"
#include "knobtune/hypothesis.hpp"
#include "knobtune/json_io.hpp"
#include "knobtune/mining.hpp"
#include "knobtune/rulebook.hpp"
#include "knobtune/simulator.hpp"

namespace knobtune {

struct ApplyOutcome {
    bool ok = false;
    std::string error;
    double performance = 0.0;
    ContextSnapshot context;
};

class SystemAdapter {
public:
    virtual ~SystemAdapter() = default;
    virtual ApplyOutcome apply(const std::map<std::string, KnobValue>& configuration) = 0;
    virtual const std::map<std::string, KnobSpec>& knob_specs() const = 0;
    virtual Performance performance_template() const = 0;
};

/// In-process adapter over a scenario; noise drawn from an owned generator
/// seeded by scenario.noise_seed mixed with the session seed.
class SimulatorAdapter : public SystemAdapter {
public:
    SimulatorAdapter(Scenario scenario, std::uint64_t session_seed)
        : scenario_(std::move(scenario)),
          specs_(scenario_.spec_map()),
          rng_(scenario_.noise_seed ^ (session_seed * 0x9e3779b97f4a7c15ull)) {}

    ApplyOutcome apply(const std::map<std::string, KnobValue>& configuration) override {
        ApplyOutcome out;
        try {
            EvalResult r = evaluate(scenario_, configuration, &rng_);
            out.ok = true;
            out.performance = r.performance;
            out.context = std::move(r.context);
        } catch (const std::exception& e) {
            out.error = e.what();
        }
        return out;
    }

    const std::map<std::string, KnobSpec>& knob_specs() const override { return specs_; }

    Performance performance_template() const override {
        return Performance{"throughput", 0.0, MetricDirection::HigherBetter};
    }

    const Scenario& scenario() const { return scenario_; }

private:
    Scenario scenario_;
    std::map<std::string, KnobSpec> specs_;
    std::mt19937_64 rng_;
};

/// Shells out once per evaluation: the configuration JSON goes to the
/// command's stdin, the reply {"performance": {...}, "context": {...}} is
/// read from its stdout.
class CommandAdapter : public SystemAdapter {
public:
    CommandAdapter(std::string command, std::map<std::string, KnobSpec> specs,
                   Performance performance_template)
        : command_(std::move(command)),
          specs_(std::move(specs)),
          template_(std::move(performance_template)) {}

    ApplyOutcome apply(const std::map<std::string, KnobValue>& configuration) override {
        ApplyOutcome out;
        json cfg = json::object();
        for (const auto& [k, v] : configuration) cfg[k] = to_json(v);
        std::string request = json{{"configuration", cfg}}.dump();

        std::string reply;
        int status = run_command(request, reply);
        if (status != 0) {
            out.error = "adapter command exited with status " + std::to_string(status);
            return out;
        }
        try {
            json j = json::parse(reply);
            out.performance = j.at("performance").at("value").get<double>();
            out.context = context_from_json(j.at("context"));
            out.ok = true;
        } catch (const std::exception& e) {
            out.error = std::string("malformed adapter reply: ") + e.what();
        }
        return out;
    }

    const std::map<std::string, KnobSpec>& knob_specs() const override { return specs_; }
    Performance performance_template() const override { return template_; }

private:
    int run_command(const std::string& request, std::string& reply) const {
        // Request passes through a temp file so the command sees it on stdin.
        std::string tmp = "/tmp/knobtune_adapter_" + std::to_string(::getpid()) + ".json";
        {
            std::ofstream o(tmp, std::ios::trunc);
            o << request;
        }
        std::string full = command_ + " < " + tmp;
        FILE* pipe = ::popen(full.c_str(), "r");
        if (!pipe) return -1;
        char buf[4096];
        std::size_t n;
        while ((n = ::fread(buf, 1, sizeof(buf), pipe)) > 0) reply.append(buf, n);
        int status = ::pclose(pipe);
        std::remove(tmp.c_str());
        return status;
    }

    std::string command_;
    std::map<std::string, KnobSpec> specs_;
    Performance template_;
};

// ---------------------------------------------------------------------------
// Session

struct SessionOptions {
    int budget = 20;
    int remine_period = 5;
    std::uint64_t seed = 0;
    double ei_floor = 0.02;          // exploit when the top rule's EI exceeds this
    double diff_threshold = 0.03;    // differential-profiling flag threshold
    std::size_t rule_k = 5;          // retrieval depth
    MiningOptions mining;
    AdvisorPolicy policy;
    std::string workload_summary;
    // Remote advisor; empty URL means stub only.
    std::string advisor_url;
    int advisor_timeout_ms = 30000;
};

struct DecisionTrace {
    int iteration = 0;
    bool failed = false;
    std::string error;
    std::vector<FlaggedFunction> flagged;
    std::vector<std::string> selected_knobs;
    std::vector<std::pair<std::string, double>> matched_rules;  // id, EI at match time
    std::string policy;
    std::string rule_id;
    std::map<std::string, KnobValue> delta;
    std::vector<std::string> warnings;
    double performance = 0.0;
    bool improved = false;
    double improvement = 0.0;  // vs previous iteration, direction-aware
    bool remined = false;
    std::vector<TuningRule> merged_rules;  // new rules added by this step's re-mining
};

struct SessionReport {
    std::map<std::string, KnobValue> best_configuration;
    double best_performance = 0.0;
    double default_performance = 0.0;
    double cumulative_improvement = 0.0;  // sum of signed relative deltas vs default
    int bad_configuration_count = 0;      // observations worse than the default
    int failed_iterations = 0;
    int iterations = 0;
    int remine_invocations = 0;
};

struct SessionResult {
    std::vector<ObservationRecord> history;  // iteration 0 = defaults
    std::vector<DecisionTrace> traces;       // one per tune step
    SessionReport report;
    Rulebook rulebook;
};

/// Remote advice hook: given the request body, produce the raw reply JSON or
/// nullopt on transport failure. Kept as a function so tests and the CLI can
/// supply an HTTP client without the session knowing about sockets.
using RemoteTransport = std::function<std::optional<json>(const json& request_body)>;

class TuningSession {
public:
    TuningSession(SystemAdapter& adapter, FunctionKnobMap map, Rulebook rulebook,
                  HypothesisStore hypotheses, SessionOptions options,
                  RemoteTransport remote = nullptr)
        : adapter_(adapter),
          map_(std::move(map)),
          rulebook_(std::move(rulebook)),
          hypotheses_(std::move(hypotheses)),
          options_(std::move(options)),
          remote_(std::move(remote)) {}

    /// Measures the knob-spec defaults as iteration 0; must run before step().
    void bootstrap() {
        current_config_.clear();
        for (const auto& [name, spec] : adapter_.knob_specs())
            current_config_.emplace(name, spec.default_value);
        ApplyOutcome out = adapter_.apply(current_config_);
        if (!out.ok) throw DomainError("default configuration evaluation failed: " + out.error);
        append_observation(out);
        report_.default_performance = out.performance;
        report_.best_performance = out.performance;
        report_.best_configuration = current_config_;
    }

    DecisionTrace step() {
        if (history_.empty()) throw DomainError("step() before bootstrap()");
        DecisionTrace trace;
        trace.iteration = ++iteration_;

        const ObservationRecord& last = history_.back();
        const ContextSnapshot& context = last.context;

        // Diagnosis: differential against the default-config baseline.
        if (history_.size() >= 2) {
            for (const auto& d :
                 differential_profile(history_.front().context, context, options_.diff_threshold))
                trace.flagged.push_back({d.function, std::abs(d.delta)});
        }

        auto matched = match_rules(rulebook_, context);
        auto ranked = rank_and_take(matched, options_.rule_k);
        for (const TuningRule* r : matched)
            trace.matched_rules.push_back({r->id, expected_improvement(*r)});

        trace.selected_knobs = select_knobs(trace.flagged, map_, rulebook_, context);

        std::set<std::string> knob_set(trace.selected_knobs.begin(), trace.selected_knobs.end());
        for (const TuningRule* r : ranked)
            for (const auto& adj : r->consequent) knob_set.insert(adj.knob);
        std::set<std::string> flagged_names;
        for (const auto& f : trace.flagged) flagged_names.insert(f.function);
        auto hyps = retrieve_hypotheses(hypotheses_, knob_set, flagged_names);

        // Exploit/explore arbitration: rules go to the advisor only when the
        // top EI clears the exploration floor.
        bool exploit = !ranked.empty() && expected_improvement(*ranked.front()) > options_.ei_floor;

        AdviceInputs inputs;
        inputs.specs = &adapter_.knob_specs();
        inputs.current = &current_config_;
        inputs.context = &context;
        if (exploit) inputs.rules = ranked;
        inputs.hypotheses = hyps;
        inputs.selected_knobs = trace.selected_knobs;
        inputs.exploration = &exploration_;

        PromptInputs prompt_inputs{context.hardware, options_.workload_summary, trace.flagged,
                                   trace.selected_knobs};
        std::string prompt = build_prompt(prompt_inputs, hyps, ranked);

        ConfigDelta delta = advise(prompt, inputs);
        trace.policy = delta.policy;
        trace.rule_id = delta.rule_id;
        trace.delta = delta.changes;
        trace.warnings = delta.warnings;

        std::map<std::string, KnobValue> next_config = current_config_;
        for (const auto& [k, v] : delta.changes) next_config[k] = v;

        ApplyOutcome out = adapter_.apply(next_config);
        std::string invalid;
        if (out.ok) {
            // a reply that violates the observation invariants is an
            // evaluation failure, not a session abort
            ObservationRecord probe = make_observation(next_config, out);
            auto errs = validate_observation(probe, adapter_.knob_specs());
            if (!errs.empty()) invalid = errs.front().path + ": " + errs.front().message;
        }
        if (!out.ok || !invalid.empty()) {
            trace.failed = true;
            trace.error = out.ok ? "invalid adapter observation: " + invalid : out.error;
            report_.failed_iterations++;
            report_.iterations++;
            traces_.push_back(trace);
            return traces_.back();
        }

        double prev_perf = last.performance.value;
        const MetricDirection dir = adapter_.performance_template().direction;
        trace.performance = out.performance;
        trace.improved = is_better(out.performance, prev_perf, dir);
        trace.improvement =
            trace.improved ? relative_improvement(prev_perf, out.performance, dir) : 0.0;

        auto applied = applied_between(current_config_, next_config, adapter_.knob_specs(),
                                       context.hardware, out.context.hardware);
        std::vector<std::string> relevant_ids;
        for (const TuningRule* r : matched) relevant_ids.push_back(r->id);
        update_rule_stats(rulebook_, relevant_ids, applied, trace.improved, trace.improvement);

        // Exploration step decay per knob/direction.
        for (const auto& [knob, adj] : applied) {
            if (trace.improved)
                exploration_.reset(knob, adj.direction);
            else if (trace.policy == "hypothesis-explore")
                exploration_.halve(knob, adj.direction);
        }

        current_config_ = std::move(next_config);
        append_observation(out);

        if (is_better(out.performance, report_.best_performance, dir)) {
            report_.best_performance = out.performance;
            report_.best_configuration = current_config_;
        }
        if (is_better(report_.default_performance, out.performance, dir))
            report_.bad_configuration_count++;
        report_.cumulative_improvement +=
            relative_improvement(report_.default_performance, out.performance, dir);
        report_.iterations++;

        if (options_.remine_period > 0 && successful_steps_ % options_.remine_period == 0)
            remine(trace);

        traces_.push_back(trace);
        return traces_.back();
    }

    SessionResult run() {
        if (options_.budget < 1) throw DomainError("run(): budget must be >= 1");
        if (history_.empty()) bootstrap();
        for (int i = 0; i < options_.budget; ++i) step();
        SessionResult result;
        result.history = history_;
        result.traces = traces_;
        result.report = report_;
        result.rulebook = rulebook_;
        return result;
    }

    const Rulebook& rulebook() const { return rulebook_; }
    const std::vector<ObservationRecord>& history() const { return history_; }
    const SessionReport& report() const { return report_; }

private:
    ConfigDelta advise(const std::string& prompt, const AdviceInputs& inputs) {
        if (remote_) {
            auto reply = remote_(advisor_request_body(prompt, inputs));
            if (reply) {
                auto parsed = parse_advisor_reply(*reply, inputs);
                if (parsed) return *parsed;
            }
            ConfigDelta fallback = advise_stub(inputs, options_.policy);
            fallback.warnings.push_back("remote advisor unavailable or invalid; used stub policy");
            return fallback;
        }
        return advise_stub(inputs, options_.policy);
    }

    ObservationRecord make_observation(const std::map<std::string, KnobValue>& config,
                                       const ApplyOutcome& out) const {
        ObservationRecord r;
        r.id = "iter-" + std::to_string(history_.size());
        r.context = out.context;
        r.configuration = config;
        r.performance = adapter_.performance_template();
        r.performance.value = out.performance;
        return r;
    }

    void append_observation(const ApplyOutcome& out) {
        ObservationRecord r = make_observation(current_config_, out);
        throw_if_invalid(validate_observation(r, adapter_.knob_specs()), "adapter observation");
        history_.push_back(std::move(r));
        if (history_.size() > 1) ++successful_steps_;
    }

    void remine(DecisionTrace& trace) {
        trace.remined = true;
        report_.remine_invocations++;
        MiningReport mreport;
        auto mined =
            mine_rules(history_, adapter_.knob_specs(), options_.mining, &mreport);
        for (auto& rule : mined) {
            if (rulebook_.find(rule.id)) continue;  // keep existing statistics
            // Fresh rules enter unverified: mining-time confidence retained,
            // maintenance counters start at zero.
            rule.trial_count = 0;
            rule.success_count = 0;
            rule.improvement_sum = 0.0;
            trace.merged_rules.push_back(rule);
            rulebook_.rules.push_back(std::move(rule));
        }
    }

    SystemAdapter& adapter_;
    FunctionKnobMap map_;
    Rulebook rulebook_;
    HypothesisStore hypotheses_;
    SessionOptions options_;
    RemoteTransport remote_;

    std::map<std::string, KnobValue> current_config_;
    std::vector<ObservationRecord> history_;
    std::vector<DecisionTrace> traces_;
    ExplorationState exploration_;
    SessionReport report_;
    int iteration_ = 0;
    int successful_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Trace / report serialization

inline json to_json(const DecisionTrace& t) {
    json flagged = json::array();
    for (const auto& f : t.flagged)
        flagged.push_back(json{{"function", f.function}, {"severity", f.severity}});
    json matched = json::array();
    for (const auto& [id, ei] : t.matched_rules)
        matched.push_back(json{{"id", id}, {"ei", ei}});
    json delta = json::object();
    for (const auto& [k, v] : t.delta) delta[k] = to_json(v);
    json merged = json::array();
    for (const auto& r : t.merged_rules) merged.push_back(to_json(r));
    return json{{"type", "trace"},
                {"iteration", t.iteration},
                {"failed", t.failed},
                {"error", t.error},
                {"flagged", flagged},
                {"selected_knobs", t.selected_knobs},
                {"matched_rules", matched},
                {"policy", t.policy},
                {"rule_id", t.rule_id},
                {"delta", delta},
                {"warnings", t.warnings},
                {"performance", t.performance},
                {"improved", t.improved},
                {"improvement", t.improvement},
                {"remined", t.remined},
                {"merged_rules", merged}};
}

inline json to_json(const SessionReport& r) {
    json best = json::object();
    for (const auto& [k, v] : r.best_configuration) best[k] = to_json(v);
    return json{{"best_configuration", best},
                {"best_performance", r.best_performance},
                {"default_performance", r.default_performance},
                {"cumulative_improvement", r.cumulative_improvement},
                {"bad_configuration_count", r.bad_configuration_count},
                {"failed_iterations", r.failed_iterations},
                {"iterations", r.iterations},
                {"remine_invocations", r.remine_invocations}};
}

/// Line-delimited session log: observations interleaved with decision traces.
inline std::string session_history_lines(const SessionResult& result) {
    std::string out;
    std::size_t obs = 0;
    if (!result.history.empty()) {
        json first = to_json(result.history[obs]);
        first["type"] = "observation";
        out += first.dump() + "\n";
        ++obs;
    }
    for (const auto& t : result.traces) {
        out += to_json(t).dump() + "\n";
        if (!t.failed && obs < result.history.size()) {
            json j = to_json(result.history[obs]);
            j["type"] = "observation";
            out += j.dump() + "\n";
            ++obs;
        }
    }
    return out;
}

}  // namespace knobtune
