// knobtune CLI: map, mine, diagnose, rules, simulate, tune.
//
// Reports go to stdout (or --out, written atomically); structured key=value
// logs go to stderr. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include <iostream>

#include "knobtune/diagnosis.hpp"
#include "knobtune/hypothesis.hpp"
#include "knobtune/json_io.hpp"
#include "knobtune/mapping.hpp"
#include "knobtune/mining.hpp"
#include "knobtune/remote_http.hpp"
#include "knobtune/rulebook.hpp"
#include "knobtune/simulator.hpp"
#include "knobtune/tuner.hpp"

using namespace knobtune;

namespace {

void log_kv(const std::string& level, const std::string& msg) {
    std::cerr << "level=" << level << " msg=\"" << msg << "\"\n";
}

void flatten(const json& j, const std::string& prefix, std::ostream& out) {
    if (j.is_object()) {
        for (const auto& [k, v] : j.items())
            flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    } else if (j.is_array()) {
        if (j.empty()) out << prefix << " = []\n";
        for (std::size_t i = 0; i < j.size(); ++i)
            flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
    } else {
        out << prefix << " = " << j.dump() << "\n";
    }
}

/// Text mode renders the same JSON values the machine mode emits, so both
/// modes carry identical numbers.
void emit_report(const json& report, const std::string& format, const std::string& out_path) {
    std::string body;
    if (format == "json") {
        body = report.dump(2) + "\n";
    } else {
        std::ostringstream ss;
        flatten(report, "", ss);
        body = ss.str();
    }
    if (out_path.empty())
        std::cout << body;
    else
        atomic_write_file(out_path, body);
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t prev = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t cur = row[j];
            row[j] = std::min({row[j] + 1, row[j - 1] + 1,
                               prev + (a[i - 1] == b[j - 1] ? 0 : 1)});
            prev = cur;
        }
    }
    return row[b.size()];
}

std::string suggest_subcommand(const std::string& given) {
    static const std::vector<std::string> known{"map",   "mine",     "diagnose",
                                               "rules", "simulate", "tune"};
    std::string best;
    std::size_t best_distance = 4;  // only suggest close names
    for (const auto& name : known) {
        std::size_t d = edit_distance(given, name);
        if (d < best_distance) {
            best_distance = d;
            best = name;
        }
    }
    return best;
}

std::map<std::string, KnobValue> config_from_json_file(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    const json& cfg = j.contains("configuration") ? j.at("configuration") : j;
    std::map<std::string, KnobValue> out;
    for (const auto& [k, v] : cfg.items()) out[k] = knob_value_from_json(v);
    return out;
}

json config_to_json(const std::map<std::string, KnobValue>& cfg) {
    json j = json::object();
    for (const auto& [k, v] : cfg) j[k] = to_json(v);
    return j;
}

// ---------------------------------------------------------------------------

struct MapArgs {
    std::string graph;
    std::vector<std::string> knobs;
    std::string out;
    std::string format = "text";
};

int run_map(const MapArgs& args) {
    auto graph = load_graph(args.graph);
    auto knobs = args.knobs.empty() ? anchored_knobs(graph) : args.knobs;
    auto result = build_function_knob_map(graph, knobs);
    for (const auto& skipped : result.skipped_knobs)
        log_kv("warn", "knob '" + skipped + "' has no anchor; skipped");
    if (!args.out.empty()) save_function_knob_map(result.map, args.out);

    if (args.format == "json") {
        json report{{"knobs", result.map.by_knob.size()},
                    {"functions", result.map.by_function.size()},
                    {"skipped_knobs", result.skipped_knobs},
                    {"map", to_json(result.map)}};
        emit_report(report, "json", "");
    } else {
        for (const auto& [fn, ks] : result.map.by_function)
            for (const auto& [knob, kind] : ks)
                std::cout << fn << " <- " << knob << " (" << enum_name(kind) << ")\n";
        std::cout << "knobs = " << result.map.by_knob.size()
                  << "\nfunctions = " << result.map.by_function.size() << "\n";
    }
    return 0;
}

struct MineArgs {
    std::string observations;
    std::string specs;
    std::string out;
    std::string format = "text";
    MiningOptions options;
};

int run_mine(const MineArgs& args) {
    auto history = load_observations(args.observations);
    auto specs = load_knob_specs(args.specs);
    MiningReport report;
    auto rules = mine_rules(history, specs, args.options, &report);

    Rulebook book;
    book.rules = rules;
    if (!args.out.empty()) save_rulebook(book, args.out);

    json j{{"observations", report.history_size},
           {"pairs", report.pair_count},
           {"transactions", report.transaction_count},
           {"distinct_items", report.distinct_items},
           {"target_items", report.target_items},
           {"frequent_itemsets", report.frequent_itemsets},
           {"rules", report.rules_kept},
           {"pruning", {{"conditional_trees", report.conditional_trees}}}};
    emit_report(j, args.format, "");
    log_kv("info", "mined " + std::to_string(rules.size()) + " rules");
    return 0;
}

struct DiagnoseArgs {
    std::string profile;
    std::string baseline;
    std::string history;
    std::string map;
    std::string rules;
    double threshold = 0.03;
    std::int64_t memory = 1073741824;
    int cores = 1;
    std::string format = "text";
    std::string out;
};

int run_diagnose(const DiagnoseArgs& args) {
    Hardware hw{args.memory, args.cores};
    auto current = snapshot_from_collapsed_file(args.profile, hw);

    std::vector<FlaggedFunction> flagged;
    json detail = json::object();
    if (!args.baseline.empty()) {
        auto base = snapshot_from_collapsed_file(args.baseline, hw);
        auto deltas = differential_profile(base, current, args.threshold);
        json rows = json::array();
        for (const auto& d : deltas) {
            flagged.push_back({d.function, std::abs(d.delta)});
            rows.push_back(json{{"function", d.function},
                                {"baseline_rate", d.baseline_rate},
                                {"observed_rate", d.observed_rate},
                                {"delta", d.delta}});
        }
        detail["mode"] = "differential";
        detail["deltas"] = rows;
    } else if (!args.history.empty()) {
        auto history = load_observations(args.history);
        auto model = fit_performance_model(history);
        auto attrs = shap_profile(model, current, mean_rates(history));
        json rows = json::array();
        for (const auto& a : attrs) {
            if (a.rank > 0) flagged.push_back({a.function, std::abs(a.shap_value)});
            rows.push_back(json{{"function", a.function},
                                {"shap_value", a.shap_value},
                                {"rank", a.rank}});
        }
        detail["mode"] = "shap";
        detail["attributions"] = rows;
    } else {
        throw DomainError("diagnose needs --baseline (differential) or --history (shap)");
    }

    FunctionKnobMap map;
    if (!args.map.empty()) map = load_function_knob_map(args.map);
    Rulebook book;
    if (!args.rules.empty()) book = load_rulebook(args.rules);
    auto knobs = select_knobs(flagged, map, book, current);

    json flagged_json = json::array();
    for (const auto& f : flagged)
        flagged_json.push_back(json{{"function", f.function}, {"severity", f.severity}});
    json report{{"flagged", flagged_json}, {"selected_knobs", knobs}, {"detail", detail}};
    emit_report(report, args.format, args.out);
    return 0;
}

struct RulesArgs {
    std::string rulebook;
    std::string id;
    std::string out;
    std::string format = "text";
};

int run_rules_list(const RulesArgs& args) {
    auto book = load_rulebook(args.rulebook);
    if (args.format == "json") {
        json rows = json::array();
        for (const auto& r : book.rules)
            rows.push_back(json{{"id", r.id},
                                {"rule", describe_rule(r)},
                                {"coverage", r.coverage},
                                {"confidence", r.confidence() ? json(*r.confidence()) : json()},
                                {"mined_confidence", r.mined_confidence},
                                {"ei", expected_improvement(r)},
                                {"trials", r.trial_count}});
        emit_report(json{{"rules", rows}}, "json", args.out);
        return 0;
    }
    for (const auto& r : book.rules) {
        std::cout << r.id << "  " << describe_rule(r) << "  coverage=" << format_double(r.coverage)
                  << " confidence="
                  << (r.confidence() ? format_double(*r.confidence()) : "unverified")
                  << " ei=" << format_double(expected_improvement(r)) << "\n";
    }
    return 0;
}

int run_rules_show(const RulesArgs& args) {
    auto book = load_rulebook(args.rulebook);
    const TuningRule* rule = book.find(args.id);
    if (!rule) throw DomainError("no rule with id '" + args.id + "'");
    json j = to_json(*rule);
    j["ei"] = expected_improvement(*rule);
    j["rendered"] = describe_rule(*rule);
    emit_report(j, args.format == "text" ? "json" : args.format, args.out);
    return 0;
}

int run_rules_export(const RulesArgs& args) {
    auto book = load_rulebook(args.rulebook);
    emit_report(to_json(book), args.format == "text" ? "json" : args.format, args.out);
    return 0;
}

struct SimulateArgs {
    std::string scenario;
    std::string config;
    std::uint64_t seed = 0;
    bool noiseless = false;
    bool adapter_io = false;
    std::string format = "text";
    std::string out;
};

int run_simulate(const SimulateArgs& args) {
    auto scenario = load_scenario(args.scenario);

    if (args.adapter_io) {
        // system-adapter mode: configuration JSON on stdin, reply on stdout
        json req = json::parse(std::cin);
        std::map<std::string, KnobValue> cfg;
        for (const auto& [k, v] : req.at("configuration").items())
            cfg[k] = knob_value_from_json(v);
        std::mt19937_64 rng(scenario.noise_seed ^ (args.seed * 0x9e3779b97f4a7c15ull));
        auto result = evaluate(scenario, cfg, args.noiseless ? nullptr : &rng);
        json reply{{"performance",
                    {{"metric_name", "throughput"},
                     {"value", result.performance},
                     {"direction", "higher-better"}}},
                   {"context", to_json(result.context)}};
        std::cout << reply.dump() << "\n";
        return 0;
    }

    auto cfg =
        args.config.empty() ? scenario.default_configuration() : config_from_json_file(args.config);
    std::mt19937_64 rng(scenario.noise_seed ^ (args.seed * 0x9e3779b97f4a7c15ull));
    auto result = evaluate(scenario, cfg, args.noiseless ? nullptr : &rng);
    json rates = json::object();
    for (const auto& [fn, r] : result.context.function_rates) rates[fn] = r;
    json report{{"scenario", scenario.name},
                {"configuration", config_to_json(cfg)},
                {"performance", result.performance},
                {"function_rates", rates}};
    emit_report(report, args.format, args.out);
    return 0;
}

struct TuneArgs {
    std::string scenario;
    std::string adapter_cmd;
    std::string specs;
    std::string map;
    std::string rules;
    std::string hypotheses;
    std::string advisor = "stub";
    std::string advisor_url;
    std::string out_history;
    std::string out_rules;
    std::string out;
    std::string format = "text";
    SessionOptions options;
};

int run_tune(const TuneArgs& args) {
    if (args.scenario.empty() && args.adapter_cmd.empty())
        throw DomainError("tune needs a system to drive: --scenario or --adapter-cmd");
    std::unique_ptr<SystemAdapter> adapter;
    FunctionKnobMap map;
    if (!args.scenario.empty()) {
        auto scenario = load_scenario(args.scenario);
        map = scenario_function_knob_map(scenario);
        adapter = std::make_unique<SimulatorAdapter>(scenario, args.options.seed);
    } else {
        if (args.specs.empty())
            throw DomainError("--adapter-cmd requires --specs with the knob definitions");
        auto specs = load_knob_specs(args.specs);
        adapter = std::make_unique<CommandAdapter>(
            args.adapter_cmd, specs,
            Performance{"throughput", 0.0, MetricDirection::HigherBetter});
    }
    if (!args.map.empty()) map = load_function_knob_map(args.map);

    Rulebook book;
    if (!args.rules.empty()) book = load_rulebook(args.rules);
    HypothesisStore hypotheses;
    if (!args.hypotheses.empty()) hypotheses = load_hypothesis_store(args.hypotheses);

    RemoteTransport remote;
    if (args.advisor == "remote") {
        std::string url = args.advisor_url;
        if (url.empty()) {
            const char* env = std::getenv("KNOBTUNE_ADVISOR_URL");
            if (env) url = env;
        }
        if (url.empty())
            throw DomainError("--advisor remote needs --advisor-url or KNOBTUNE_ADVISOR_URL");
        remote = make_http_transport(url, args.options.advisor_timeout_ms);
    } else if (args.advisor != "stub") {
        throw DomainError("unknown advisor '" + args.advisor + "' (expected stub or remote)");
    }

    TuningSession session(*adapter, map, book, hypotheses, args.options, remote);
    auto result = session.run();

    if (!args.out_history.empty()) atomic_write_file(args.out_history, session_history_lines(result));
    if (!args.out_rules.empty()) save_rulebook(result.rulebook, args.out_rules);

    json report = to_json(result.report);
    report["rules_in_book"] = result.rulebook.rules.size();
    emit_report(report, args.format, args.out);
    log_kv("info", "session finished: best=" + format_double(result.report.best_performance) +
                       " bad=" + std::to_string(result.report.bad_configuration_count));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knobtune: rule-mining configuration tuner with profile-driven diagnosis"};
    app.require_subcommand(1);

    MapArgs map_args;
    auto* map_cmd = app.add_subcommand("map", "Build a function-knob map from a dependency graph");
    map_cmd->add_option("--graph", map_args.graph, "Dependency graph JSON")
        ->required()
        ->check(CLI::ExistingFile);
    map_cmd->add_option("--knobs", map_args.knobs, "Knobs to map (default: all anchored)");
    map_cmd->add_option("--out", map_args.out, "Write the map document here");
    map_cmd->add_option("--format", map_args.format, "Report format: text|json")
        ->check(CLI::IsMember({"text", "json"}));

    MineArgs mine_args;
    auto* mine_cmd = app.add_subcommand("mine", "Mine tuning rules from an observation history");
    mine_cmd->add_option("--observations", mine_args.observations, "Observation JSONL file")
        ->required()
        ->check(CLI::ExistingFile);
    mine_cmd->add_option("--specs", mine_args.specs, "Knob specs document")
        ->required()
        ->check(CLI::ExistingFile);
    mine_cmd->add_option("--out", mine_args.out, "Write the mined rulebook here")->required();
    mine_cmd->add_option("--min-coverage", mine_args.options.min_coverage, "Itemset support floor");
    mine_cmd->add_option("--min-confidence", mine_args.options.min_confidence,
                         "Rule confidence floor");
    mine_cmd->add_option("--min-improvement", mine_args.options.min_improvement,
                         "Pair retention threshold");
    mine_cmd->add_option("--max-intervals", mine_args.options.max_intervals,
                         "Discretization intervals per feature");
    mine_cmd->add_option("--min-support", mine_args.options.min_support,
                         "Samples per discretization interval");
    mine_cmd->add_option("--max-rule-items", mine_args.options.max_rule_items,
                         "Itemset size cap (0 = unbounded)");
    mine_cmd->add_option("--format", mine_args.format, "Report format: text|json")
        ->check(CLI::IsMember({"text", "json"}));

    DiagnoseArgs diag_args;
    auto* diag_cmd =
        app.add_subcommand("diagnose", "Flag bottleneck functions and select knobs");
    diag_cmd->add_option("--profile", diag_args.profile, "Collapsed-stack profile of the current state")
        ->required()
        ->check(CLI::ExistingFile);
    diag_cmd->add_option("--baseline", diag_args.baseline,
                         "Collapsed-stack baseline (differential mode)")
        ->check(CLI::ExistingFile);
    diag_cmd->add_option("--history", diag_args.history, "Observation JSONL (shap mode)")
        ->check(CLI::ExistingFile);
    diag_cmd->add_option("--map", diag_args.map, "Function-knob map document")
        ->check(CLI::ExistingFile);
    diag_cmd->add_option("--rules", diag_args.rules, "Rulebook document")->check(CLI::ExistingFile);
    diag_cmd->add_option("--threshold", diag_args.threshold, "Differential flag threshold");
    diag_cmd->add_option("--total-memory", diag_args.memory, "Hardware memory bytes for the context");
    diag_cmd->add_option("--cores", diag_args.cores, "Hardware cores for the context");
    diag_cmd->add_option("--out", diag_args.out, "Write the report here");
    diag_cmd->add_option("--format", diag_args.format, "Report format: text|json")
        ->check(CLI::IsMember({"text", "json"}));

    RulesArgs rules_args;
    auto* rules_cmd = app.add_subcommand("rules", "Inspect a rulebook");
    rules_cmd->require_subcommand(1);
    auto* rules_list = rules_cmd->add_subcommand("list", "One line per rule");
    auto* rules_show = rules_cmd->add_subcommand("show", "Full record of one rule");
    auto* rules_export = rules_cmd->add_subcommand("export", "Emit the whole rulebook document");
    for (auto* sub : {rules_list, rules_show, rules_export}) {
        sub->add_option("--rulebook", rules_args.rulebook, "Rulebook document")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--format", rules_args.format, "Report format: text|json")
            ->check(CLI::IsMember({"text", "json"}));
        sub->add_option("--out", rules_args.out, "Write the report here");
    }
    rules_show->add_option("--id", rules_args.id, "Rule id")->required();

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Evaluate a configuration on a scenario");
    sim_cmd->add_option("--scenario", sim_args.scenario, "Scenario document")
        ->required()
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--config", sim_args.config, "Configuration JSON (default: knob defaults)")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim_args.seed, "Noise seed mix-in");
    sim_cmd->add_flag("--noiseless", sim_args.noiseless, "Disable measurement noise");
    sim_cmd->add_flag("--adapter-io", sim_args.adapter_io,
                      "Read {\"configuration\":...} from stdin, reply on stdout");
    sim_cmd->add_option("--format", sim_args.format, "Report format: text|json")
        ->check(CLI::IsMember({"text", "json"}));
    sim_cmd->add_option("--out", sim_args.out, "Write the report here");

    TuneArgs tune_args;
    auto* tune_cmd = app.add_subcommand("tune", "Run a rule-augmented tuning session");
    auto* scenario_opt =
        tune_cmd->add_option("--scenario", tune_args.scenario, "Scenario document (simulator)");
    scenario_opt->check(CLI::ExistingFile);
    auto* adapter_opt = tune_cmd->add_option("--adapter-cmd", tune_args.adapter_cmd,
                                             "External adapter shell command");
    scenario_opt->excludes(adapter_opt);
    tune_cmd->add_option("--specs", tune_args.specs, "Knob specs (required with --adapter-cmd)")
        ->check(CLI::ExistingFile);
    tune_cmd->add_option("--map", tune_args.map, "Function-knob map document")
        ->check(CLI::ExistingFile);
    tune_cmd->add_option("--rules", tune_args.rules, "Seed rulebook")->check(CLI::ExistingFile);
    tune_cmd->add_option("--hypotheses", tune_args.hypotheses, "Hypothesis document")
        ->check(CLI::ExistingFile);
    tune_cmd->add_option("--budget", tune_args.options.budget, "Tuning iterations");
    tune_cmd->add_option("--remine-period", tune_args.options.remine_period,
                         "Re-mine every N observations (0 = never)");
    tune_cmd->add_option("--seed", tune_args.options.seed, "Session seed");
    tune_cmd->add_option("--advisor", tune_args.advisor, "Advisor: stub|remote");
    tune_cmd->add_option("--advisor-url", tune_args.advisor_url,
                         "Remote advisor endpoint (or KNOBTUNE_ADVISOR_URL)");
    tune_cmd->add_option("--advisor-timeout-ms", tune_args.options.advisor_timeout_ms,
                         "Remote advisor timeout");
    tune_cmd->add_option("--k", tune_args.options.rule_k, "Rule retrieval depth");
    tune_cmd->add_option("--ei-floor", tune_args.options.ei_floor,
                         "Exploit rules only above this EI");
    tune_cmd->add_option("--diff-threshold", tune_args.options.diff_threshold,
                         "Differential flag threshold");
    tune_cmd->add_option("--min-coverage", tune_args.options.mining.min_coverage,
                         "Re-mining support floor");
    tune_cmd->add_option("--min-confidence", tune_args.options.mining.min_confidence,
                         "Re-mining confidence floor");
    tune_cmd->add_option("--min-improvement", tune_args.options.mining.min_improvement,
                         "Re-mining pair threshold");
    tune_cmd->add_option("--out-history", tune_args.out_history,
                         "Write line-delimited observations and traces here");
    tune_cmd->add_option("--out-rules", tune_args.out_rules, "Write the final rulebook here");
    tune_cmd->add_option("--out", tune_args.out, "Write the final report here");
    tune_cmd->add_option("--format", tune_args.format, "Report format: text|json")
        ->check(CLI::IsMember({"text", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        if (argc > 1 && argv[1][0] != '-') {
            std::string suggestion = suggest_subcommand(argv[1]);
            bool known = app.get_subcommand_no_throw(argv[1]) != nullptr;
            if (!known && !suggestion.empty())
                std::cerr << "did you mean '" << suggestion << "'?\n";
        }
        return 2;
    }

    try {
        if (map_cmd->parsed()) return run_map(map_args);
        if (mine_cmd->parsed()) return run_mine(mine_args);
        if (diag_cmd->parsed()) return run_diagnose(diag_args);
        if (rules_cmd->parsed()) {
            if (rules_list->parsed()) return run_rules_list(rules_args);
            if (rules_show->parsed()) return run_rules_show(rules_args);
            return run_rules_export(rules_args);
        }
        if (sim_cmd->parsed()) return run_simulate(sim_args);
        if (tune_cmd->parsed()) return run_tune(tune_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
