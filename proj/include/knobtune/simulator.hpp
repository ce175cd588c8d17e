#pragma once

// Knob-controlled synthetic system for verifiable end-to-end experiments.
//
// A scenario declares knob specs, a workload, and per-function cost models as
// expressions over knob values. Evaluating a configuration yields each
// function's time share (normalized to sampling rates) and a performance
// value intensity / total_cost (higher-better) with optional seeded
// multiplicative log-normal noise.
//
// Expression grammar (see fixtures/scenarios/*.json):
//   expr    := term (('+'|'-') term)*
//   term    := unary (('*'|'/') unary)*
//   unary   := '-' unary | primary
//   primary := number | identifier | identifier '(' expr (',' expr)* ')' | '(' expr ')'
// Functions: max, min, log, step (step(x) = 1 if x > 0 else 0).
// Identifiers resolve to knob values plus `intensity`, `total_memory`, `cores`.
// A knob appearing inside a step() argument marks an explicit (conditional)
// control dependency; any other appearance is implicit.

#include <cctype>
#include <memory>
#include <random>

#include "knobtune/json_io.hpp"
#include "knobtune/mapping.hpp"
#include "knobtune/types.hpp"

namespace knobtune {

namespace expr {

struct Node {
    enum class Kind { Number, Identifier, Unary, Binary, Call } kind;
    double number = 0.0;
    std::string name;  // identifier or call name
    char op = 0;       // for Unary/Binary
    std::vector<std::unique_ptr<Node>> args;
};

using NodePtr = std::unique_ptr<Node>;

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src) {}

    NodePtr parse() {
        auto node = expression();
        skip_ws();
        if (pos_ != src_.size())
            throw ParseError("trailing characters at offset " + std::to_string(pos_) + " in '" +
                             src_ + "'");
        return node;
    }

private:
    NodePtr expression() {
        auto left = term();
        while (true) {
            skip_ws();
            if (peek() == '+' || peek() == '-') {
                char op = take();
                auto node = std::make_unique<Node>();
                node->kind = Node::Kind::Binary;
                node->op = op;
                node->args.push_back(std::move(left));
                node->args.push_back(term());
                left = std::move(node);
            } else {
                return left;
            }
        }
    }

    NodePtr term() {
        auto left = unary();
        while (true) {
            skip_ws();
            if (peek() == '*' || peek() == '/') {
                char op = take();
                auto node = std::make_unique<Node>();
                node->kind = Node::Kind::Binary;
                node->op = op;
                node->args.push_back(std::move(left));
                node->args.push_back(unary());
                left = std::move(node);
            } else {
                return left;
            }
        }
    }

    NodePtr unary() {
        skip_ws();
        if (peek() == '-') {
            take();
            auto node = std::make_unique<Node>();
            node->kind = Node::Kind::Unary;
            node->op = '-';
            node->args.push_back(unary());
            return node;
        }
        return primary();
    }

    NodePtr primary() {
        skip_ws();
        char c = peek();
        if (c == '(') {
            take();
            auto node = expression();
            expect(')');
            return node;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string name = identifier();
            skip_ws();
            if (peek() == '(') {
                take();
                auto node = std::make_unique<Node>();
                node->kind = Node::Kind::Call;
                node->name = name;
                node->args.push_back(expression());
                skip_ws();
                while (peek() == ',') {
                    take();
                    node->args.push_back(expression());
                    skip_ws();
                }
                expect(')');
                return node;
            }
            auto node = std::make_unique<Node>();
            node->kind = Node::Kind::Identifier;
            node->name = name;
            return node;
        }
        throw ParseError("unexpected character '" + std::string(1, c) + "' in expression '" +
                         src_ + "'");
    }

    NodePtr number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                src_[pos_] == 'e' || src_[pos_] == 'E' ||
                ((src_[pos_] == '+' || src_[pos_] == '-') && pos_ > start &&
                 (src_[pos_ - 1] == 'e' || src_[pos_ - 1] == 'E'))))
            ++pos_;
        auto node = std::make_unique<Node>();
        node->kind = Node::Kind::Number;
        node->number = std::stod(src_.substr(start, pos_ - start));
        return node;
    }

    std::string identifier() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                      src_[pos_] == '_' || src_[pos_] == '.'))
            ++pos_;
        return src_.substr(start, pos_ - start);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    char peek() const { return pos_ < src_.size() ? src_[pos_] : '\0'; }
    char take() { return src_[pos_++]; }
    void expect(char c) {
        skip_ws();
        if (peek() != c)
            throw ParseError("expected '" + std::string(1, c) + "' in expression '" + src_ + "'");
        take();
    }

    const std::string& src_;
    std::size_t pos_ = 0;
};

inline NodePtr parse(const std::string& src) { return Parser(src).parse(); }

inline double eval(const Node& node, const std::map<std::string, double>& env) {
    switch (node.kind) {
        case Node::Kind::Number:
            return node.number;
        case Node::Kind::Identifier: {
            auto it = env.find(node.name);
            if (it == env.end()) throw DomainError("unknown identifier '" + node.name + "'");
            return it->second;
        }
        case Node::Kind::Unary:
            return -eval(*node.args[0], env);
        case Node::Kind::Binary: {
            double a = eval(*node.args[0], env);
            double b = eval(*node.args[1], env);
            switch (node.op) {
                case '+': return a + b;
                case '-': return a - b;
                case '*': return a * b;
                case '/': return a / b;
            }
            throw DomainError("bad operator");
        }
        case Node::Kind::Call: {
            if (node.name == "max" && node.args.size() == 2)
                return std::max(eval(*node.args[0], env), eval(*node.args[1], env));
            if (node.name == "min" && node.args.size() == 2)
                return std::min(eval(*node.args[0], env), eval(*node.args[1], env));
            if (node.name == "log" && node.args.size() == 1)
                return std::log(eval(*node.args[0], env));
            if (node.name == "step" && node.args.size() == 1)
                return eval(*node.args[0], env) > 0 ? 1.0 : 0.0;
            throw DomainError("unknown function '" + node.name + "' or wrong arity");
        }
    }
    throw DomainError("bad expression node");
}

inline void collect_identifiers(const Node& node, std::set<std::string>& out, bool in_step,
                                std::set<std::string>* step_scoped) {
    if (node.kind == Node::Kind::Identifier) {
        out.insert(node.name);
        if (in_step && step_scoped) step_scoped->insert(node.name);
        return;
    }
    bool step_call = node.kind == Node::Kind::Call && node.name == "step";
    for (const auto& arg : node.args)
        collect_identifiers(*arg, out, in_step || step_call, step_scoped);
}

}  // namespace expr

// ---------------------------------------------------------------------------
// Scenario

struct Scenario {
    struct FunctionCost {
        std::string name;
        std::string cost_source;
        std::shared_ptr<const expr::Node> cost;
    };
    struct Workload {
        double intensity = 1.0;
        std::string type;
    };

    std::string name;
    Hardware hardware;
    Workload workload;
    std::uint64_t noise_seed = 0;
    double noise_scale = 0.0;
    std::vector<KnobSpec> knobs;
    std::vector<FunctionCost> functions;

    std::map<std::string, KnobSpec> spec_map() const {
        std::map<std::string, KnobSpec> out;
        for (const auto& k : knobs) out.emplace(k.name, k);
        return out;
    }
    std::map<std::string, KnobValue> default_configuration() const {
        std::map<std::string, KnobValue> out;
        for (const auto& k : knobs) out.emplace(k.name, k.default_value);
        return out;
    }
};

inline Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.name = j.at("name").get<std::string>();
    s.hardware.total_memory_bytes = j.at("hardware").at("total_memory_bytes").get<std::int64_t>();
    s.hardware.cores = j.at("hardware").at("cores").get<int>();
    s.workload.intensity = j.at("workload").at("intensity").get<double>();
    s.workload.type = j.at("workload").at("type").get<std::string>();
    s.noise_seed = j.value("noise_seed", std::uint64_t{0});
    s.noise_scale = j.value("noise_scale", 0.0);
    for (const auto& k : j.at("knobs")) s.knobs.push_back(knob_spec_from_json(k));
    for (const auto& f : j.at("functions")) {
        Scenario::FunctionCost fc;
        fc.name = f.at("name").get<std::string>();
        fc.cost_source = f.at("cost").get<std::string>();
        fc.cost = std::shared_ptr<const expr::Node>(expr::parse(fc.cost_source).release());
        s.functions.push_back(std::move(fc));
    }
    if (s.functions.empty()) throw ParseError("scenario declares no functions");
    if (!(s.noise_scale >= 0)) throw ParseError("noise_scale must be >= 0");
    return s;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    require_schema_version(j, path);
    return scenario_from_json(j);
}

struct EvalResult {
    double performance = 0.0;
    ContextSnapshot context;
};

namespace detail {

/// Box-Muller standard normal over the engine's uniform bits; hand-rolled so
/// results do not depend on the standard library's distribution internals.
inline double standard_normal(std::mt19937_64& rng) {
    double u1 = (static_cast<double>(rng() >> 11) + 1.0) / 9007199254740993.0;  // (0,1)
    double u2 = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace detail

inline double encode_value_index(const KnobSpec& spec, const std::string& label) {
    auto it = std::find(spec.categories.begin(), spec.categories.end(), label);
    if (it == spec.categories.end())
        throw DomainError("label '" + label + "' not in categories of " + spec.name);
    return static_cast<double>(it - spec.categories.begin());
}

/// Environment handed to cost expressions: numeric knob values by name plus
/// intensity / total_memory / cores.
inline std::map<std::string, double> scenario_env(const Scenario& s,
                                                  const std::map<std::string, KnobValue>& config) {
    std::map<std::string, double> env;
    env["intensity"] = s.workload.intensity;
    env["total_memory"] = static_cast<double>(s.hardware.total_memory_bytes);
    env["cores"] = static_cast<double>(s.hardware.cores);
    auto specs = s.spec_map();
    for (const auto& [knob, value] : config) {
        auto it = specs.find(knob);
        if (it == specs.end()) throw DomainError("configuration names unknown knob '" + knob + "'");
        if (!it->second.in_domain(value))
            throw DomainError("configuration value for '" + knob + "' outside domain");
        if (std::holds_alternative<double>(value)) {
            env[knob] = std::get<double>(value);
        } else {
            env[knob] = encode_value_index(it->second, std::get<std::string>(value));
        }
    }
    for (const auto& k : s.knobs)
        if (!env.count(k.name)) throw DomainError("configuration missing knob '" + k.name + "'");
    return env;
}

/// One evaluation: per-function costs, normalized sampling rates, performance
/// = intensity / total_cost. Pass a null rng (or zero noise_scale) for the
/// noiseless deterministic value.
inline EvalResult evaluate(const Scenario& s, const std::map<std::string, KnobValue>& config,
                           std::mt19937_64* noise_rng = nullptr) {
    auto env = scenario_env(s, config);
    EvalResult result;
    double total = 0.0;
    std::map<std::string, double> costs;
    for (const auto& f : s.functions) {
        double c = expr::eval(*f.cost, env);
        if (!std::isfinite(c) || c < 0)
            throw DomainError("cost model of '" + f.name + "' produced " + format_double(c));
        costs[f.name] = c;
        total += c;
    }
    if (!(total > 0)) throw DomainError("total cost must be positive");
    for (const auto& [fn, c] : costs) result.context.function_rates[fn] = c / total;
    result.context.hardware = s.hardware;
    result.context.workload_predicates["workload_type"] = PredicateValue{s.workload.type};
    result.context.workload_predicates["intensity"] = PredicateValue{s.workload.intensity};
    result.performance = s.workload.intensity / total;
    if (noise_rng && s.noise_scale > 0)
        result.performance *= std::exp(s.noise_scale * detail::standard_normal(*noise_rng));
    return result;
}

// ---------------------------------------------------------------------------
// Ground truth

struct GridOptimum {
    std::map<std::string, KnobValue> configuration;
    double performance = 0.0;
};

namespace detail {

inline std::vector<KnobValue> grid_points(const KnobSpec& spec, int resolution) {
    std::vector<KnobValue> points;
    if (spec.kind == KnobKind::Categorical) {
        for (const auto& c : spec.categories) points.emplace_back(c);
        return points;
    }
    if (resolution < 2 || spec.min == spec.max) {
        points.emplace_back(spec.min);
        return points;
    }
    // Uniform in encoded space: log knobs get a log-spaced grid.
    double lo = spec.scale == KnobScale::Log ? std::log(spec.min) : spec.min;
    double hi = spec.scale == KnobScale::Log ? std::log(spec.max) : spec.max;
    std::set<double> uniq;
    for (int i = 0; i < resolution; ++i) {
        double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
        double v = spec.scale == KnobScale::Log ? std::exp(t) : t;
        v = std::clamp(v, spec.min, spec.max);
        if (spec.kind == KnobKind::Integer || spec.kind == KnobKind::MemoryBytes)
            v = std::clamp(static_cast<double>(std::llround(v)), spec.min, spec.max);
        uniq.insert(v);
    }
    for (double v : uniq) points.emplace_back(v);
    return points;
}

inline bool config_less(const std::map<std::string, KnobValue>& a,
                        const std::map<std::string, KnobValue>& b) {
    return a < b;  // std::map lexicographic over (knob, variant) pairs
}

}  // namespace detail

/// Exhaustive noiseless grid search, uniform in each knob's encoded space.
/// Ties resolve to the lexicographically smallest configuration.
inline GridOptimum ground_truth_optimum(const Scenario& s, int grid_resolution) {
    std::vector<std::vector<KnobValue>> axes;
    std::size_t total_points = 1;
    for (const auto& k : s.knobs) {
        axes.push_back(detail::grid_points(k, grid_resolution));
        total_points *= axes.back().size();
        if (total_points > 1000000)
            throw DomainError("grid exceeds 10^6 points; lower the resolution");
    }
    GridOptimum best;
    bool have = false;
    std::vector<std::size_t> idx(axes.size(), 0);
    std::map<std::string, KnobValue> config;
    while (true) {
        for (std::size_t i = 0; i < axes.size(); ++i) config[s.knobs[i].name] = axes[i][idx[i]];
        double perf = evaluate(s, config, nullptr).performance;
        if (!have || perf > best.performance ||
            (perf == best.performance && detail::config_less(config, best.configuration))) {
            best.configuration = config;
            best.performance = perf;
            have = true;
        }
        std::size_t axis = 0;
        while (axis < axes.size() && ++idx[axis] == axes[axis].size()) {
            idx[axis] = 0;
            ++axis;
        }
        if (axis == axes.size()) break;
    }
    return best;
}

/// Function-knob map read off the cost expressions: a knob inside a step()
/// argument is an explicit (conditional) dependency, elsewhere implicit.
inline FunctionKnobMap scenario_function_knob_map(const Scenario& s) {
    FunctionKnobMap map;
    std::set<std::string> knob_names;
    for (const auto& k : s.knobs) {
        knob_names.insert(k.name);
        map.by_knob.emplace(k.name, std::set<std::string>{});
    }
    for (const auto& f : s.functions) {
        std::set<std::string> ids;
        std::set<std::string> in_step;
        expr::collect_identifiers(*f.cost, ids, false, &in_step);
        for (const auto& id : ids) {
            if (!knob_names.count(id)) continue;
            ControlKind kind = in_step.count(id) ? ControlKind::Explicit : ControlKind::Implicit;
            map.by_function[f.name][id] = kind;
            map.by_knob[id].insert(f.name);
        }
    }
    return map;
}

}  // namespace knobtune
