#pragma once

// JSON (de)serialization for the domain types plus the file-level helpers:
// line-delimited observation logs, versioned single-document specs/rulebooks,
// and atomic file writes (temp + rename).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "knobtune/types.hpp"

namespace knobtune {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// --- enum names -------------------------------------------------------------

namespace detail {

template <typename E>
struct EnumNames;

template <>
struct EnumNames<KnobKind> {
    static constexpr std::pair<KnobKind, const char*> values[] = {
        {KnobKind::Continuous, "continuous"},
        {KnobKind::Integer, "integer"},
        {KnobKind::Categorical, "categorical"},
        {KnobKind::MemoryBytes, "memory-bytes"}};
};
template <>
struct EnumNames<KnobScale> {
    static constexpr std::pair<KnobScale, const char*> values[] = {
        {KnobScale::Linear, "linear"},
        {KnobScale::Log, "log"},
        {KnobScale::MemoryFraction, "memory-fraction"}};
};
template <>
struct EnumNames<Direction> {
    static constexpr std::pair<Direction, const char*> values[] = {
        {Direction::Increase, "increase"},
        {Direction::Decrease, "decrease"},
        {Direction::Set, "set"}};
};
template <>
struct EnumNames<AdjustmentForm> {
    static constexpr std::pair<AdjustmentForm, const char*> values[] = {
        {AdjustmentForm::Relative, "relative"}, {AdjustmentForm::Absolute, "absolute"}};
};
template <>
struct EnumNames<MetricDirection> {
    static constexpr std::pair<MetricDirection, const char*> values[] = {
        {MetricDirection::HigherBetter, "higher-better"},
        {MetricDirection::LowerBetter, "lower-better"}};
};
template <>
struct EnumNames<RateSignal> {
    static constexpr std::pair<RateSignal, const char*> values[] = {
        {RateSignal::HighRate, "high-rate"}, {RateSignal::LowRate, "low-rate"}};
};
template <>
struct EnumNames<Provenance> {
    static constexpr std::pair<Provenance, const char*> values[] = {
        {Provenance::Stub, "stub"}, {Provenance::Advisor, "advisor"}};
};

}  // namespace detail

template <typename E>
std::string enum_name(E e) {
    for (const auto& [v, n] : detail::EnumNames<E>::values)
        if (v == e) return n;
    throw ParseError("unrepresentable enum value");
}

template <typename E>
E enum_value(const std::string& name) {
    for (const auto& [v, n] : detail::EnumNames<E>::values)
        if (name == n) return v;
    throw ParseError("unknown enum literal '" + name + "'");
}

// --- value variants ----------------------------------------------------------

inline json to_json(const KnobValue& v) {
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    return std::get<std::string>(v);
}

inline KnobValue knob_value_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ParseError("knob value must be a number or a string");
}

inline json to_json(const PredicateValue& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v);
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    return std::get<std::string>(v);
}

inline PredicateValue predicate_value_from_json(const json& j) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw ParseError("predicate value must be a boolean, number or string");
}

// --- knob specs ---------------------------------------------------------------

inline json to_json(const KnobSpec& s) {
    json j{{"name", s.name},
           {"kind", enum_name(s.kind)},
           {"default", to_json(s.default_value)},
           {"scale", enum_name(s.scale)}};
    if (s.numeric()) {
        j["min"] = s.min;
        j["max"] = s.max;
    }
    if (s.kind == KnobKind::Categorical) j["categories"] = s.categories;
    return j;
}

inline KnobSpec knob_spec_from_json(const json& j) {
    KnobSpec s;
    s.name = j.at("name").get<std::string>();
    s.kind = enum_value<KnobKind>(j.at("kind").get<std::string>());
    s.default_value = knob_value_from_json(j.at("default"));
    if (j.contains("scale")) s.scale = enum_value<KnobScale>(j.at("scale").get<std::string>());
    if (s.numeric()) {
        s.min = j.at("min").get<double>();
        s.max = j.at("max").get<double>();
    }
    if (j.contains("categories")) s.categories = j.at("categories").get<std::vector<std::string>>();
    throw_if_invalid(check_spec(s), "invalid knob spec '" + s.name + "'");
    return s;
}

// --- context / observations ----------------------------------------------------

inline json to_json(const ContextSnapshot& c) {
    json preds = json::object();
    for (const auto& [k, v] : c.workload_predicates) preds[k] = to_json(v);
    json rates = json::object();
    for (const auto& [k, v] : c.function_rates) rates[k] = v;
    return json{{"workload_predicates", preds},
                {"function_rates", rates},
                {"hardware",
                 {{"total_memory_bytes", c.hardware.total_memory_bytes},
                  {"cores", c.hardware.cores}}}};
}

inline ContextSnapshot context_from_json(const json& j) {
    ContextSnapshot c;
    for (const auto& [k, v] : j.at("workload_predicates").items())
        c.workload_predicates[k] = predicate_value_from_json(v);
    for (const auto& [k, v] : j.at("function_rates").items())
        c.function_rates[k] = v.get<double>();
    c.hardware.total_memory_bytes = j.at("hardware").at("total_memory_bytes").get<std::int64_t>();
    c.hardware.cores = j.at("hardware").at("cores").get<int>();
    return c;
}

inline json to_json(const Performance& p) {
    return json{{"metric_name", p.metric_name},
                {"value", p.value},
                {"direction", enum_name(p.direction)}};
}

inline Performance performance_from_json(const json& j) {
    Performance p;
    p.metric_name = j.at("metric_name").get<std::string>();
    p.value = j.at("value").get<double>();
    p.direction = enum_value<MetricDirection>(j.at("direction").get<std::string>());
    return p;
}

inline json to_json(const ObservationRecord& r) {
    json cfg = json::object();
    for (const auto& [k, v] : r.configuration) cfg[k] = to_json(v);
    return json{{"id", r.id},
                {"context", to_json(r.context)},
                {"configuration", cfg},
                {"performance", to_json(r.performance)}};
}

inline ObservationRecord observation_from_json(const json& j) {
    ObservationRecord r;
    r.id = j.at("id").get<std::string>();
    r.context = context_from_json(j.at("context"));
    for (const auto& [k, v] : j.at("configuration").items())
        r.configuration[k] = knob_value_from_json(v);
    r.performance = performance_from_json(j.at("performance"));
    return r;
}

// --- rules ---------------------------------------------------------------------

inline json to_json(const Interval& iv) { return json{{"lo", iv.lo}, {"hi", iv.hi}}; }

inline Interval interval_from_json(const json& j) {
    return Interval{j.at("lo").get<double>(), j.at("hi").get<double>()};
}

inline json to_json(const KnobAdjustment& a) {
    return json{{"knob", a.knob},
                {"form", enum_name(a.form)},
                {"direction", enum_name(a.direction)},
                {"magnitude_interval", to_json(a.magnitude_interval)}};
}

inline KnobAdjustment adjustment_from_json(const json& j) {
    KnobAdjustment a;
    a.knob = j.at("knob").get<std::string>();
    a.form = enum_value<AdjustmentForm>(j.at("form").get<std::string>());
    a.direction = enum_value<Direction>(j.at("direction").get<std::string>());
    a.magnitude_interval = interval_from_json(j.at("magnitude_interval"));
    return a;
}

inline json to_json(const Predicate& p) {
    if (std::holds_alternative<WorkloadPredicate>(p)) {
        const auto& wp = std::get<WorkloadPredicate>(p);
        return json{{"type", "workload"}, {"name", wp.name}, {"value", to_json(wp.value)}};
    }
    const auto& rp = std::get<RatePredicate>(p);
    return json{{"type", "rate"}, {"function", rp.function}, {"interval", to_json(rp.interval)}};
}

inline Predicate predicate_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "workload")
        return WorkloadPredicate{j.at("name").get<std::string>(),
                                 predicate_value_from_json(j.at("value"))};
    if (type == "rate")
        return RatePredicate{j.at("function").get<std::string>(),
                             interval_from_json(j.at("interval"))};
    throw ParseError("unknown predicate type '" + type + "'");
}

inline json to_json(const TuningRule& r) {
    json ante = json::array();
    for (const auto& p : r.antecedent) ante.push_back(to_json(p));
    json cons = json::array();
    for (const auto& a : r.consequent) cons.push_back(to_json(a));
    return json{{"id", r.id},
                {"antecedent", ante},
                {"consequent", cons},
                {"coverage", r.coverage},
                {"success_count", r.success_count},
                {"trial_count", r.trial_count},
                {"improvement_sum", r.improvement_sum},
                {"mined_confidence", r.mined_confidence}};
}

inline TuningRule rule_from_json(const json& j) {
    TuningRule r;
    for (const auto& p : j.at("antecedent")) r.antecedent.push_back(predicate_from_json(p));
    for (const auto& a : j.at("consequent")) r.consequent.push_back(adjustment_from_json(a));
    r.id = j.contains("id") ? j.at("id").get<std::string>()
                            : rule_content_id(r.antecedent, r.consequent);
    r.coverage = j.value("coverage", 0.0);
    r.success_count = j.value("success_count", std::int64_t{0});
    r.trial_count = j.value("trial_count", std::int64_t{0});
    r.improvement_sum = j.value("improvement_sum", 0.0);
    r.mined_confidence = j.value("mined_confidence", 0.0);
    throw_if_invalid(check_rule(r), "invalid rule '" + r.id + "'");
    return r;
}

// --- hypotheses -------------------------------------------------------------------

inline json to_json(const Hypothesis& h) {
    json triggers = json::array();
    for (const auto& t : h.triggers)
        triggers.push_back(json{{"function", t.function},
                                {"signal", enum_name(t.signal)},
                                {"direction", enum_name(t.direction)}});
    return json{{"knob", h.knob},
                {"functions", h.functions},
                {"causal_link", h.causal_link},
                {"triggers", triggers},
                {"provenance", enum_name(h.provenance)}};
}

inline Hypothesis hypothesis_from_json(const json& j) {
    Hypothesis h;
    h.knob = j.at("knob").get<std::string>();
    for (const auto& f : j.at("functions")) h.functions.insert(f.get<std::string>());
    h.causal_link = j.value("causal_link", "");
    if (j.contains("triggers")) {
        for (const auto& t : j.at("triggers")) {
            h.triggers.push_back(
                HypothesisTrigger{t.at("function").get<std::string>(),
                                  enum_value<RateSignal>(t.at("signal").get<std::string>()),
                                  enum_value<Direction>(t.at("direction").get<std::string>())});
        }
    }
    if (j.contains("provenance"))
        h.provenance = enum_value<Provenance>(j.at("provenance").get<std::string>());
    throw_if_invalid(check_hypothesis(h), "invalid hypothesis for knob '" + h.knob + "'");
    return h;
}

// --- files ------------------------------------------------------------------------

/// Write-temp-rename so readers never observe a half-written document.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DomainError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out.flush()) throw DomainError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DomainError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json parse_json_file(const std::filesystem::path& path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("malformed JSON in '" + path.string() + "': " + e.what());
    }
}

inline void require_schema_version(const json& j, const std::filesystem::path& path) {
    if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer())
        throw ParseError("'" + path.string() + "' lacks an integer schema_version field");
    int v = j.at("schema_version").get<int>();
    if (v != kSchemaVersion)
        throw ParseError("'" + path.string() + "' has schema_version " + std::to_string(v) +
                         ", expected " + std::to_string(kSchemaVersion));
}

inline std::map<std::string, KnobSpec> load_knob_specs(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    require_schema_version(j, path);
    std::map<std::string, KnobSpec> specs;
    for (const auto& item : j.at("knobs")) {
        KnobSpec s = knob_spec_from_json(item);
        if (!specs.emplace(s.name, s).second)
            throw ParseError("duplicate knob spec '" + s.name + "' in '" + path.string() + "'");
    }
    return specs;
}

inline void save_knob_specs(const std::map<std::string, KnobSpec>& specs,
                            const std::filesystem::path& path) {
    json knobs = json::array();
    for (const auto& [_, s] : specs) knobs.push_back(to_json(s));
    atomic_write_file(path, json{{"schema_version", kSchemaVersion}, {"knobs", knobs}}.dump(2) + "\n");
}

/// Observation logs are line-delimited: one JSON object per line.
inline std::vector<ObservationRecord> load_observations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path.string() + "'");
    std::vector<ObservationRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(observation_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw ParseError("'" + path.string() + "' line " + std::to_string(lineno) + ": " +
                             e.what());
        }
    }
    return out;
}

inline void save_observations(const std::vector<ObservationRecord>& records,
                              const std::filesystem::path& path) {
    std::string body;
    for (const auto& r : records) body += to_json(r).dump() + "\n";
    atomic_write_file(path, body);
}

inline std::vector<Hypothesis> load_hypotheses(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    require_schema_version(j, path);
    std::vector<Hypothesis> out;
    for (const auto& h : j.at("hypotheses")) out.push_back(hypothesis_from_json(h));
    return out;
}

}  // namespace knobtune
