#pragma once

// Core domain types shared by every module: knob specifications, runtime
// context snapshots, observation records, tuning rules and hypotheses.
// All types are immutable values; mutation means constructing a new instance.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace knobtune {

enum class KnobKind { Continuous, Integer, Categorical, MemoryBytes };
enum class KnobScale { Linear, Log, MemoryFraction };
enum class Direction { Increase, Decrease, Set };
enum class AdjustmentForm { Relative, Absolute };
enum class MetricDirection { HigherBetter, LowerBetter };
enum class RateSignal { HighRate, LowRate };
enum class Provenance { Stub, Advisor };

/// A configured knob value: numeric kinds use the double alternative,
/// categorical kinds the label.
using KnobValue = std::variant<double, std::string>;

/// Workload predicate values are an open vocabulary of booleans, numbers
/// and labels, compared by exact equality.
using PredicateValue = std::variant<bool, double, std::string>;

struct ValidationError {
    std::string path;
    std::string message;
};

class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Shortest round-trip decimal rendering; used everywhere a double becomes
/// part of a canonical string (item keys, prompts, reports).
inline std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string to_string(const KnobValue& v) {
    if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
    return std::get<std::string>(v);
}

inline std::string to_string(const PredicateValue& v) {
    if (std::holds_alternative<bool>(v)) return std::get<bool>(v) ? "true" : "false";
    if (std::holds_alternative<double>(v)) return format_double(std::get<double>(v));
    return std::get<std::string>(v);
}

// ---------------------------------------------------------------------------
// Knob specifications

struct KnobSpec {
    std::string name;
    KnobKind kind = KnobKind::Continuous;
    double min = 0.0;
    double max = 0.0;
    KnobValue default_value = 0.0;
    KnobScale scale = KnobScale::Linear;
    std::vector<std::string> categories;  // categorical only

    bool numeric() const { return kind != KnobKind::Categorical; }

    bool in_domain(const KnobValue& v) const {
        if (numeric()) {
            if (!std::holds_alternative<double>(v)) return false;
            double x = std::get<double>(v);
            return std::isfinite(x) && x >= min && x <= max;
        }
        if (!std::holds_alternative<std::string>(v)) return false;
        const auto& label = std::get<std::string>(v);
        return std::find(categories.begin(), categories.end(), label) != categories.end();
    }
};

inline std::vector<ValidationError> check_spec(const KnobSpec& s) {
    std::vector<ValidationError> errs;
    auto add = [&](const std::string& field, const std::string& msg) {
        errs.push_back({s.name + "." + field, msg});
    };
    if (s.name.empty()) errs.push_back({"name", "knob name must be non-empty"});
    if (s.numeric()) {
        if (!std::holds_alternative<double>(s.default_value)) {
            add("default", "numeric knob requires a numeric default");
        } else {
            double d = std::get<double>(s.default_value);
            if (!(s.min <= d && d <= s.max)) add("default", "default outside [min, max]");
        }
        if (s.min > s.max) add("min", "min exceeds max");
        if (s.scale == KnobScale::Log && !(s.min > 0)) add("scale", "log scale requires min > 0");
    } else {
        if (s.categories.empty()) add("categories", "categorical knob requires non-empty categories");
        if (!std::holds_alternative<std::string>(s.default_value) ||
            std::find(s.categories.begin(), s.categories.end(),
                      std::get<std::string>(s.default_value)) == s.categories.end()) {
            add("default", "default must be one of the declared categories");
        }
        if (s.scale != KnobScale::Linear) add("scale", "categorical knobs use linear scale");
    }
    if (s.scale == KnobScale::MemoryFraction && s.kind != KnobKind::MemoryBytes) {
        add("scale", "memory-fraction scale requires memory-bytes kind");
    }
    return errs;
}

// ---------------------------------------------------------------------------
// Context snapshots and observations

struct Hardware {
    std::int64_t total_memory_bytes = 0;
    int cores = 0;
    bool operator==(const Hardware&) const = default;
};

struct ContextSnapshot {
    std::map<std::string, PredicateValue> workload_predicates;
    std::map<std::string, double> function_rates;
    Hardware hardware;

    double rate_of(const std::string& function) const {
        auto it = function_rates.find(function);
        return it == function_rates.end() ? 0.0 : it->second;
    }
    bool operator==(const ContextSnapshot&) const = default;
};

inline std::vector<ValidationError> check_context(const ContextSnapshot& c,
                                                  const std::string& prefix = "context") {
    std::vector<ValidationError> errs;
    double total = 0.0;
    for (const auto& [fn, r] : c.function_rates) {
        if (!(r >= 0.0 && r <= 1.0) || !std::isfinite(r)) {
            errs.push_back({prefix + ".function_rates." + fn, "sampling rate out of [0,1]"});
        } else {
            total += r;
        }
    }
    if (total > 1.0 + 1e-6) {
        errs.push_back({prefix + ".function_rates", "sampling rates sum to " +
                                                        format_double(total) + " > 1"});
    }
    if (c.hardware.total_memory_bytes <= 0)
        errs.push_back({prefix + ".hardware.total_memory_bytes", "must be > 0"});
    if (c.hardware.cores <= 0) errs.push_back({prefix + ".hardware.cores", "must be > 0"});
    return errs;
}

struct Performance {
    std::string metric_name;
    double value = 0.0;
    MetricDirection direction = MetricDirection::HigherBetter;
    bool operator==(const Performance&) const = default;
};

struct ObservationRecord {
    std::string id;
    ContextSnapshot context;
    std::map<std::string, KnobValue> configuration;
    Performance performance;
    bool operator==(const ObservationRecord&) const = default;
};

/// Direction-aware relative improvement of `better` over `worse`.
/// Positive iff `better` genuinely outperforms `worse`.
inline double relative_improvement(double worse, double better, MetricDirection dir) {
    double denom = std::abs(worse);
    if (denom < 1e-300) return 0.0;
    double delta = (dir == MetricDirection::HigherBetter) ? better - worse : worse - better;
    return delta / denom;
}

inline bool is_better(double candidate, double incumbent, MetricDirection dir) {
    return dir == MetricDirection::HigherBetter ? candidate > incumbent : candidate < incumbent;
}

/// Validates a record against the knob specs covering its configuration.
/// Returns the empty list exactly when every invariant holds.
inline std::vector<ValidationError> validate_observation(
    const ObservationRecord& r, const std::map<std::string, KnobSpec>& specs) {
    std::vector<ValidationError> errs = check_context(r.context, r.id + ".context");
    if (!std::isfinite(r.performance.value))
        errs.push_back({r.id + ".performance.value", "must be finite"});
    for (const auto& [knob, value] : r.configuration) {
        auto it = specs.find(knob);
        const std::string path = r.id + ".configuration." + knob;
        if (it == specs.end()) {
            errs.push_back({path, "unknown knob"});
            continue;
        }
        const KnobSpec& spec = it->second;
        if (!spec.in_domain(value)) {
            if (spec.numeric() && std::holds_alternative<double>(value)) {
                double x = std::get<double>(value);
                if (x < spec.min)
                    errs.push_back({path, "value below domain min"});
                else if (x > spec.max)
                    errs.push_back({path, "value above domain max"});
                else
                    errs.push_back({path, "value outside domain"});
            } else {
                errs.push_back({path, "value outside domain"});
            }
        }
    }
    return errs;
}

// ---------------------------------------------------------------------------
// Rules

/// Half-open interval (lo, hi]. Boundary semantics are uniform across rule
/// antecedents and adjustment magnitudes so tiled intervals never overlap.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double v) const { return v > lo && v <= hi; }
    double midpoint() const { return 0.5 * (lo + hi); }
    bool operator==(const Interval&) const = default;
};

struct KnobAdjustment {
    std::string knob;
    AdjustmentForm form = AdjustmentForm::Relative;
    Direction direction = Direction::Increase;
    Interval magnitude_interval;  // in the knob's encoded space
    bool operator==(const KnobAdjustment&) const = default;
};

inline std::vector<ValidationError> check_adjustment(const KnobAdjustment& a) {
    std::vector<ValidationError> errs;
    if (!(a.magnitude_interval.lo < a.magnitude_interval.hi))
        errs.push_back({a.knob + ".magnitude_interval", "requires lo < hi"});
    if (a.form == AdjustmentForm::Absolute && a.direction != Direction::Set)
        errs.push_back({a.knob + ".direction", "absolute form implies direction = set"});
    if (a.form == AdjustmentForm::Relative && a.direction == Direction::Set)
        errs.push_back({a.knob + ".direction", "relative form requires increase or decrease"});
    return errs;
}

/// One knob's actually-applied change, carried in both encoded forms so a
/// rule in either form can be checked against it.
struct AppliedAdjustment {
    std::string knob;
    Direction direction = Direction::Increase;  // of the relative change
    double relative_magnitude = 0.0;             // |encoded(to) - encoded(from)|
    double absolute_target = 0.0;                // encoded(to)
};

/// Does a rule's prescribed adjustment match what was actually applied?
/// Relative rules need the same knob and direction with the applied magnitude
/// inside the interval; absolute rules need the applied target inside it.
inline bool adjustment_matches(const KnobAdjustment& adj, const AppliedAdjustment& applied) {
    if (adj.knob != applied.knob) return false;
    if (adj.form == AdjustmentForm::Relative) {
        return adj.direction == applied.direction &&
               adj.magnitude_interval.contains(applied.relative_magnitude);
    }
    return adj.magnitude_interval.contains(applied.absolute_target);
}

struct WorkloadPredicate {
    std::string name;
    PredicateValue value;
    bool operator==(const WorkloadPredicate&) const = default;
};

struct RatePredicate {
    std::string function;
    Interval interval;
    bool operator==(const RatePredicate&) const = default;
};

using Predicate = std::variant<WorkloadPredicate, RatePredicate>;

inline bool holds_in(const Predicate& p, const ContextSnapshot& c) {
    if (std::holds_alternative<WorkloadPredicate>(p)) {
        const auto& wp = std::get<WorkloadPredicate>(p);
        auto it = c.workload_predicates.find(wp.name);
        return it != c.workload_predicates.end() && it->second == wp.value;
    }
    const auto& rp = std::get<RatePredicate>(p);
    return rp.interval.contains(c.rate_of(rp.function));
}

inline std::string predicate_key(const Predicate& p) {
    if (std::holds_alternative<WorkloadPredicate>(p)) {
        const auto& wp = std::get<WorkloadPredicate>(p);
        return "ctx:" + wp.name + "=" + to_string(wp.value);
    }
    const auto& rp = std::get<RatePredicate>(p);
    return "rate:" + rp.function + " in (" + format_double(rp.interval.lo) + "," +
           format_double(rp.interval.hi) + "]";
}

inline std::string adjustment_key(const KnobAdjustment& a) {
    std::string dir = a.direction == Direction::Increase   ? "increase"
                      : a.direction == Direction::Decrease ? "decrease"
                                                           : "set";
    std::string form = a.form == AdjustmentForm::Relative ? "rel" : "abs";
    return "adj:" + a.knob + " " + form + " " + dir + " (" +
           format_double(a.magnitude_interval.lo) + "," +
           format_double(a.magnitude_interval.hi) + "]";
}

struct TuningRule {
    std::string id;
    std::vector<Predicate> antecedent;  // may be empty (vacuously true)
    std::vector<KnobAdjustment> consequent;
    double coverage = 0.0;
    std::int64_t success_count = 0;
    std::int64_t trial_count = 0;
    double improvement_sum = 0.0;
    double mined_confidence = 0.0;  // confidence estimated at mining time

    /// Confidence per the maintenance statistics; unset while unverified.
    std::optional<double> confidence() const {
        if (trial_count <= 0) return std::nullopt;
        return static_cast<double>(success_count) / static_cast<double>(trial_count);
    }
    /// Maintenance confidence when verified, mining-time estimate otherwise.
    double effective_confidence() const { return confidence().value_or(mined_confidence); }

    bool matches(const ContextSnapshot& c) const {
        for (const auto& p : antecedent)
            if (!holds_in(p, c)) return false;
        return true;
    }
    bool operator==(const TuningRule&) const = default;
};

inline std::vector<ValidationError> check_rule(const TuningRule& r) {
    std::vector<ValidationError> errs;
    auto path = [&](const std::string& f) { return "rule." + r.id + "." + f; };
    if (r.consequent.empty()) errs.push_back({path("consequent"), "must be non-empty"});
    for (const auto& a : r.consequent)
        for (auto e : check_adjustment(a)) errs.push_back({path("consequent." + e.path), e.message});
    for (const auto& p : r.antecedent) {
        if (std::holds_alternative<RatePredicate>(p)) {
            const auto& rp = std::get<RatePredicate>(p);
            if (!(rp.interval.lo < rp.interval.hi))
                errs.push_back({path("antecedent." + rp.function), "interval requires lo < hi"});
        }
    }
    if (!(r.coverage >= 0.0 && r.coverage <= 1.0))
        errs.push_back({path("coverage"), "must lie in [0,1]"});
    if (r.success_count < 0) errs.push_back({path("success_count"), "must be >= 0"});
    if (r.trial_count < r.success_count)
        errs.push_back({path("trial_count"), "must be >= success_count"});
    if (r.improvement_sum < 0) errs.push_back({path("improvement_sum"), "must be >= 0"});
    return errs;
}

/// FNV-1a content hash over the canonical antecedent/consequent keys.
/// Serves as the rule identity for dedup and ranking tie-breaks.
inline std::string rule_content_id(const std::vector<Predicate>& antecedent,
                                   const std::vector<KnobAdjustment>& consequent) {
    std::vector<std::string> keys;
    for (const auto& p : antecedent) keys.push_back(predicate_key(p));
    std::sort(keys.begin(), keys.end());
    std::vector<std::string> ckeys;
    for (const auto& a : consequent) ckeys.push_back(adjustment_key(a));
    std::sort(ckeys.begin(), ckeys.end());
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&h](const std::string& s) {
        for (unsigned char ch : s) {
            h ^= ch;
            h *= 1099511628211ull;
        }
        h ^= 0x1f;
        h *= 1099511628211ull;
    };
    for (const auto& k : keys) mix(k);
    mix("=>");
    for (const auto& k : ckeys) mix(k);
    char buf[17];
    static const char* hex = "0123456789abcdef";
    for (int i = 0; i < 16; ++i) buf[15 - i] = hex[(h >> (4 * i)) & 0xf];
    buf[16] = '\0';
    return std::string("r-") + buf;
}

// ---------------------------------------------------------------------------
// Hypotheses

/// A bottleneck candidate with its diagnosis severity (|delta| or |shap|).
struct FlaggedFunction {
    std::string function;
    double severity = 0.0;
};

struct HypothesisTrigger {
    std::string function;
    RateSignal signal = RateSignal::HighRate;
    Direction direction = Direction::Increase;
    bool operator==(const HypothesisTrigger&) const = default;
};

struct Hypothesis {
    std::string knob;
    std::set<std::string> functions;
    std::string causal_link;
    std::vector<HypothesisTrigger> triggers;
    Provenance provenance = Provenance::Stub;
    bool operator==(const Hypothesis&) const = default;
};

inline std::vector<ValidationError> check_hypothesis(const Hypothesis& h) {
    std::vector<ValidationError> errs;
    for (const auto& t : h.triggers) {
        if (!h.functions.count(t.function))
            errs.push_back({"hypothesis." + h.knob + ".triggers." + t.function,
                            "trigger function not in the hypothesis function set"});
    }
    return errs;
}

inline void throw_if_invalid(const std::vector<ValidationError>& errs, const std::string& what) {
    if (errs.empty()) return;
    std::string msg = what + ":";
    for (const auto& e : errs) msg += "\n  " + e.path + ": " + e.message;
    throw DomainError(msg);
}

}  // namespace knobtune
