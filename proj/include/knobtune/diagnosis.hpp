#pragma once

// Bottleneck diagnosis from sampled profiles.
//
// Two complementary modes: differential profiling (baseline vs degraded
// snapshot) and SHAP attribution over a ridge-regularized linear model of
// performance on function sampling rates. For a linear model the Shapley
// value of feature i is weight_i * (rate_i - background_i), exactly, which
// keeps the attribution testable against the local-accuracy identity.

#include <istream>
#include <sstream>

#include "knobtune/mapping.hpp"
#include "knobtune/rulebook.hpp"
#include "knobtune/types.hpp"

namespace knobtune {

struct ProfileDelta {
    std::string function;
    double baseline_rate = 0.0;
    double observed_rate = 0.0;
    double delta = 0.0;  // observed - baseline
};

/// Functions whose sampling rate moved by at least `threshold` between the
/// two snapshots (absent means rate 0), sorted by |delta| descending.
inline std::vector<ProfileDelta> differential_profile(const ContextSnapshot& baseline,
                                                      const ContextSnapshot& degraded,
                                                      double threshold) {
    if (!(threshold > 0)) throw DomainError("differential_profile: threshold must be > 0");
    std::set<std::string> functions;
    for (const auto& [fn, _] : baseline.function_rates) functions.insert(fn);
    for (const auto& [fn, _] : degraded.function_rates) functions.insert(fn);
    std::vector<ProfileDelta> out;
    for (const auto& fn : functions) {
        double b = baseline.rate_of(fn);
        double d = degraded.rate_of(fn);
        if (std::abs(d - b) >= threshold) out.push_back({fn, b, d, d - b});
    }
    std::sort(out.begin(), out.end(), [](const ProfileDelta& a, const ProfileDelta& b) {
        if (std::abs(a.delta) != std::abs(b.delta)) return std::abs(a.delta) > std::abs(b.delta);
        return a.function < b.function;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Linear performance model

struct LinearPerformanceModel {
    double intercept = 0.0;
    std::map<std::string, double> weights;  // function -> weight
    std::string metric_name;
    MetricDirection direction = MetricDirection::HigherBetter;

    double predict(const std::map<std::string, double>& rates) const {
        double y = intercept;
        for (const auto& [fn, w] : weights) {
            auto it = rates.find(fn);
            if (it != rates.end()) y += w * it->second;
        }
        return y;
    }
};

namespace detail {

/// Gaussian elimination with partial pivoting; A is dense row-major n x n.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> a,
                                        std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        if (std::abs(a[col][col]) < 1e-300) throw DomainError("singular normal equations");
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
        x[i] = s / a[i][i];
    }
    return x;
}

}  // namespace detail

/// Ridge least squares of performance on the function-rate vectors
/// (intercept unpenalized). Deterministic; functions absent from a record
/// count as rate 0.
inline LinearPerformanceModel fit_performance_model(const std::vector<ObservationRecord>& history,
                                                    double ridge_lambda = 1e-3) {
    if (history.empty()) throw DomainError("fit_performance_model: empty history");
    std::set<std::string> names;
    for (const auto& h : history)
        for (const auto& [fn, _] : h.context.function_rates) names.insert(fn);
    std::vector<std::string> functions(names.begin(), names.end());
    const std::size_t p = functions.size();
    const std::size_t dim = p + 1;  // intercept last

    std::vector<std::vector<double>> xtx(dim, std::vector<double>(dim, 0.0));
    std::vector<double> xty(dim, 0.0);
    std::vector<double> row(dim, 1.0);
    for (const auto& h : history) {
        for (std::size_t i = 0; i < p; ++i) row[i] = h.context.rate_of(functions[i]);
        row[p] = 1.0;
        for (std::size_t i = 0; i < dim; ++i) {
            xty[i] += row[i] * h.performance.value;
            for (std::size_t j = 0; j < dim; ++j) xtx[i][j] += row[i] * row[j];
        }
    }
    for (std::size_t i = 0; i < p; ++i) xtx[i][i] += ridge_lambda;

    auto coef = detail::solve_linear(std::move(xtx), std::move(xty));
    LinearPerformanceModel model;
    model.metric_name = history.front().performance.metric_name;
    model.direction = history.front().performance.direction;
    model.intercept = coef[p];
    for (std::size_t i = 0; i < p; ++i) model.weights[functions[i]] = coef[i];
    return model;
}

/// Mean rate per function over the history (absent = 0); the SHAP background.
inline std::map<std::string, double> mean_rates(const std::vector<ObservationRecord>& history) {
    if (history.empty()) throw DomainError("mean_rates: empty history");
    std::set<std::string> names;
    for (const auto& h : history)
        for (const auto& [fn, _] : h.context.function_rates) names.insert(fn);
    std::map<std::string, double> out;
    for (const auto& fn : names) {
        double sum = 0.0;
        for (const auto& h : history) sum += h.context.rate_of(fn);
        out[fn] = sum / static_cast<double>(history.size());
    }
    return out;
}

struct Attribution {
    std::string function;
    double shap_value = 0.0;  // in units of the performance metric
    int rank = 0;             // 1-based among hurting contributors, 0 otherwise
};

/// Exact Shapley values of the linear model at `current` against the
/// background rates. Output is sorted most-harmful first: "harmful" flips
/// sign for lower-better metrics so it always means "hurts performance".
inline std::vector<Attribution> shap_profile(const LinearPerformanceModel& model,
                                             const ContextSnapshot& current,
                                             const std::map<std::string, double>& background) {
    std::vector<Attribution> out;
    for (const auto& [fn, w] : model.weights) {
        double bg = 0.0;
        auto it = background.find(fn);
        if (it != background.end()) bg = it->second;
        out.push_back({fn, w * (current.rate_of(fn) - bg), 0});
    }
    auto hurt = [&](const Attribution& a) {
        return model.direction == MetricDirection::HigherBetter ? -a.shap_value : a.shap_value;
    };
    std::sort(out.begin(), out.end(), [&](const Attribution& a, const Attribution& b) {
        if (hurt(a) != hurt(b)) return hurt(a) > hurt(b);
        return a.function < b.function;
    });
    int rank = 0;
    for (auto& a : out)
        if (hurt(a) > 0) a.rank = ++rank;
    return out;
}

// ---------------------------------------------------------------------------
// Knob selection

/// Union of the flagged functions' controlling knobs plus the knobs named in
/// consequents of context-matching rules. Ordered by flagged-function severity
/// (ties lexicographic), then by matching-rule expected improvement; first
/// occurrence wins on duplicates.
inline std::vector<std::string> select_knobs(const std::vector<FlaggedFunction>& flagged,
                                             const FunctionKnobMap& map, const Rulebook& rulebook,
                                             const ContextSnapshot& context) {
    std::vector<FlaggedFunction> ordered = flagged;
    std::sort(ordered.begin(), ordered.end(), [](const FlaggedFunction& a, const FlaggedFunction& b) {
        if (a.severity != b.severity) return a.severity > b.severity;
        return a.function < b.function;
    });

    std::vector<std::string> out;
    std::set<std::string> seen;
    auto add = [&](const std::string& knob) {
        if (seen.insert(knob).second) out.push_back(knob);
    };
    for (const auto& f : ordered)
        for (const auto& knob : map.knobs_for(f.function)) add(knob);

    auto matched = match_rules(rulebook, context);
    if (!matched.empty()) {
        for (const TuningRule* r : rank_and_take(matched, matched.size()))
            for (const auto& adj : r->consequent) add(adj.knob);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Profile ingestion

/// Parses collapsed-stack text ("frame;frame;frame count" per line) into
/// normalized per-function leaf sampling rates.
inline std::map<std::string, double> parse_collapsed_stacks(std::istream& in) {
    std::map<std::string, double> counts;
    double total = 0.0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto space = line.find_last_of(" \t");
        if (space == std::string::npos)
            throw ParseError("collapsed stack line " + std::to_string(lineno) +
                             ": missing sample count");
        std::string stack = line.substr(0, space);
        double count = 0.0;
        try {
            count = std::stod(line.substr(space + 1));
        } catch (const std::exception&) {
            throw ParseError("collapsed stack line " + std::to_string(lineno) +
                             ": malformed sample count");
        }
        if (!(count >= 0))
            throw ParseError("collapsed stack line " + std::to_string(lineno) +
                             ": negative sample count");
        auto semi = stack.find_last_of(';');
        std::string leaf = semi == std::string::npos ? stack : stack.substr(semi + 1);
        while (!leaf.empty() && (leaf.back() == ' ' || leaf.back() == '\t')) leaf.pop_back();
        if (leaf.empty())
            throw ParseError("collapsed stack line " + std::to_string(lineno) + ": empty frame");
        counts[leaf] += count;
        total += count;
    }
    std::map<std::string, double> rates;
    if (total <= 0) return rates;
    for (const auto& [fn, c] : counts) rates[fn] = c / total;
    return rates;
}

inline ContextSnapshot snapshot_from_collapsed_file(const std::filesystem::path& path,
                                                    const Hardware& hw) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path.string() + "'");
    ContextSnapshot c;
    c.function_rates = parse_collapsed_stacks(in);
    c.hardware = hw;
    return c;
}

}  // namespace knobtune
