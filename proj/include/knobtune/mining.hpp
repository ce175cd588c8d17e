#pragma once

// Tuning-rule mining: observation histories -> quantitative rules.
//
// Pipeline: enumerate improving observation pairs (augmentation), encode the
// worse-side context plus the worse->better knob adjustments in normalized
// scale-invariant spaces, discretize continuous features into impact-aware
// intervals, mine frequent itemsets with targeted FP-Growth, then split each
// itemset into antecedent (context) and consequent (adjustments) and score
// coverage/confidence against the full history.

#include <cmath>

#include "knobtune/fp_growth.hpp"
#include "knobtune/types.hpp"

namespace knobtune {

// ---------------------------------------------------------------------------
// Encoded knob spaces
//
// memory-fraction: value / total_memory_bytes
// log:             ln(value)
// linear:          (value - min) / (max - min)
// categorical:     index of the label in the declared category list

inline double encode_value(const KnobSpec& spec, const KnobValue& value, const Hardware& hw) {
    if (spec.kind == KnobKind::Categorical) {
        const auto& label = std::get<std::string>(value);
        auto it = std::find(spec.categories.begin(), spec.categories.end(), label);
        if (it == spec.categories.end())
            throw DomainError("label '" + label + "' not in categories of " + spec.name);
        return static_cast<double>(it - spec.categories.begin());
    }
    double x = std::get<double>(value);
    switch (spec.scale) {
        case KnobScale::MemoryFraction:
            if (hw.total_memory_bytes <= 0) throw DomainError("total_memory_bytes must be > 0");
            return x / static_cast<double>(hw.total_memory_bytes);
        case KnobScale::Log:
            if (!(x > 0)) throw DomainError("log-scale value must be > 0 for " + spec.name);
            return std::log(x);
        case KnobScale::Linear:
        default:
            return spec.max > spec.min ? (x - spec.min) / (spec.max - spec.min) : 0.0;
    }
}

inline KnobValue decode_value(const KnobSpec& spec, double encoded, const Hardware& hw) {
    if (spec.kind == KnobKind::Categorical) {
        auto idx = static_cast<std::int64_t>(std::llround(encoded));
        idx = std::clamp<std::int64_t>(idx, 0, static_cast<std::int64_t>(spec.categories.size()) - 1);
        return spec.categories[static_cast<std::size_t>(idx)];
    }
    double x = 0.0;
    switch (spec.scale) {
        case KnobScale::MemoryFraction:
            x = encoded * static_cast<double>(hw.total_memory_bytes);
            break;
        case KnobScale::Log:
            x = std::exp(encoded);
            break;
        case KnobScale::Linear:
        default:
            x = spec.min + encoded * (spec.max - spec.min);
            break;
    }
    x = std::clamp(x, spec.min, spec.max);
    if (spec.kind == KnobKind::Integer || spec.kind == KnobKind::MemoryBytes)
        x = std::clamp(static_cast<double>(std::llround(x)), spec.min, spec.max);
    return x;
}

/// Width of the knob's domain in its encoded space.
inline double encoded_range(const KnobSpec& spec, const Hardware& hw) {
    if (spec.kind == KnobKind::Categorical)
        return static_cast<double>(spec.categories.size()) - 1.0;
    switch (spec.scale) {
        case KnobScale::MemoryFraction:
            return (spec.max - spec.min) / static_cast<double>(hw.total_memory_bytes);
        case KnobScale::Log:
            return std::log(spec.max) - std::log(spec.min);
        case KnobScale::Linear:
        default:
            return spec.max > spec.min ? 1.0 : 0.0;
    }
}

/// A single pair's encoded change of one knob, before discretization.
struct EncodedAdjustment {
    std::string knob;
    AdjustmentForm form = AdjustmentForm::Relative;
    Direction direction = Direction::Increase;
    double value = 0.0;  // relative: |delta| in encoded space; absolute: encoded target
};

namespace detail {

/// Cross-hardware variant: `from` is encoded against the worse record's
/// hardware and `to` against the better one's, so memory-fraction deltas stay
/// comparable across machine sizes.
inline std::vector<EncodedAdjustment> encode_adjustment_impl(const KnobSpec& spec,
                                                             const KnobValue& from,
                                                             const KnobValue& to,
                                                             const Hardware& hw_from,
                                                             const Hardware& hw_to) {
    if (from == to) throw DomainError("no-op adjustment for knob " + spec.name);
    if (!spec.in_domain(from) || !spec.in_domain(to))
        throw DomainError("adjustment endpoints outside domain of " + spec.name);
    std::vector<EncodedAdjustment> out;
    double e_to = encode_value(spec, to, hw_to);
    if (spec.kind != KnobKind::Categorical) {
        double e_from = encode_value(spec, from, hw_from);
        double delta = e_to - e_from;
        out.push_back({spec.name, AdjustmentForm::Relative,
                       delta > 0 ? Direction::Increase : Direction::Decrease, std::abs(delta)});
    }
    out.push_back({spec.name, AdjustmentForm::Absolute, Direction::Set, e_to});
    return out;
}

}  // namespace detail

/// Relative + absolute encodings of one knob change. Categorical knobs carry
/// only the absolute form; relative direction/magnitude has no meaning there.
inline std::vector<EncodedAdjustment> encode_adjustment(const KnobSpec& spec,
                                                        const KnobValue& from, const KnobValue& to,
                                                        const Hardware& hw) {
    return detail::encode_adjustment_impl(spec, from, to, hw, hw);
}

/// Both encoded forms of every knob whose value differs between two
/// configurations; feeds rule-hit checks and confidence counting.
inline std::map<std::string, AppliedAdjustment> applied_between(
    const std::map<std::string, KnobValue>& from_cfg, const std::map<std::string, KnobValue>& to_cfg,
    const std::map<std::string, KnobSpec>& specs, const Hardware& hw_from, const Hardware& hw_to) {
    std::map<std::string, AppliedAdjustment> out;
    for (const auto& [knob, to_value] : to_cfg) {
        auto fit = from_cfg.find(knob);
        if (fit == from_cfg.end() || fit->second == to_value) continue;
        auto sit = specs.find(knob);
        if (sit == specs.end()) throw DomainError("no spec for configured knob '" + knob + "'");
        const KnobSpec& spec = sit->second;
        AppliedAdjustment a;
        a.knob = knob;
        a.absolute_target = encode_value(spec, to_value, hw_to);
        if (spec.kind != KnobKind::Categorical) {
            double delta = a.absolute_target - encode_value(spec, fit->second, hw_from);
            a.direction = delta > 0 ? Direction::Increase : Direction::Decrease;
            a.relative_magnitude = std::abs(delta);
        } else {
            a.direction = Direction::Set;
            a.relative_magnitude = 0.0;
        }
        out.emplace(knob, std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Impact-aware discretization
//
// Greedy recursive binary splitting that minimizes the within-interval squared
// deviation of the impact variable, capped at max_intervals with min_support
// samples per interval. Split candidates are midpoints between consecutive
// distinct values, so boundaries never coincide with samples.

inline std::vector<double> discretize_impact(std::vector<std::pair<double, double>> samples,
                                             int max_intervals, std::int64_t min_support) {
    if (samples.empty()) throw DomainError("discretize_impact: no samples");
    if (max_intervals < 1) throw DomainError("discretize_impact: max_intervals must be >= 1");
    if (min_support < 1) min_support = 1;
    std::sort(samples.begin(), samples.end());

    const auto n = static_cast<std::int64_t>(samples.size());
    const double vmin = samples.front().first;
    const double vmax = samples.back().first;
    // Requested interval count infeasible under min_support: single interval.
    if (min_support * max_intervals > n || vmin == vmax) return {vmin, vmax};

    std::vector<double> pref(n + 1, 0.0), pref2(n + 1, 0.0);
    for (std::int64_t i = 0; i < n; ++i) {
        pref[i + 1] = pref[i] + samples[i].second;
        pref2[i + 1] = pref2[i] + samples[i].second * samples[i].second;
    }
    auto sse = [&](std::int64_t lo, std::int64_t hi) {  // samples [lo, hi)
        double s = pref[hi] - pref[lo];
        double s2 = pref2[hi] - pref2[lo];
        auto m = static_cast<double>(hi - lo);
        return s2 - s * s / m;
    };

    struct Segment {
        std::int64_t lo, hi;
    };
    std::vector<Segment> segments{{0, n}};
    std::vector<double> cuts;

    while (static_cast<int>(segments.size()) < max_intervals) {
        double best_gain = 0.0;
        std::size_t best_seg = 0;
        std::int64_t best_pos = -1;
        double best_boundary = 0.0;
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto [lo, hi] = segments[s];
            double base = sse(lo, hi);
            for (std::int64_t cut = lo + 1; cut < hi; ++cut) {
                // split only between distinct values, honoring min_support both sides
                if (samples[cut].first == samples[cut - 1].first) continue;
                if (cut - lo < min_support || hi - cut < min_support) continue;
                double gain = base - sse(lo, cut) - sse(cut, hi);
                double boundary = 0.5 * (samples[cut - 1].first + samples[cut].first);
                if (gain > best_gain + 1e-12 ||
                    (best_pos >= 0 && std::abs(gain - best_gain) <= 1e-12 &&
                     boundary < best_boundary)) {
                    best_gain = gain;
                    best_seg = s;
                    best_pos = cut;
                    best_boundary = boundary;
                }
            }
        }
        if (best_pos < 0 || !(best_gain > 1e-12)) break;  // zero variance left
        auto [lo, hi] = segments[best_seg];
        segments[best_seg] = {lo, best_pos};
        segments.insert(segments.begin() + static_cast<std::ptrdiff_t>(best_seg) + 1,
                        {best_pos, hi});
        cuts.push_back(best_boundary);
    }

    std::sort(cuts.begin(), cuts.end());
    std::vector<double> edges{vmin};
    edges.insert(edges.end(), cuts.begin(), cuts.end());
    edges.push_back(vmax);
    return edges;
}

inline std::size_t bucket_of(const std::vector<double>& edges, double v) {
    const std::size_t buckets = edges.size() - 1;
    for (std::size_t b = 0; b + 1 < buckets; ++b)
        if (v <= edges[b + 1]) return b;
    return buckets - 1;
}

/// Interval for a bucket. Bucket 0's lower edge is widened downward by a
/// relative epsilon so the minimum sample remains a member under the uniform
/// (lo, hi] semantics; otherwise rules could fail to match the observations
/// that produced them.
inline Interval bucket_interval(const std::vector<double>& edges, std::size_t bucket) {
    double lo = edges[bucket];
    double hi = edges[bucket + 1];
    if (bucket == 0) {
        double span = edges.back() - edges.front();
        double eps = std::max({span * 1e-9, std::abs(lo) * 1e-9, 1e-12});
        lo -= eps;
    }
    return Interval{lo, hi};
}

// ---------------------------------------------------------------------------
// Pairwise augmentation

struct AugmentedPair {
    std::string worse_id;
    std::string better_id;
    double improvement = 0.0;  // direction-aware relative improvement
    std::map<std::string, PredicateValue> predicates;  // worse record's context
    std::map<std::string, double> rates;               // worse record's rates
    std::vector<EncodedAdjustment> adjustments;        // worse -> better
};

/// All ordered pairs whose direction-aware relative improvement exceeds
/// min_improvement, each carrying the worse side's context and the encoded
/// adjustments toward the better side. Identical configurations yield nothing.
inline std::vector<AugmentedPair> augment_pairs(const std::vector<ObservationRecord>& history,
                                                const std::map<std::string, KnobSpec>& specs,
                                                double min_improvement) {
    if (history.size() < 2)
        throw DomainError("augment_pairs: need at least 2 observations, got " +
                          std::to_string(history.size()));
    if (!(min_improvement > 0)) throw DomainError("augment_pairs: min_improvement must be > 0");
    const auto& first = history.front().performance;
    for (const auto& h : history) {
        if (h.performance.metric_name != first.metric_name ||
            h.performance.direction != first.direction)
            throw DomainError("augment_pairs: mixed performance metrics in history (" +
                              first.metric_name + " vs " + h.performance.metric_name + ")");
    }

    std::vector<AugmentedPair> out;
    for (const auto& worse : history) {
        for (const auto& better : history) {
            if (&worse == &better) continue;
            double imp = relative_improvement(worse.performance.value, better.performance.value,
                                              first.direction);
            if (!(imp > min_improvement)) continue;
            if (worse.configuration == better.configuration) continue;

            AugmentedPair pair;
            pair.worse_id = worse.id;
            pair.better_id = better.id;
            pair.improvement = imp;
            pair.predicates = worse.context.workload_predicates;
            pair.rates = worse.context.function_rates;
            for (const auto& [knob, to_value] : better.configuration) {
                auto fit = worse.configuration.find(knob);
                if (fit == worse.configuration.end() || fit->second == to_value) continue;
                auto spec = specs.find(knob);
                if (spec == specs.end())
                    throw DomainError("augment_pairs: no spec for knob '" + knob + "'");
                auto encoded = detail::encode_adjustment_impl(spec->second, fit->second, to_value,
                                                              worse.context.hardware,
                                                              better.context.hardware);
                pair.adjustments.insert(pair.adjustments.end(), encoded.begin(), encoded.end());
            }
            if (pair.adjustments.empty()) continue;
            out.push_back(std::move(pair));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Encoded items and transactions

struct ContextItem {
    std::string name;
    PredicateValue value;
    bool operator==(const ContextItem&) const = default;
};
struct RateIntervalItem {
    std::string function;
    Interval interval;
    bool operator==(const RateIntervalItem&) const = default;
};
struct AdjustmentItem {
    KnobAdjustment adjustment;
    bool operator==(const AdjustmentItem&) const = default;
};

using EncodedItem = std::variant<ContextItem, RateIntervalItem, AdjustmentItem>;

inline std::string item_key(const EncodedItem& item) {
    if (std::holds_alternative<ContextItem>(item)) {
        const auto& c = std::get<ContextItem>(item);
        return predicate_key(WorkloadPredicate{c.name, c.value});
    }
    if (std::holds_alternative<RateIntervalItem>(item)) {
        const auto& r = std::get<RateIntervalItem>(item);
        return predicate_key(RatePredicate{r.function, r.interval});
    }
    return adjustment_key(std::get<AdjustmentItem>(item).adjustment);
}

struct Transaction {
    std::vector<EncodedItem> items;  // unique, sorted by item_key
    double improvement = 0.0;
    std::string worse_id;
    std::string better_id;
};

/// Discretizes rate and adjustment features across all pairs (using each
/// pair's improvement as the impact variable) and materializes transactions
/// of set-semantics encoded items.
inline std::vector<Transaction> encode_transactions(const std::vector<AugmentedPair>& pairs,
                                                    int max_intervals, std::int64_t min_support) {
    std::map<std::string, std::vector<std::pair<double, double>>> rate_samples;
    std::map<std::string, std::vector<std::pair<double, double>>> adj_samples;
    auto adj_group = [](const EncodedAdjustment& a) {
        return a.knob + "|" + (a.form == AdjustmentForm::Relative ? "rel" : "abs") + "|" +
               (a.direction == Direction::Increase   ? "inc"
                : a.direction == Direction::Decrease ? "dec"
                                                     : "set");
    };
    for (const auto& p : pairs) {
        for (const auto& [fn, rate] : p.rates) rate_samples[fn].push_back({rate, p.improvement});
        for (const auto& a : p.adjustments)
            adj_samples[adj_group(a)].push_back({a.value, p.improvement});
    }
    std::map<std::string, std::vector<double>> rate_edges;
    for (const auto& [fn, samples] : rate_samples)
        rate_edges[fn] = discretize_impact(samples, max_intervals, min_support);
    std::map<std::string, std::vector<double>> adj_edges;
    for (const auto& [group, samples] : adj_samples)
        adj_edges[group] = discretize_impact(samples, max_intervals, min_support);

    std::vector<Transaction> out;
    for (const auto& p : pairs) {
        std::map<std::string, EncodedItem> items;  // key -> item (set semantics)
        for (const auto& [name, value] : p.predicates) {
            EncodedItem item = ContextItem{name, value};
            items.emplace(item_key(item), item);
        }
        for (const auto& [fn, rate] : p.rates) {
            const auto& edges = rate_edges.at(fn);
            EncodedItem item = RateIntervalItem{fn, bucket_interval(edges, bucket_of(edges, rate))};
            items.emplace(item_key(item), item);
        }
        for (const auto& a : p.adjustments) {
            const auto& edges = adj_edges.at(adj_group(a));
            KnobAdjustment adj{a.knob, a.form, a.direction,
                               bucket_interval(edges, bucket_of(edges, a.value))};
            EncodedItem item = AdjustmentItem{adj};
            items.emplace(item_key(item), item);
        }
        Transaction t;
        t.improvement = p.improvement;
        t.worse_id = p.worse_id;
        t.better_id = p.better_id;
        for (auto& [_, item] : items) t.items.push_back(std::move(item));
        out.push_back(std::move(t));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Itemset mining over encoded items

struct MinedItemset {
    std::vector<EncodedItem> items;
    std::int64_t support_count = 0;
    double support = 0.0;
};

/// Targeted FP-Growth over encoded items: item ids are assigned in canonical
/// key order, the integer core does the mining, ids map back afterwards.
inline std::vector<MinedItemset> fp_growth_targeted_items(
    const std::vector<Transaction>& transactions, const std::set<std::string>& target_keys,
    double min_coverage, bool prune = true, fp::Stats* stats = nullptr,
    std::size_t max_items = 0) {
    std::map<std::string, int> key_to_id;
    std::vector<const EncodedItem*> id_to_item;
    for (const auto& t : transactions) {
        for (const auto& item : t.items) {
            auto [it, inserted] = key_to_id.emplace(item_key(item), 0);
            if (inserted) it->second = -1;
        }
    }
    {
        int next = 0;
        for (auto& [_, id] : key_to_id) id = next++;  // ids in canonical key order
    }
    id_to_item.assign(key_to_id.size(), nullptr);

    std::vector<std::vector<int>> encoded;
    for (const auto& t : transactions) {
        std::vector<int> row;
        for (const auto& item : t.items) {
            int id = key_to_id.at(item_key(item));
            id_to_item[static_cast<std::size_t>(id)] = &item;
            row.push_back(id);
        }
        encoded.push_back(std::move(row));
    }
    std::set<int> target;
    for (const auto& key : target_keys) {
        auto it = key_to_id.find(key);
        if (it != key_to_id.end()) target.insert(it->second);
    }
    std::vector<MinedItemset> out;
    if (target.empty()) return out;  // target absent from every transaction

    for (const auto& found :
         fp::fp_growth_targeted(encoded, target, min_coverage, prune, stats, max_items)) {
        MinedItemset m;
        m.support_count = found.support_count;
        m.support = found.support;
        for (int id : found.items) m.items.push_back(*id_to_item[static_cast<std::size_t>(id)]);
        out.push_back(std::move(m));
    }
    return out;
}

/// Adjustment-item keys present in the transactions; the mining target.
inline std::set<std::string> adjustment_target_keys(const std::vector<Transaction>& transactions) {
    std::set<std::string> keys;
    for (const auto& t : transactions)
        for (const auto& item : t.items)
            if (std::holds_alternative<AdjustmentItem>(item)) keys.insert(item_key(item));
    return keys;
}

// ---------------------------------------------------------------------------
// Rule derivation

/// Fraction of history observations whose context satisfies the antecedent.
/// An empty antecedent holds vacuously (coverage 1).
inline double compute_coverage(const TuningRule& rule,
                               const std::vector<ObservationRecord>& history) {
    if (history.empty()) throw DomainError("compute_coverage: empty history");
    std::size_t holds = 0;
    for (const auto& h : history)
        if (rule.matches(h.context)) ++holds;
    return static_cast<double>(holds) / static_cast<double>(history.size());
}

struct PairConfidence {
    std::int64_t trials = 0;     // pairs where antecedent held and consequent was applied
    std::int64_t successes = 0;  // of those, pairs that improved
    double improvement_sum = 0.0;
};

namespace detail {

/// Precomputed ordered-pair table so scoring many itemsets against the same
/// history does not re-encode every transition per rule.
struct PairTable {
    struct Entry {
        std::size_t from = 0;
        std::map<std::string, AppliedAdjustment> applied;
        double improvement = 0.0;  // direction-aware, signed
    };
    std::vector<Entry> entries;

    static PairTable build(const std::vector<ObservationRecord>& history,
                           const std::map<std::string, KnobSpec>& specs) {
        PairTable table;
        for (std::size_t i = 0; i < history.size(); ++i) {
            for (std::size_t j = 0; j < history.size(); ++j) {
                if (i == j || history[i].configuration == history[j].configuration) continue;
                Entry e;
                e.from = i;
                e.applied = applied_between(history[i].configuration, history[j].configuration,
                                            specs, history[i].context.hardware,
                                            history[j].context.hardware);
                e.improvement =
                    relative_improvement(history[i].performance.value,
                                         history[j].performance.value,
                                         history[i].performance.direction);
                table.entries.push_back(std::move(e));
            }
        }
        return table;
    }
};

inline PairConfidence pair_confidence_over(const TuningRule& rule,
                                           const std::vector<ObservationRecord>& history,
                                           const PairTable& table) {
    PairConfidence pc;
    std::vector<char> matches(history.size(), 2);  // lazy: 2 unknown, 0 no, 1 yes
    for (const auto& e : table.entries) {
        if (matches[e.from] == 2) matches[e.from] = rule.matches(history[e.from].context) ? 1 : 0;
        if (!matches[e.from]) continue;
        bool all = !rule.consequent.empty();
        for (const auto& adj : rule.consequent) {
            auto it = e.applied.find(adj.knob);
            if (it == e.applied.end() || !adjustment_matches(adj, it->second)) {
                all = false;
                break;
            }
        }
        if (!all) continue;
        pc.trials++;
        if (e.improvement > 0) {
            pc.successes++;
            pc.improvement_sum += e.improvement;
        }
    }
    return pc;
}

}  // namespace detail

/// Definitional confidence over ordered observation pairs: trials are pairs
/// where X held in the source record and Y matches the applied transition;
/// successes are the trials whose transition improved performance.
inline PairConfidence pair_confidence(const TuningRule& rule,
                                      const std::vector<ObservationRecord>& history,
                                      const std::map<std::string, KnobSpec>& specs) {
    return detail::pair_confidence_over(rule, history, detail::PairTable::build(history, specs));
}

namespace detail {

/// A context itemset adding no support constraint over a smaller one is
/// redundant: keep, per consequent, only antecedents no proper subset of
/// which reaches the same support (minimal generators). This collapses the
/// power sets produced when several transactions share a whole context.
inline bool has_equal_support_subset(
    const std::vector<std::string>& context_keys, const std::string& consequent_key,
    std::int64_t support,
    const std::map<std::string, std::int64_t>& support_by_key) {
    const std::size_t n = context_keys.size();
    if (n == 0 || n > 20) return false;
    for (std::uint64_t mask = 0; mask + 1 < (std::uint64_t{1} << n); ++mask) {
        std::string key;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1) key += context_keys[i] + '\x1f';
        key += consequent_key;
        auto it = support_by_key.find(key);
        if (it != support_by_key.end() && it->second == support) return true;
    }
    return false;
}

}  // namespace detail

/// Splits each itemset into antecedent/consequent, scores it against the
/// history and keeps rules meeting min_confidence. Mining-time statistics are
/// recorded both as the counters and as mined_confidence. Redundant rules
/// whose context predicates only restate an equally-supported smaller rule
/// with the same consequent are dropped.
inline std::vector<TuningRule> derive_rules(const std::vector<MinedItemset>& itemsets,
                                            const std::vector<ObservationRecord>& history,
                                            const std::map<std::string, KnobSpec>& specs,
                                            double min_confidence) {
    std::vector<TuningRule> rules;
    std::set<std::string> seen;
    const auto pair_table = detail::PairTable::build(history, specs);

    struct Split {
        TuningRule rule;
        std::vector<std::string> context_keys;  // sorted
        std::string consequent_key;
        std::int64_t support = 0;
    };
    std::vector<Split> splits;
    std::map<std::string, std::int64_t> support_by_key;
    for (const auto& itemset : itemsets) {
        Split s;
        s.support = itemset.support_count;
        std::vector<std::string> ckeys;
        for (const auto& item : itemset.items) {
            if (std::holds_alternative<ContextItem>(item)) {
                const auto& c = std::get<ContextItem>(item);
                s.rule.antecedent.push_back(WorkloadPredicate{c.name, c.value});
                s.context_keys.push_back(item_key(item));
            } else if (std::holds_alternative<RateIntervalItem>(item)) {
                const auto& r = std::get<RateIntervalItem>(item);
                s.rule.antecedent.push_back(RatePredicate{r.function, r.interval});
                s.context_keys.push_back(item_key(item));
            } else {
                s.rule.consequent.push_back(std::get<AdjustmentItem>(item).adjustment);
                ckeys.push_back(item_key(item));
            }
        }
        if (s.rule.consequent.empty()) continue;  // targeting guarantees this never fires
        std::sort(s.context_keys.begin(), s.context_keys.end());
        std::sort(ckeys.begin(), ckeys.end());
        for (const auto& k : ckeys) s.consequent_key += k + '\x1e';
        std::string full_key;
        for (const auto& k : s.context_keys) full_key += k + '\x1f';
        full_key += s.consequent_key;
        support_by_key.emplace(full_key, s.support);
        splits.push_back(std::move(s));
    }

    for (auto& s : splits) {
        if (detail::has_equal_support_subset(s.context_keys, s.consequent_key, s.support,
                                             support_by_key))
            continue;
        TuningRule& rule = s.rule;
        rule.id = rule_content_id(rule.antecedent, rule.consequent);
        if (!seen.insert(rule.id).second) continue;
        rule.coverage = compute_coverage(rule, history);
        PairConfidence pc = detail::pair_confidence_over(rule, history, pair_table);
        if (pc.trials == 0) continue;
        rule.trial_count = pc.trials;
        rule.success_count = pc.successes;
        rule.improvement_sum = pc.improvement_sum;
        rule.mined_confidence =
            static_cast<double>(pc.successes) / static_cast<double>(pc.trials);
        if (rule.mined_confidence < min_confidence) continue;
        rules.push_back(std::move(rule));
    }
    std::sort(rules.begin(), rules.end(),
              [](const TuningRule& a, const TuningRule& b) { return a.id < b.id; });
    return rules;
}

// ---------------------------------------------------------------------------
// End-to-end mining

struct MiningOptions {
    double min_improvement = 0.05;
    double min_coverage = 0.05;
    double min_confidence = 0.7;
    int max_intervals = 5;
    std::int64_t min_support = 3;
    // Rules beyond a handful of items never generalize; the cap keeps the
    // itemset lattice from exploding when transactions share whole contexts.
    std::size_t max_rule_items = 5;
};

struct MiningReport {
    std::size_t history_size = 0;
    std::size_t pair_count = 0;
    std::size_t transaction_count = 0;
    std::size_t distinct_items = 0;
    std::size_t target_items = 0;
    std::size_t frequent_itemsets = 0;
    std::size_t rules_kept = 0;
    std::int64_t conditional_trees = 0;
};

inline std::vector<TuningRule> mine_rules(const std::vector<ObservationRecord>& history,
                                          const std::map<std::string, KnobSpec>& specs,
                                          const MiningOptions& options,
                                          MiningReport* report = nullptr) {
    for (const auto& h : history)
        throw_if_invalid(validate_observation(h, specs), "invalid observation '" + h.id + "'");

    MiningReport local;
    local.history_size = history.size();
    auto pairs = augment_pairs(history, specs, options.min_improvement);
    local.pair_count = pairs.size();

    std::vector<TuningRule> rules;
    if (!pairs.empty()) {
        auto transactions = encode_transactions(pairs, options.max_intervals, options.min_support);
        local.transaction_count = transactions.size();
        std::set<std::string> keys;
        for (const auto& t : transactions)
            for (const auto& item : t.items) keys.insert(item_key(item));
        local.distinct_items = keys.size();
        auto target = adjustment_target_keys(transactions);
        local.target_items = target.size();
        // Single-occurrence itemsets generalize nothing: the effective support
        // floor is two transactions even when min_coverage * n falls below it.
        double effective_coverage = options.min_coverage;
        if (transactions.size() > 1) {
            effective_coverage =
                std::max(effective_coverage, 2.0 / static_cast<double>(transactions.size()));
        }
        fp::Stats stats;
        auto itemsets = fp_growth_targeted_items(transactions, target, effective_coverage, true,
                                                 &stats, options.max_rule_items);
        local.frequent_itemsets = itemsets.size();
        local.conditional_trees = stats.conditional_trees;
        rules = derive_rules(itemsets, history, specs, options.min_confidence);
    }
    local.rules_kept = rules.size();
    if (report) *report = local;
    return rules;
}

}  // namespace knobtune
