#pragma once

// Rulebook: stores tuning rules, retrieves them by antecedent matching,
// ranks by expected improvement and maintains confidence statistics from
// tuning feedback. Single-writer, multi-reader: one session owns updates,
// persisted snapshots are safe to inspect concurrently.

#include "knobtune/json_io.hpp"
#include "knobtune/types.hpp"

namespace knobtune {

struct Rulebook {
    std::vector<TuningRule> rules;

    const TuningRule* find(const std::string& id) const {
        for (const auto& r : rules)
            if (r.id == id) return &r;
        return nullptr;
    }
    TuningRule* find(const std::string& id) {
        for (auto& r : rules)
            if (r.id == id) return &r;
        return nullptr;
    }
};

/// Rules whose every antecedent predicate holds in the context: workload
/// predicates by equality, rate predicates by (lo, hi] membership with
/// absent functions counting as rate 0.
inline std::vector<const TuningRule*> match_rules(const Rulebook& book,
                                                  const ContextSnapshot& context) {
    std::vector<const TuningRule*> out;
    for (const auto& r : book.rules)
        if (r.matches(context)) out.push_back(&r);
    return out;
}

/// Mean observed gain times confidence; 0 for unverified or never-successful
/// rules. Algebraically improvement_sum / trial_count, computed as the
/// defining product.
inline double expected_improvement(const TuningRule& rule) {
    if (rule.trial_count <= 0 || rule.success_count <= 0) return 0.0;
    double mean_gain = rule.improvement_sum / static_cast<double>(rule.success_count);
    double confidence =
        static_cast<double>(rule.success_count) / static_cast<double>(rule.trial_count);
    return mean_gain * confidence;
}

/// Top-k by EI descending; ties by effective confidence descending, then id.
inline std::vector<const TuningRule*> rank_and_take(std::vector<const TuningRule*> rules,
                                                    std::size_t k) {
    if (k < 1) throw DomainError("rank_and_take: k must be >= 1");
    std::stable_sort(rules.begin(), rules.end(), [](const TuningRule* a, const TuningRule* b) {
        double ea = expected_improvement(*a);
        double eb = expected_improvement(*b);
        if (ea != eb) return ea > eb;
        double ca = a->effective_confidence();
        double cb = b->effective_confidence();
        if (ca != cb) return ca > cb;
        return a->id < b->id;
    });
    if (rules.size() > k) rules.resize(k);
    return rules;
}

/// Feedback update: among the relevant rules, the "hit" ones are those whose
/// every consequent adjustment matches the applied change. Hits get
/// trial_count += 1, plus success_count += 1 and improvement_sum += improvement
/// when the step improved. Non-hit rules are untouched.
inline void update_rule_stats(Rulebook& book, const std::vector<std::string>& relevant_ids,
                              const std::map<std::string, AppliedAdjustment>& applied,
                              bool improved, double improvement) {
    if (improved && !(improvement >= 0))
        throw DomainError("update_rule_stats: improvement must be >= 0 when improved");
    std::map<std::string, TuningRule*> index;
    for (auto& r : book.rules) index.emplace(r.id, &r);
    for (const auto& id : relevant_ids) {
        auto found = index.find(id);
        TuningRule* rule = found == index.end() ? nullptr : found->second;
        if (!rule) continue;
        bool hit = !rule->consequent.empty();
        for (const auto& adj : rule->consequent) {
            auto it = applied.find(adj.knob);
            if (it == applied.end() || !adjustment_matches(adj, it->second)) {
                hit = false;
                break;
            }
        }
        if (!hit) continue;
        rule->trial_count += 1;
        if (improved) {
            rule->success_count += 1;
            rule->improvement_sum += improvement;
        }
    }
}

// ---------------------------------------------------------------------------
// Persistence

inline json to_json(const Rulebook& book) {
    json rules = json::array();
    for (const auto& r : book.rules) rules.push_back(to_json(r));
    return json{{"schema_version", kSchemaVersion}, {"rules", rules}};
}

inline Rulebook rulebook_from_json(const json& j) {
    Rulebook book;
    std::set<std::string> ids;
    for (const auto& r : j.at("rules")) {
        TuningRule rule = rule_from_json(r);
        if (!ids.insert(rule.id).second)
            throw ParseError("duplicate rule id '" + rule.id + "' in rulebook");
        book.rules.push_back(std::move(rule));
    }
    return book;
}

inline Rulebook load_rulebook(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    require_schema_version(j, path);
    return rulebook_from_json(j);
}

/// Atomic write-temp-rename; long sessions rewrite the document after updates.
inline void save_rulebook(const Rulebook& book, const std::filesystem::path& path) {
    atomic_write_file(path, to_json(book).dump(2) + "\n");
}

/// Human-readable one-line rendering used by reports and `rules list`.
inline std::string describe_rule(const TuningRule& r) {
    std::string s;
    if (r.antecedent.empty()) {
        s += "(always)";
    } else {
        for (std::size_t i = 0; i < r.antecedent.size(); ++i) {
            if (i) s += " and ";
            s += predicate_key(r.antecedent[i]);
        }
    }
    s += " => ";
    for (std::size_t i = 0; i < r.consequent.size(); ++i) {
        if (i) s += ", ";
        s += adjustment_key(r.consequent[i]);
    }
    return s;
}

}  // namespace knobtune
