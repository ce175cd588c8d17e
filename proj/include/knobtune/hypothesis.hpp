#pragma once

// Hypothesis store, rule-augmented prompt generation and the pluggable
// configuration advisor. The default advisor is a deterministic stub:
// exploit the top-ranked rule's consequent at interval midpoints, otherwise
// explore along triggered hypothesis directions. A remote JSON advisor can
// be swapped in; invalid or late replies fall back to the stub.

#include <sstream>

#include "knobtune/mining.hpp"
#include "knobtune/rulebook.hpp"
#include "knobtune/types.hpp"

namespace knobtune {

struct HypothesisStore {
    std::vector<Hypothesis> hypotheses;
};

inline HypothesisStore load_hypothesis_store(const std::filesystem::path& path) {
    return HypothesisStore{load_hypotheses(path)};
}

/// Hypotheses whose knob is selected and whose function set intersects the
/// flagged functions, ordered by intersection size descending (ties by knob
/// name, then declaration order).
inline std::vector<const Hypothesis*> retrieve_hypotheses(const HypothesisStore& store,
                                                          const std::set<std::string>& knobs,
                                                          const std::set<std::string>& functions) {
    std::vector<std::pair<std::size_t, const Hypothesis*>> scored;
    for (const auto& h : store.hypotheses) {
        if (!knobs.count(h.knob)) continue;
        std::size_t overlap = 0;
        for (const auto& f : h.functions)
            if (functions.count(f)) ++overlap;
        if (overlap == 0) continue;
        scored.push_back({overlap, &h});
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) {
                         if (a.first != b.first) return a.first > b.first;
                         return a.second->knob < b.second->knob;
                     });
    std::vector<const Hypothesis*> out;
    for (const auto& [_, h] : scored) out.push_back(h);
    return out;
}

// ---------------------------------------------------------------------------
// Prompt generation

struct PromptInputs {
    Hardware hardware;
    std::string workload_summary;
    std::vector<FlaggedFunction> bottlenecks;
    std::vector<std::string> selected_knobs;
};

inline constexpr std::size_t kCausalLinkLimit = 500;

/// Deterministic three-section prompt: task instruction, task information,
/// then hypotheses and rules (with confidence and EI). Byte-stable for
/// identical inputs; causal-link text is truncated at 500 characters.
inline std::string build_prompt(const PromptInputs& info,
                                const std::vector<const Hypothesis*>& hypotheses,
                                const std::vector<const TuningRule*>& rules) {
    std::ostringstream out;
    out << "## Task Instruction\n"
        << "You are a database tuning agent. Recommend one configuration change that improves\n"
        << "the observed performance. Exploit verified rules when they apply; otherwise explore\n"
        << "along the hypothesized directions. Reply with a configuration delta only.\n";

    out << "\n## Task Information\n";
    out << "hardware: total_memory_bytes=" << info.hardware.total_memory_bytes
        << " cores=" << info.hardware.cores << "\n";
    out << "workload: " << (info.workload_summary.empty() ? "(unspecified)" : info.workload_summary)
        << "\n";
    out << "bottleneck functions:";
    if (info.bottlenecks.empty()) out << " (none flagged)";
    out << "\n";
    for (const auto& b : info.bottlenecks)
        out << "  - " << b.function << " severity=" << format_double(b.severity) << "\n";
    out << "selected knobs:";
    if (info.selected_knobs.empty()) out << " (none)";
    out << "\n";
    for (const auto& k : info.selected_knobs) out << "  - " << k << "\n";

    out << "\n## Tuning Hypotheses and Rules\n";
    out << "hypotheses:";
    if (hypotheses.empty()) out << " (none retrieved)";
    out << "\n";
    for (const Hypothesis* h : hypotheses) {
        std::string causal = h->causal_link.substr(0, kCausalLinkLimit);
        out << "  - knob " << h->knob << ": " << causal << "\n";
        for (const auto& t : h->triggers) {
            out << "      when " << t.function << " is "
                << (t.signal == RateSignal::HighRate ? "high-rate" : "low-rate") << ", "
                << (t.direction == Direction::Increase   ? "increase"
                    : t.direction == Direction::Decrease ? "decrease"
                                                         : "set")
                << " " << h->knob << "\n";
        }
    }
    out << "rules:";
    if (rules.empty()) out << " no verified rules available";
    out << "\n";
    for (const TuningRule* r : rules) {
        out << "  - [" << r->id << "] " << describe_rule(*r)
            << " (confidence=" << format_double(r->effective_confidence())
            << ", ei=" << format_double(expected_improvement(*r)) << ")\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Advisors

struct AdvisorPolicy {
    double exploration_fraction = 0.25;  // of the encoded range, per step
    double high_rate_threshold = 0.10;
    double low_rate_threshold = 0.02;
};

/// Per-session exploration step scaling: halved after each consecutive
/// non-improving step for the same knob/direction, reset on improvement.
struct ExplorationState {
    std::map<std::pair<std::string, Direction>, double> factor;

    double of(const std::string& knob, Direction d) const {
        auto it = factor.find({knob, d});
        return it == factor.end() ? 1.0 : it->second;
    }
    void halve(const std::string& knob, Direction d) {
        factor[{knob, d}] = of(knob, d) * 0.5;
    }
    void reset(const std::string& knob, Direction d) { factor.erase({knob, d}); }
};

struct AdviceInputs {
    const std::map<std::string, KnobSpec>* specs = nullptr;
    const std::map<std::string, KnobValue>* current = nullptr;
    const ContextSnapshot* context = nullptr;
    std::vector<const TuningRule*> rules;         // ranked, possibly empty
    std::vector<const Hypothesis*> hypotheses;    // retrieval order
    std::vector<std::string> selected_knobs;
    const ExplorationState* exploration = nullptr;
};

struct ConfigDelta {
    std::map<std::string, KnobValue> changes;  // knob -> new value
    std::string policy;                        // "rule-exploit" | "hypothesis-explore" | "no-op"
    std::string rule_id;                       // when policy == rule-exploit
    std::vector<std::string> warnings;
};

namespace detail {

inline KnobValue current_value(const AdviceInputs& in, const KnobSpec& spec) {
    auto it = in.current->find(spec.name);
    return it != in.current->end() ? it->second : spec.default_value;
}

inline bool trigger_fires(const HypothesisTrigger& t, const ContextSnapshot& ctx,
                          const AdvisorPolicy& policy) {
    double rate = ctx.rate_of(t.function);
    return t.signal == RateSignal::HighRate ? rate >= policy.high_rate_threshold
                                            : rate <= policy.low_rate_threshold;
}

}  // namespace detail

/// Deterministic stub policy. With rules: apply the top rule's consequent at
/// each interval's midpoint in encoded space. Without rules: for each selected
/// knob whose hypothesis has a fired trigger, move exploration_fraction of the
/// encoded range in the trigger's direction. Everything is clamped to domain.
inline ConfigDelta advise_stub(const AdviceInputs& in, const AdvisorPolicy& policy) {
    ConfigDelta delta;
    const Hardware& hw = in.context->hardware;

    if (!in.rules.empty()) {
        const TuningRule& rule = *in.rules.front();
        delta.policy = "rule-exploit";
        delta.rule_id = rule.id;
        for (const auto& adj : rule.consequent) {
            auto sit = in.specs->find(adj.knob);
            if (sit == in.specs->end()) {
                delta.warnings.push_back("rule " + rule.id + " names unknown knob " + adj.knob);
                continue;
            }
            const KnobSpec& spec = sit->second;
            KnobValue cur = detail::current_value(in, spec);
            double e_cur = encode_value(spec, cur, hw);
            double mid = adj.magnitude_interval.midpoint();
            double e_new = e_cur;
            switch (adj.direction) {
                case Direction::Increase: e_new = e_cur + mid; break;
                case Direction::Decrease: e_new = e_cur - mid; break;
                case Direction::Set: e_new = mid; break;
            }
            KnobValue next = decode_value(spec, e_new, hw);
            if (!(next == cur)) delta.changes[adj.knob] = next;
        }
        if (delta.changes.empty()) delta.policy = "no-op";
        return delta;
    }

    // Hypothesis-guided exploration: first fired trigger per knob wins.
    for (const auto& knob : in.selected_knobs) {
        auto sit = in.specs->find(knob);
        if (sit == in.specs->end()) continue;
        const KnobSpec& spec = sit->second;
        if (spec.kind == KnobKind::Categorical) continue;  // no direction semantics
        const HypothesisTrigger* fired = nullptr;
        for (const Hypothesis* h : in.hypotheses) {
            if (h->knob != knob) continue;
            for (const auto& t : h->triggers) {
                if (!detail::trigger_fires(t, *in.context, policy)) continue;
                if (!fired) {
                    fired = &t;
                } else if (fired->direction != t.direction) {
                    delta.warnings.push_back("conflicting fired triggers for " + knob +
                                             "; keeping the first");
                }
            }
        }
        if (!fired) continue;
        double factor = in.exploration ? in.exploration->of(knob, fired->direction) : 1.0;
        double step = policy.exploration_fraction * factor * encoded_range(spec, hw);
        if (!(step > 0)) continue;
        KnobValue cur = detail::current_value(in, spec);
        double e_cur = encode_value(spec, cur, hw);
        double e_new = fired->direction == Direction::Increase ? e_cur + step : e_cur - step;
        KnobValue next = decode_value(spec, e_new, hw);
        if (!(next == cur)) delta.changes[knob] = next;
    }
    delta.policy = delta.changes.empty() ? "no-op" : "hypothesis-explore";
    return delta;
}

// ---------------------------------------------------------------------------
// Remote advisor wire schema
//
// Request:  { "schema_version": 1, "prompt": "...", "knobs": [KnobSpec...],
//             "configuration": {knob: value}, "reply_schema": {...} }
// Response: { "configuration": {knob: value} }
//
// Endpoint comes from the KNOBTUNE_ADVISOR_URL environment variable or the
// CLI flag; one request per advice, strict validation, stub fallback.

inline json advisor_request_body(const std::string& prompt, const AdviceInputs& in) {
    json knobs = json::array();
    for (const auto& [_, spec] : *in.specs) knobs.push_back(to_json(spec));
    json cfg = json::object();
    for (const auto& [k, v] : *in.current) cfg[k] = to_json(v);
    return json{{"schema_version", kSchemaVersion},
                {"prompt", prompt},
                {"knobs", knobs},
                {"configuration", cfg},
                {"reply_schema",
                 {{"configuration", "map of knob name to in-domain value"}}}};
}

/// Validates a remote reply against the knob domains. Unknown knobs or
/// malformed values invalidate the reply (caller falls back to the stub);
/// out-of-domain numeric values are clamped with a warning.
inline std::optional<ConfigDelta> parse_advisor_reply(const json& reply, const AdviceInputs& in) {
    if (!reply.is_object() || !reply.contains("configuration") ||
        !reply.at("configuration").is_object())
        return std::nullopt;
    ConfigDelta delta;
    delta.policy = "remote";
    for (const auto& [knob, value] : reply.at("configuration").items()) {
        auto sit = in.specs->find(knob);
        if (sit == in.specs->end()) return std::nullopt;
        const KnobSpec& spec = sit->second;
        KnobValue v;
        try {
            v = knob_value_from_json(value);
        } catch (const std::exception&) {
            return std::nullopt;
        }
        if (!spec.in_domain(v)) {
            if (spec.numeric() && std::holds_alternative<double>(v)) {
                delta.warnings.push_back("clamped out-of-domain reply for " + knob);
                v = std::clamp(std::get<double>(v), spec.min, spec.max);
            } else {
                return std::nullopt;
            }
        }
        KnobValue cur = detail::current_value(in, spec);
        if (!(v == cur)) delta.changes[knob] = v;
    }
    if (delta.changes.empty()) delta.policy = "no-op";
    return delta;
}

}  // namespace knobtune
