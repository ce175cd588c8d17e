#pragma once

// Function-knob map construction: taint propagation over a declarative
// dependency graph. Data edges propagate a knob's anchor variable to the
// set of related variables; control edges attach functions to variables
// with an explicit or implicit dependency kind.
//
// The graph is ingested from a file rather than extracted from compiler IR;
// a graph file lists variables, functions, knob anchors and typed edges.
// Only declared control-edge targets enter the map, not the functions that
// merely contain the controlling statement (the file format docs call this
// out, since static analyzers differ on it).

#include <deque>

#include "knobtune/json_io.hpp"
#include "knobtune/types.hpp"

namespace knobtune {

enum class DataEdgeKind { Assignment, Parameter, Return, Conditional };
enum class ControlKind { Explicit, Implicit };

namespace detail {
template <>
struct EnumNames<DataEdgeKind> {
    static constexpr std::pair<DataEdgeKind, const char*> values[] = {
        {DataEdgeKind::Assignment, "assignment"},
        {DataEdgeKind::Parameter, "parameter"},
        {DataEdgeKind::Return, "return"},
        {DataEdgeKind::Conditional, "conditional"}};
};
template <>
struct EnumNames<ControlKind> {
    static constexpr std::pair<ControlKind, const char*> values[] = {
        {ControlKind::Explicit, "explicit"}, {ControlKind::Implicit, "implicit"}};
};
}  // namespace detail

struct DependencyGraph {
    struct DataEdge {
        std::string from;
        std::string to;
        DataEdgeKind kind = DataEdgeKind::Assignment;
    };
    struct ControlEdge {
        std::string var;
        std::string function;
        ControlKind kind = ControlKind::Explicit;
    };

    std::set<std::string> variables;
    std::set<std::string> functions;
    std::map<std::string, std::string> knob_anchors;  // knob -> initial variable
    std::vector<DataEdge> data_edges;
    std::vector<ControlEdge> control_edges;
};

inline std::vector<ValidationError> check_graph(const DependencyGraph& g) {
    std::vector<ValidationError> errs;
    for (const auto& e : g.data_edges) {
        if (!g.variables.count(e.from))
            errs.push_back({"data_edges." + e.from, "unknown source variable"});
        if (!g.variables.count(e.to))
            errs.push_back({"data_edges." + e.to, "unknown target variable"});
    }
    for (const auto& e : g.control_edges) {
        if (!g.variables.count(e.var))
            errs.push_back({"control_edges." + e.var, "unknown variable"});
        if (!g.functions.count(e.function))
            errs.push_back({"control_edges." + e.function, "unknown function"});
    }
    for (const auto& [knob, var] : g.knob_anchors) {
        if (!g.variables.count(var))
            errs.push_back({"knob_anchors." + knob, "anchor variable '" + var + "' not declared"});
    }
    return errs;
}

/// Transitive closure of data edges reachable from the knob's anchor,
/// anchor included. All data-edge kinds propagate identically.
inline std::set<std::string> propagate_taint(const DependencyGraph& g, const std::string& knob) {
    auto anchor = g.knob_anchors.find(knob);
    if (anchor == g.knob_anchors.end())
        throw DomainError("knob '" + knob + "' has no anchor variable in the graph");

    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : g.data_edges) adj[e.from].push_back(e.to);

    std::set<std::string> tainted{anchor->second};
    std::deque<std::string> work{anchor->second};
    while (!work.empty()) {
        std::string v = work.front();
        work.pop_front();
        auto it = adj.find(v);
        if (it == adj.end()) continue;
        for (const auto& next : it->second) {
            if (tainted.insert(next).second) work.push_back(next);
        }
    }
    return tainted;
}

/// Functions with a control edge from any tainted variable. When several
/// edges reach the same function, explicit wins over implicit.
inline std::map<std::string, ControlKind> controlled_functions(
    const DependencyGraph& g, const std::set<std::string>& tainted) {
    std::map<std::string, ControlKind> out;
    for (const auto& e : g.control_edges) {
        if (!tainted.count(e.var)) continue;
        auto [it, inserted] = out.emplace(e.function, e.kind);
        if (!inserted && e.kind == ControlKind::Explicit) it->second = ControlKind::Explicit;
    }
    return out;
}

struct FunctionKnobMap {
    // function -> knob -> dependency kind
    std::map<std::string, std::map<std::string, ControlKind>> by_function;
    // knob -> functions
    std::map<std::string, std::set<std::string>> by_knob;

    /// Exact-transpose check over the (knob, function) pair sets; knobs that
    /// control nothing keep an empty by_knob row and carry no pairs.
    bool transpose_consistent() const {
        std::map<std::string, std::set<std::string>> rebuilt;
        for (const auto& [fn, knobs] : by_function)
            for (const auto& [knob, _] : knobs) rebuilt[knob].insert(fn);
        std::map<std::string, std::set<std::string>> nonempty;
        for (const auto& [knob, fns] : by_knob)
            if (!fns.empty()) nonempty.emplace(knob, fns);
        return rebuilt == nonempty;
    }

    std::set<std::string> knobs_for(const std::string& function) const {
        std::set<std::string> out;
        auto it = by_function.find(function);
        if (it == by_function.end()) return out;
        for (const auto& [knob, _] : it->second) out.insert(knob);
        return out;
    }
};

struct MapBuildResult {
    FunctionKnobMap map;
    std::vector<std::string> skipped_knobs;  // listed without an anchor
};

inline MapBuildResult build_function_knob_map(const DependencyGraph& g,
                                              const std::vector<std::string>& knobs) {
    MapBuildResult result;
    for (const auto& knob : knobs) {
        if (!g.knob_anchors.count(knob)) {
            result.skipped_knobs.push_back(knob);
            continue;
        }
        auto tainted = propagate_taint(g, knob);
        for (const auto& [fn, kind] : controlled_functions(g, tainted)) {
            auto [it, inserted] = result.map.by_function[fn].emplace(knob, kind);
            if (!inserted && kind == ControlKind::Explicit) it->second = ControlKind::Explicit;
            result.map.by_knob[knob].insert(fn);
        }
        // Knobs controlling nothing still appear, with an empty function set.
        result.map.by_knob.emplace(knob, std::set<std::string>{});
    }
    return result;
}

inline std::vector<std::string> anchored_knobs(const DependencyGraph& g) {
    std::vector<std::string> out;
    for (const auto& [knob, _] : g.knob_anchors) out.push_back(knob);
    return out;
}

// --- graph and map files -------------------------------------------------------

inline DependencyGraph graph_from_json(const json& j) {
    DependencyGraph g;
    for (const auto& v : j.at("variables")) g.variables.insert(v.get<std::string>());
    for (const auto& f : j.at("functions")) g.functions.insert(f.get<std::string>());
    for (const auto& [knob, var] : j.at("knob_anchors").items())
        g.knob_anchors[knob] = var.get<std::string>();
    for (const auto& e : j.at("data_edges")) {
        g.data_edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                                enum_value<DataEdgeKind>(e.at("kind").get<std::string>())});
    }
    for (const auto& e : j.at("control_edges")) {
        g.control_edges.push_back({e.at("var").get<std::string>(),
                                   e.at("function").get<std::string>(),
                                   enum_value<ControlKind>(e.at("kind").get<std::string>())});
    }
    throw_if_invalid(check_graph(g), "invalid dependency graph");
    return g;
}

inline DependencyGraph load_graph(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    require_schema_version(j, path);
    return graph_from_json(j);
}

inline json to_json(const FunctionKnobMap& m) {
    json by_function = json::object();
    for (const auto& [fn, knobs] : m.by_function) {
        json entries = json::array();
        for (const auto& [knob, kind] : knobs)
            entries.push_back(json{{"knob", knob}, {"kind", enum_name(kind)}});
        by_function[fn] = entries;
    }
    json by_knob = json::object();
    for (const auto& [knob, fns] : m.by_knob) by_knob[knob] = fns;
    return json{{"schema_version", kSchemaVersion},
                {"by_function", by_function},
                {"by_knob", by_knob}};
}

inline FunctionKnobMap map_from_json(const json& j) {
    FunctionKnobMap m;
    for (const auto& [fn, entries] : j.at("by_function").items()) {
        for (const auto& e : entries) {
            m.by_function[fn][e.at("knob").get<std::string>()] =
                enum_value<ControlKind>(e.at("kind").get<std::string>());
        }
    }
    for (const auto& [knob, fns] : j.at("by_knob").items()) {
        auto& set = m.by_knob[knob];
        for (const auto& f : fns) set.insert(f.get<std::string>());
    }
    if (!m.transpose_consistent())
        throw ParseError("function-knob map by_function/by_knob are not transposes");
    return m;
}

inline FunctionKnobMap load_function_knob_map(const std::filesystem::path& path) {
    json j = parse_json_file(path);
    require_schema_version(j, path);
    return map_from_json(j);
}

inline void save_function_knob_map(const FunctionKnobMap& m, const std::filesystem::path& path) {
    atomic_write_file(path, to_json(m).dump(2) + "\n");
}

}  // namespace knobtune
