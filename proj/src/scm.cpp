#include "c3f/scm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

#include "c3f/common.hpp"

namespace c3f {

namespace {

bool has_node(const ScmSpec& scm, const std::string& name) {
    return std::find(scm.variables.begin(), scm.variables.end(), name) !=
           scm.variables.end();
}

}  // namespace

void ScmSpec::validate() const {
    if (variables.empty()) throw Error("scm: no variables declared");
    {
        std::set<std::string> seen;
        for (const auto& v : variables) {
            if (!seen.insert(v).second) throw Error("scm: duplicate variable '" + v + "'");
        }
    }
    if (!has_node(*this, attribute)) {
        throw Error("scm: attribute node '" + attribute + "' is not a declared variable");
    }
    for (const auto& e : edges) {
        if (!has_node(*this, e.from)) throw Error("scm: edge from unknown node '" + e.from + "'");
        if (!has_node(*this, e.to)) throw Error("scm: edge to unknown node '" + e.to + "'");
        if (!std::isfinite(e.coef)) {
            throw Error("scm: non-finite coefficient on edge " + e.from + " -> " + e.to);
        }
    }
    for (const auto& [node, scale] : noise_scale) {
        if (!has_node(*this, node)) throw Error("scm: noise scale for unknown node '" + node + "'");
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw Error("scm: noise scale for '" + node + "' must be positive and finite");
        }
    }
    topological_order();  // throws on cycles

    // Every unfair edge must exist and be reachable from the attribute.
    std::set<std::string> reachable{attribute};
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& e : edges) {
            if (reachable.count(e.from) && !reachable.count(e.to)) {
                reachable.insert(e.to);
                grew = true;
            }
        }
    }
    for (const auto& [from, to] : unfair_edges) {
        bool exists = false;
        for (const auto& e : edges) {
            if (e.from == from && e.to == to) { exists = true; break; }
        }
        if (!exists) throw Error("scm: unfair edge " + from + " -> " + to + " is not in the edge set");
        if (!reachable.count(from)) {
            throw Error("scm: unfair edge " + from + " -> " + to +
                        " does not lie on a path from the attribute");
        }
    }
}

std::vector<std::string> ScmSpec::topological_order() const {
    std::map<std::string, int> indegree;
    for (const auto& v : variables) indegree[v] = 0;
    for (const auto& e : edges) indegree[e.to]++;

    // Kahn's algorithm, visiting ready nodes in declaration order for
    // deterministic output.
    std::vector<std::string> order;
    std::vector<std::string> pending = variables;
    while (!pending.empty()) {
        bool advanced = false;
        for (auto it = pending.begin(); it != pending.end();) {
            if (indegree[*it] == 0) {
                order.push_back(*it);
                for (const auto& e : edges) {
                    if (e.from == *it) indegree[e.to]--;
                }
                it = pending.erase(it);
                advanced = true;
            } else {
                ++it;
            }
        }
        if (!advanced) throw Error("scm: edge set contains a cycle");
    }
    return order;
}

std::vector<const ScmEdge*> ScmSpec::parents_of(const std::string& node) const {
    std::vector<const ScmEdge*> result;
    for (const auto& e : edges) {
        if (e.to == node) result.push_back(&e);
    }
    return result;
}

bool ScmSpec::is_unfair(const std::string& from, const std::string& to) const {
    for (const auto& [f, t] : unfair_edges) {
        if (f == from && t == to) return true;
    }
    return false;
}

double ScmSpec::attribute_value(const std::string& group_label) const {
    auto it = levels.find(group_label);
    if (it != levels.end()) return it->second;
    char* end = nullptr;
    double v = std::strtod(group_label.c_str(), &end);
    if (end && *end == '\0' && !group_label.empty()) return v;
    throw Error("scm: no attribute level defined for group '" + group_label +
                "' and the label is not numeric");
}

}  // namespace c3f
