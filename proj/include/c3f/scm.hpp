// Linear-Gaussian structural causal model specification. Node values satisfy
//   x_v = sum_{p in parents(v)} coef(p,v) * x_p + u_v,   u_v ~ N(0, noise_v^2)
// with one node designated as the group attribute. A subset of edges can be
// marked unfair; those must lie on a directed path out of the attribute.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace c3f {

struct ScmEdge {
    std::string from;
    std::string to;
    double coef = 0.0;
};

struct ScmSpec {
    std::vector<std::string> variables;            // declaration order
    std::vector<ScmEdge> edges;
    std::map<std::string, double> noise_scale;     // per node, > 0; absent nodes default to 1
    std::string attribute;
    std::vector<std::pair<std::string, std::string>> unfair_edges;
    // Numeric value the attribute node takes for each group label. When
    // absent, labels that parse as numbers are used directly.
    std::map<std::string, double> levels;

    // Throws on cycles, unknown nodes, nonpositive noise, non-finite
    // coefficients, or unfair edges not reachable from the attribute.
    void validate() const;

    // Variables sorted so every parent precedes its children.
    std::vector<std::string> topological_order() const;

    std::vector<const ScmEdge*> parents_of(const std::string& node) const;

    bool is_unfair(const std::string& from, const std::string& to) const;

    double attribute_value(const std::string& group_label) const;
};

using NodeValues = std::map<std::string, double>;

}  // namespace c3f
