#include "c3f/types.hpp"

#include <cmath>
#include <cstdlib>

#include "c3f/common.hpp"

namespace c3f {

double CalibrationRecord::numeric_label() const {
    if (!label) throw Error("record '" + id + "' has no label");
    char* end = nullptr;
    double v = std::strtod(label->c_str(), &end);
    if (!end || *end != '\0' || label->empty() || !std::isfinite(v)) {
        throw Error("record '" + id + "' has non-numeric label '" + *label + "'");
    }
    return v;
}

void RunConfig::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw Error("config: alpha must lie in (0,1)");
    }
    if (!(delta > 0.0 && delta < 1.0)) {
        throw Error("config: delta must lie in (0,1)");
    }
    if (lambda < 0.0 || !std::isfinite(lambda)) {
        throw Error("config: lambda must be finite and >= 0");
    }
    if (lambda > 0.0 && !scm.has_value()) {
        throw Error("config: lambda > 0 requires an scm");
    }
    if (weight_clip && !(*weight_clip > 0.0)) {
        throw Error("config: weight_clip must be positive");
    }
    if (budget_scheme == BudgetScheme::explicit_table) {
        if (budgets.empty()) throw Error("config: explicit budget scheme needs a budgets table");
        if (pi.empty()) throw Error("config: explicit budget scheme needs a pi table");
        double total_pi = 0.0;
        double weighted = 0.0;
        for (const auto& [g, pa] : pi) {
            auto it = budgets.find(g);
            if (it == budgets.end()) throw Error("config: pi entry for group '" + g + "' has no budget");
            if (!(it->second > 0.0 && it->second < 1.0)) {
                throw Error("config: budget for group '" + g + "' must lie in (0,1)");
            }
            total_pi += pa;
            weighted += pa * it->second;
        }
        if (budgets.size() != pi.size()) {
            throw Error("config: budgets and pi must cover the same groups");
        }
        if (std::abs(total_pi - 1.0) > 1e-9) {
            throw Error("config: explicit pi must sum to 1");
        }
        if (std::abs(weighted - alpha) > 1e-9) {
            throw Error("config: explicit budgets violate sum_a pi_a * alpha_a = alpha");
        }
    }
    if (scm) scm->validate();
}

double ThresholdSet::threshold(const std::string& group, bool regularized) const {
    const auto& table = regularized ? q_reg : q_raw;
    auto it = table.find(group);
    if (it == table.end()) throw Error("no threshold for group '" + group + "'");
    return it->second;
}

double PredictionSet::width() const {
    if (unbounded) return kInf;
    if (kind == Kind::label_set) return static_cast<double>(labels.size());
    if (!invertible || empty) return 0.0;
    return hi - lo;
}

}  // namespace c3f
