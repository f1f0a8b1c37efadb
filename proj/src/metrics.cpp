#include "c3f/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "c3f/calibration.hpp"
#include "c3f/common.hpp"

namespace c3f {

namespace {

struct Tally {
    double mass = 0.0;
    double covered = 0.0;
};

std::map<std::string, Tally> tally_outcomes(std::span<const Outcome> outcomes,
                                            const std::vector<std::string>& groups) {
    std::map<std::string, Tally> tally;
    for (const auto& g : groups) tally[g];
    for (const auto& o : outcomes) {
        if (o.group) {
            auto it = tally.find(*o.group);
            if (it == tally.end()) throw Error("outcome for undeclared group '" + *o.group + "'");
            it->second.mass += 1.0;
            if (o.covered) it->second.covered += 1.0;
        } else {
            for (const auto& [g, p] : o.posterior) {
                auto it = tally.find(g);
                if (it == tally.end()) throw Error("outcome posterior over undeclared group '" + g + "'");
                it->second.mass += p;
                if (o.covered) it->second.covered += p;
            }
        }
    }
    return tally;
}

}  // namespace

std::map<std::string, double> group_coverage(std::span<const Outcome> outcomes,
                                             const std::vector<std::string>& groups) {
    auto tally = tally_outcomes(outcomes, groups);
    std::map<std::string, double> coverage;
    for (const auto& [g, t] : tally) {
        if (!(t.mass > 0.0)) throw Error("group '" + g + "' has no test points");
        coverage[g] = t.covered / t.mass;
    }
    return coverage;
}

std::map<std::string, double> group_counts(std::span<const Outcome> outcomes,
                                           const std::vector<std::string>& groups) {
    auto tally = tally_outcomes(outcomes, groups);
    std::map<std::string, double> counts;
    for (const auto& [g, t] : tally) counts[g] = t.mass;
    return counts;
}

double eccg(const std::map<std::string, double>& coverages) {
    if (coverages.empty()) throw Error("eccg: no groups");
    double lo = kInf, hi = -kInf;
    for (const auto& [g, c] : coverages) {
        (void)g;
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    return hi - lo;
}

Efficiency efficiency(std::span<const PredictionSet> psets) {
    if (psets.empty()) throw Error("efficiency: no prediction sets");
    Efficiency eff;
    double total = 0.0;
    std::size_t counted = 0;
    for (const auto& p : psets) {
        if (p.unbounded) {
            eff.infinite_sets++;
            continue;  // excluded from the mean to keep it finite
        }
        if (p.empty) eff.empty_sets++;
        total += p.width();
        counted++;
    }
    eff.mean_size = counted ? total / static_cast<double>(counted) : 0.0;
    return eff;
}

CoverageReport audit(const ThresholdSet& thresholds, std::span<const Outcome> outcomes,
                     std::span<const PredictionSet> psets,
                     const std::optional<CfDisparity>& cf) {
    CoverageReport report;
    report.coverage = group_coverage(outcomes, thresholds.groups);
    report.n = group_counts(outcomes, thresholds.groups);
    report.eccg = eccg(report.coverage);
    Efficiency eff = efficiency(psets);
    report.mean_set_size = eff.mean_size;
    report.infinite_sets = eff.infinite_sets;
    report.empty_sets = eff.empty_sets;
    report.cf_disparity = cf;
    for (const auto& g : thresholds.groups) {
        double bound = coverage_bound(thresholds.n.at(g), thresholds.b_hat.at(g),
                                      thresholds.groups.size(), thresholds.delta,
                                      thresholds.alpha_a.at(g));
        report.coverage_bound[g] = bound;
        report.violation[g] = report.coverage.at(g) < bound;  // strict
    }
    report.eccg_bound = eccg_bound(thresholds);
    for (const auto& o : outcomes) {
        if (!o.group) {
            report.soft_groups = true;
            break;
        }
    }
    return report;
}

}  // namespace c3f
