// Audit metrics: group coverage, equalized coverage gap, set-size efficiency,
// and assembly of the full coverage report with bound comparisons.
#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c3f/types.hpp"

namespace c3f {

// One evaluated test point: hard group or posterior, plus the coverage
// indicator.
struct Outcome {
    std::optional<std::string> group;
    std::map<std::string, double> posterior;
    bool covered = false;
};

// Per-group mean coverage. Soft records contribute p(a|x)-weighted
// indicators normalized by the total posterior mass; one-hot posteriors
// reduce to the hard estimator. Throws if a requested group is empty.
std::map<std::string, double> group_coverage(std::span<const Outcome> outcomes,
                                             const std::vector<std::string>& groups);

// Effective per-group counts (posterior mass; plain counts for hard groups).
std::map<std::string, double> group_counts(std::span<const Outcome> outcomes,
                                           const std::vector<std::string>& groups);

// Max minus min over group coverages (= max pairwise absolute gap).
double eccg(const std::map<std::string, double>& coverages);

struct Efficiency {
    double mean_size = 0.0;       // over bounded, invertible sets
    std::size_t infinite_sets = 0;
    std::size_t empty_sets = 0;
};

Efficiency efficiency(std::span<const PredictionSet> psets);

// Assembles the CoverageReport: empirical coverage, ECCG, efficiency,
// optional counterfactual disparity, theory bounds, and strict-inequality
// violation flags.
CoverageReport audit(const ThresholdSet& thresholds, std::span<const Outcome> outcomes,
                     std::span<const PredictionSet> psets,
                     const std::optional<CfDisparity>& cf = std::nullopt);

}  // namespace c3f
