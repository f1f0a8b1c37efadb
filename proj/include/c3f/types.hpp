// Core domain types shared across the library.
#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c3f/common.hpp"
#include "c3f/scm.hpp"

namespace c3f {

// One calibration or test example. Exactly one of {group, posterior} is set.
struct CalibrationRecord {
    std::string id;
    std::optional<std::string> group;
    std::map<std::string, double> posterior;     // group -> p(A=a|x), sums to 1
    std::optional<double> score;                 // nonconformity, finite
    std::vector<double> covariates;
    std::optional<double> weight;                // precomputed importance weight, > 0
    std::optional<std::string> label;            // raw text; numeric for regression
    std::optional<double> pred;                  // base model prediction f(x)
    std::map<std::string, double> label_scores;  // per-label score (classification)

    bool soft() const { return !group.has_value(); }
    double numeric_label() const;                // throws if absent or non-numeric
};

enum class BudgetScheme { uniform, scaled, explicit_table };
enum class RegularizerSign { descent, as_written };
enum class WeightSource { provided, estimate, unit };
enum class Task { regression, classification };

struct RunConfig {
    double alpha = 0.1;
    double delta = 0.1;
    BudgetScheme budget_scheme = BudgetScheme::uniform;
    std::map<std::string, double> budgets;       // explicit per-group alpha_a
    std::map<std::string, double> pi;            // explicit per-group pi_a
    double lambda = 0.0;
    RegularizerSign regularizer_sign = RegularizerSign::descent;
    WeightSource weight_source = WeightSource::unit;
    std::optional<double> weight_clip;
    bool finite_sample_correction = false;
    Task task = Task::regression;
    std::optional<ScmSpec> scm;
    std::uint64_t seed = 0;
    std::vector<std::string> groups;             // declared in addition to data

    void validate() const;                       // throws Error on violations
};

// Per-group conformal thresholds plus the quantities the bounds need.
struct ThresholdSet {
    std::vector<std::string> groups;             // sorted
    std::map<std::string, double> q_raw;         // weighted (1-alpha_a) quantile
    std::map<std::string, double> q_reg;         // lambda-regularized threshold
    std::map<std::string, double> n;             // group size (real-valued in soft mode)
    std::map<std::string, double> alpha_a;       // per-group miscoverage budget
    std::map<std::string, double> b_hat;         // second-moment statistic
    double lambda = 0.0;
    double alpha = 0.0;
    double delta = 0.0;

    double threshold(const std::string& group, bool regularized) const;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

struct PredictionSet {
    enum class Kind { interval, label_set };
    Kind kind = Kind::interval;
    std::string point_id;
    double mixed_threshold = 0.0;
    // Regression interval; not meaningful when invertible == false.
    double lo = 0.0;
    double hi = 0.0;
    bool invertible = true;       // false when the score form cannot be inverted
    bool unbounded = false;       // threshold was +inf
    bool empty = false;           // no label attains the threshold
    std::vector<std::string> labels;

    double width() const;         // interval width or label count; inf if unbounded
};

// Counterfactual coverage disparity, smoothed and hard, with its gradient
// in the per-group thresholds.
struct CfDisparity {
    double value = 0.0;           // max over ordered pairs, smoothed indicator
    double hard_value = 0.0;      // same with hard indicator
    std::map<std::pair<std::string, std::string>, double> pair_smoothed;
    std::map<std::pair<std::string, std::string>, double> pair_hard;
    std::map<std::string, double> gradient;
    double fd_step = 0.0;
    double temperature = 0.0;
};

struct CoverageReport {
    std::map<std::string, double> coverage;      // per-group empirical coverage
    std::map<std::string, double> n;             // per-group (effective) test count
    double eccg = 0.0;
    double mean_set_size = 0.0;
    std::size_t infinite_sets = 0;
    std::size_t empty_sets = 0;
    std::optional<CfDisparity> cf_disparity;
    std::map<std::string, double> coverage_bound;
    double eccg_bound = 0.0;
    std::map<std::string, bool> violation;       // empirical strictly below bound
    bool soft_groups = false;                    // posterior-weighted estimator used
};

}  // namespace c3f
