// Group-conditional importance-weighted conformal calibration.
//
// Thresholds are restricted to observed score values (plus an infinite
// sentinel); the infimum over the reals coincides with this on an empirical
// CDF. Tied scores are absorbed into a single CDF step.
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "c3f/common.hpp"
#include "c3f/types.hpp"

namespace c3f {

// Self-normalized weighted empirical CDF: sum_i w_i 1{s_i <= q} / sum_i w_i.
double weighted_ecdf(std::span<const double> scores, std::span<const double> weights,
                     double q);

// Smallest observed score whose weighted ECDF reaches `level`. With the
// finite-sample correction the level becomes min(1, level*(n+1)/n). Returns
// +inf when no score reaches the level.
double weighted_quantile(std::span<const double> scores, std::span<const double> weights,
                         double level, bool finite_sample_correction = false);

// Plain unweighted split-conformal threshold over a pooled sample; the
// marginal baseline for the evaluation protocol.
double pooled_threshold(std::span<const double> scores, double alpha,
                        bool finite_sample_correction = false);

// Per-group miscoverage budgets alpha_a subject to sum_a pi_a alpha_a = alpha
// with pi_a = n_a / n. `uniform` sets alpha_a = alpha for every group;
// `scaled` sets alpha_a = alpha * pi_a / sum_b pi_b^2; `explicit_table`
// validates and passes through the supplied table. Results are clamped to
// (1e-6, 1-1e-6) with a warning.
std::map<std::string, double> split_budget(double alpha,
                                           const std::vector<std::string>& groups,
                                           const std::map<std::string, double>& n_a,
                                           BudgetScheme scheme,
                                           const std::map<std::string, double>& explicit_alpha,
                                           const std::map<std::string, double>& explicit_pi,
                                           WarningLog* warnings = nullptr);

// One group's calibration sample: scores with matched weights. In soft mode
// the weights fold in the posterior and n is the effective (real) count.
struct GroupSample {
    std::vector<double> scores;
    std::vector<double> weights;
    double n = 0.0;
};

// Weighted (1 - alpha_a) quantile per group; fills q_raw, n, alpha_a, b_hat
// and copies q_raw into q_reg (lambda fields are set by the regularizer).
ThresholdSet calibrate(const std::map<std::string, GroupSample>& samples,
                       const std::map<std::string, double>& budgets,
                       double alpha, double delta, bool finite_sample_correction,
                       WarningLog* warnings = nullptr);

// Finite-sample lower bound on group coverage:
//   1 - alpha_a - sqrt((1 + B_a) / (2 n_a) * log(2 k / delta)).
// May be negative; a vacuous bound is reported as-is.
double coverage_bound(double n_a, double b_a, std::size_t n_groups, double delta,
                      double alpha_a);

// Deviation term of coverage_bound for one group.
double coverage_deviation(double n_a, double b_a, std::size_t n_groups, double delta);

// Upper bound on the equalized conditional coverage gap:
//   max_{a,a'} |alpha_a - alpha_a'| + max_{a,a'} (eps_a + eps_a').
double eccg_bound(const ThresholdSet& thresholds);

}  // namespace c3f
