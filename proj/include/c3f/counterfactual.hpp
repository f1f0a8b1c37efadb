// Abduction-action-prediction counterfactuals on a linear-Gaussian SCM,
// empirical counterfactual coverage disparity, its finite-difference gradient
// in the per-group thresholds, and the lambda-regularized thresholds.
#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "c3f/common.hpp"
#include "c3f/scm.hpp"
#include "c3f/types.hpp"

namespace c3f {

// Recovers the exogenous values: u_v = x_v - sum_parents coef * x_parent.
// Exact and unique for a linear SCM. The observation must assign every node.
NodeValues abduct(const ScmSpec& scm, const NodeValues& observation);

// do(A <- level) followed by forward simulation reusing the abducted noise.
// With neutralize, unfair edges transmit the parent's factual value, so only
// fair paths carry the intervention.
NodeValues counterfactual_values(const ScmSpec& scm, const NodeValues& observation,
                                 double target_level, bool neutralize);

// Same, with the target attribute given as a group label.
NodeValues counterfactual_covariates(const ScmSpec& scm, const NodeValues& observation,
                                     const std::string& target_group, bool neutralize);

// Recomputes the nonconformity score of a record at given node values.
using ScoreFn = std::function<double(const CalibrationRecord&, const NodeValues&)>;

// Builds the SCM observation for one record: covariate columns map to nodes
// x0..xk, the attribute node takes the record's group level, and a node named
// "y" (if present) takes the numeric label.
NodeValues observation_for(const ScmSpec& scm, const CalibrationRecord& record);

// Factual and counterfactual scores for every record and ordered group pair.
// Computing these once makes disparity and gradient evaluations cheap in the
// thresholds.
struct CfScores {
    std::vector<std::string> groups;
    std::map<std::string, std::vector<double>> factual;  // group -> scores
    std::map<std::pair<std::string, std::string>, std::vector<double>> counterfactual;
};

CfScores compute_cf_scores(std::span<const CalibrationRecord> records, const ScmSpec& scm,
                           const ScoreFn& score_fn, bool neutralize = false);

struct CfOptions {
    double temperature = 0.05;
    bool neutralize = false;    // full do() by default; true blocks unfair edges
    double fd_step = 0.01;      // relative step: h_a = fd_step * |q_a|
};

// 0.05 * interquartile range of the scores, the default smoothing scale.
double default_temperature(std::span<const double> scores);

// Max over ordered pairs (a, a') of |coverage of group a at q_a on factual
// scores - coverage of the same records at q_a on counterfactual scores|.
// Smoothed coverage uses sigma((q - eta) / T); the hard version is reported
// alongside. The gradient field is left empty (see cf_gradient).
CfDisparity disparity_from_scores(const CfScores& scores,
                                  const std::map<std::string, double>& thresholds,
                                  double temperature);

CfDisparity estimate_cf_disparity(std::span<const CalibrationRecord> records,
                                  const ScmSpec& scm,
                                  const std::map<std::string, double>& thresholds,
                                  const ScoreFn& score_fn, const CfOptions& options);

// Central finite difference of the smoothed disparity in each group's
// threshold: (D(q_a + h) - D(q_a - h)) / (2h) with h = fd_step * |q_a|.
std::map<std::string, double> gradient_from_scores(
    const CfScores& scores, const std::map<std::string, double>& thresholds,
    double fd_step, double temperature);

std::map<std::string, double> cf_gradient(std::span<const CalibrationRecord> records,
                                          const ScmSpec& scm,
                                          const std::map<std::string, double>& thresholds,
                                          double fd_step, const ScoreFn& score_fn,
                                          const CfOptions& options);

// q_a^(lambda) = q_a * (1 -/+ lambda * g_a); descent uses the minus sign.
// Negative results are floored at 0 with a warning.
ThresholdSet regularize_thresholds(const ThresholdSet& thresholds,
                                   const std::map<std::string, double>& gradient,
                                   double lambda, RegularizerSign sign,
                                   WarningLog* warnings = nullptr);

}  // namespace c3f
