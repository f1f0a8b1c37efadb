// Synthetic data with analytically known covariate shift: calibration
// covariates are N(0, I) per group, target covariates are N(mu_a * 1, I), and
// the label conditional y = sum_j x_j + noise_a * eps is identical across
// roles. The exact importance weight is then the closed-form Gaussian ratio
//   w_a(x) = prod_j exp(mu_a * x_j - mu_a^2 / 2),
// and E[w^2 | a] = exp(dim * mu_a^2), so the true second-moment statistic is
// B_a = exp(dim * mu_a^2) - 1. The wrapped base model predicts with half the
// true slope, which makes the nonconformity score depend on x; a perfect
// predictor would render the shift invisible to the calibration problem.
// With an SCM attached, covariates come from the structural equations
// instead (no shift; unit weights).
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "c3f/scm.hpp"
#include "c3f/types.hpp"

namespace c3f {

struct SynthGroup {
    std::string name;
    std::size_t n_cal = 0;
    std::size_t n_test = 0;
    double shift = 0.0;        // target mean shift per covariate coordinate
    double noise_scale = 1.0;  // label noise standard deviation
};

struct SynthSpec {
    std::vector<SynthGroup> groups;
    std::size_t dim = 1;
    std::optional<ScmSpec> scm;
    std::uint64_t seed = 0;
    bool emit_posteriors = false;  // test rows carry true p_<group> columns

    void validate() const;
};

enum class SynthRole { calibration, target };

// Deterministic given (spec.seed, role); per-group streams make the output
// independent of group iteration order. Calibration records carry the exact
// analytic weight.
std::vector<CalibrationRecord> generate(const SynthSpec& spec, SynthRole role);

// The shared label conditional; exposed so tests can check that calibration
// and target roles use the identical function.
double label_conditional(const std::vector<double>& covariates, double eps,
                         double noise_scale);

// Closed-form importance weight of a covariate vector under mean shift mu.
double exact_weight(const std::vector<double>& covariates, double mu);

// exp(dim * mu^2) - 1.
double analytic_b(double mu, std::size_t dim);

// One full calibrate -> predict -> evaluate pass per replicate, with
// replicate seeds derived as splitmix64(master + replicate index). Also runs
// the pooled unweighted split-conformal baseline for comparison.
struct ReplicateSummary {
    std::size_t replicate = 0;
    CoverageReport report;                        // group-conditional pipeline
    std::map<std::string, double> coverage_pooled;
    double eccg_pooled = 0.0;
    std::map<std::string, double> bound_analytic;  // coverage_bound with true B_a
    std::map<std::string, bool> violation_analytic;
};

struct ReplicateStats {
    std::vector<ReplicateSummary> replicates;
    double violation_rate_plugin = 0.0;    // (rep, group) pairs below plug-in bound
    double violation_rate_analytic = 0.0;  // same against the true-B bound
    double mean_eccg = 0.0;
    double mean_eccg_pooled = 0.0;
    std::map<std::string, double> mean_coverage;
};

ReplicateStats run_replicates(const SynthSpec& spec, const RunConfig& config,
                              std::size_t n_reps);

}  // namespace c3f
