// Per-group importance weights w_a(x): unit, precomputed, or estimated with a
// logistic discriminator between calibration and target covariates. Weights
// are always self-normalized to mean 1 over the evaluation batch, matching
// the self-normalized ECDF used downstream.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c3f/common.hpp"

namespace c3f {

using Matrix = std::vector<std::vector<double>>;  // rows = observations

struct GroupDiscriminator {
    std::vector<double> coef;
    double intercept = 0.0;
    std::size_t n_cal = 0;
    std::size_t n_tgt = 0;
    bool converged = false;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
};

struct WeightModel {
    std::map<std::string, GroupDiscriminator> per_group;
    std::optional<double> clip_max;
    std::uint64_t seed = 0;
    WarningLog notes;  // e.g. non-converged fits

    // p(target | x) under the group's discriminator.
    double target_probability(const std::string& group, std::span<const double> x) const;
};

// Trains one discriminator per group by full-batch gradient descent
// (fixed step 0.1, L2 penalty 1e-4 on the coefficients, stop at gradient
// norm < 1e-8 or 10,000 iterations). Deterministic given the inputs.
WeightModel fit_weight_model(const std::map<std::string, Matrix>& cal_covariates,
                             const std::map<std::string, Matrix>& tgt_covariates,
                             std::optional<double> clip_max, std::uint64_t seed);

// w(x) = odds(target|x) * n_cal_a / n_tgt_a, clipped, then self-normalized to
// mean 1 over the supplied batch.
std::vector<double> weights_for(const WeightModel& model, const Matrix& covariates,
                                const std::string& group);

// Clips (if enabled) and self-normalizes a raw weight vector to mean 1.
std::vector<double> normalize_weights(std::vector<double> raw,
                                      std::optional<double> clip_max = std::nullopt);

// Second-moment statistic: mean of squared self-normalized weights minus 1,
// floored at 0. Equals 0 iff all weights are equal.
double estimate_b(std::span<const double> weights);

// Effective sample size (sum w)^2 / sum w^2.
double effective_sample_size(std::span<const double> weights);

struct ShiftStats {
    std::map<std::string, double> b_hat;
    std::map<std::string, double> n_eff;
};

}  // namespace c3f
