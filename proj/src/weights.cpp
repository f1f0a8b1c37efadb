#include "c3f/weights.hpp"

#include <algorithm>
#include <cmath>

namespace c3f {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

constexpr double kStep = 0.1;
constexpr double kL2 = 1e-4;
constexpr double kGradTol = 1e-8;
constexpr std::size_t kMaxIters = 10000;

GroupDiscriminator fit_one(const Matrix& cal, const Matrix& tgt, const std::string& group) {
    if (cal.size() < 2 || tgt.size() < 2) {
        throw Error("fit_weight_model: group '" + group +
                    "' needs at least 2 rows on each side");
    }
    const std::size_t dim = cal.front().size();
    for (const auto& row : cal) {
        if (row.size() != dim) throw Error("fit_weight_model: ragged calibration matrix for group '" + group + "'");
    }
    for (const auto& row : tgt) {
        if (row.size() != dim) {
            throw Error("fit_weight_model: covariate dimension mismatch for group '" + group + "'");
        }
    }

    GroupDiscriminator d;
    d.coef.assign(dim, 0.0);
    d.n_cal = cal.size();
    d.n_tgt = tgt.size();
    const double n = static_cast<double>(cal.size() + tgt.size());

    std::vector<double> grad(dim, 0.0);
    for (d.iterations = 0; d.iterations < kMaxIters; ++d.iterations) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad0 = 0.0;
        auto accumulate = [&](const Matrix& rows, double y) {
            for (const auto& x : rows) {
                double z = d.intercept;
                for (std::size_t k = 0; k < dim; ++k) z += d.coef[k] * x[k];
                double r = sigmoid(z) - y;
                grad0 += r;
                for (std::size_t k = 0; k < dim; ++k) grad[k] += r * x[k];
            }
        };
        accumulate(cal, 0.0);
        accumulate(tgt, 1.0);
        grad0 /= n;
        double norm_sq = grad0 * grad0;
        for (std::size_t k = 0; k < dim; ++k) {
            grad[k] = grad[k] / n + 2.0 * kL2 * d.coef[k];
            norm_sq += grad[k] * grad[k];
        }
        d.grad_norm = std::sqrt(norm_sq);
        if (d.grad_norm < kGradTol) {
            d.converged = true;
            break;
        }
        d.intercept -= kStep * grad0;
        for (std::size_t k = 0; k < dim; ++k) d.coef[k] -= kStep * grad[k];
    }
    return d;
}

}  // namespace

double WeightModel::target_probability(const std::string& group,
                                       std::span<const double> x) const {
    auto it = per_group.find(group);
    if (it == per_group.end()) throw Error("weight model has no group '" + group + "'");
    const auto& d = it->second;
    if (x.size() != d.coef.size()) {
        throw Error("weight model for group '" + group + "' expects dimension " +
                    std::to_string(d.coef.size()));
    }
    double z = d.intercept;
    for (std::size_t k = 0; k < x.size(); ++k) z += d.coef[k] * x[k];
    return sigmoid(z);
}

WeightModel fit_weight_model(const std::map<std::string, Matrix>& cal_covariates,
                             const std::map<std::string, Matrix>& tgt_covariates,
                             std::optional<double> clip_max, std::uint64_t seed) {
    WeightModel model;
    model.clip_max = clip_max;
    model.seed = seed;
    for (const auto& [group, cal] : cal_covariates) {
        auto it = tgt_covariates.find(group);
        if (it == tgt_covariates.end() || it->second.empty() || cal.empty()) {
            throw Error("fit_weight_model: group '" + group +
                        "' has no data on one side (degenerate group)");
        }
        model.per_group[group] = fit_one(cal, it->second, group);
        if (!model.per_group[group].converged) {
            model.notes.push_back("discriminator for group '" + group +
                                  "' did not converge (gradient norm " +
                                  format_double(model.per_group[group].grad_norm) + ")");
        }
    }
    return model;
}

std::vector<double> normalize_weights(std::vector<double> raw,
                                      std::optional<double> clip_max) {
    if (raw.empty()) throw Error("normalize_weights: empty input");
    double mean = 0.0;
    for (double& w : raw) {
        if (!(w > 0.0) || !std::isfinite(w)) {
            throw Error("normalize_weights: weights must be positive and finite");
        }
        if (clip_max && w > *clip_max) w = *clip_max;
        mean += w;
    }
    mean /= static_cast<double>(raw.size());
    for (double& w : raw) w /= mean;
    return raw;
}

std::vector<double> weights_for(const WeightModel& model, const Matrix& covariates,
                                const std::string& group) {
    auto it = model.per_group.find(group);
    if (it == model.per_group.end()) {
        throw Error("weights_for: unknown group '" + group + "'");
    }
    const auto& d = it->second;
    const double count_ratio =
        static_cast<double>(d.n_cal) / static_cast<double>(d.n_tgt);
    std::vector<double> raw;
    raw.reserve(covariates.size());
    for (const auto& x : covariates) {
        double p = model.target_probability(group, x);
        // Guard against saturated discriminator output.
        p = std::clamp(p, 1e-12, 1.0 - 1e-12);
        raw.push_back(p / (1.0 - p) * count_ratio);
    }
    return normalize_weights(std::move(raw), model.clip_max);
}

double estimate_b(std::span<const double> weights) {
    if (weights.empty()) throw Error("estimate_b: empty input");
    double mean = 0.0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w)) throw Error("estimate_b: weights must be >= 0 and finite");
        mean += w;
    }
    mean /= static_cast<double>(weights.size());
    if (!(mean > 0.0)) throw Error("estimate_b: weights sum to zero");
    double m2 = 0.0;
    for (double w : weights) {
        double v = w / mean;
        m2 += v * v;
    }
    m2 /= static_cast<double>(weights.size());
    return std::max(0.0, m2 - 1.0);
}

double effective_sample_size(std::span<const double> weights) {
    if (weights.empty()) throw Error("effective_sample_size: empty input");
    double s = 0.0, s2 = 0.0;
    for (double w : weights) {
        s += w;
        s2 += w * w;
    }
    if (!(s2 > 0.0)) throw Error("effective_sample_size: weights sum of squares is zero");
    return s * s / s2;
}

}  // namespace c3f
