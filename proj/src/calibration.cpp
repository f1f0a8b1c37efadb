#include "c3f/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace c3f {

double weighted_ecdf(std::span<const double> scores, std::span<const double> weights,
                     double q) {
    if (scores.empty()) throw Error("weighted_ecdf: empty sample");
    if (scores.size() != weights.size()) {
        throw Error("weighted_ecdf: scores and weights differ in length");
    }
    double hit = 0.0, total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!(weights[i] > 0.0)) throw Error("weighted_ecdf: weights must be > 0");
        total += weights[i];
        if (scores[i] <= q) hit += weights[i];
    }
    return hit / total;
}

double weighted_quantile(std::span<const double> scores, std::span<const double> weights,
                         double level, bool finite_sample_correction) {
    if (!(level > 0.0 && level < 1.0)) {
        throw Error("weighted_quantile: level must lie in (0,1)");
    }
    if (scores.empty()) throw Error("weighted_quantile: empty sample");
    if (scores.size() != weights.size()) {
        throw Error("weighted_quantile: scores and weights differ in length");
    }
    const std::size_t n = scores.size();
    double target = level;
    if (finite_sample_correction) {
        target = std::min(1.0, level * static_cast<double>(n + 1) / static_cast<double>(n));
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sum in the same (sorted) order as the cumulative scan below, so the
    // final cumulative mass equals the total bitwise and a level of exactly
    // 1 always lands on the largest score instead of the infinite sentinel.
    double total = 0.0;
    for (std::size_t idx : order) {
        if (!(weights[idx] > 0.0)) throw Error("weighted_quantile: weights must be > 0");
        total += weights[idx];
    }

    double cum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        double value = scores[order[i]];
        // Absorb the whole tie block before testing so ties never split a step.
        while (i < n && scores[order[i]] == value) {
            cum += weights[order[i]];
            ++i;
        }
        if (cum / total >= target) return value;
    }
    return kInf;
}

double pooled_threshold(std::span<const double> scores, double alpha,
                        bool finite_sample_correction) {
    std::vector<double> unit(scores.size(), 1.0);
    return weighted_quantile(scores, unit, 1.0 - alpha, finite_sample_correction);
}

std::map<std::string, double> split_budget(double alpha,
                                           const std::vector<std::string>& groups,
                                           const std::map<std::string, double>& n_a,
                                           BudgetScheme scheme,
                                           const std::map<std::string, double>& explicit_alpha,
                                           const std::map<std::string, double>& explicit_pi,
                                           WarningLog* warnings) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error("split_budget: alpha must lie in (0,1)");
    if (groups.empty()) throw Error("split_budget: no groups");

    std::map<std::string, double> result;
    switch (scheme) {
        case BudgetScheme::uniform: {
            for (const auto& g : groups) result[g] = alpha;
            break;
        }
        case BudgetScheme::scaled: {
            double n_total = 0.0;
            for (const auto& g : groups) {
                auto it = n_a.find(g);
                if (it == n_a.end()) throw Error("split_budget: no sample size for group '" + g + "'");
                n_total += it->second;
            }
            double sum_pi_sq = 0.0;
            for (const auto& g : groups) {
                double pi = n_a.at(g) / n_total;
                sum_pi_sq += pi * pi;
            }
            for (const auto& g : groups) {
                double pi = n_a.at(g) / n_total;
                result[g] = alpha * pi / sum_pi_sq;
            }
            break;
        }
        case BudgetScheme::explicit_table: {
            double weighted = 0.0;
            for (const auto& g : groups) {
                auto ia = explicit_alpha.find(g);
                auto ip = explicit_pi.find(g);
                if (ia == explicit_alpha.end() || ip == explicit_pi.end()) {
                    throw Error("split_budget: explicit table misses group '" + g + "'");
                }
                weighted += ip->second * ia->second;
                result[g] = ia->second;
            }
            if (std::abs(weighted - alpha) > 1e-9) {
                throw Error("split_budget: explicit budgets violate sum_a pi_a alpha_a = alpha (got " +
                            format_double(weighted) + ")");
            }
            break;
        }
    }

    constexpr double lo = 1e-6, hi = 1.0 - 1e-6;
    for (auto& [g, a] : result) {
        if (a < lo || a > hi) {
            warn(warnings, "budget for group '" + g + "' clamped from " + format_double(a));
            a = std::clamp(a, lo, hi);
        }
    }
    return result;
}

namespace {

// Mean of squared self-normalized weights minus one, floored at zero.
// Duplicated contract with weights::estimate_b; kept local so calibration
// does not depend on the weights module.
double second_moment_stat(std::span<const double> weights) {
    double mean = 0.0;
    for (double w : weights) mean += w;
    mean /= static_cast<double>(weights.size());
    double m2 = 0.0;
    for (double w : weights) {
        double v = w / mean;
        m2 += v * v;
    }
    m2 /= static_cast<double>(weights.size());
    return std::max(0.0, m2 - 1.0);
}

}  // namespace

ThresholdSet calibrate(const std::map<std::string, GroupSample>& samples,
                       const std::map<std::string, double>& budgets,
                       double alpha, double delta, bool finite_sample_correction,
                       WarningLog* warnings) {
    if (samples.empty()) throw Error("calibrate: no groups");
    ThresholdSet out;
    out.alpha = alpha;
    out.delta = delta;
    out.lambda = 0.0;
    for (const auto& [group, sample] : samples) {
        if (sample.n < 2.0 || sample.scores.size() < 2) {
            throw Error("calibrate: group '" + group + "' has fewer than 2 calibration points");
        }
        auto it = budgets.find(group);
        if (it == budgets.end()) throw Error("calibrate: no budget for group '" + group + "'");
        double q = weighted_quantile(sample.scores, sample.weights, 1.0 - it->second,
                                     finite_sample_correction);
        if (std::isinf(q)) {
            warn(warnings, "group '" + group +
                               "' produced an infinite threshold; its prediction sets are trivial");
        }
        out.groups.push_back(group);
        out.q_raw[group] = q;
        out.q_reg[group] = q;
        out.n[group] = sample.n;
        out.alpha_a[group] = it->second;
        out.b_hat[group] = second_moment_stat(sample.weights);
    }
    return out;
}

double coverage_deviation(double n_a, double b_a, std::size_t n_groups, double delta) {
    if (!(n_a >= 1.0)) throw Error("coverage_bound: n_a must be >= 1");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("coverage_bound: delta must lie in (0,1)");
    return std::sqrt((1.0 + b_a) / (2.0 * n_a) *
                     std::log(2.0 * static_cast<double>(n_groups) / delta));
}

double coverage_bound(double n_a, double b_a, std::size_t n_groups, double delta,
                      double alpha_a) {
    return 1.0 - alpha_a - coverage_deviation(n_a, b_a, n_groups, delta);
}

double eccg_bound(const ThresholdSet& t) {
    if (t.groups.empty()) throw Error("eccg_bound: empty threshold set");
    if (t.groups.size() == 1) return 0.0;  // no pairs, and the gap itself is 0
    double max_alpha_gap = 0.0;
    double max_eps_sum = 0.0;
    for (const auto& a : t.groups) {
        double eps_a = coverage_deviation(t.n.at(a), t.b_hat.at(a), t.groups.size(), t.delta);
        for (const auto& b : t.groups) {
            if (a == b) continue;
            double eps_b = coverage_deviation(t.n.at(b), t.b_hat.at(b), t.groups.size(), t.delta);
            max_alpha_gap = std::max(max_alpha_gap, std::abs(t.alpha_a.at(a) - t.alpha_a.at(b)));
            max_eps_sum = std::max(max_eps_sum, eps_a + eps_b);
        }
    }
    return max_alpha_gap + max_eps_sum;
}

}  // namespace c3f
