#include "c3f/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

namespace c3f {

namespace {

double node_value(const NodeValues& values, const std::string& node) {
    auto it = values.find(node);
    if (it == values.end()) throw Error("scm: missing value for node '" + node + "'");
    return it->second;
}

double smooth_accept(double q, double eta, double temperature) {
    double z = (q - eta) / temperature;
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

NodeValues abduct(const ScmSpec& scm, const NodeValues& observation) {
    NodeValues u;
    for (const auto& node : scm.topological_order()) {
        double x = node_value(observation, node);
        double structural = 0.0;
        for (const ScmEdge* e : scm.parents_of(node)) {
            structural += e->coef * node_value(observation, e->from);
        }
        u[node] = x - structural;
    }
    return u;
}

NodeValues counterfactual_values(const ScmSpec& scm, const NodeValues& observation,
                                 double target_level, bool neutralize) {
    NodeValues u = abduct(scm, observation);
    NodeValues cf;
    for (const auto& node : scm.topological_order()) {
        if (node == scm.attribute) {
            cf[node] = target_level;
            continue;
        }
        double value = u[node];
        for (const ScmEdge* e : scm.parents_of(node)) {
            bool blocked = neutralize && scm.is_unfair(e->from, e->to);
            double parent = blocked ? node_value(observation, e->from) : cf.at(e->from);
            value += e->coef * parent;
        }
        cf[node] = value;
    }
    return cf;
}

NodeValues counterfactual_covariates(const ScmSpec& scm, const NodeValues& observation,
                                     const std::string& target_group, bool neutralize) {
    return counterfactual_values(scm, observation, scm.attribute_value(target_group),
                                 neutralize);
}

NodeValues observation_for(const ScmSpec& scm, const CalibrationRecord& record) {
    if (!record.group) {
        throw Error("record '" + record.id +
                    "' has no hard group; counterfactuals need an observed attribute");
    }
    NodeValues obs;
    for (const auto& node : scm.variables) {
        if (node == scm.attribute) {
            obs[node] = scm.attribute_value(*record.group);
        } else if (node.size() > 1 && node[0] == 'x' &&
                   node.find_first_not_of("0123456789", 1) == std::string::npos) {
            std::size_t idx = static_cast<std::size_t>(std::atoi(node.c_str() + 1));
            if (idx >= record.covariates.size()) {
                throw Error("record '" + record.id + "' has no covariate for scm node '" +
                            node + "'");
            }
            obs[node] = record.covariates[idx];
        } else if (node == "y") {
            obs[node] = record.numeric_label();
        } else {
            throw Error("record '" + record.id + "' cannot supply a value for scm node '" +
                        node + "'");
        }
    }
    return obs;
}

CfScores compute_cf_scores(std::span<const CalibrationRecord> records, const ScmSpec& scm,
                           const ScoreFn& score_fn, bool neutralize) {
    scm.validate();
    std::set<std::string> group_set;
    for (const auto& rec : records) {
        if (!rec.group) {
            throw Error("record '" + rec.id +
                        "' has no hard group; counterfactual disparity needs observed groups");
        }
        group_set.insert(*rec.group);
    }
    CfScores out;
    out.groups.assign(group_set.begin(), group_set.end());

    // Record indices per group, preserving input order.
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < records.size(); ++i) members[*records[i].group].push_back(i);

    for (const auto& a : out.groups) {
        out.factual[a].resize(members[a].size());
        for (const auto& b : out.groups) {
            if (a != b) out.counterfactual[{a, b}].resize(members[a].size());
        }
    }

    for (const auto& a : out.groups) {
        const auto& idx = members[a];
        parallel_for(idx.size(), [&](std::size_t k) {
            const CalibrationRecord& rec = records[idx[k]];
            NodeValues obs = observation_for(scm, rec);
            try {
                double eta = score_fn(rec, obs);
                if (!std::isfinite(eta)) throw Error("non-finite factual score");
                out.factual[a][k] = eta;
                for (const auto& b : out.groups) {
                    if (b == a) continue;
                    NodeValues cf = counterfactual_covariates(scm, obs, b, neutralize);
                    double eta_cf = score_fn(rec, cf);
                    if (!std::isfinite(eta_cf)) throw Error("non-finite counterfactual score");
                    out.counterfactual.at({a, b})[k] = eta_cf;
                }
            } catch (const std::exception& e) {
                throw Error("score recomputation failed for record '" + rec.id + "': " +
                            e.what());
            }
        });
    }
    return out;
}

double default_temperature(std::span<const double> scores) {
    if (scores.empty()) throw Error("default_temperature: empty scores");
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    auto quantile = [&](double level) {
        std::size_t idx = static_cast<std::size_t>(
            std::ceil(level * static_cast<double>(sorted.size()))) - 1;
        return sorted[std::min(idx, sorted.size() - 1)];
    };
    double iqr = quantile(0.75) - quantile(0.25);
    if (iqr <= 0.0) iqr = sorted.back() - sorted.front();
    double t = 0.05 * iqr;
    return t > 0.0 ? t : 1e-6;
}

namespace {

double coverage_at(const std::vector<double>& scores, double q, double temperature,
                   bool hard) {
    if (scores.empty()) return 0.0;
    double total = 0.0;
    for (double eta : scores) {
        total += hard ? (eta <= q ? 1.0 : 0.0) : smooth_accept(q, eta, temperature);
    }
    return total / static_cast<double>(scores.size());
}

double smoothed_max_disparity(const CfScores& s,
                              const std::map<std::string, double>& thresholds,
                              double temperature) {
    double value = 0.0;
    for (const auto& [pair, cf_scores] : s.counterfactual) {
        double q = thresholds.at(pair.first);
        double cov_f = coverage_at(s.factual.at(pair.first), q, temperature, false);
        double cov_cf = coverage_at(cf_scores, q, temperature, false);
        value = std::max(value, std::abs(cov_f - cov_cf));
    }
    return value;
}

}  // namespace

CfDisparity disparity_from_scores(const CfScores& s,
                                  const std::map<std::string, double>& thresholds,
                                  double temperature) {
    if (!(temperature > 0.0)) throw Error("disparity: temperature must be > 0");
    for (const auto& g : s.groups) {
        if (!thresholds.count(g)) throw Error("disparity: no threshold for group '" + g + "'");
    }
    CfDisparity d;
    d.temperature = temperature;
    for (const auto& [pair, cf_scores] : s.counterfactual) {
        double q = thresholds.at(pair.first);
        const auto& f_scores = s.factual.at(pair.first);
        double smooth = std::abs(coverage_at(f_scores, q, temperature, false) -
                                 coverage_at(cf_scores, q, temperature, false));
        double hard = std::abs(coverage_at(f_scores, q, temperature, true) -
                               coverage_at(cf_scores, q, temperature, true));
        d.pair_smoothed[pair] = smooth;
        d.pair_hard[pair] = hard;
        d.value = std::max(d.value, smooth);
        d.hard_value = std::max(d.hard_value, hard);
    }
    return d;
}

CfDisparity estimate_cf_disparity(std::span<const CalibrationRecord> records,
                                  const ScmSpec& scm,
                                  const std::map<std::string, double>& thresholds,
                                  const ScoreFn& score_fn, const CfOptions& options) {
    CfScores s = compute_cf_scores(records, scm, score_fn, options.neutralize);
    CfDisparity d = disparity_from_scores(s, thresholds, options.temperature);
    d.fd_step = options.fd_step;
    return d;
}

std::map<std::string, double> gradient_from_scores(
    const CfScores& s, const std::map<std::string, double>& thresholds, double fd_step,
    double temperature) {
    if (!(fd_step > 0.0)) throw Error("cf_gradient: fd_step must be > 0");
    std::map<std::string, double> gradient;
    for (const auto& g : s.groups) {
        double q = thresholds.at(g);
        double h = fd_step * std::abs(q);
        if (h == 0.0) h = fd_step;
        auto perturbed = thresholds;
        perturbed[g] = q + h;
        double up = smoothed_max_disparity(s, perturbed, temperature);
        perturbed[g] = q - h;
        double down = smoothed_max_disparity(s, perturbed, temperature);
        gradient[g] = (up - down) / (2.0 * h);
    }
    return gradient;
}

std::map<std::string, double> cf_gradient(std::span<const CalibrationRecord> records,
                                          const ScmSpec& scm,
                                          const std::map<std::string, double>& thresholds,
                                          double fd_step, const ScoreFn& score_fn,
                                          const CfOptions& options) {
    CfScores s = compute_cf_scores(records, scm, score_fn, options.neutralize);
    return gradient_from_scores(s, thresholds, fd_step, options.temperature);
}

ThresholdSet regularize_thresholds(const ThresholdSet& thresholds,
                                   const std::map<std::string, double>& gradient,
                                   double lambda, RegularizerSign sign,
                                   WarningLog* warnings) {
    if (lambda < 0.0) throw Error("regularize_thresholds: lambda must be >= 0");
    ThresholdSet out = thresholds;
    out.lambda = lambda;
    for (const auto& g : out.groups) {
        double grad = 0.0;
        if (auto it = gradient.find(g); it != gradient.end()) grad = it->second;
        double factor = sign == RegularizerSign::descent ? 1.0 - lambda * grad
                                                         : 1.0 + lambda * grad;
        double q = out.q_raw.at(g) * factor;
        if (q < 0.0) {
            warn(warnings, "regularized threshold for group '" + g + "' floored at 0");
            q = 0.0;
        }
        out.q_reg[g] = q;
    }
    return out;
}

}  // namespace c3f
