#include "c3f/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "c3f/common.hpp"
#include "c3f/ingest.hpp"

namespace c3f {

void ensure_scores(std::vector<CalibrationRecord>& records, Task task) {
    for (auto& rec : records) {
        if (rec.score) {
            if (!std::isfinite(*rec.score)) {
                throw Error("record '" + rec.id + "' has a non-finite score");
            }
            continue;
        }
        if (task == Task::regression) {
            if (!rec.label || !rec.pred) {
                throw Error("record '" + rec.id +
                            "' has no score and no label+pred pair to compute one");
            }
            rec.score = std::abs(rec.numeric_label() - *rec.pred);
        } else {
            if (!rec.label || rec.label_scores.empty()) {
                throw Error("record '" + rec.id +
                            "' has no score and no label+eta_* columns to compute one");
            }
            auto it = rec.label_scores.find(*rec.label);
            if (it == rec.label_scores.end()) {
                throw Error("record '" + rec.id + "' has no eta_* column for its label '" +
                            *rec.label + "'");
            }
            rec.score = it->second;
        }
    }
}

namespace {

Matrix covariate_matrix(const std::vector<CalibrationRecord>& records,
                        const std::vector<std::size_t>& idx) {
    Matrix m;
    m.reserve(idx.size());
    for (std::size_t i : idx) m.push_back(records[i].covariates);
    return m;
}

std::map<std::string, std::vector<std::size_t>> hard_members(
    const std::vector<CalibrationRecord>& records) {
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (records[i].group) members[*records[i].group].push_back(i);
    }
    return members;
}

}  // namespace

std::map<std::string, GroupSample> build_group_samples(
    const std::vector<CalibrationRecord>& records, const RunConfig& config,
    const std::vector<CalibrationRecord>* target_covariates,
    ShiftStats* stats, std::optional<WeightModel>* model_out, WarningLog* warnings) {
    if (records.empty()) throw Error("no calibration records");
    auto groups = group_universe(records, config);

    // Per-group contributing records and posterior mass.
    std::map<std::string, std::vector<std::size_t>> members;
    std::map<std::string, std::vector<double>> mass;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (rec.group) {
            members[*rec.group].push_back(i);
            mass[*rec.group].push_back(1.0);
        } else {
            for (const auto& [g, p] : rec.posterior) {
                if (p > 0.0) {
                    members[g].push_back(i);
                    mass[g].push_back(p);
                }
            }
        }
    }

    // Raw importance weights per group, aligned with members[g].
    std::map<std::string, std::vector<double>> raw;
    switch (config.weight_source) {
        case WeightSource::unit: {
            for (const auto& g : groups) raw[g].assign(members[g].size(), 1.0);
            break;
        }
        case WeightSource::provided: {
            for (const auto& g : groups) {
                for (std::size_t i : members[g]) {
                    if (!records[i].weight) {
                        throw Error("record '" + records[i].id +
                                    "' has no weight column (weight_source=provided)");
                    }
                    raw[g].push_back(*records[i].weight);
                }
            }
            break;
        }
        case WeightSource::estimate: {
            if (!target_covariates) {
                throw Error("weight_source=estimate requires a target covariates file");
            }
            std::map<std::string, Matrix> cal_cov, tgt_cov;
            for (const auto& g : groups) {
                if (members[g].empty()) continue;
                for (std::size_t i : members[g]) {
                    if (!records[i].group) {
                        throw Error("weight estimation requires hard groups in the "
                                    "calibration file");
                    }
                    if (records[i].covariates.empty()) {
                        throw Error("record '" + records[i].id +
                                    "' has no covariates for weight estimation");
                    }
                }
                cal_cov[g] = covariate_matrix(records, members[g]);
            }
            auto tgt_members = hard_members(*target_covariates);
            for (const auto& [g, idx] : tgt_members) {
                tgt_cov[g] = covariate_matrix(*target_covariates, idx);
            }
            WeightModel model =
                fit_weight_model(cal_cov, tgt_cov, config.weight_clip, config.seed);
            for (const auto& note : model.notes) warn(warnings, note);
            for (const auto& g : groups) {
                if (!members[g].empty()) raw[g] = weights_for(model, cal_cov.at(g), g);
            }
            if (model_out) *model_out = std::move(model);
            break;
        }
    }

    std::map<std::string, GroupSample> samples;
    for (const auto& g : groups) {
        if (members[g].empty()) {
            throw Error("declared group '" + g + "' has no calibration records");
        }
        std::vector<double> w = raw[g];
        if (config.weight_source != WeightSource::estimate) {
            w = normalize_weights(std::move(w), config.weight_clip);
        }
        if (stats) {
            stats->b_hat[g] = estimate_b(w);
            stats->n_eff[g] = effective_sample_size(w);
        }
        GroupSample sample;
        double n_eff = 0.0;
        for (std::size_t k = 0; k < members[g].size(); ++k) {
            const auto& rec = records[members[g][k]];
            sample.scores.push_back(*rec.score);
            sample.weights.push_back(mass[g][k] * w[k]);
            n_eff += mass[g][k];
        }
        sample.n = n_eff;
        samples[g] = std::move(sample);
    }
    return samples;
}

ScoreFn scm_score_fn(const ScmSpec& scm) {
    bool has_outcome =
        std::find(scm.variables.begin(), scm.variables.end(), "y") != scm.variables.end();
    if (!has_outcome) {
        throw Error("scm must include an outcome node 'y' to recompute scores");
    }
    auto parents = scm.parents_of("y");
    std::vector<std::pair<std::string, double>> terms;
    for (const ScmEdge* e : parents) terms.emplace_back(e->from, e->coef);
    return [terms](const CalibrationRecord& rec, const NodeValues& values) {
        double mean = 0.0;
        for (const auto& [node, coef] : terms) {
            auto it = values.find(node);
            if (it == values.end()) throw Error("no value for scm node '" + node + "'");
            mean += coef * it->second;
        }
        return std::abs(rec.numeric_label() - mean);
    };
}

PipelineResult run_calibration(std::vector<CalibrationRecord> cal_records,
                               const RunConfig& config,
                               const std::vector<CalibrationRecord>* target_covariates) {
    config.validate();
    PipelineResult result;
    ensure_scores(cal_records, config.task);

    auto samples = build_group_samples(cal_records, config, target_covariates,
                                       &result.shift_stats, &result.weight_model,
                                       &result.warnings);

    std::vector<std::string> groups;
    std::map<std::string, double> n_a;
    for (const auto& [g, s] : samples) {
        groups.push_back(g);
        n_a[g] = s.n;
    }
    auto budgets = split_budget(config.alpha, groups, n_a, config.budget_scheme,
                                config.budgets, config.pi, &result.warnings);

    result.thresholds = calibrate(samples, budgets, config.alpha, config.delta,
                                  config.finite_sample_correction, &result.warnings);

    if (config.lambda > 0.0) {
        if (config.task != Task::regression) {
            throw Error("counterfactual regularization supports regression scores only");
        }
        const ScmSpec& scm = *config.scm;
        ScoreFn score_fn = scm_score_fn(scm);

        std::vector<double> all_scores;
        for (const auto& rec : cal_records) all_scores.push_back(*rec.score);
        CfOptions options;
        options.temperature = default_temperature(all_scores);

        CfScores cf_scores = compute_cf_scores(cal_records, scm, score_fn,
                                               options.neutralize);
        CfDisparity disparity =
            disparity_from_scores(cf_scores, result.thresholds.q_raw, options.temperature);
        disparity.gradient = gradient_from_scores(cf_scores, result.thresholds.q_raw,
                                                  options.fd_step, options.temperature);
        disparity.fd_step = options.fd_step;

        result.thresholds =
            regularize_thresholds(result.thresholds, disparity.gradient, config.lambda,
                                  config.regularizer_sign, &result.warnings);
        result.cf = std::move(disparity);
    } else {
        result.thresholds.lambda = config.lambda;
    }
    return result;
}

std::vector<PredictRow> run_predict(std::vector<CalibrationRecord> test_records,
                                    const ThresholdSet& thresholds, const RunConfig& config,
                                    bool use_regularized) {
    // Unknown groups are an error up front, listing the offending rows.
    std::set<std::string> known(thresholds.groups.begin(), thresholds.groups.end());
    std::vector<std::string> offenders;
    for (const auto& rec : test_records) {
        if (rec.group && !known.count(*rec.group)) {
            offenders.push_back(rec.id + " (group '" + *rec.group + "')");
        }
        for (const auto& [g, p] : rec.posterior) {
            if (p > 0.0 && !known.count(g)) {
                offenders.push_back(rec.id + " (posterior group '" + g + "')");
            }
        }
    }
    if (!offenders.empty()) {
        std::string msg = "test rows reference groups absent from the threshold artifact:";
        for (const auto& o : offenders) msg += " " + o;
        throw Error(msg);
    }

    std::vector<std::string> label_universe;
    if (config.task == Task::classification) {
        std::set<std::string> labels;
        for (const auto& rec : test_records) {
            for (const auto& [l, s] : rec.label_scores) { (void)s; labels.insert(l); }
        }
        label_universe.assign(labels.begin(), labels.end());
    }

    std::vector<PredictRow> rows(test_records.size());
    parallel_for(test_records.size(), [&](std::size_t i) {
        const auto& rec = test_records[i];
        std::map<std::string, double> posterior;
        if (rec.group) posterior[*rec.group] = 1.0;
        else posterior = rec.posterior;
        double q = mixed_threshold(posterior, thresholds, use_regularized);

        ScoreForm form = ScoreForm::precomputed;
        if (config.task == Task::classification) form = ScoreForm::label_score;
        else if (rec.pred) form = ScoreForm::absolute_residual;

        PredictRow row;
        row.set = predict_set(rec, q, config.task, label_universe, form);
        bool decidable = config.task == Task::classification
                             ? rec.label.has_value()
                             : (form == ScoreForm::absolute_residual ? rec.label.has_value()
                                                                     : rec.score.has_value());
        if (decidable) row.is_covered = covered(rec, row.set);
        rows[i] = std::move(row);
    });
    return rows;
}

CoverageReport run_evaluate(const std::vector<CalibrationRecord>& test_records,
                            const std::vector<PredictRow>& rows,
                            const ThresholdSet& thresholds, const RunConfig& config) {
    if (test_records.size() != rows.size()) {
        throw Error("evaluate: prediction rows do not match test records");
    }
    std::vector<Outcome> outcomes;
    std::vector<PredictionSet> psets;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        psets.push_back(rows[i].set);
        if (!rows[i].is_covered) continue;
        Outcome o;
        o.group = test_records[i].group;
        o.posterior = test_records[i].posterior;
        o.covered = *rows[i].is_covered;
        outcomes.push_back(std::move(o));
    }
    if (outcomes.empty()) throw Error("evaluate: no rows carry a true label");

    std::optional<CfDisparity> cf;
    if (config.scm && config.task == Task::regression) {
        bool hard = true;
        for (const auto& rec : test_records) hard = hard && rec.group.has_value();
        bool has_labels = true;
        for (const auto& rec : test_records) has_labels = has_labels && rec.label.has_value();
        if (hard && has_labels) {
            CfOptions options;
            ScoreFn fn = scm_score_fn(*config.scm);
            CfScores cf_scores = compute_cf_scores(test_records, *config.scm, fn,
                                                   options.neutralize);
            const auto& q = thresholds.lambda > 0.0 ? thresholds.q_reg : thresholds.q_raw;
            std::vector<double> eta;
            for (const auto& [g, v] : cf_scores.factual) eta.insert(eta.end(), v.begin(), v.end());
            options.temperature = default_temperature(eta);
            CfDisparity d = disparity_from_scores(cf_scores, q, options.temperature);
            d.gradient = gradient_from_scores(cf_scores, q, options.fd_step,
                                              options.temperature);
            d.fd_step = options.fd_step;
            cf = std::move(d);
        }
    }
    return audit(thresholds, outcomes, psets, cf);
}

}  // namespace c3f
