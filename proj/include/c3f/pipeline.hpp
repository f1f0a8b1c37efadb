// End-to-end orchestration: scores -> weights -> budgets -> weighted
// quantiles -> counterfactual gradient -> regularized thresholds, plus the
// prediction and evaluation passes. The CLI subcommands are thin wrappers
// around these functions.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "c3f/calibration.hpp"
#include "c3f/counterfactual.hpp"
#include "c3f/metrics.hpp"
#include "c3f/predict.hpp"
#include "c3f/types.hpp"
#include "c3f/weights.hpp"

namespace c3f {

// Fills in missing scores: |label - pred| for regression, the true label's
// eta_* entry for classification. Throws naming the record when neither the
// score nor its ingredients are present.
void ensure_scores(std::vector<CalibrationRecord>& records, Task task);

// Per-group calibration samples with weights chosen per the config. Soft
// records contribute to every group with posterior mass > 0.
std::map<std::string, GroupSample> build_group_samples(
    const std::vector<CalibrationRecord>& records, const RunConfig& config,
    const std::vector<CalibrationRecord>* target_covariates,
    ShiftStats* stats, std::optional<WeightModel>* model_out, WarningLog* warnings);

// Score recomputation hook backed by the SCM's outcome equation: the SCM must
// contain a node named "y"; eta = |label - sum_parents coef * value|.
ScoreFn scm_score_fn(const ScmSpec& scm);

struct PipelineResult {
    ThresholdSet thresholds;
    std::optional<CfDisparity> cf;
    ShiftStats shift_stats;
    std::optional<WeightModel> weight_model;
    WarningLog warnings;
};

PipelineResult run_calibration(std::vector<CalibrationRecord> cal_records,
                               const RunConfig& config,
                               const std::vector<CalibrationRecord>* target_covariates);

struct PredictRow {
    PredictionSet set;
    std::optional<bool> is_covered;  // absent when the row has no truth
};

std::vector<PredictRow> run_predict(std::vector<CalibrationRecord> test_records,
                                    const ThresholdSet& thresholds, const RunConfig& config,
                                    bool use_regularized = true);

// Evaluation over rows whose coverage is decidable; recomputes the
// counterfactual disparity on the test records when an SCM is configured.
CoverageReport run_evaluate(const std::vector<CalibrationRecord>& test_records,
                            const std::vector<PredictRow>& rows,
                            const ThresholdSet& thresholds, const RunConfig& config);

}  // namespace c3f
