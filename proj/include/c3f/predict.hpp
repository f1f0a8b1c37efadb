// Decision rule: mix per-group thresholds by group posteriors and invert the
// score into a prediction set. Sets are closed (<= comparison).
#pragma once

#include <map>
#include <string>
#include <vector>

#include "c3f/types.hpp"

namespace c3f {

enum class ScoreForm { absolute_residual, label_score, precomputed };

// sum_a p(a|x) * q_a, skipping zero-posterior entries. A one-hot posterior
// reproduces the pure per-group threshold bit-exactly.
double mixed_threshold(const std::map<std::string, double>& posterior,
                       const ThresholdSet& thresholds, bool use_regularized);

// Inverts the threshold into a set. Regression with absolute-residual scores
// gives [f(x) - q, f(x) + q]; classification keeps labels with eta <= q;
// precomputed scores cannot be inverted, so only the membership decision
// (record.score <= q) is meaningful downstream.
PredictionSet predict_set(const CalibrationRecord& point, double threshold, Task task,
                          const std::vector<std::string>& label_universe,
                          ScoreForm score_form);

// y in C(x); false for empty sets.
bool covered(const CalibrationRecord& point, const PredictionSet& pset);

}  // namespace c3f
