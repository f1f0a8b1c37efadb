#include "c3f/predict.hpp"

#include <algorithm>
#include <cmath>

#include "c3f/common.hpp"

namespace c3f {

double mixed_threshold(const std::map<std::string, double>& posterior,
                       const ThresholdSet& thresholds, bool use_regularized) {
    if (posterior.empty()) throw Error("mixed_threshold: empty posterior");
    double total = 0.0;
    double mixed = 0.0;
    for (const auto& [group, p] : posterior) {
        if (p < 0.0) throw Error("mixed_threshold: negative posterior for group '" + group + "'");
        total += p;
        if (p == 0.0) continue;  // skip so one-hot mixing stays bit-exact
        mixed += p * thresholds.threshold(group, use_regularized);
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw Error("mixed_threshold: posterior sums to " + format_double(total));
    }
    return mixed;
}

PredictionSet predict_set(const CalibrationRecord& point, double threshold, Task task,
                          const std::vector<std::string>& label_universe,
                          ScoreForm score_form) {
    PredictionSet set;
    set.point_id = point.id;
    set.mixed_threshold = threshold;
    set.unbounded = std::isinf(threshold) && threshold > 0.0;

    if (task == Task::classification) {
        set.kind = PredictionSet::Kind::label_set;
        if (point.label_scores.empty()) {
            throw Error("record '" + point.id + "': classification needs per-label eta_* scores");
        }
        for (const auto& label : label_universe) {
            auto it = point.label_scores.find(label);
            if (it == point.label_scores.end()) {
                throw Error("record '" + point.id + "': missing score for label '" + label + "'");
            }
            if (set.unbounded || it->second <= threshold) set.labels.push_back(label);
        }
        set.empty = set.labels.empty();
        return set;
    }

    set.kind = PredictionSet::Kind::interval;
    if (score_form == ScoreForm::absolute_residual) {
        if (!point.pred) {
            throw Error("record '" + point.id + "': interval needs a prediction (pred column)");
        }
        if (set.unbounded) {
            set.lo = -kInf;
            set.hi = kInf;
        } else {
            set.lo = *point.pred - threshold;
            set.hi = *point.pred + threshold;
        }
        set.empty = set.lo > set.hi;
    } else {
        // Precomputed score form: no interval, membership decision only.
        set.invertible = false;
        set.lo = set.hi = std::nan("");
    }
    return set;
}

bool covered(const CalibrationRecord& point, const PredictionSet& pset) {
    if (pset.unbounded) return true;
    if (pset.kind == PredictionSet::Kind::label_set) {
        if (!point.label) throw Error("record '" + point.id + "': no true label");
        return std::find(pset.labels.begin(), pset.labels.end(), *point.label) !=
               pset.labels.end();
    }
    if (!pset.invertible) {
        if (!point.score) throw Error("record '" + point.id + "': no score for membership test");
        return *point.score <= pset.mixed_threshold;
    }
    if (pset.empty) return false;
    double y = point.numeric_label();
    return pset.lo <= y && y <= pset.hi;
}

}  // namespace c3f
