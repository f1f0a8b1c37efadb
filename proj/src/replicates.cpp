#include <algorithm>
#include <cmath>

#include "c3f/pipeline.hpp"
#include "c3f/synth.hpp"

namespace c3f {

ReplicateStats run_replicates(const SynthSpec& spec, const RunConfig& config,
                              std::size_t n_reps) {
    if (n_reps < 1) throw Error("run_replicates: n_reps must be >= 1");
    spec.validate();

    ReplicateStats stats;
    stats.replicates.resize(n_reps);

    parallel_for(n_reps, [&](std::size_t r) {
        SynthSpec rep_spec = spec;
        rep_spec.seed = derive_seed(spec.seed, r);
        auto cal = generate(rep_spec, SynthRole::calibration);
        auto test = generate(rep_spec, SynthRole::target);

        RunConfig rep_config = config;
        rep_config.seed = rep_spec.seed;
        PipelineResult pipeline = run_calibration(cal, rep_config, &test);
        auto rows = run_predict(test, pipeline.thresholds, rep_config);

        ReplicateSummary summary;
        summary.replicate = r;
        summary.report = run_evaluate(test, rows, pipeline.thresholds, rep_config);

        // Pooled unweighted split-conformal baseline over the same data.
        {
            std::vector<CalibrationRecord> scored = cal;
            ensure_scores(scored, rep_config.task);
            std::vector<double> pooled_scores;
            for (const auto& rec : scored) pooled_scores.push_back(*rec.score);
            double q_pool = pooled_threshold(pooled_scores, rep_config.alpha,
                                             rep_config.finite_sample_correction);
            std::map<std::string, double> hit, count;
            std::vector<CalibrationRecord> test_scored = test;
            ensure_scores(test_scored, rep_config.task);
            for (const auto& rec : test_scored) {
                std::string g = rec.group ? *rec.group : std::string("all");
                count[g] += 1.0;
                if (*rec.score <= q_pool) hit[g] += 1.0;
            }
            for (const auto& [g, c] : count) summary.coverage_pooled[g] = hit[g] / c;
            summary.eccg_pooled = eccg(summary.coverage_pooled);
        }

        // Bound evaluation with the analytically known B_a of the generator.
        for (const auto& g : spec.groups) {
            double b_true = spec.scm ? 0.0 : analytic_b(g.shift, spec.dim);
            double bound = coverage_bound(pipeline.thresholds.n.at(g.name), b_true,
                                          pipeline.thresholds.groups.size(),
                                          rep_config.delta,
                                          pipeline.thresholds.alpha_a.at(g.name));
            summary.bound_analytic[g.name] = bound;
            summary.violation_analytic[g.name] =
                summary.report.coverage.at(g.name) < bound;
        }
        stats.replicates[r] = std::move(summary);
    });

    // Aggregate sequentially over the replicate slots.
    std::size_t pairs = 0, viol_plugin = 0, viol_analytic = 0;
    for (const auto& summary : stats.replicates) {
        stats.mean_eccg += summary.report.eccg;
        stats.mean_eccg_pooled += summary.eccg_pooled;
        for (const auto& [g, cov] : summary.report.coverage) {
            stats.mean_coverage[g] += cov;
            pairs++;
            if (summary.report.violation.at(g)) viol_plugin++;
            if (summary.violation_analytic.at(g)) viol_analytic++;
        }
    }
    double n = static_cast<double>(n_reps);
    stats.mean_eccg /= n;
    stats.mean_eccg_pooled /= n;
    for (auto& [g, cov] : stats.mean_coverage) cov /= n;
    stats.violation_rate_plugin = static_cast<double>(viol_plugin) / static_cast<double>(pairs);
    stats.violation_rate_analytic =
        static_cast<double>(viol_analytic) / static_cast<double>(pairs);
    return stats;
}

}  // namespace c3f
