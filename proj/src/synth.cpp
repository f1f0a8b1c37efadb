#include "c3f/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "c3f/common.hpp"

namespace c3f {

void SynthSpec::validate() const {
    if (groups.empty()) throw Error("synth: no groups");
    if (dim == 0) throw Error("synth: dim must be >= 1");
    std::set<std::string> names;
    for (const auto& g : groups) {
        if (!names.insert(g.name).second) throw Error("synth: duplicate group '" + g.name + "'");
        if (!std::isfinite(g.shift)) throw Error("synth: non-finite shift for group '" + g.name + "'");
        if (!(g.noise_scale > 0.0)) {
            throw Error("synth: noise_scale for group '" + g.name + "' must be > 0");
        }
        if (scm && g.shift != 0.0) {
            throw Error("synth: covariate shift is not supported together with an scm");
        }
    }
    if (scm) {
        scm->validate();
        if (emit_posteriors) throw Error("synth: emit_posteriors is not supported with an scm");
    }
}

double label_conditional(const std::vector<double>& covariates, double eps,
                         double noise_scale) {
    double mean = 0.0;
    for (double x : covariates) mean += x;
    return mean + noise_scale * eps;
}

double exact_weight(const std::vector<double>& covariates, double mu) {
    double log_w = 0.0;
    for (double x : covariates) log_w += mu * x - 0.5 * mu * mu;
    return std::exp(log_w);
}

double analytic_b(double mu, std::size_t dim) {
    return std::exp(static_cast<double>(dim) * mu * mu) - 1.0;
}

namespace {

std::string role_tag(SynthRole role) {
    return role == SynthRole::calibration ? "cal" : "tgt";
}

// The wrapped base model underestimates the regression slope. A perfect
// predictor would leave |y - pred| independent of x and no covariate shift
// could move the score distribution.
constexpr double kPredSlope = 0.5;

// Gaussian density of x under the role's group distribution, up to the
// shared N(0, I) base factor; used for the true posterior columns.
double relative_density(const std::vector<double>& x, double mu) {
    return exact_weight(x, mu);
}

void generate_gaussian_group(const SynthSpec& spec, const SynthGroup& group,
                             SynthRole role, Rng& rng,
                             std::vector<CalibrationRecord>& out) {
    const std::size_t n = role == SynthRole::calibration ? group.n_cal : group.n_test;
    const double mu = role == SynthRole::calibration ? 0.0 : group.shift;
    for (std::size_t i = 0; i < n; ++i) {
        CalibrationRecord rec;
        rec.id = role_tag(role) + "-" + group.name + "-" + std::to_string(i);
        rec.group = group.name;
        rec.covariates.resize(spec.dim);
        for (std::size_t k = 0; k < spec.dim; ++k) rec.covariates[k] = mu + rng.normal();
        double eps = rng.normal();
        double y = label_conditional(rec.covariates, eps, group.noise_scale);
        double pred = 0.0;
        for (double x : rec.covariates) pred += kPredSlope * x;
        rec.label = format_double(y);
        rec.pred = pred;
        rec.score = std::abs(y - pred);
        // Exact ratio of target to calibration density at this point.
        rec.weight = exact_weight(rec.covariates, group.shift);
        out.push_back(std::move(rec));
    }
}

void generate_scm_group(const SynthSpec& spec, const SynthGroup& group, SynthRole role,
                        Rng& rng, std::vector<CalibrationRecord>& out) {
    const ScmSpec& scm = *spec.scm;
    const std::size_t n = role == SynthRole::calibration ? group.n_cal : group.n_test;
    const double level = scm.attribute_value(group.name);
    const auto order = scm.topological_order();

    for (std::size_t i = 0; i < n; ++i) {
        NodeValues values;
        NodeValues noise;
        for (const auto& node : order) {
            if (node == scm.attribute) {
                values[node] = level;
                continue;
            }
            double scale = 1.0;
            if (auto it = scm.noise_scale.find(node); it != scm.noise_scale.end()) {
                scale = it->second;
            }
            double u = scale * rng.normal();
            noise[node] = u;
            double v = u;
            for (const ScmEdge* e : scm.parents_of(node)) v += e->coef * values.at(e->from);
            values[node] = v;
        }

        CalibrationRecord rec;
        rec.id = role_tag(role) + "-" + group.name + "-" + std::to_string(i);
        rec.group = group.name;
        for (std::size_t k = 0;; ++k) {
            auto it = values.find("x" + std::to_string(k));
            if (it == values.end()) break;
            rec.covariates.push_back(it->second);
        }
        if (auto it = values.find("y"); it != values.end()) {
            rec.label = format_double(it->second);
            rec.pred = it->second - noise.at("y");  // structural mean of y
            rec.score = std::abs(it->second - *rec.pred);
        }
        rec.weight = 1.0;  // identical roles, no shift
        out.push_back(std::move(rec));
    }
}

}  // namespace

std::vector<CalibrationRecord> generate(const SynthSpec& spec, SynthRole role) {
    spec.validate();
    std::vector<CalibrationRecord> records;
    for (std::size_t gi = 0; gi < spec.groups.size(); ++gi) {
        // Independent stream per (seed, role, group), so output does not
        // depend on generation order.
        std::uint64_t stream = derive_seed(spec.seed, (gi << 1) | (role == SynthRole::target));
        Rng rng(stream);
        if (spec.scm) {
            generate_scm_group(spec, spec.groups[gi], role, rng, records);
        } else {
            generate_gaussian_group(spec, spec.groups[gi], role, rng, records);
        }
    }

    if (spec.emit_posteriors && role == SynthRole::target) {
        double n_total = 0.0;
        for (const auto& g : spec.groups) n_total += static_cast<double>(g.n_test);
        for (auto& rec : records) {
            double total = 0.0;
            std::map<std::string, double> post;
            for (const auto& g : spec.groups) {
                double prior = static_cast<double>(g.n_test) / n_total;
                double p = prior * relative_density(rec.covariates, g.shift);
                post[g.name] = p;
                total += p;
            }
            for (auto& [name, p] : post) p /= total;
            rec.posterior = std::move(post);
            rec.group.reset();
        }
    }
    return records;
}

}  // namespace c3f
