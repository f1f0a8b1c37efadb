// c3f command-line tool: synth | calibrate | predict | evaluate | ablate | bound
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "c3f/artifacts.hpp"
#include "c3f/csv.hpp"
#include "c3f/ingest.hpp"
#include "c3f/pipeline.hpp"
#include "c3f/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class StageTimer {
public:
    explicit StageTimer(c3f::RunManifest& manifest) : manifest_(manifest) {}

    template <typename Fn>
    auto time(const std::string& stage, Fn&& fn) {
        auto start = std::chrono::steady_clock::now();
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            record(stage, start);
        } else {
            auto result = fn();
            record(stage, start);
            return result;
        }
    }

private:
    void record(const std::string& stage,
                std::chrono::steady_clock::time_point start) {
        auto end = std::chrono::steady_clock::now();
        manifest_.timings_ms[stage] =
            std::chrono::duration<double, std::milli>(end - start).count();
    }

    c3f::RunManifest& manifest_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw c3f::Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw c3f::Error("cannot write file: " + path);
    out << content;
}

struct NamedInput {
    std::string role;
    std::string path;
    std::string text;
};

c3f::RunManifest make_manifest(const std::string& command, const std::string& config_text,
                               const std::vector<NamedInput>& inputs, std::uint64_t seed) {
    c3f::RunManifest manifest;
    manifest.tool_version = c3f::version_string();
    manifest.command = command;
    manifest.config_digest = c3f::content_digest(config_text);
    manifest.seed = seed;
    for (const auto& input : inputs) {
        manifest.inputs[input.role] = {input.path, c3f::content_digest(input.text)};
    }
    manifest.finalize_id();
    return manifest;
}

void emit(c3f::RunManifest& manifest, const std::string& out_dir, const std::string& name,
          const std::string& content) {
    fs::create_directories(out_dir);
    std::string path = (fs::path(out_dir) / name).string();
    write_file(path, content);
    manifest.outputs[name] = c3f::content_digest(content);
}

void finish(c3f::RunManifest& manifest, const std::string& out_dir) {
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "manifest.json").string(), manifest.to_json());
}

c3f::SynthSpec parse_synth_spec(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw c3f::Error(std::string("synth spec: malformed JSON: ") + e.what());
    }
    c3f::SynthSpec spec;
    if (!j.contains("groups")) throw c3f::Error("synth spec: missing 'groups'");
    for (const auto& g : j["groups"]) {
        c3f::SynthGroup group;
        group.name = g.at("name").get<std::string>();
        group.n_cal = g.at("n_cal").get<std::size_t>();
        group.n_test = g.at("n_test").get<std::size_t>();
        if (g.contains("shift")) group.shift = g["shift"].get<double>();
        if (g.contains("noise_scale")) group.noise_scale = g["noise_scale"].get<double>();
        spec.groups.push_back(group);
    }
    if (j.contains("dim")) spec.dim = j["dim"].get<std::size_t>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("emit_posteriors")) spec.emit_posteriors = j["emit_posteriors"].get<bool>();
    if (j.contains("scm")) {
        // Reuse the config parser for the scm block.
        json wrapper;
        wrapper["alpha"] = 0.1;
        wrapper["scm"] = j["scm"];
        spec.scm = c3f::parse_config(wrapper.dump()).scm;
    }
    spec.validate();
    return spec;
}

// Strips covariate-only rows for the --target-x input.
std::vector<c3f::CalibrationRecord> load_target_x(const std::string& path) {
    return c3f::load_records(path, c3f::SchemaRole::target_covariates);
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir,
              std::optional<std::uint64_t> seed) {
    std::string spec_text = read_file(spec_path);
    c3f::SynthSpec spec = parse_synth_spec(spec_text);
    if (seed) spec.seed = *seed;

    auto manifest = make_manifest("synth", spec_text, {{"spec", spec_path, spec_text}},
                                  spec.seed);
    StageTimer timer(manifest);

    auto cal = timer.time("generate_calibration",
                          [&] { return c3f::generate(spec, c3f::SynthRole::calibration); });
    auto test = timer.time("generate_target",
                           [&] { return c3f::generate(spec, c3f::SynthRole::target); });

    emit(manifest, out_dir, "cal.csv", c3f::records_to_csv(cal));
    emit(manifest, out_dir, "test.csv", c3f::records_to_csv(test));
    // Covariates-only view of the target sample, for weight estimation.
    std::vector<c3f::CalibrationRecord> target_x;
    for (const auto& rec : test) {
        c3f::CalibrationRecord stripped;
        stripped.id = rec.id;
        stripped.group = rec.group;
        stripped.posterior = rec.posterior;
        stripped.covariates = rec.covariates;
        target_x.push_back(std::move(stripped));
    }
    emit(manifest, out_dir, "target_x.csv", c3f::records_to_csv(target_x));
    finish(manifest, out_dir);
    std::cout << "synth: wrote " << cal.size() << " calibration and " << test.size()
              << " target rows to " << out_dir << "\n";
    return 0;
}

int cmd_calibrate(const std::string& config_path, const std::string& cal_path,
                  const std::string& target_x_path, const std::string& out_dir,
                  std::optional<std::uint64_t> seed) {
    std::string config_text = read_file(config_path);
    c3f::RunConfig config = c3f::parse_config(config_text);
    if (seed) config.seed = *seed;

    std::vector<NamedInput> inputs = {{"cal", cal_path, read_file(cal_path)}};
    if (!target_x_path.empty()) {
        inputs.push_back({"target_x", target_x_path, read_file(target_x_path)});
    }
    auto manifest = make_manifest("calibrate", config_text, inputs, config.seed);
    StageTimer timer(manifest);

    auto records = timer.time("load", [&] {
        return c3f::load_records(cal_path, c3f::SchemaRole::calibration);
    });
    std::vector<c3f::CalibrationRecord> target_x;
    if (!target_x_path.empty()) target_x = load_target_x(target_x_path);
    if (config.weight_source == c3f::WeightSource::estimate && target_x_path.empty()) {
        throw c3f::Error("weight_source=estimate requires --target-x");
    }

    auto result = timer.time("calibrate", [&] {
        return c3f::run_calibration(std::move(records), config,
                                    target_x_path.empty() ? nullptr : &target_x);
    });
    manifest.warnings = result.warnings;

    emit(manifest, out_dir, "thresholds.json",
         c3f::thresholds_to_json(result.thresholds, result.shift_stats,
                                 manifest.manifest_id));
    if (result.cf) {
        json j;
        j["manifest_id"] = manifest.manifest_id;
        j["value"] = result.cf->value;
        j["hard_value"] = result.cf->hard_value;
        j["temperature"] = result.cf->temperature;
        j["fd_step"] = result.cf->fd_step;
        j["gradient"] = result.cf->gradient;
        emit(manifest, out_dir, "cf_calibration.json", j.dump(2) + "\n");
    }
    finish(manifest, out_dir);
    std::cout << "calibrate: " << result.thresholds.groups.size() << " group(s) -> "
              << out_dir << "/thresholds.json\n";
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    return 0;
}

int cmd_predict(const std::string& config_path, const std::string& test_path,
                const std::string& thresholds_path, const std::string& out_dir) {
    std::string config_text = read_file(config_path);
    c3f::RunConfig config = c3f::parse_config(config_text);
    std::string thr_path = thresholds_path.empty()
                               ? (fs::path(out_dir) / "thresholds.json").string()
                               : thresholds_path;

    std::string test_text = read_file(test_path);
    std::string thr_text = read_file(thr_path);
    auto manifest = make_manifest("predict", config_text,
                                  {{"test", test_path, test_text},
                                   {"thresholds", thr_path, thr_text}},
                                  config.seed);
    StageTimer timer(manifest);

    auto thresholds = c3f::thresholds_from_json(thr_text);
    auto records = timer.time("load", [&] {
        return c3f::load_records(test_path, c3f::SchemaRole::test);
    });
    auto rows = timer.time("predict", [&] {
        return c3f::run_predict(std::move(records), thresholds, config);
    });

    emit(manifest, out_dir, "predictions.csv", c3f::predictions_to_csv(rows, config.task));
    finish(manifest, out_dir);
    std::cout << "predict: " << rows.size() << " row(s) -> " << out_dir
              << "/predictions.csv\n";
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& test_path,
                 const std::string& thresholds_path, const std::string& out_dir) {
    std::string config_text = read_file(config_path);
    c3f::RunConfig config = c3f::parse_config(config_text);
    std::string thr_path = thresholds_path.empty()
                               ? (fs::path(out_dir) / "thresholds.json").string()
                               : thresholds_path;

    std::string test_text = read_file(test_path);
    std::string thr_text = read_file(thr_path);
    auto manifest = make_manifest("evaluate", config_text,
                                  {{"test", test_path, test_text},
                                   {"thresholds", thr_path, thr_text}},
                                  config.seed);
    StageTimer timer(manifest);

    auto thresholds = c3f::thresholds_from_json(thr_text);
    auto records = timer.time("load", [&] {
        return c3f::load_records(test_path, c3f::SchemaRole::test);
    });
    bool has_labels = false;
    for (const auto& rec : records) has_labels |= rec.label.has_value();
    if (!has_labels) {
        bool has_scores = false;
        for (const auto& rec : records) has_scores |= rec.score.has_value();
        if (!has_scores) {
            throw c3f::Error("evaluate: test file carries no 'label' column");
        }
    }

    auto report = timer.time("evaluate", [&] {
        auto rows = c3f::run_predict(records, thresholds, config);
        return c3f::run_evaluate(records, rows, thresholds, config);
    });

    emit(manifest, out_dir, "report.json", c3f::report_to_json(report, manifest.manifest_id));
    emit(manifest, out_dir, "report.csv", c3f::report_to_csv(report, manifest.manifest_id));
    finish(manifest, out_dir);
    std::cout << "evaluate: eccg=" << c3f::format_double(report.eccg) << " -> " << out_dir
              << "/report.json\n";
    return 0;
}

int cmd_bound(const std::vector<double>& n, const std::vector<double>& b,
              const std::vector<double>& alpha_a, double delta) {
    if (n.empty() || n.size() != b.size() || n.size() != alpha_a.size()) {
        throw c3f::Error("bound: --n, --B and --alpha-a need the same nonzero length");
    }
    c3f::ThresholdSet t;
    t.delta = delta;
    for (std::size_t i = 0; i < n.size(); ++i) {
        std::string g = "g" + std::to_string(i);
        t.groups.push_back(g);
        t.n[g] = n[i];
        t.b_hat[g] = b[i];
        t.alpha_a[g] = alpha_a[i];
        t.q_raw[g] = t.q_reg[g] = 0.0;
    }
    for (std::size_t i = 0; i < n.size(); ++i) {
        double bound = c3f::coverage_bound(n[i], b[i], n.size(), delta, alpha_a[i]);
        std::cout << "group " << i << ": coverage_bound = " << c3f::format_double(bound)
                  << "\n";
    }
    std::cout << "eccg_bound = " << c3f::format_double(c3f::eccg_bound(t)) << "\n";
    return 0;
}

struct AblateAxes {
    bool sweep_weights = false;
    bool sweep_budgets = false;
    std::vector<double> lambda_grid;
    bool sweep_posterior = false;
};

int cmd_ablate(const std::string& config_path, const std::string& spec_path,
               const std::string& out_dir, std::size_t reps, const AblateAxes& axes,
               std::optional<std::uint64_t> seed) {
    std::string config_text = read_file(config_path);
    std::string spec_text = read_file(spec_path);
    c3f::RunConfig base_config = c3f::parse_config(config_text);
    c3f::SynthSpec base_spec = parse_synth_spec(spec_text);
    if (seed) base_spec.seed = *seed;

    struct Setting {
        std::string axis;
        std::string value;
        c3f::RunConfig config;
        c3f::SynthSpec spec;
    };
    std::vector<Setting> settings;
    if (axes.sweep_weights) {
        for (auto src : {c3f::WeightSource::unit, c3f::WeightSource::provided}) {
            Setting s{"weights", src == c3f::WeightSource::unit ? "unit" : "provided",
                      base_config, base_spec};
            s.config.weight_source = src;
            settings.push_back(std::move(s));
        }
    }
    if (axes.sweep_budgets) {
        for (auto scheme : {c3f::BudgetScheme::uniform, c3f::BudgetScheme::scaled}) {
            Setting s{"budget", scheme == c3f::BudgetScheme::uniform ? "uniform" : "scaled",
                      base_config, base_spec};
            s.config.budget_scheme = scheme;
            settings.push_back(std::move(s));
        }
    }
    for (double lambda : axes.lambda_grid) {
        Setting s{"lambda", c3f::format_double(lambda), base_config, base_spec};
        s.config.lambda = lambda;
        settings.push_back(std::move(s));
    }
    if (axes.sweep_posterior) {
        for (bool soft : {false, true}) {
            Setting s{"groups", soft ? "soft" : "hard", base_config, base_spec};
            s.spec.emit_posteriors = soft;
            settings.push_back(std::move(s));
        }
    }
    if (settings.empty()) {
        throw c3f::Error("ablate: empty sweep grid; pass at least one axis flag");
    }

    auto manifest = make_manifest("ablate", config_text,
                                  {{"config", config_path, config_text},
                                   {"spec", spec_path, spec_text}},
                                  base_spec.seed);
    StageTimer timer(manifest);

    c3f::csv::Table table;
    table.header = {"axis", "setting", "replicate", "metric", "group", "value"};
    auto add = [&](const Setting& s, std::size_t rep, const std::string& metric,
                   const std::string& group, double value) {
        table.rows.push_back({s.axis, s.value, std::to_string(rep), metric, group,
                              c3f::format_double(value)});
    };

    timer.time("sweep", [&] {
        for (const auto& s : settings) {
            auto stats = c3f::run_replicates(s.spec, s.config, reps);
            for (const auto& rep : stats.replicates) {
                add(s, rep.replicate, "eccg", "", rep.report.eccg);
                add(s, rep.replicate, "eccg_pooled", "", rep.eccg_pooled);
                add(s, rep.replicate, "mean_set_size", "", rep.report.mean_set_size);
                for (const auto& [g, cov] : rep.report.coverage) {
                    add(s, rep.replicate, "coverage", g, cov);
                }
                if (rep.report.cf_disparity) {
                    add(s, rep.replicate, "cf_disparity", "", rep.report.cf_disparity->value);
                }
            }
        }
    });

    emit(manifest, out_dir, "ablation.csv", c3f::csv::to_string(table));
    finish(manifest, out_dir);
    std::cout << "ablate: " << settings.size() << " setting(s) x " << reps
              << " replicate(s) -> " << out_dir << "/ablation.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"c3f: group-conditional conformal calibration under covariate shift"};
    app.require_subcommand(1);

    std::string config_path, cal_path, test_path, target_x_path, out_dir = ".";
    std::string spec_path, thresholds_path;
    std::optional<std::uint64_t> seed;
    std::size_t reps = 1;

    auto* synth = app.add_subcommand("synth", "generate synthetic calibration/target CSVs");
    synth->add_option("--spec", spec_path, "synthetic spec JSON")->required();
    synth->add_option("--out", out_dir, "output directory");
    synth->add_option("--seed", seed, "override the spec seed");

    auto* calibrate = app.add_subcommand("calibrate", "compute per-group thresholds");
    calibrate->add_option("--config", config_path, "run config JSON")->required();
    calibrate->add_option("--cal", cal_path, "calibration CSV")->required();
    calibrate->add_option("--target-x", target_x_path, "target covariates CSV");
    calibrate->add_option("--out", out_dir, "output directory");
    calibrate->add_option("--seed", seed, "override the config seed");

    auto* predict = app.add_subcommand("predict", "emit prediction sets for a test CSV");
    predict->add_option("--config", config_path, "run config JSON")->required();
    predict->add_option("--test", test_path, "test CSV")->required();
    predict->add_option("--thresholds", thresholds_path,
                        "thresholds artifact (default <out>/thresholds.json)");
    predict->add_option("--out", out_dir, "output directory");

    auto* evaluate = app.add_subcommand("evaluate", "audit coverage against the bounds");
    evaluate->add_option("--config", config_path, "run config JSON")->required();
    evaluate->add_option("--test", test_path, "labeled test CSV")->required();
    evaluate->add_option("--thresholds", thresholds_path,
                         "thresholds artifact (default <out>/thresholds.json)");
    evaluate->add_option("--out", out_dir, "output directory");

    AblateAxes axes;
    auto* ablate = app.add_subcommand("ablate", "sweep ablation axes over replicates");
    ablate->add_option("--config", config_path, "run config JSON")->required();
    ablate->add_option("--spec", spec_path, "synthetic spec JSON")->required();
    ablate->add_option("--out", out_dir, "output directory");
    ablate->add_option("--reps", reps, "replicates per setting");
    ablate->add_option("--seed", seed, "override the spec seed");
    ablate->add_flag("--sweep-weights", axes.sweep_weights, "unit vs provided weights");
    ablate->add_flag("--sweep-budgets", axes.sweep_budgets, "uniform vs scaled budgets");
    ablate->add_option("--lambda-grid", axes.lambda_grid, "lambda values to sweep");
    ablate->add_flag("--sweep-posterior", axes.sweep_posterior, "hard vs soft groups");

    std::vector<double> bound_n, bound_b, bound_alpha;
    double bound_delta = 0.1;
    auto* bound = app.add_subcommand("bound", "print the coverage and gap bounds");
    bound->add_option("--n", bound_n, "per-group sample sizes")->required();
    bound->add_option("--B", bound_b, "per-group second-moment statistics")->required();
    bound->add_option("--alpha-a", bound_alpha, "per-group budgets")->required();
    bound->add_option("--delta", bound_delta, "confidence level");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return cmd_synth(spec_path, out_dir, seed);
        if (calibrate->parsed()) {
            return cmd_calibrate(config_path, cal_path, target_x_path, out_dir, seed);
        }
        if (predict->parsed()) {
            return cmd_predict(config_path, test_path, thresholds_path, out_dir);
        }
        if (evaluate->parsed()) {
            return cmd_evaluate(config_path, test_path, thresholds_path, out_dir);
        }
        if (ablate->parsed()) {
            return cmd_ablate(config_path, spec_path, out_dir, reps, axes, seed);
        }
        if (bound->parsed()) return cmd_bound(bound_n, bound_b, bound_alpha, bound_delta);
    } catch (const c3f::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
