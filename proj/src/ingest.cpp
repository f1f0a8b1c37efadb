#include "c3f/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "c3f/common.hpp"
#include "c3f/csv.hpp"

using nlohmann::json;

namespace c3f {

namespace {

double parse_numeric_cell(const std::string& text, const std::string& column,
                          std::size_t lineno) {
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (text.empty() || !end || *end != '\0' || !std::isfinite(v)) {
        throw Error("line " + std::to_string(lineno) + ": column '" + column +
                    "' has non-finite or unparseable value '" + text + "'");
    }
    return v;
}

struct ColumnLayout {
    int id = -1;
    int group = -1;
    int score = -1;
    int weight = -1;
    int label = -1;
    int pred = -1;
    std::vector<std::pair<std::string, int>> posterior;   // group name, column
    std::vector<std::pair<int, int>> covariates;          // x-index, column
    std::vector<std::pair<std::string, int>> label_scores;  // label, column
};

ColumnLayout analyze_header(const csv::Table& table, SchemaRole role,
                            const std::string& origin) {
    ColumnLayout layout;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        const std::string& name = table.header[i];
        int col = static_cast<int>(i);
        if (name == "id") layout.id = col;
        else if (name == "group") layout.group = col;
        else if (name == "score") layout.score = col;
        else if (name == "weight") layout.weight = col;
        else if (name == "label") layout.label = col;
        else if (name == "pred") layout.pred = col;
        else if (name.rfind("p_", 0) == 0 && name.size() > 2) {
            layout.posterior.emplace_back(name.substr(2), col);
        } else if (name.rfind("eta_", 0) == 0 && name.size() > 4) {
            layout.label_scores.emplace_back(name.substr(4), col);
        } else if (name.size() > 1 && name[0] == 'x' &&
                   name.find_first_not_of("0123456789", 1) == std::string::npos) {
            layout.covariates.emplace_back(std::atoi(name.c_str() + 1), col);
        } else {
            throw Error(origin + ": unrecognized column '" + name + "'");
        }
    }
    std::sort(layout.covariates.begin(), layout.covariates.end());

    if (layout.id < 0 && role != SchemaRole::target_covariates) {
        throw Error(origin + ": missing required column 'id'");
    }
    bool has_group = layout.group >= 0;
    bool has_posterior = !layout.posterior.empty();
    if (has_group && has_posterior) {
        throw Error(origin + ": file mixes a 'group' column with posterior p_* columns");
    }
    if (!has_group && !has_posterior) {
        throw Error(origin + ": missing required column 'group' (or posterior p_* columns)");
    }
    if (role == SchemaRole::calibration) {
        bool scores_available =
            layout.score >= 0 ||
            (layout.label >= 0 && layout.pred >= 0) ||
            (layout.label >= 0 && !layout.label_scores.empty());
        if (!scores_available) {
            throw Error(origin +
                        ": missing required column 'score' (or 'label'+'pred' / "
                        "'label'+eta_* columns to compute it)");
        }
    }
    if (role == SchemaRole::target_covariates && layout.covariates.empty()) {
        throw Error(origin + ": missing covariate columns x0..xk");
    }
    return layout;
}

}  // namespace

std::vector<CalibrationRecord> parse_records(const std::string& csv_text, SchemaRole role,
                                             const std::string& origin) {
    csv::Table table = csv::read_string(csv_text);
    if (table.header.empty()) throw Error(origin + ": empty file");
    ColumnLayout layout = analyze_header(table, role, origin);

    std::vector<CalibrationRecord> records;
    records.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        std::size_t lineno = r + 2;
        CalibrationRecord rec;
        rec.id = layout.id >= 0 ? row[layout.id] : "row" + std::to_string(lineno);
        if (layout.group >= 0) {
            if (row[layout.group].empty()) {
                throw Error("line " + std::to_string(lineno) + ": empty group label");
            }
            rec.group = row[layout.group];
        } else {
            double total = 0.0;
            for (const auto& [g, col] : layout.posterior) {
                double p = parse_numeric_cell(row[col], "p_" + g, lineno);
                if (p < 0.0) {
                    throw Error("line " + std::to_string(lineno) + ": posterior p_" + g +
                                " is negative");
                }
                rec.posterior[g] = p;
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9) {
                throw Error("line " + std::to_string(lineno) +
                            ": posterior entries sum to " + format_double(total) +
                            ", expected 1");
            }
        }
        if (layout.score >= 0 && !row[layout.score].empty()) {
            rec.score = parse_numeric_cell(row[layout.score], "score", lineno);
        }
        if (layout.weight >= 0 && !row[layout.weight].empty()) {
            double w = parse_numeric_cell(row[layout.weight], "weight", lineno);
            if (!(w > 0.0)) {
                throw Error("line " + std::to_string(lineno) + ": weight must be > 0");
            }
            rec.weight = w;
        }
        if (layout.label >= 0 && !row[layout.label].empty()) {
            rec.label = row[layout.label];
        }
        if (layout.pred >= 0 && !row[layout.pred].empty()) {
            rec.pred = parse_numeric_cell(row[layout.pred], "pred", lineno);
        }
        for (const auto& [xi, col] : layout.covariates) {
            (void)xi;
            rec.covariates.push_back(parse_numeric_cell(row[col], table.header[col], lineno));
        }
        for (const auto& [lbl, col] : layout.label_scores) {
            rec.label_scores[lbl] = parse_numeric_cell(row[col], "eta_" + lbl, lineno);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<CalibrationRecord> load_records(const std::string& path, SchemaRole role) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (buf.str().empty()) throw Error("empty file: " + path);
    return parse_records(buf.str(), role, path);
}

std::string records_to_csv(const std::vector<CalibrationRecord>& records) {
    bool any_group = false, any_score = false, any_weight = false;
    bool any_label = false, any_pred = false;
    std::set<std::string> posterior_groups, score_labels;
    std::size_t n_cov = 0;
    for (const auto& rec : records) {
        any_group |= rec.group.has_value();
        any_score |= rec.score.has_value();
        any_weight |= rec.weight.has_value();
        any_label |= rec.label.has_value();
        any_pred |= rec.pred.has_value();
        for (const auto& [g, p] : rec.posterior) { (void)p; posterior_groups.insert(g); }
        for (const auto& [l, s] : rec.label_scores) { (void)s; score_labels.insert(l); }
        n_cov = std::max(n_cov, rec.covariates.size());
    }

    csv::Table table;
    table.header.push_back("id");
    if (any_group) table.header.push_back("group");
    for (const auto& g : posterior_groups) table.header.push_back("p_" + g);
    if (any_score) table.header.push_back("score");
    if (any_weight) table.header.push_back("weight");
    for (std::size_t i = 0; i < n_cov; ++i) table.header.push_back("x" + std::to_string(i));
    if (any_label) table.header.push_back("label");
    if (any_pred) table.header.push_back("pred");
    for (const auto& l : score_labels) table.header.push_back("eta_" + l);

    for (const auto& rec : records) {
        std::vector<std::string> row;
        row.push_back(rec.id);
        if (any_group) row.push_back(rec.group.value_or(""));
        for (const auto& g : posterior_groups) {
            auto it = rec.posterior.find(g);
            row.push_back(it == rec.posterior.end() ? "" : format_double(it->second));
        }
        if (any_score) row.push_back(rec.score ? format_double(*rec.score) : "");
        if (any_weight) row.push_back(rec.weight ? format_double(*rec.weight) : "");
        for (std::size_t i = 0; i < n_cov; ++i) {
            row.push_back(i < rec.covariates.size() ? format_double(rec.covariates[i]) : "");
        }
        if (any_label) row.push_back(rec.label.value_or(""));
        if (any_pred) row.push_back(rec.pred ? format_double(*rec.pred) : "");
        for (const auto& l : score_labels) {
            auto it = rec.label_scores.find(l);
            row.push_back(it == rec.label_scores.end() ? "" : format_double(it->second));
        }
        table.rows.push_back(std::move(row));
    }
    return csv::to_string(table);
}

void write_records(const std::vector<CalibrationRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out << records_to_csv(records);
}

namespace {

ScmSpec parse_scm(const json& j) {
    static const std::set<std::string> known = {
        "variables", "edges", "noise", "attribute", "unfair_edges", "levels"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw Error("config: unknown scm key '" + it.key() + "'");
    }
    ScmSpec scm;
    for (const auto& v : j.at("variables")) scm.variables.push_back(v.get<std::string>());
    for (const auto& e : j.at("edges")) {
        scm.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                             e.at("coef").get<double>()});
    }
    if (j.contains("noise")) {
        for (auto it = j["noise"].begin(); it != j["noise"].end(); ++it) {
            scm.noise_scale[it.key()] = it.value().get<double>();
        }
    }
    scm.attribute = j.at("attribute").get<std::string>();
    if (j.contains("unfair_edges")) {
        for (const auto& e : j["unfair_edges"]) {
            scm.unfair_edges.emplace_back(e.at("from").get<std::string>(),
                                          e.at("to").get<std::string>());
        }
    }
    if (j.contains("levels")) {
        for (auto it = j["levels"].begin(); it != j["levels"].end(); ++it) {
            scm.levels[it.key()] = it.value().get<double>();
        }
    }
    return scm;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("config: malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("config: top level must be a JSON object");

    static const std::set<std::string> known = {
        "alpha", "delta", "budget_scheme", "budgets", "pi", "lambda",
        "regularizer_sign", "weight_source", "weight_clip",
        "finite_sample_correction", "task", "scm", "seed", "groups"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw Error("config: unknown key '" + it.key() + "'");
    }

    RunConfig cfg;
    if (!j.contains("alpha")) throw Error("config: missing required key 'alpha'");
    cfg.alpha = j["alpha"].get<double>();
    if (j.contains("delta")) cfg.delta = j["delta"].get<double>();
    if (j.contains("budget_scheme")) {
        std::string s = j["budget_scheme"].get<std::string>();
        if (s == "uniform") cfg.budget_scheme = BudgetScheme::uniform;
        else if (s == "scaled") cfg.budget_scheme = BudgetScheme::scaled;
        else if (s == "explicit") cfg.budget_scheme = BudgetScheme::explicit_table;
        else throw Error("config: unknown budget_scheme '" + s + "'");
    }
    if (j.contains("budgets")) {
        for (auto it = j["budgets"].begin(); it != j["budgets"].end(); ++it) {
            cfg.budgets[it.key()] = it.value().get<double>();
        }
    }
    if (j.contains("pi")) {
        for (auto it = j["pi"].begin(); it != j["pi"].end(); ++it) {
            cfg.pi[it.key()] = it.value().get<double>();
        }
    }
    if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
    if (j.contains("regularizer_sign")) {
        std::string s = j["regularizer_sign"].get<std::string>();
        if (s == "descent") cfg.regularizer_sign = RegularizerSign::descent;
        else if (s == "as_written") cfg.regularizer_sign = RegularizerSign::as_written;
        else throw Error("config: unknown regularizer_sign '" + s + "'");
    }
    if (j.contains("weight_source")) {
        std::string s = j["weight_source"].get<std::string>();
        if (s == "provided") cfg.weight_source = WeightSource::provided;
        else if (s == "estimate") cfg.weight_source = WeightSource::estimate;
        else if (s == "unit") cfg.weight_source = WeightSource::unit;
        else throw Error("config: unknown weight_source '" + s + "'");
    }
    if (j.contains("weight_clip") && !j["weight_clip"].is_null()) {
        cfg.weight_clip = j["weight_clip"].get<double>();
    }
    if (j.contains("finite_sample_correction")) {
        cfg.finite_sample_correction = j["finite_sample_correction"].get<bool>();
    }
    if (j.contains("task")) {
        std::string s = j["task"].get<std::string>();
        if (s == "regression") cfg.task = Task::regression;
        else if (s == "classification") cfg.task = Task::classification;
        else throw Error("config: unknown task '" + s + "'");
    }
    if (j.contains("scm") && !j["scm"].is_null()) cfg.scm = parse_scm(j["scm"]);
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("groups")) {
        for (const auto& g : j["groups"]) cfg.groups.push_back(g.get<std::string>());
    }

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<std::string> group_universe(const std::vector<CalibrationRecord>& records,
                                        const RunConfig& config) {
    std::set<std::string> groups(config.groups.begin(), config.groups.end());
    for (const auto& rec : records) {
        if (rec.group) groups.insert(*rec.group);
        for (const auto& [g, p] : rec.posterior) { (void)p; groups.insert(g); }
    }
    return {groups.begin(), groups.end()};
}

}  // namespace c3f
