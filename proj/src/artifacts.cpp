#include "c3f/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "c3f/calibration.hpp"
#include "c3f/csv.hpp"

using nlohmann::json;

namespace c3f {

std::string version_string() { return "0.1.0"; }

std::string content_digest(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file for digest: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return content_digest(buf.str());
}

void RunManifest::finalize_id() {
    std::string material = tool_version + "|" + command + "|" + config_digest + "|" +
                           std::to_string(seed);
    for (const auto& [role, input] : inputs) material += "|" + role + "=" + input.digest;
    manifest_id = content_digest(material);
}

std::string RunManifest::to_json() const {
    json j;
    j["manifest_id"] = manifest_id;
    j["tool_version"] = tool_version;
    j["command"] = command;
    j["config_digest"] = config_digest;
    json in;
    for (const auto& [role, input] : inputs) {
        in[role] = {{"path", input.path}, {"digest", input.digest}};
    }
    j["inputs"] = in;
    j["seed"] = seed;
    j["timings_ms"] = timings_ms;
    j["warnings"] = warnings;
    j["outputs"] = outputs;
    return j.dump(2) + "\n";
}

namespace {

json cf_to_json(const CfDisparity& d) {
    json j;
    j["value"] = d.value;
    j["hard_value"] = d.hard_value;
    j["temperature"] = d.temperature;
    j["fd_step"] = d.fd_step;
    json pairs = json::array();
    for (const auto& [pair, v] : d.pair_smoothed) {
        json p;
        p["group"] = pair.first;
        p["target"] = pair.second;
        p["smoothed"] = v;
        p["hard"] = d.pair_hard.at(pair);
        pairs.push_back(p);
    }
    j["pairs"] = pairs;
    j["gradient"] = d.gradient;
    return j;
}

}  // namespace

std::string thresholds_to_json(const ThresholdSet& t, const ShiftStats& stats,
                               const std::string& manifest_id) {
    json j;
    j["manifest_id"] = manifest_id;
    j["alpha"] = t.alpha;
    j["delta"] = t.delta;
    j["lambda"] = t.lambda;
    j["groups"] = t.groups;
    json per_group;
    for (const auto& g : t.groups) {
        json e;
        e["q_raw"] = t.q_raw.at(g);
        e["q_reg"] = t.q_reg.at(g);
        e["n"] = t.n.at(g);
        e["alpha_a"] = t.alpha_a.at(g);
        e["b_hat"] = t.b_hat.at(g);
        e["coverage_bound"] = coverage_bound(t.n.at(g), t.b_hat.at(g), t.groups.size(),
                                             t.delta, t.alpha_a.at(g));
        if (auto it = stats.n_eff.find(g); it != stats.n_eff.end()) {
            e["n_eff"] = it->second;
        }
        per_group[g] = e;
    }
    j["per_group"] = per_group;
    j["eccg_bound"] = eccg_bound(t);
    return j.dump(2) + "\n";
}

ThresholdSet thresholds_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("thresholds artifact: malformed JSON: ") + e.what());
    }
    ThresholdSet t;
    t.alpha = j.at("alpha").get<double>();
    t.delta = j.at("delta").get<double>();
    t.lambda = j.at("lambda").get<double>();
    for (const auto& g : j.at("groups")) t.groups.push_back(g.get<std::string>());
    for (const auto& g : t.groups) {
        const json& e = j.at("per_group").at(g);
        t.q_raw[g] = e.at("q_raw").get<double>();
        t.q_reg[g] = e.at("q_reg").get<double>();
        t.n[g] = e.at("n").get<double>();
        t.alpha_a[g] = e.at("alpha_a").get<double>();
        t.b_hat[g] = e.at("b_hat").get<double>();
    }
    return t;
}

std::string report_to_json(const CoverageReport& report, const std::string& manifest_id) {
    json j;
    j["manifest_id"] = manifest_id;
    j["coverage"] = report.coverage;
    j["n"] = report.n;
    j["eccg"] = report.eccg;
    j["mean_set_size"] = report.mean_set_size;
    j["infinite_sets"] = report.infinite_sets;
    j["empty_sets"] = report.empty_sets;
    if (report.cf_disparity) j["cf_disparity"] = cf_to_json(*report.cf_disparity);
    j["coverage_bound"] = report.coverage_bound;
    j["eccg_bound"] = report.eccg_bound;
    j["violation"] = report.violation;
    j["soft_groups"] = report.soft_groups;
    return j.dump(2) + "\n";
}

CoverageReport report_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error(std::string("report artifact: malformed JSON: ") + e.what());
    }
    CoverageReport report;
    for (auto it = j.at("coverage").begin(); it != j.at("coverage").end(); ++it) {
        report.coverage[it.key()] = it.value().get<double>();
    }
    for (auto it = j.at("n").begin(); it != j.at("n").end(); ++it) {
        report.n[it.key()] = it.value().get<double>();
    }
    report.eccg = j.at("eccg").get<double>();
    report.mean_set_size = j.at("mean_set_size").get<double>();
    report.infinite_sets = j.at("infinite_sets").get<std::size_t>();
    report.empty_sets = j.at("empty_sets").get<std::size_t>();
    if (j.contains("cf_disparity")) {
        CfDisparity d;
        const json& c = j["cf_disparity"];
        d.value = c.at("value").get<double>();
        d.hard_value = c.at("hard_value").get<double>();
        d.temperature = c.at("temperature").get<double>();
        d.fd_step = c.at("fd_step").get<double>();
        for (const auto& p : c.at("pairs")) {
            std::pair<std::string, std::string> key{p.at("group").get<std::string>(),
                                                    p.at("target").get<std::string>()};
            d.pair_smoothed[key] = p.at("smoothed").get<double>();
            d.pair_hard[key] = p.at("hard").get<double>();
        }
        for (auto it = c.at("gradient").begin(); it != c.at("gradient").end(); ++it) {
            d.gradient[it.key()] = it.value().get<double>();
        }
        report.cf_disparity = std::move(d);
    }
    for (auto it = j.at("coverage_bound").begin(); it != j.at("coverage_bound").end(); ++it) {
        report.coverage_bound[it.key()] = it.value().get<double>();
    }
    report.eccg_bound = j.at("eccg_bound").get<double>();
    for (auto it = j.at("violation").begin(); it != j.at("violation").end(); ++it) {
        report.violation[it.key()] = it.value().get<bool>();
    }
    report.soft_groups = j.at("soft_groups").get<bool>();
    return report;
}

std::string report_to_csv(const CoverageReport& report, const std::string& manifest_id) {
    csv::Table table;
    table.header = {"group", "n",        "coverage",  "coverage_bound",
                    "violation", "eccg", "eccg_bound", "mean_set_size",
                    "manifest_id"};
    for (const auto& [g, cov] : report.coverage) {
        table.rows.push_back({g, format_double(report.n.at(g)), format_double(cov),
                              format_double(report.coverage_bound.at(g)),
                              report.violation.at(g) ? "1" : "0",
                              format_double(report.eccg), format_double(report.eccg_bound),
                              format_double(report.mean_set_size), manifest_id});
    }
    return csv::to_string(table);
}

std::string predictions_to_csv(const std::vector<PredictRow>& rows, Task task) {
    bool any_covered = false;
    for (const auto& row : rows) any_covered |= row.is_covered.has_value();

    csv::Table table;
    table.header = {"id", "threshold"};
    if (task == Task::regression) {
        table.header.push_back("lo");
        table.header.push_back("hi");
    } else {
        table.header.push_back("labels");
    }
    if (any_covered) table.header.push_back("covered");

    for (const auto& row : rows) {
        std::vector<std::string> out;
        out.push_back(row.set.point_id);
        out.push_back(format_double(row.set.mixed_threshold));
        if (task == Task::regression) {
            if (row.set.invertible) {
                out.push_back(format_double(row.set.lo));
                out.push_back(format_double(row.set.hi));
            } else {
                out.push_back("");
                out.push_back("");
            }
        } else {
            std::string joined;
            for (std::size_t i = 0; i < row.set.labels.size(); ++i) {
                if (i) joined += ";";
                joined += row.set.labels[i];
            }
            out.push_back(joined);
        }
        if (any_covered) {
            out.push_back(row.is_covered ? (*row.is_covered ? "1" : "0") : "");
        }
        table.rows.push_back(std::move(out));
    }
    return csv::to_string(table);
}

}  // namespace c3f
