// Loading of calibration/test tables and the run configuration.
//
// CSV schema (header row required):
//   id, group | p_<g>..., score [, weight] [, x0..xk] [, label] [, pred]
//   [, eta_<label>...]
// A file uses hard groups (a `group` column) or soft posteriors (`p_<g>`
// columns), never both. Covariate columns are named x0..xk. Classification
// rows carry per-label scores in eta_<label> columns.
#pragma once

#include <string>
#include <vector>

#include "c3f/types.hpp"

namespace c3f {

enum class SchemaRole { calibration, test, target_covariates };

std::vector<CalibrationRecord> load_records(const std::string& path, SchemaRole role);
std::vector<CalibrationRecord> parse_records(const std::string& csv_text, SchemaRole role,
                                             const std::string& origin);

// Inverse of load_records: emits exactly the columns needed to represent the
// given records, so that load(write(records)) == records field-for-field.
void write_records(const std::vector<CalibrationRecord>& records, const std::string& path);
std::string records_to_csv(const std::vector<CalibrationRecord>& records);

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& json_text);

// Union of hard groups and posterior keys present in the records, plus any
// groups declared in the config; sorted.
std::vector<std::string> group_universe(const std::vector<CalibrationRecord>& records,
                                        const RunConfig& config);

}  // namespace c3f
