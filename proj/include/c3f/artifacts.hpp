// JSON/CSV artifact serialization. Everything is plain text so results can be
// diffed across implementations; key order is fixed and doubles round-trip.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "c3f/pipeline.hpp"
#include "c3f/types.hpp"

namespace c3f {

// FNV-1a 64-bit content digest, hex-encoded; identifies inputs in manifests.
std::string content_digest(const std::string& bytes);
std::string file_digest(const std::string& path);

struct ManifestInput {
    std::string path;
    std::string digest;
};

struct RunManifest {
    std::string manifest_id;
    std::string tool_version;
    std::string command;
    std::string config_digest;
    std::map<std::string, ManifestInput> inputs;  // role -> (path, digest)
    std::uint64_t seed = 0;
    std::map<std::string, double> timings_ms;     // stage -> wall time
    std::vector<std::string> warnings;
    std::map<std::string, std::string> outputs;   // name -> digest

    // Deterministic id over version/command/config/input digests/seed; paths,
    // timing, and outputs are excluded so reruns with the same content agree.
    void finalize_id();
    std::string to_json() const;
};

std::string thresholds_to_json(const ThresholdSet& thresholds, const ShiftStats& stats,
                               const std::string& manifest_id);
ThresholdSet thresholds_from_json(const std::string& json_text);

std::string report_to_json(const CoverageReport& report, const std::string& manifest_id);
CoverageReport report_from_json(const std::string& json_text);
std::string report_to_csv(const CoverageReport& report, const std::string& manifest_id);

// Prediction rows: id,threshold,lo,hi (regression) or id,threshold,labels
// (classification), plus a covered column when any row is decidable.
std::string predictions_to_csv(const std::vector<PredictRow>& rows, Task task);

std::string version_string();

}  // namespace c3f
