#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ards {

enum class Label { NonArds = 0, Ards = 1 };

std::string label_name(Label label);          // "ards" | "non_ards"
Label label_from_name(const std::string& s);  // throws ParseError

inline constexpr int kSampleRateHz = 50;

// One patient's raw 50 Hz flow recording.
struct FlowSeries {
    std::string patient_id;
    Label label = Label::NonArds;
    int sample_rate_hz = kSampleRateHz;
    std::vector<double> samples;  // L/min, one value per 20 ms
};

struct ManifestEntry {
    std::string patient_id;
    Label label = Label::NonArds;
    std::filesystem::path flow_file;  // resolved to an absolute path on load
};

struct CohortManifest {
    std::vector<ManifestEntry> entries;
};

// Parses a manifest document.  Relative flow_file paths are resolved against
// the manifest's directory, and every referenced file must exist.
CohortManifest load_manifest(const std::filesystem::path& path);

// Writes a manifest with flow_file paths relative to the output directory
// when possible.  load_manifest(save_manifest(m)) preserves entry content.
void save_manifest(const CohortManifest& manifest, const std::filesystem::path& path);

// Reads one flow file: UTF-8, one decimal flow value per LF-terminated line.
FlowSeries load_flow_series(const ManifestEntry& entry);

// Writes samples so that reloading yields bitwise-equal values
// (shortest round-trip decimal representation).
void save_flow_series(const std::vector<double>& samples, const std::filesystem::path& path);

// Loads every entry of a manifest, in manifest order.
std::vector<FlowSeries> load_cohort(const CohortManifest& manifest);

}  // namespace ards
