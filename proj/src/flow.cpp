#include "ards/flow.hpp"

#include "ards/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unordered_set>

#include <json.hpp>

namespace ards {

std::string label_name(Label label) {
    return label == Label::Ards ? "ards" : "non_ards";
}

Label label_from_name(const std::string& s) {
    if (s == "ards") return Label::Ards;
    if (s == "non_ards") return Label::NonArds;
    throw ParseError("unknown label \"" + s + "\" (expected \"ards\" or \"non_ards\")");
}

CohortManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());

    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("manifest " + path.string() + ": " + e.what());
    }

    if (!doc.is_object() || !doc.contains("patients") || !doc["patients"].is_array()) {
        throw ParseError("manifest " + path.string() +
                         ": expected top-level object with a \"patients\" list");
    }

    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");
    CohortManifest manifest;
    std::unordered_set<std::string> seen;
    std::size_t index = 0;
    for (const auto& item : doc["patients"]) {
        std::ostringstream where;
        where << "manifest " << path.string() << ", patients[" << index << "]";
        ++index;
        if (!item.is_object()) throw ParseError(where.str() + ": expected object");
        for (const char* field : {"id", "label", "flow_file", "sample_rate_hz"}) {
            if (!item.contains(field)) {
                throw ParseError(where.str() + ": missing field \"" + field + "\"");
            }
        }
        if (!item["id"].is_string() || !item["label"].is_string() ||
            !item["flow_file"].is_string() || !item["sample_rate_hz"].is_number_integer()) {
            throw ParseError(where.str() + ": field has wrong type");
        }
        ManifestEntry entry;
        entry.patient_id = item["id"].get<std::string>();
        entry.label = label_from_name(item["label"].get<std::string>());
        int rate = item["sample_rate_hz"].get<int>();
        if (rate != kSampleRateHz) {
            throw ParseError(where.str() + ": sample_rate_hz must be 50, got " +
                             std::to_string(rate));
        }
        std::filesystem::path flow(item["flow_file"].get<std::string>());
        if (flow.is_relative()) flow = base / flow;
        entry.flow_file = flow;

        if (!seen.insert(entry.patient_id).second) {
            throw DuplicatePatient("patient_id \"" + entry.patient_id +
                                   "\" appears more than once in " + path.string());
        }
        if (!std::filesystem::exists(entry.flow_file)) {
            throw IoError("flow file " + entry.flow_file.string() +
                          " referenced by " + where.str() + " does not exist");
        }
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

void save_manifest(const CohortManifest& manifest, const std::filesystem::path& path) {
    const std::filesystem::path base = path.has_parent_path()
                                           ? path.parent_path()
                                           : std::filesystem::path(".");
    nlohmann::json patients = nlohmann::json::array();
    for (const auto& entry : manifest.entries) {
        std::error_code ec;
        std::filesystem::path rel =
            std::filesystem::relative(entry.flow_file, base, ec);
        nlohmann::json item;
        item["id"] = entry.patient_id;
        item["label"] = label_name(entry.label);
        item["flow_file"] =
            (ec || rel.empty()) ? entry.flow_file.string() : rel.generic_string();
        item["sample_rate_hz"] = kSampleRateHz;
        patients.push_back(std::move(item));
    }
    nlohmann::json doc;
    doc["patients"] = std::move(patients);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << doc.dump(2) << "\n";
    if (!out) throw IoError("write failed for " + path.string());
}

FlowSeries load_flow_series(const ManifestEntry& entry) {
    std::ifstream in(entry.flow_file);
    if (!in) throw IoError("cannot open flow file " + entry.flow_file.string());

    FlowSeries series;
    series.patient_id = entry.patient_id;
    series.label = entry.label;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        double value = 0.0;
        const char* first = line.data();
        const char* last = line.data() + line.size();
        auto [ptr, ec] = std::from_chars(first, last, value);
        if (ec != std::errc{} || ptr != last || !std::isfinite(value)) {
            throw ParseError(entry.flow_file.string() + ":" + std::to_string(line_no) +
                             ": not a finite decimal value: \"" + line + "\"");
        }
        series.samples.push_back(value);
    }
    if (series.samples.empty()) {
        throw EmptySeries("flow file " + entry.flow_file.string() + " has no samples");
    }
    return series;
}

void save_flow_series(const std::vector<double>& samples,
                      const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write flow file " + path.string());
    char buf[64];
    for (double v : samples) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        if (ec != std::errc{}) throw IoError("value formatting failed");
        out.write(buf, ptr - buf);
        out.put('\n');
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<FlowSeries> load_cohort(const CohortManifest& manifest) {
    std::vector<FlowSeries> cohort;
    cohort.reserve(manifest.entries.size());
    for (const auto& entry : manifest.entries) {
        cohort.push_back(load_flow_series(entry));
    }
    return cohort;
}

}  // namespace ards
