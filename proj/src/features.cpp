#include "ards/features.hpp"

#include "ards/error.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace ards {

std::array<double, kFeatureCount> BreathFeatures::as_array() const {
    return {i_time,         e_time,        ie_ratio,      tv_insp,   tv_exp,
            peak_insp_flow, peak_exp_flow, mean_insp_flow, resp_rate, minute_vent};
}

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "i_time",         "e_time",        "ie_ratio",       "tv_insp",
        "tv_exp",         "peak_insp_flow", "peak_exp_flow",  "mean_insp_flow",
        "resp_rate",      "minute_vent"};
    return names;
}

BreathFeatures extract_breath_features(const BreathSegment& segment,
                                       int sample_rate_hz) {
    const auto& v = segment.values;
    if (v.size() < 2) throw DegenerateMorphology("segment shorter than 2 samples");
    const double dt = 1.0 / static_cast<double>(sample_rate_hz);

    if (v[0] <= 0.0) {
        throw DegenerateMorphology("inspiratory phase is empty");
    }
    // inspiration runs until flow first falls non-positive
    std::size_t insp_end = v.size();
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] <= 0.0) {
            insp_end = i;
            break;
        }
    }
    if (insp_end == v.size()) {
        throw DegenerateMorphology("expiratory phase is empty (flow never non-positive)");
    }

    BreathFeatures f;
    f.i_time = static_cast<double>(insp_end) * dt;
    f.e_time = static_cast<double>(v.size() - insp_end) * dt;
    f.ie_ratio = f.i_time / f.e_time;

    double insp_sum = 0.0;
    double insp_peak = 0.0;
    for (std::size_t i = 0; i < insp_end; ++i) {
        insp_sum += v[i];
        insp_peak = std::max(insp_peak, v[i]);
    }
    double exp_sum = 0.0;
    double exp_peak = 0.0;
    for (std::size_t i = insp_end; i < v.size(); ++i) {
        exp_sum += v[i];
        exp_peak = std::max(exp_peak, -v[i]);
    }

    // flow is L/min; rectangular integration over dt seconds, /60 to litres
    f.tv_insp = insp_sum * dt / 60.0;
    f.tv_exp = std::fabs(exp_sum) * dt / 60.0;
    f.peak_insp_flow = insp_peak;
    f.peak_exp_flow = exp_peak;
    f.mean_insp_flow = insp_sum / static_cast<double>(insp_end);
    f.resp_rate = 60.0 / (f.i_time + f.e_time);
    f.minute_vent = f.tv_insp * f.resp_rate;

    if (f.peak_insp_flow < 1.0) {
        throw DegenerateMorphology("peak inspiratory flow below 1 L/min");
    }
    return f;
}

namespace {

double median_of(std::vector<double>& values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

WindowFeatureVector aggregate(const BreathWindow& window,
                              const std::vector<const BreathSegment*>& segments) {
    std::vector<std::array<double, kFeatureCount>> rows;
    std::size_t degenerate = 0;
    for (const BreathSegment* seg : segments) {
        if (seg == nullptr) {
            ++degenerate;  // onset has no usable segment (end-of-series tail rule)
            continue;
        }
        try {
            rows.push_back(extract_breath_features(*seg, kSampleRateHz).as_array());
        } catch (const DegenerateMorphology&) {
            ++degenerate;
        }
    }
    if (2 * degenerate > segments.size()) {
        throw DegenerateMorphology(
            "majority of window breaths unfeaturizable (" + std::to_string(degenerate) +
            " of " + std::to_string(segments.size()) + ")");
    }
    if (rows.empty()) {
        throw DegenerateMorphology("no featurizable breaths in window");
    }

    WindowFeatureVector out;
    out.patient_id = window.patient_id;
    out.label = window.label;
    std::vector<double> column;
    column.reserve(rows.size());
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        column.clear();
        for (const auto& row : rows) column.push_back(row[f]);
        out.values[f] = median_of(column);
    }
    return out;
}

}  // namespace

WindowFeatureVector window_features_from_segments(
    const BreathWindow& window, const std::vector<BreathSegment>& segments) {
    std::unordered_map<std::size_t, const BreathSegment*> by_onset;
    by_onset.reserve(segments.size());
    for (const auto& seg : segments) by_onset.emplace(seg.onset_index, &seg);

    std::vector<const BreathSegment*> selected;
    selected.reserve(window.instances.size());
    for (const auto& inst : window.instances) {
        auto it = by_onset.find(inst.start_index);
        selected.push_back(it == by_onset.end() ? nullptr : it->second);
    }
    return aggregate(window, selected);
}

WindowFeatureVector window_features(const BreathWindow& window,
                                    const FlowSeries& series,
                                    const SegmentationConfig& cfg) {
    auto onsets = detect_breath_onsets(series, cfg);
    auto segments = segment_breaths(series, onsets);
    return window_features_from_segments(window, segments);
}

}  // namespace ards
