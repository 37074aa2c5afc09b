#pragma once

#include "ards/segmentation.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace ards {

inline constexpr std::size_t kFeatureCount = 10;

// Per-breath respiratory quantities computable from flow alone.
struct BreathFeatures {
    double i_time = 0.0;          // s
    double e_time = 0.0;          // s
    double ie_ratio = 0.0;        // i_time / e_time
    double tv_insp = 0.0;         // L
    double tv_exp = 0.0;          // L (magnitude)
    double peak_insp_flow = 0.0;  // L/min
    double peak_exp_flow = 0.0;   // L/min (magnitude)
    double mean_insp_flow = 0.0;  // L/min
    double resp_rate = 0.0;       // breaths/min
    double minute_vent = 0.0;     // L/min

    std::array<double, kFeatureCount> as_array() const;
};

const std::array<std::string, kFeatureCount>& feature_names();

// Per-window feature vector: component-wise median over the window's breaths.
struct WindowFeatureVector {
    std::string patient_id;
    Label label = Label::NonArds;
    std::array<double, kFeatureCount> values{};
};

// Splits the segment at the first non-positive sample (inspiration, then
// expiration) and integrates flow rectangularly.  Throws DegenerateMorphology
// when either phase is empty or peak inspiratory flow is below 1 L/min; this
// is the failure mode aggressive lowpass filtering produces.
BreathFeatures extract_breath_features(const BreathSegment& segment, int sample_rate_hz);

// Median-aggregates per-breath features over the window's breaths, using
// segments recomputed from the source series.  Errors when more than half of
// the window's breaths are degenerate.
WindowFeatureVector window_features(const BreathWindow& window,
                                    const FlowSeries& series,
                                    const SegmentationConfig& cfg);

// window_features over pre-built segments keyed by onset index; avoids
// re-detecting onsets when the caller already segmented the series.
WindowFeatureVector window_features_from_segments(
    const BreathWindow& window, const std::vector<BreathSegment>& segments);

}  // namespace ards
