#pragma once

#include "ards/flow.hpp"

#include <cstddef>
#include <vector>

namespace ards {

struct SegmentationConfig {
    double onset_threshold = 2.0;          // L/min
    std::size_t pre_onset_nonpositive_run = 5;
    std::size_t instance_length = 224;
    std::size_t window_size = 20;
};

// Fixed-length model input anchored at an inhalation onset.
struct BreathInstance {
    std::string patient_id;
    Label label = Label::NonArds;
    std::size_t start_index = 0;
    std::vector<double> values;  // instance_length samples
};

// window_size consecutive instances from one patient, in temporal order.
struct BreathWindow {
    std::string patient_id;
    Label label = Label::NonArds;
    std::vector<BreathInstance> instances;
};

// Variable-length slice from one onset to the next; feeds feature extraction.
struct BreathSegment {
    std::string patient_id;
    std::size_t onset_index = 0;
    std::vector<double> values;
};

// An onset is a sample above onset_threshold preceded by a full run of
// non-positive samples.  Returned indices are strictly increasing; the run
// requirement makes two onsets closer than the run length impossible.
std::vector<std::size_t> detect_breath_onsets(const FlowSeries& series,
                                              const SegmentationConfig& cfg);

// One instance per onset that still has instance_length samples available;
// instances overlap following breaths when the breath period is shorter.
std::vector<BreathInstance> make_instances(const FlowSeries& series,
                                           const std::vector<std::size_t>& onsets,
                                           const SegmentationConfig& cfg);

// Consecutive non-overlapping groups of window_size instances; a trailing
// partial group is discarded.
std::vector<BreathWindow> make_windows(const std::vector<BreathInstance>& instances,
                                       const SegmentationConfig& cfg);

// Segment k spans [onset_k, onset_k+1).  The final onset produces a segment
// to the end of the series only when at least 0.5 s of samples remain.
std::vector<BreathSegment> segment_breaths(const FlowSeries& series,
                                           const std::vector<std::size_t>& onsets);

}  // namespace ards
