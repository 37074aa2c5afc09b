#include "ards/segmentation.hpp"

namespace ards {

std::vector<std::size_t> detect_breath_onsets(const FlowSeries& series,
                                              const SegmentationConfig& cfg) {
    const auto& s = series.samples;
    const std::size_t run = cfg.pre_onset_nonpositive_run;
    std::vector<std::size_t> onsets;
    if (s.size() <= run) return onsets;

    // count of consecutive non-positive samples ending just before i
    std::size_t nonpositive = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i >= 1) nonpositive = s[i - 1] <= 0.0 ? nonpositive + 1 : 0;
        if (i >= run && nonpositive >= run && s[i] > cfg.onset_threshold) {
            onsets.push_back(i);
        }
    }
    return onsets;
}

std::vector<BreathInstance> make_instances(const FlowSeries& series,
                                           const std::vector<std::size_t>& onsets,
                                           const SegmentationConfig& cfg) {
    std::vector<BreathInstance> instances;
    const std::size_t len = cfg.instance_length;
    for (std::size_t onset : onsets) {
        if (onset + len > series.samples.size()) continue;
        BreathInstance inst;
        inst.patient_id = series.patient_id;
        inst.label = series.label;
        inst.start_index = onset;
        inst.values.assign(series.samples.begin() + static_cast<std::ptrdiff_t>(onset),
                           series.samples.begin() + static_cast<std::ptrdiff_t>(onset + len));
        instances.push_back(std::move(inst));
    }
    return instances;
}

std::vector<BreathWindow> make_windows(const std::vector<BreathInstance>& instances,
                                       const SegmentationConfig& cfg) {
    std::vector<BreathWindow> windows;
    const std::size_t w = cfg.window_size;
    if (w == 0) return windows;
    for (std::size_t start = 0; start + w <= instances.size(); start += w) {
        BreathWindow window;
        window.patient_id = instances[start].patient_id;
        window.label = instances[start].label;
        window.instances.assign(instances.begin() + static_cast<std::ptrdiff_t>(start),
                                instances.begin() + static_cast<std::ptrdiff_t>(start + w));
        windows.push_back(std::move(window));
    }
    return windows;
}

std::vector<BreathSegment> segment_breaths(const FlowSeries& series,
                                           const std::vector<std::size_t>& onsets) {
    std::vector<BreathSegment> segments;
    const std::size_t min_tail =
        static_cast<std::size_t>(series.sample_rate_hz / 2);  // 0.5 s
    for (std::size_t k = 0; k < onsets.size(); ++k) {
        std::size_t begin = onsets[k];
        std::size_t end;
        if (k + 1 < onsets.size()) {
            end = onsets[k + 1];
        } else {
            end = series.samples.size();
            if (end - begin < min_tail) break;
        }
        BreathSegment seg;
        seg.patient_id = series.patient_id;
        seg.onset_index = begin;
        seg.values.assign(series.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                          series.samples.begin() + static_cast<std::ptrdiff_t>(end));
        segments.push_back(std::move(seg));
    }
    return segments;
}

}  // namespace ards
