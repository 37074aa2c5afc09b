#include "ards/gradcam.hpp"

#include "ards/error.hpp"
#include "ards/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ards {

std::vector<double> linear_resample(const std::vector<double>& values, std::size_t out_len) {
    if (values.empty()) throw DimensionMismatch("cannot resample an empty series");
    if (out_len == 0) return {};
    std::vector<double> out(out_len);
    if (values.size() == 1 || out_len == 1) {
        std::fill(out.begin(), out.end(), values[0]);
        return out;
    }
    const double scale = static_cast<double>(values.size() - 1) /
                         static_cast<double>(out_len - 1);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double x = static_cast<double>(i) * scale;
        const auto lo = static_cast<std::size_t>(x);
        if (lo + 1 >= values.size()) {
            out[i] = values.back();
            continue;
        }
        const double frac = x - static_cast<double>(lo);
        out[i] = values[lo] * (1.0 - frac) + values[lo + 1] * frac;
    }
    return out;
}

CamMap grad_cam(DenseNet& model, const std::vector<std::vector<double>>& channels,
                std::size_t target_class) {
    if (target_class >= model.config().n_classes) {
        throw DimensionMismatch("target class " + std::to_string(target_class) +
                                " out of range");
    }
    TrainingExample ex;
    ex.channels = channels;
    const Tensor3 input = batch_tensor({ex}, {0}, 0, 1, model.config());
    const auto ff = model.forward_with_features(input);

    const std::size_t n_ch = model.feature_channels();
    const std::size_t len = model.feature_length();
    std::vector<double> map(len, 0.0);
    for (std::size_t c = 0; c < n_ch; ++c) {
        const double alpha = model.head_weight(target_class, c) / static_cast<double>(len);
        const double* row = ff.features.row(0, c);
        for (std::size_t l = 0; l < len; ++l) map[l] += alpha * row[l];
    }
    for (auto& v : map) v = std::max(v, 0.0);

    CamMap cam;
    cam.target_class = target_class;
    cam.intensities = linear_resample(map, model.config().input_length);
    const auto [mn_it, mx_it] =
        std::minmax_element(cam.intensities.begin(), cam.intensities.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx == mn) {
        if (mx != 0.0) std::fill(cam.intensities.begin(), cam.intensities.end(), 1.0);
        return cam;  // identically zero stays zero
    }
    for (auto& v : cam.intensities) v = (v - mn) / (mx - mn);
    return cam;
}

CamBand average_cam(DenseNet& model, const std::vector<TrainingExample>& instances,
                    std::size_t target_class) {
    if (instances.size() < 2) {
        throw InsufficientSamples("class averaging needs at least two instances, got " +
                                  std::to_string(instances.size()));
    }
    std::vector<std::vector<double>> maps;
    maps.reserve(instances.size());
    for (const auto& inst : instances) {
        maps.push_back(grad_cam(model, inst.channels, target_class).intensities);
    }
    CamBand band;
    band.n = maps.size();
    const std::size_t len = maps.front().size();
    band.mean.resize(len);
    band.ci_half.resize(len);
    std::vector<double> column(maps.size());
    for (std::size_t pos = 0; pos < len; ++pos) {
        for (std::size_t i = 0; i < maps.size(); ++i) column[i] = maps[i][pos];
        const MeanCi ci = mean_ci95(column);
        band.mean[pos] = ci.mean;
        band.ci_half[pos] = ci.half_width;
    }
    return band;
}

}  // namespace ards
