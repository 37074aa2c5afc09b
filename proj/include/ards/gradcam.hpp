#pragma once

#include "ards/cnn.hpp"

#include <cstddef>
#include <vector>

namespace ards {

// Per-position saliency over one instance for one class logit, normalized to
// [0,1] (min 0, max 1) unless the pre-normalization map is identically zero.
struct CamMap {
    std::vector<double> intensities;  // input_length values
    std::size_t target_class = 0;
};

// Endpoint-aligned linear interpolation of values onto out_len positions:
// output i samples input coordinate i*(n-1)/(out_len-1).
std::vector<double> linear_resample(const std::vector<double>& values, std::size_t out_len);

// Gradient-weighted class activation map over the final feature maps (after
// the last batch-norm + ReLU, before global pooling), eval mode.  The head is
// affine over pooled features, so the position-averaged channel gradient is
//   alpha_k = d(logit_class)/d(pooled_k) / feature_length
//           = head_weight(class, k) / feature_length,
// and the map is ReLU(sum_k alpha_k * A_k), resampled to input_length, then
// min-max normalized.  A constant nonzero map normalizes to all-ones; an
// identically zero map stays zero.
CamMap grad_cam(DenseNet& model, const std::vector<std::vector<double>>& channels,
                std::size_t target_class);

// Position-wise mean and two-sided 95% t-interval half-width across one
// group's CamMaps.  Throws InsufficientSamples for fewer than two instances.
struct CamBand {
    std::vector<double> mean;
    std::vector<double> ci_half;
    std::size_t n = 0;
};
CamBand average_cam(DenseNet& model, const std::vector<TrainingExample>& instances,
                    std::size_t target_class);

}  // namespace ards
