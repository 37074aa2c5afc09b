#pragma once

#include "ards/segmentation.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace ards {

// Batch of 1-D multichannel signals, dense layout [batch][channel][position].
struct Tensor3 {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(std::size_t b, std::size_t c, std::size_t l)
        : batch(b), channels(c), length(l), data(b * c * l, 0.0) {}

    double& at(std::size_t b, std::size_t c, std::size_t l) {
        return data[(b * channels + c) * length + l];
    }
    double at(std::size_t b, std::size_t c, std::size_t l) const {
        return data[(b * channels + c) * length + l];
    }
    double* row(std::size_t b, std::size_t c) { return data.data() + (b * channels + c) * length; }
    const double* row(std::size_t b, std::size_t c) const {
        return data.data() + (b * channels + c) * length;
    }
};

struct DenseNetConfig {
    std::size_t input_channels = 1;
    std::size_t input_length = 224;
    std::size_t stem_channels = 16;
    std::size_t stem_kernel = 7, stem_stride = 2, stem_pad = 3;
    std::size_t pool_kernel = 3, pool_stride = 2, pool_pad = 1;
    std::vector<std::size_t> block_layers{4, 4};
    std::size_t growth_rate = 8;
    double compression = 0.5;
    std::size_t n_classes = 2;

    // Default working configuration: 11 weighted layers, fast on one core.
    static DenseNetConfig desk();
    // Three dense blocks {4,5,5}, growth 12: 18 weighted layers.
    static DenseNetConfig paper_fidelity();
    // One block of one layer, growth 2, short input: small enough to verify
    // the forward pass against straight-line hand computation.
    static DenseNetConfig tiny();
    // Desk shape with growth 16 and a short input: every weighted layer type
    // carries well over 200 parameters, sized for finite-difference checks.
    static DenseNetConfig wide();

    void validate() const;  // throws ConfigInvalid
    std::size_t weighted_layers() const;
};

struct TrainConfig {
    double learning_rate = 0.001;
    double momentum = 0.0;
    std::size_t batch_size = 32;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    bool capture_snapshots = true;  // keep a flattened parameter copy per epoch
};

// Mutable view of one named parameter (or running-stat buffer) array.
// Convolution weights are flattened [out_channel][in_channel][kernel_pos];
// the classifier weight is [class][feature_channel].
struct ParamRef {
    std::string name;
    std::vector<double>* values = nullptr;
    std::vector<double>* grads = nullptr;  // null for buffers
};

class DenseNet {
  public:
    // Weight init: uniform(+-sqrt(6/fan_in)) from a stream derived from seed.
    DenseNet(const DenseNetConfig& config, std::uint64_t init_seed);
    DenseNet(const DenseNet&) = delete;
    DenseNet& operator=(const DenseNet&) = delete;
    DenseNet(DenseNet&&) noexcept;
    DenseNet& operator=(DenseNet&&) noexcept;
    ~DenseNet();

    const DenseNetConfig& config() const;

    // Logits, row-major [batch][class].  Train mode normalizes with batch
    // statistics (batch >= 2 required) and caches activations for backward;
    // eval mode uses running statistics and is batch-composition invariant.
    std::vector<double> forward(const Tensor3& input, bool train);

    // Mean softmax cross-entropy of the cached train-mode forward against
    // labels, with gradients of that mean accumulated into every parameter.
    // Throws StaleCache when parameters changed since the cached forward.
    double loss_and_backward(const std::vector<int>& labels);

    // Forward + loss without touching gradients (finite-difference probes).
    double forward_loss(const Tensor3& input, const std::vector<int>& labels, bool train);

    std::vector<ParamRef> params();   // stable declaration order
    std::vector<ParamRef> buffers();  // batch-norm running mean/variance
    void zero_grads();
    // v <- momentum*v + grad; w <- w - lr*v.  Invalidates cached activations.
    void sgd_step(double learning_rate, double momentum);

    // Final feature maps (after the last BN+ReLU, before pooling) plus logits,
    // eval mode; this is the tensor Grad-CAM attributes over.
    struct FeatureForward {
        Tensor3 features;            // [batch][channels][feature_length]
        std::vector<double> logits;  // [batch][class]
    };
    FeatureForward forward_with_features(const Tensor3& input);

    std::size_t feature_channels() const;
    std::size_t feature_length() const;
    // Classifier weight for (class, feature channel).
    double head_weight(std::size_t cls, std::size_t channel) const;

    std::uint64_t param_version() const;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Probabilities of class 1 per row: softmax over each logit pair.
std::vector<double> softmax_class1(const std::vector<double>& logits, std::size_t n_classes);

struct TrainingExample {
    std::vector<std::vector<double>> channels;  // input_channels rows of input_length
    int label = 0;
};

// Stacks examples [first..last) into a batch tensor.
Tensor3 batch_tensor(const std::vector<TrainingExample>& examples,
                     const std::vector<std::size_t>& order, std::size_t first,
                     std::size_t last, const DenseNetConfig& config);

struct TrainResult {
    std::vector<double> epoch_losses;
    std::vector<std::vector<double>> epoch_params;  // when capture_snapshots
};

using EpochCallback = std::function<void(std::size_t epoch, DenseNet& model, double mean_loss)>;

// Shuffled mini-batch SGD; a trailing batch of one is dropped (batch-norm
// needs two samples).  Deterministic given cfg.seed.  Throws
// SingleClassTraining when labels are uniform and DivergenceDetected when the
// loss leaves the finite range.
TrainResult train_cnn(DenseNet& model, const std::vector<TrainingExample>& examples,
                      const TrainConfig& cfg, const EpochCallback& on_epoch = {});

// How instance waveforms are presented to the model.
enum class InputMode { Raw, Fft, RawPlusFft };

std::size_t input_mode_channels(InputMode mode);
std::string input_mode_name(InputMode mode);
InputMode input_mode_from_name(const std::string& name);

// Raw flow, DC-centered magnitude spectrum, or both stacked as channels.
TrainingExample make_example(const std::vector<double>& instance_values, int label,
                             InputMode mode);

// Mean class-1 probability over the window's instances (eval mode); the
// window is called ARDS when the mean is strictly above 0.5.
struct WindowPrediction {
    double probability = 0.0;
    bool label = false;
};
WindowPrediction predict_window(DenseNet& model, const BreathWindow& window, InputMode mode);

std::vector<double> flatten_params(DenseNet& model);

void save_cnn(DenseNet& model, const std::filesystem::path& path);
DenseNet load_cnn(const std::filesystem::path& path);

}  // namespace ards
