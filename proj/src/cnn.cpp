#include "ards/cnn.hpp"

#include "ards/error.hpp"
#include "ards/rng.hpp"
#include "ards/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace ards {
namespace {

constexpr double kBnEps = 1e-5;
constexpr double kBnMomentum = 0.1;

std::size_t conv_out_len(std::size_t len, std::size_t kernel, std::size_t stride,
                         std::size_t pad) {
    if (len + 2 * pad < kernel) {
        throw ConfigInvalid("sequence length " + std::to_string(len) +
                            " too short for kernel " + std::to_string(kernel));
    }
    return (len + 2 * pad - kernel) / stride + 1;
}

class Layer {
  public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;
    virtual Tensor3 forward(const Tensor3& x, bool train) = 0;
    virtual Tensor3 backward(const Tensor3& dy) = 0;
    virtual void collect(std::vector<ParamRef>& params, std::vector<ParamRef>& buffers) {
        (void)params;
        (void)buffers;
    }
    virtual void init(Rng& rng) { (void)rng; }
    const std::string& name() const { return name_; }

  protected:
    std::string name_;
};

class Conv1d : public Layer {
  public:
    Conv1d(std::string name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
           std::size_t stride, std::size_t pad)
        : Layer(std::move(name)), in_(in_ch), out_(out_ch), k_(kernel), s_(stride), p_(pad),
          w_(out_ch * in_ch * kernel, 0.0), b_(out_ch, 0.0), gw_(w_.size(), 0.0),
          gb_(out_ch, 0.0) {}

    void init(Rng& rng) override {
        const double limit = std::sqrt(6.0 / static_cast<double>(in_ * k_));
        for (auto& w : w_) w = rng.uniform(-limit, limit);
        std::fill(b_.begin(), b_.end(), 0.0);
    }

    Tensor3 forward(const Tensor3& x, bool) override {
        x_ = x;
        const std::size_t out_len = conv_out_len(x.length, k_, s_, p_);
        Tensor3 y(x.batch, out_, out_len);
        for (std::size_t b = 0; b < x.batch; ++b) {
            for (std::size_t o = 0; o < out_; ++o) {
                double* yrow = y.row(b, o);
                std::fill(yrow, yrow + out_len, b_[o]);
                for (std::size_t i = 0; i < in_; ++i) {
                    const double* xrow = x.row(b, i);
                    const double* wrow = w_.data() + (o * in_ + i) * k_;
                    for (std::size_t j = 0; j < k_; ++j) {
                        const double w = wrow[j];
                        const long off = static_cast<long>(j) - static_cast<long>(p_);
                        auto [t_lo, t_hi] = t_range(off, x.length, out_len);
                        for (std::size_t t = t_lo; t < t_hi; ++t) {
                            yrow[t] += w * xrow[static_cast<std::size_t>(
                                               static_cast<long>(t * s_) + off)];
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) override {
        Tensor3 dx(x_.batch, in_, x_.length);
        for (std::size_t b = 0; b < x_.batch; ++b) {
            for (std::size_t o = 0; o < out_; ++o) {
                const double* dyrow = dy.row(b, o);
                for (std::size_t t = 0; t < dy.length; ++t) gb_[o] += dyrow[t];
                for (std::size_t i = 0; i < in_; ++i) {
                    const double* xrow = x_.row(b, i);
                    double* dxrow = dx.row(b, i);
                    const std::size_t wbase = (o * in_ + i) * k_;
                    for (std::size_t j = 0; j < k_; ++j) {
                        const double w = w_[wbase + j];
                        const long off = static_cast<long>(j) - static_cast<long>(p_);
                        auto [t_lo, t_hi] = t_range(off, x_.length, dy.length);
                        double acc = 0.0;
                        for (std::size_t t = t_lo; t < t_hi; ++t) {
                            const auto u = static_cast<std::size_t>(
                                static_cast<long>(t * s_) + off);
                            acc += dyrow[t] * xrow[u];
                            dxrow[u] += w * dyrow[t];
                        }
                        gw_[wbase + j] += acc;
                    }
                }
            }
        }
        return dx;
    }

    void collect(std::vector<ParamRef>& params, std::vector<ParamRef>&) override {
        params.push_back({name_ + ".weight", &w_, &gw_});
        params.push_back({name_ + ".bias", &b_, &gb_});
    }

  private:
    // Valid output positions t with 0 <= t*stride + off < len.
    std::pair<std::size_t, std::size_t> t_range(long off, std::size_t len,
                                                std::size_t out_len) const {
        const long s = static_cast<long>(s_);
        long lo = 0;
        if (off < 0) lo = (-off + s - 1) / s;
        long hi = static_cast<long>(out_len);
        const long max_u = static_cast<long>(len) - 1 - off;
        if (max_u < 0) return {0, 0};
        hi = std::min(hi, max_u / s + 1);
        if (lo >= hi) return {0, 0};
        return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
    }

    std::size_t in_, out_, k_, s_, p_;
    std::vector<double> w_, b_, gw_, gb_;
    Tensor3 x_;
};

class BatchNorm1d : public Layer {
  public:
    BatchNorm1d(std::string name, std::size_t channels)
        : Layer(std::move(name)), c_(channels), gamma_(channels, 1.0), beta_(channels, 0.0),
          g_gamma_(channels, 0.0), g_beta_(channels, 0.0), run_mean_(channels, 0.0),
          run_var_(channels, 1.0) {}

    Tensor3 forward(const Tensor3& x, bool train) override {
        Tensor3 y(x.batch, x.channels, x.length);
        if (train) {
            xhat_ = Tensor3(x.batch, x.channels, x.length);
            inv_std_.assign(c_, 0.0);
            const double n = static_cast<double>(x.batch * x.length);
            for (std::size_t c = 0; c < c_; ++c) {
                double mean = 0.0;
                for (std::size_t b = 0; b < x.batch; ++b) {
                    const double* row = x.row(b, c);
                    for (std::size_t l = 0; l < x.length; ++l) mean += row[l];
                }
                mean /= n;
                double var = 0.0;  // biased
                for (std::size_t b = 0; b < x.batch; ++b) {
                    const double* row = x.row(b, c);
                    for (std::size_t l = 0; l < x.length; ++l) {
                        const double d = row[l] - mean;
                        var += d * d;
                    }
                }
                var /= n;
                const double inv_std = 1.0 / std::sqrt(var + kBnEps);
                inv_std_[c] = inv_std;
                for (std::size_t b = 0; b < x.batch; ++b) {
                    const double* row = x.row(b, c);
                    double* hrow = xhat_.row(b, c);
                    double* yrow = y.row(b, c);
                    for (std::size_t l = 0; l < x.length; ++l) {
                        hrow[l] = (row[l] - mean) * inv_std;
                        yrow[l] = gamma_[c] * hrow[l] + beta_[c];
                    }
                }
                run_mean_[c] = (1.0 - kBnMomentum) * run_mean_[c] + kBnMomentum * mean;
                run_var_[c] = (1.0 - kBnMomentum) * run_var_[c] + kBnMomentum * var;
            }
            cached_ = true;
        } else {
            for (std::size_t c = 0; c < c_; ++c) {
                const double inv_std = 1.0 / std::sqrt(run_var_[c] + kBnEps);
                const double scale = gamma_[c] * inv_std;
                const double shift = beta_[c] - run_mean_[c] * scale;
                for (std::size_t b = 0; b < x.batch; ++b) {
                    const double* row = x.row(b, c);
                    double* yrow = y.row(b, c);
                    for (std::size_t l = 0; l < x.length; ++l) {
                        yrow[l] = scale * row[l] + shift;
                    }
                }
            }
            cached_ = false;
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) override {
        if (!cached_) throw StaleCache(name_ + ": backward without a cached train forward");
        Tensor3 dx(dy.batch, dy.channels, dy.length);
        const double n = static_cast<double>(dy.batch * dy.length);
        for (std::size_t c = 0; c < c_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t b = 0; b < dy.batch; ++b) {
                const double* dyrow = dy.row(b, c);
                const double* hrow = xhat_.row(b, c);
                for (std::size_t l = 0; l < dy.length; ++l) {
                    sum_dy += dyrow[l];
                    sum_dy_xhat += dyrow[l] * hrow[l];
                }
            }
            g_beta_[c] += sum_dy;
            g_gamma_[c] += sum_dy_xhat;
            const double scale = gamma_[c] * inv_std_[c] / n;
            for (std::size_t b = 0; b < dy.batch; ++b) {
                const double* dyrow = dy.row(b, c);
                const double* hrow = xhat_.row(b, c);
                double* dxrow = dx.row(b, c);
                for (std::size_t l = 0; l < dy.length; ++l) {
                    dxrow[l] = scale * (n * dyrow[l] - sum_dy - hrow[l] * sum_dy_xhat);
                }
            }
        }
        return dx;
    }

    void collect(std::vector<ParamRef>& params, std::vector<ParamRef>& buffers) override {
        params.push_back({name_ + ".gamma", &gamma_, &g_gamma_});
        params.push_back({name_ + ".beta", &beta_, &g_beta_});
        buffers.push_back({name_ + ".running_mean", &run_mean_, nullptr});
        buffers.push_back({name_ + ".running_var", &run_var_, nullptr});
    }

  private:
    std::size_t c_;
    std::vector<double> gamma_, beta_, g_gamma_, g_beta_, run_mean_, run_var_;
    Tensor3 xhat_;
    std::vector<double> inv_std_;
    bool cached_ = false;
};

class Relu : public Layer {
  public:
    explicit Relu(std::string name) : Layer(std::move(name)) {}

    Tensor3 forward(const Tensor3& x, bool) override {
        mask_.assign(x.data.size(), 0);
        Tensor3 y = x;
        for (std::size_t i = 0; i < y.data.size(); ++i) {
            if (y.data[i] > 0.0) {
                mask_[i] = 1;
            } else {
                y.data[i] = 0.0;
            }
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) override {
        Tensor3 dx = dy;
        for (std::size_t i = 0; i < dx.data.size(); ++i) {
            if (!mask_[i]) dx.data[i] = 0.0;
        }
        return dx;
    }

  private:
    std::vector<char> mask_;
};

class MaxPool1d : public Layer {
  public:
    MaxPool1d(std::string name, std::size_t kernel, std::size_t stride, std::size_t pad)
        : Layer(std::move(name)), k_(kernel), s_(stride), p_(pad) {}

    Tensor3 forward(const Tensor3& x, bool) override {
        in_len_ = x.length;
        const std::size_t out_len = conv_out_len(x.length, k_, s_, p_);
        Tensor3 y(x.batch, x.channels, out_len);
        argmax_.assign(x.batch * x.channels * out_len, 0);
        std::size_t cell = 0;
        for (std::size_t b = 0; b < x.batch; ++b) {
            for (std::size_t c = 0; c < x.channels; ++c) {
                const double* row = x.row(b, c);
                double* yrow = y.row(b, c);
                for (std::size_t t = 0; t < out_len; ++t, ++cell) {
                    double best = 0.0;
                    std::size_t best_u = 0;
                    bool seen = false;
                    for (std::size_t j = 0; j < k_; ++j) {
                        const long u = static_cast<long>(t * s_) + static_cast<long>(j) -
                                       static_cast<long>(p_);
                        if (u < 0 || u >= static_cast<long>(x.length)) continue;
                        const double v = row[static_cast<std::size_t>(u)];
                        if (!seen || v > best) {
                            seen = true;
                            best = v;
                            best_u = static_cast<std::size_t>(u);
                        }
                    }
                    yrow[t] = best;
                    argmax_[cell] = best_u;
                }
            }
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) override {
        Tensor3 dx(dy.batch, dy.channels, in_len_);
        std::size_t cell = 0;
        for (std::size_t b = 0; b < dy.batch; ++b) {
            for (std::size_t c = 0; c < dy.channels; ++c) {
                const double* dyrow = dy.row(b, c);
                double* dxrow = dx.row(b, c);
                for (std::size_t t = 0; t < dy.length; ++t, ++cell) {
                    dxrow[argmax_[cell]] += dyrow[t];
                }
            }
        }
        return dx;
    }

  private:
    std::size_t k_, s_, p_;
    std::size_t in_len_ = 0;
    std::vector<std::size_t> argmax_;
};

class AvgPool1d : public Layer {
  public:
    AvgPool1d(std::string name, std::size_t kernel, std::size_t stride)
        : Layer(std::move(name)), k_(kernel), s_(stride) {}

    Tensor3 forward(const Tensor3& x, bool) override {
        in_len_ = x.length;
        if (x.length < k_) {
            throw ConfigInvalid("sequence length " + std::to_string(x.length) +
                                " too short for pool " + std::to_string(k_));
        }
        const std::size_t out_len = (x.length - k_) / s_ + 1;
        Tensor3 y(x.batch, x.channels, out_len);
        const double inv_k = 1.0 / static_cast<double>(k_);
        for (std::size_t b = 0; b < x.batch; ++b) {
            for (std::size_t c = 0; c < x.channels; ++c) {
                const double* row = x.row(b, c);
                double* yrow = y.row(b, c);
                for (std::size_t t = 0; t < out_len; ++t) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < k_; ++j) acc += row[t * s_ + j];
                    yrow[t] = acc * inv_k;
                }
            }
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) override {
        Tensor3 dx(dy.batch, dy.channels, in_len_);
        const double inv_k = 1.0 / static_cast<double>(k_);
        for (std::size_t b = 0; b < dy.batch; ++b) {
            for (std::size_t c = 0; c < dy.channels; ++c) {
                const double* dyrow = dy.row(b, c);
                double* dxrow = dx.row(b, c);
                for (std::size_t t = 0; t < dy.length; ++t) {
                    for (std::size_t j = 0; j < k_; ++j) {
                        dxrow[t * s_ + j] += dyrow[t] * inv_k;
                    }
                }
            }
        }
        return dx;
    }

  private:
    std::size_t k_, s_;
    std::size_t in_len_ = 0;
};

// One dense-connectivity step: concat(x, Conv3(ReLU(BN(x)))).
class DenseLayer : public Layer {
  public:
    DenseLayer(std::string name, std::size_t in_ch, std::size_t growth)
        : Layer(name), in_(in_ch), growth_(growth), bn_(name + ".bn", in_ch),
          relu_(name + ".relu"), conv_(name + ".conv", in_ch, growth, 3, 1, 1) {}

    void init(Rng& rng) override { conv_.init(rng); }

    Tensor3 forward(const Tensor3& x, bool train) override {
        Tensor3 h = conv_.forward(relu_.forward(bn_.forward(x, train), train), train);
        Tensor3 y(x.batch, in_ + growth_, x.length);
        for (std::size_t b = 0; b < x.batch; ++b) {
            for (std::size_t c = 0; c < in_; ++c) {
                std::copy(x.row(b, c), x.row(b, c) + x.length, y.row(b, c));
            }
            for (std::size_t c = 0; c < growth_; ++c) {
                std::copy(h.row(b, c), h.row(b, c) + h.length, y.row(b, in_ + c));
            }
        }
        return y;
    }

    Tensor3 backward(const Tensor3& dy) override {
        Tensor3 dh(dy.batch, growth_, dy.length);
        Tensor3 dx(dy.batch, in_, dy.length);
        for (std::size_t b = 0; b < dy.batch; ++b) {
            for (std::size_t c = 0; c < in_; ++c) {
                std::copy(dy.row(b, c), dy.row(b, c) + dy.length, dx.row(b, c));
            }
            for (std::size_t c = 0; c < growth_; ++c) {
                std::copy(dy.row(b, in_ + c), dy.row(b, in_ + c) + dy.length, dh.row(b, c));
            }
        }
        Tensor3 dx_path = bn_.backward(relu_.backward(conv_.backward(dh)));
        for (std::size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dx_path.data[i];
        return dx;
    }

    void collect(std::vector<ParamRef>& params, std::vector<ParamRef>& buffers) override {
        bn_.collect(params, buffers);
        conv_.collect(params, buffers);
    }

  private:
    std::size_t in_, growth_;
    BatchNorm1d bn_;
    Relu relu_;
    Conv1d conv_;
};

double mean_cross_entropy(const std::vector<double>& logits, const std::vector<int>& labels,
                          std::size_t n_classes, std::vector<double>* dlogits_out) {
    const std::size_t batch = labels.size();
    if (dlogits_out != nullptr) dlogits_out->assign(logits.size(), 0.0);
    double total = 0.0;
    std::vector<double> p(n_classes);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * n_classes;
        double mx = row[0];
        for (std::size_t k = 1; k < n_classes; ++k) mx = std::max(mx, row[k]);
        double z = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            p[k] = std::exp(row[k] - mx);
            z += p[k];
        }
        for (std::size_t k = 0; k < n_classes; ++k) p[k] /= z;
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
            throw DimensionMismatch("label " + std::to_string(y) + " out of range");
        }
        total += -std::log(p[static_cast<std::size_t>(y)]);
        if (dlogits_out != nullptr) {
            for (std::size_t k = 0; k < n_classes; ++k) {
                (*dlogits_out)[b * n_classes + k] =
                    (p[k] - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0)) /
                    static_cast<double>(batch);
            }
        }
    }
    return total / static_cast<double>(batch);
}

}  // namespace

DenseNetConfig DenseNetConfig::desk() { return DenseNetConfig{}; }

DenseNetConfig DenseNetConfig::paper_fidelity() {
    DenseNetConfig cfg;
    cfg.block_layers = {4, 5, 5};
    cfg.growth_rate = 12;
    return cfg;
}

DenseNetConfig DenseNetConfig::tiny() {
    DenseNetConfig cfg;
    cfg.input_length = 32;
    cfg.block_layers = {1};
    cfg.growth_rate = 2;
    return cfg;
}

DenseNetConfig DenseNetConfig::wide() {
    DenseNetConfig cfg;
    cfg.input_length = 64;
    cfg.growth_rate = 16;
    return cfg;
}

void DenseNetConfig::validate() const {
    if (input_channels == 0 || input_length == 0 || stem_channels == 0 || growth_rate == 0 ||
        stem_kernel == 0 || stem_stride == 0 || pool_kernel == 0 || pool_stride == 0) {
        throw ConfigInvalid("all model sizes must be positive");
    }
    if (block_layers.empty()) throw ConfigInvalid("at least one dense block required");
    for (std::size_t n : block_layers) {
        if (n == 0) throw ConfigInvalid("dense blocks need at least one layer");
    }
    if (!(compression > 0.0 && compression <= 1.0)) {
        throw ConfigInvalid("compression must be in (0, 1]");
    }
    if (n_classes < 2) throw ConfigInvalid("need at least two classes");

    std::size_t len = conv_out_len(input_length, stem_kernel, stem_stride, stem_pad);
    len = conv_out_len(len, pool_kernel, pool_stride, pool_pad);
    std::size_t ch = stem_channels;
    for (std::size_t bi = 0; bi < block_layers.size(); ++bi) {
        ch += block_layers[bi] * growth_rate;
        if (bi + 1 < block_layers.size()) {
            ch = static_cast<std::size_t>(
                std::floor(static_cast<double>(ch) * compression));
            if (ch == 0) throw ConfigInvalid("compression collapses channels to zero");
            if (len < 2) throw ConfigInvalid("sequence exhausted before transition pool");
            len = (len - 2) / 2 + 1;
        }
    }
    if (len < 1) throw ConfigInvalid("derived sequence length reached zero");
}

std::size_t DenseNetConfig::weighted_layers() const {
    std::size_t n = 1;  // stem conv
    for (std::size_t b : block_layers) n += b;
    n += block_layers.size() - 1;  // transition convs
    n += 1;                        // classifier affine
    return n;
}

struct DenseNet::Impl {
    DenseNetConfig cfg;
    std::vector<std::unique_ptr<Layer>> trunk;
    std::size_t feat_ch = 0, feat_len = 0;
    std::vector<double> head_w, head_b, g_head_w, g_head_b;
    std::vector<std::vector<double>> velocity;

    std::uint64_t version = 1;
    bool have_cache = false;
    std::uint64_t cache_version = 0;
    std::size_t cache_batch = 0;
    Tensor3 features;
    std::vector<double> gap, logits;

    explicit Impl(const DenseNetConfig& config, std::uint64_t init_seed) : cfg(config) {
        cfg.validate();
        std::size_t ch = cfg.input_channels;
        trunk.push_back(std::make_unique<Conv1d>("stem.conv", ch, cfg.stem_channels,
                                                 cfg.stem_kernel, cfg.stem_stride,
                                                 cfg.stem_pad));
        trunk.push_back(std::make_unique<MaxPool1d>("stem.pool", cfg.pool_kernel,
                                                    cfg.pool_stride, cfg.pool_pad));
        ch = cfg.stem_channels;
        std::size_t len = conv_out_len(cfg.input_length, cfg.stem_kernel, cfg.stem_stride,
                                       cfg.stem_pad);
        len = conv_out_len(len, cfg.pool_kernel, cfg.pool_stride, cfg.pool_pad);
        for (std::size_t bi = 0; bi < cfg.block_layers.size(); ++bi) {
            for (std::size_t li = 0; li < cfg.block_layers[bi]; ++li) {
                std::ostringstream name;
                name << "block" << (bi + 1) << ".layer" << (li + 1);
                trunk.push_back(std::make_unique<DenseLayer>(name.str(), ch, cfg.growth_rate));
                ch += cfg.growth_rate;
            }
            if (bi + 1 < cfg.block_layers.size()) {
                std::ostringstream name;
                name << "trans" << (bi + 1);
                const auto out_ch = static_cast<std::size_t>(
                    std::floor(static_cast<double>(ch) * cfg.compression));
                trunk.push_back(std::make_unique<BatchNorm1d>(name.str() + ".bn", ch));
                trunk.push_back(std::make_unique<Relu>(name.str() + ".relu"));
                trunk.push_back(
                    std::make_unique<Conv1d>(name.str() + ".conv", ch, out_ch, 1, 1, 0));
                trunk.push_back(std::make_unique<AvgPool1d>(name.str() + ".pool", 2, 2));
                ch = out_ch;
                len = (len - 2) / 2 + 1;
            }
        }
        trunk.push_back(std::make_unique<BatchNorm1d>("final.bn", ch));
        trunk.push_back(std::make_unique<Relu>("final.relu"));
        feat_ch = ch;
        feat_len = len;

        head_w.assign(cfg.n_classes * feat_ch, 0.0);
        head_b.assign(cfg.n_classes, 0.0);
        g_head_w.assign(head_w.size(), 0.0);
        g_head_b.assign(head_b.size(), 0.0);

        Rng rng(derive_seed(init_seed));
        for (auto& layer : trunk) layer->init(rng);
        const double limit = std::sqrt(6.0 / static_cast<double>(feat_ch));
        for (auto& w : head_w) w = rng.uniform(-limit, limit);
    }

    std::vector<double> run_forward(const Tensor3& input, bool train, bool keep_cache) {
        if (input.channels != cfg.input_channels || input.length != cfg.input_length) {
            throw ShapeMismatch("input is " + std::to_string(input.channels) + "x" +
                                std::to_string(input.length) + ", model expects " +
                                std::to_string(cfg.input_channels) + "x" +
                                std::to_string(cfg.input_length));
        }
        if (input.batch == 0) throw ShapeMismatch("empty batch");
        if (train && input.batch < 2) {
            throw BatchTooSmall("train-mode forward requires batch >= 2 for batch statistics");
        }
        Tensor3 x = input;
        for (auto& layer : trunk) x = layer->forward(x, train);

        const std::size_t batch = x.batch;
        gap.assign(batch * feat_ch, 0.0);
        const double inv_len = 1.0 / static_cast<double>(feat_len);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < feat_ch; ++c) {
                const double* row = x.row(b, c);
                double acc = 0.0;
                for (std::size_t l = 0; l < feat_len; ++l) acc += row[l];
                gap[b * feat_ch + c] = acc * inv_len;
            }
        }
        logits.assign(batch * cfg.n_classes, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < cfg.n_classes; ++k) {
                double acc = head_b[k];
                const double* w = head_w.data() + k * feat_ch;
                const double* g = gap.data() + b * feat_ch;
                for (std::size_t c = 0; c < feat_ch; ++c) acc += w[c] * g[c];
                logits[b * cfg.n_classes + k] = acc;
            }
        }
        features = std::move(x);
        have_cache = keep_cache && train;
        cache_version = version;
        cache_batch = batch;
        return logits;
    }

    double backward_from_logits(const std::vector<int>& labels) {
        if (!have_cache || cache_version != version) {
            throw StaleCache("backward requires a train-mode forward on current parameters");
        }
        if (labels.size() != cache_batch) {
            throw DimensionMismatch("label count does not match the cached batch");
        }
        std::vector<double> dlogits;
        const double loss = mean_cross_entropy(logits, labels, cfg.n_classes, &dlogits);

        const std::size_t batch = cache_batch;
        std::vector<double> dgap(batch * feat_ch, 0.0);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t k = 0; k < cfg.n_classes; ++k) {
                const double d = dlogits[b * cfg.n_classes + k];
                g_head_b[k] += d;
                double* gw = g_head_w.data() + k * feat_ch;
                const double* g = gap.data() + b * feat_ch;
                double* dg = dgap.data() + b * feat_ch;
                const double* w = head_w.data() + k * feat_ch;
                for (std::size_t c = 0; c < feat_ch; ++c) {
                    gw[c] += d * g[c];
                    dg[c] += d * w[c];
                }
            }
        }
        Tensor3 dx(batch, feat_ch, feat_len);
        const double inv_len = 1.0 / static_cast<double>(feat_len);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < feat_ch; ++c) {
                const double d = dgap[b * feat_ch + c] * inv_len;
                double* row = dx.row(b, c);
                std::fill(row, row + feat_len, d);
            }
        }
        for (auto it = trunk.rbegin(); it != trunk.rend(); ++it) {
            dx = (*it)->backward(dx);
        }
        have_cache = false;
        return loss;
    }

    std::vector<ParamRef> collect_params() {
        std::vector<ParamRef> params, buffers;
        for (auto& layer : trunk) layer->collect(params, buffers);
        params.push_back({"head.weight", &head_w, &g_head_w});
        params.push_back({"head.bias", &head_b, &g_head_b});
        return params;
    }

    std::vector<ParamRef> collect_buffers() {
        std::vector<ParamRef> params, buffers;
        for (auto& layer : trunk) layer->collect(params, buffers);
        return buffers;
    }
};

DenseNet::DenseNet(const DenseNetConfig& config, std::uint64_t init_seed)
    : impl_(std::make_unique<Impl>(config, init_seed)) {}
DenseNet::~DenseNet() = default;
DenseNet::DenseNet(DenseNet&&) noexcept = default;
DenseNet& DenseNet::operator=(DenseNet&&) noexcept = default;

const DenseNetConfig& DenseNet::config() const { return impl_->cfg; }

std::vector<double> DenseNet::forward(const Tensor3& input, bool train) {
    return impl_->run_forward(input, train, true);
}

double DenseNet::loss_and_backward(const std::vector<int>& labels) {
    return impl_->backward_from_logits(labels);
}

double DenseNet::forward_loss(const Tensor3& input, const std::vector<int>& labels,
                              bool train) {
    const auto logits = impl_->run_forward(input, train, false);
    return mean_cross_entropy(logits, labels, impl_->cfg.n_classes, nullptr);
}

std::vector<ParamRef> DenseNet::params() { return impl_->collect_params(); }
std::vector<ParamRef> DenseNet::buffers() { return impl_->collect_buffers(); }

void DenseNet::zero_grads() {
    for (auto& p : impl_->collect_params()) {
        std::fill(p.grads->begin(), p.grads->end(), 0.0);
    }
}

void DenseNet::sgd_step(double learning_rate, double momentum) {
    auto params = impl_->collect_params();
    if (momentum != 0.0 && impl_->velocity.size() != params.size()) {
        impl_->velocity.clear();
        for (const auto& p : params) impl_->velocity.emplace_back(p.values->size(), 0.0);
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = *params[i].values;
        auto& g = *params[i].grads;
        if (momentum != 0.0) {
            auto& v = impl_->velocity[i];
            for (std::size_t j = 0; j < w.size(); ++j) {
                v[j] = momentum * v[j] + g[j];
                w[j] -= learning_rate * v[j];
            }
        } else {
            for (std::size_t j = 0; j < w.size(); ++j) w[j] -= learning_rate * g[j];
        }
    }
    ++impl_->version;
    impl_->have_cache = false;
}

DenseNet::FeatureForward DenseNet::forward_with_features(const Tensor3& input) {
    auto logits = impl_->run_forward(input, false, false);
    return FeatureForward{impl_->features, std::move(logits)};
}

std::size_t DenseNet::feature_channels() const { return impl_->feat_ch; }
std::size_t DenseNet::feature_length() const { return impl_->feat_len; }

double DenseNet::head_weight(std::size_t cls, std::size_t channel) const {
    return impl_->head_w[cls * impl_->feat_ch + channel];
}

std::uint64_t DenseNet::param_version() const { return impl_->version; }

std::vector<double> softmax_class1(const std::vector<double>& logits, std::size_t n_classes) {
    const std::size_t batch = logits.size() / n_classes;
    std::vector<double> out(batch);
    for (std::size_t b = 0; b < batch; ++b) {
        const double* row = logits.data() + b * n_classes;
        double mx = row[0];
        for (std::size_t k = 1; k < n_classes; ++k) mx = std::max(mx, row[k]);
        double z = 0.0, p1 = 0.0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            const double e = std::exp(row[k] - mx);
            z += e;
            if (k == 1) p1 = e;
        }
        out[b] = p1 / z;
    }
    return out;
}

Tensor3 batch_tensor(const std::vector<TrainingExample>& examples,
                     const std::vector<std::size_t>& order, std::size_t first,
                     std::size_t last, const DenseNetConfig& config) {
    const std::size_t batch = last - first;
    Tensor3 x(batch, config.input_channels, config.input_length);
    for (std::size_t b = 0; b < batch; ++b) {
        const auto& ex = examples[order[first + b]];
        if (ex.channels.size() != config.input_channels) {
            throw ShapeMismatch("example has " + std::to_string(ex.channels.size()) +
                                " channels, model expects " +
                                std::to_string(config.input_channels));
        }
        for (std::size_t c = 0; c < config.input_channels; ++c) {
            if (ex.channels[c].size() != config.input_length) {
                throw ShapeMismatch("example channel length " +
                                    std::to_string(ex.channels[c].size()) +
                                    " does not match input length " +
                                    std::to_string(config.input_length));
            }
            std::copy(ex.channels[c].begin(), ex.channels[c].end(), x.row(b, c));
        }
    }
    return x;
}

TrainResult train_cnn(DenseNet& model, const std::vector<TrainingExample>& examples,
                      const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (examples.empty()) throw DimensionMismatch("no training examples");
    if (cfg.epochs == 0) throw ConfigInvalid("epochs must be >= 1");
    if (cfg.batch_size < 2) throw ConfigInvalid("batch_size must be >= 2");
    if (cfg.learning_rate < 0.0) throw ConfigInvalid("learning_rate must be >= 0");
    bool has0 = false, has1 = false;
    for (const auto& ex : examples) {
        has0 = has0 || ex.label == 0;
        has1 = has1 || ex.label == 1;
    }
    if (!has0 || !has1) {
        throw SingleClassTraining("training requires both classes present");
    }

    const std::size_t n = examples.size();
    TrainResult result;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 0xeb0c, epoch));
        std::iota(order.begin(), order.end(), 0);
        rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t n_seen = 0;
        for (std::size_t first = 0; first < n; first += cfg.batch_size) {
            const std::size_t last = std::min(first + cfg.batch_size, n);
            if (last - first < 2) break;  // drop a trailing singleton
            const Tensor3 batch = batch_tensor(examples, order, first, last, model.config());
            std::vector<int> labels;
            labels.reserve(last - first);
            for (std::size_t i = first; i < last; ++i) labels.push_back(examples[order[i]].label);

            model.zero_grads();
            model.forward(batch, true);
            const double loss = model.loss_and_backward(labels);
            if (!std::isfinite(loss)) {
                throw DivergenceDetected("training loss became non-finite at epoch " +
                                         std::to_string(epoch + 1));
            }
            model.sgd_step(cfg.learning_rate, cfg.momentum);
            loss_sum += loss * static_cast<double>(last - first);
            n_seen += last - first;
        }
        const double mean_loss =
            n_seen > 0 ? loss_sum / static_cast<double>(n_seen)
                       : std::numeric_limits<double>::quiet_NaN();
        result.epoch_losses.push_back(mean_loss);
        if (cfg.capture_snapshots) result.epoch_params.push_back(flatten_params(model));
        if (on_epoch) on_epoch(epoch, model, mean_loss);
    }
    return result;
}

std::size_t input_mode_channels(InputMode mode) {
    return mode == InputMode::RawPlusFft ? 2 : 1;
}

std::string input_mode_name(InputMode mode) {
    switch (mode) {
        case InputMode::Raw: return "raw";
        case InputMode::Fft: return "fft";
        case InputMode::RawPlusFft: return "raw_plus_fft";
    }
    return "raw";
}

InputMode input_mode_from_name(const std::string& name) {
    if (name == "raw") return InputMode::Raw;
    if (name == "fft") return InputMode::Fft;
    if (name == "raw_plus_fft") return InputMode::RawPlusFft;
    throw ParseError("unknown input mode: " + name);
}

TrainingExample make_example(const std::vector<double>& instance_values, int label,
                             InputMode mode) {
    TrainingExample ex;
    ex.label = label;
    switch (mode) {
        case InputMode::Raw:
            ex.channels = {instance_values};
            break;
        case InputMode::Fft:
            ex.channels = {spectral_input(instance_values)};
            break;
        case InputMode::RawPlusFft:
            ex.channels = {instance_values, spectral_input(instance_values)};
            break;
    }
    return ex;
}

WindowPrediction predict_window(DenseNet& model, const BreathWindow& window, InputMode mode) {
    if (window.instances.empty()) throw ShapeMismatch("window has no instances");
    std::vector<TrainingExample> examples;
    examples.reserve(window.instances.size());
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < window.instances.size(); ++i) {
        examples.push_back(make_example(window.instances[i].values, 0, mode));
        order.push_back(i);
    }
    const Tensor3 batch =
        batch_tensor(examples, order, 0, examples.size(), model.config());
    const auto logits = model.forward(batch, false);
    const auto probs = softmax_class1(logits, model.config().n_classes);
    double mean = 0.0;
    for (double p : probs) mean += p;
    mean /= static_cast<double>(probs.size());
    return WindowPrediction{mean, mean > 0.5};
}

std::vector<double> flatten_params(DenseNet& model) {
    std::vector<double> flat;
    for (const auto& p : model.params()) {
        flat.insert(flat.end(), p.values->begin(), p.values->end());
    }
    return flat;
}

void save_cnn(DenseNet& model, const std::filesystem::path& path) {
    const auto& cfg = model.config();
    nlohmann::json params = nlohmann::json::object();
    for (const auto& p : model.params()) params[p.name] = *p.values;
    nlohmann::json buffers = nlohmann::json::object();
    for (const auto& b : model.buffers()) buffers[b.name] = *b.values;
    nlohmann::json doc = {
        {"model", "densenet1d"},
        {"config",
         {{"input_channels", cfg.input_channels},
          {"input_length", cfg.input_length},
          {"stem_channels", cfg.stem_channels},
          {"stem_kernel", cfg.stem_kernel},
          {"stem_stride", cfg.stem_stride},
          {"stem_pad", cfg.stem_pad},
          {"pool_kernel", cfg.pool_kernel},
          {"pool_stride", cfg.pool_stride},
          {"pool_pad", cfg.pool_pad},
          {"block_layers", cfg.block_layers},
          {"growth_rate", cfg.growth_rate},
          {"compression", cfg.compression},
          {"n_classes", cfg.n_classes}}},
        {"params", std::move(params)},
        {"buffers", std::move(buffers)},
    };
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

DenseNet load_cnn(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    try {
        if (doc.at("model").get<std::string>() != "densenet1d") {
            throw ParseError(path.string() + ": not a densenet1d document");
        }
        const auto& c = doc.at("config");
        DenseNetConfig cfg;
        cfg.input_channels = c.at("input_channels").get<std::size_t>();
        cfg.input_length = c.at("input_length").get<std::size_t>();
        cfg.stem_channels = c.at("stem_channels").get<std::size_t>();
        cfg.stem_kernel = c.at("stem_kernel").get<std::size_t>();
        cfg.stem_stride = c.at("stem_stride").get<std::size_t>();
        cfg.stem_pad = c.at("stem_pad").get<std::size_t>();
        cfg.pool_kernel = c.at("pool_kernel").get<std::size_t>();
        cfg.pool_stride = c.at("pool_stride").get<std::size_t>();
        cfg.pool_pad = c.at("pool_pad").get<std::size_t>();
        cfg.block_layers = c.at("block_layers").get<std::vector<std::size_t>>();
        cfg.growth_rate = c.at("growth_rate").get<std::size_t>();
        cfg.compression = c.at("compression").get<double>();
        cfg.n_classes = c.at("n_classes").get<std::size_t>();

        DenseNet model(cfg, 0);
        for (const auto& p : model.params()) {
            const auto values = doc.at("params").at(p.name).get<std::vector<double>>();
            if (values.size() != p.values->size()) {
                throw ParseError(path.string() + ": size mismatch for " + p.name);
            }
            *p.values = values;
        }
        for (const auto& b : model.buffers()) {
            const auto values = doc.at("buffers").at(b.name).get<std::vector<double>>();
            if (values.size() != b.values->size()) {
                throw ParseError(path.string() + ": size mismatch for " + b.name);
            }
            *b.values = values;
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

}  // namespace ards
