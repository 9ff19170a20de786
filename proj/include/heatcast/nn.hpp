#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "heatcast/errors.hpp"
#include "heatcast/rng.hpp"

namespace heatcast::nn {

/// Batch tensor, [n][c][h][w] contiguous. Dense activations use h = w = 1.
template <typename S>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<S> v;

    void resize(int n_, int c_, int h_, int w_) {
        n = n_;
        c = c_;
        h = h_;
        w = w_;
        v.assign(size_t(n) * c * h * w, S(0));
    }
    size_t size() const { return v.size(); }
    size_t plane() const { return size_t(h) * w; }
    size_t per_sample() const { return size_t(c) * h * w; }
    S* sample(int i) { return v.data() + size_t(i) * per_sample(); }
    const S* sample(int i) const { return v.data() + size_t(i) * per_sample(); }
    S* channel(int i, int ch) { return sample(i) + size_t(ch) * plane(); }
    const S* channel(int i, int ch) const { return sample(i) + size_t(ch) * plane(); }
};

enum class LayerKind : uint32_t {
    Conv = 1,
    BatchNorm = 2,
    ReLU = 3,
    MaxPool = 4,
    SpatialDropout = 5,
    Flatten = 6,
    Dense = 7,
    Sigmoid = 8,
};

template <typename S>
struct ParamRef {
    std::string name;
    S* data = nullptr;
    size_t size = 0;
};

template <typename S>
class Layer {
public:
    virtual ~Layer() = default;
    virtual LayerKind kind() const = 0;
    virtual void forward(const Tensor<S>& in, Tensor<S>& out, bool train, Rng* rng) = 0;
    virtual void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) = 0;
    virtual std::vector<ParamRef<S>> params() { return {}; }
    virtual std::vector<ParamRef<S>> grads() { return {}; }
    /// Non-trainable persistent state (batch-norm running stats).
    virtual std::vector<ParamRef<S>> state() { return {}; }
    virtual std::vector<uint32_t> shape_words() const { return {}; }
    virtual void init(Rng&) {}
};

// ---------------------------------------------------------------------------

template <typename S>
class ConvLayer : public Layer<S> {
public:
    ConvLayer(int in_ch, int out_ch, int kh, int kw)
        : in_ch_(in_ch), out_ch_(out_ch), kh_(kh), kw_(kw) {
        w_.assign(size_t(out_ch) * in_ch * kh * kw, S(0));
        b_.assign(size_t(out_ch), S(0));
        gw_.assign(w_.size(), S(0));
        gb_.assign(b_.size(), S(0));
    }

    LayerKind kind() const override { return LayerKind::Conv; }
    std::vector<uint32_t> shape_words() const override {
        return {uint32_t(out_ch_), uint32_t(in_ch_), uint32_t(kh_), uint32_t(kw_)};
    }

    void init(Rng& rng) override {
        // Glorot uniform: fan_in = in_ch*kh*kw, fan_out = out_ch*kh*kw.
        const double limit =
            std::sqrt(6.0 / (double(in_ch_) * kh_ * kw_ + double(out_ch_) * kh_ * kw_));
        for (S& w : w_) w = S((2.0 * rng.uniform() - 1.0) * limit);
        std::fill(b_.begin(), b_.end(), S(0));
    }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool, Rng*) override {
        if (in.c != in_ch_) throw DimensionError("conv: channel mismatch");
        if (in.h < kh_ || in.w < kw_)
            throw ConfigError("conv: input smaller than kernel");
        in_ = &in;
        const int oh = in.h - kh_ + 1;
        const int ow = in.w - kw_ + 1;
        out.resize(in.n, out_ch_, oh, ow);
        for (int s = 0; s < in.n; ++s) {
            for (int oc = 0; oc < out_ch_; ++oc) {
                S* dst = out.channel(s, oc);
                std::fill(dst, dst + size_t(oh) * ow, b_[size_t(oc)]);
                for (int ic = 0; ic < in_ch_; ++ic) {
                    const S* src = in.channel(s, ic);
                    const S* ker = w_.data() + ((size_t(oc) * in_ch_ + ic) * kh_) * kw_;
                    for (int ky = 0; ky < kh_; ++ky) {
                        for (int kx = 0; kx < kw_; ++kx) {
                            const S wv = ker[size_t(ky) * kw_ + kx];
                            for (int y = 0; y < oh; ++y) {
                                const S* srow = src + size_t(y + ky) * in.w + kx;
                                S* drow = dst + size_t(y) * ow;
                                for (int x = 0; x < ow; ++x) drow[x] += wv * srow[x];
                            }
                        }
                    }
                }
            }
        }
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        const Tensor<S>& in = *in_;
        const int oh = grad_out.h, ow = grad_out.w;
        std::fill(gw_.begin(), gw_.end(), S(0));
        std::fill(gb_.begin(), gb_.end(), S(0));
        grad_in.resize(in.n, in.c, in.h, in.w);
        for (int s = 0; s < in.n; ++s) {
            for (int oc = 0; oc < out_ch_; ++oc) {
                const S* gout = grad_out.channel(s, oc);
                S acc = S(0);
                for (size_t k = 0; k < size_t(oh) * ow; ++k) acc += gout[k];
                gb_[size_t(oc)] += acc;
                for (int ic = 0; ic < in_ch_; ++ic) {
                    const S* src = in.channel(s, ic);
                    S* gsrc = grad_in.channel(s, ic);
                    const size_t kbase = (size_t(oc) * in_ch_ + ic) * kh_ * kw_;
                    for (int ky = 0; ky < kh_; ++ky) {
                        for (int kx = 0; kx < kw_; ++kx) {
                            const S wv = w_[kbase + size_t(ky) * kw_ + kx];
                            S gw_acc = S(0);
                            for (int y = 0; y < oh; ++y) {
                                const S* grow = gout + size_t(y) * ow;
                                const S* srow = src + size_t(y + ky) * in.w + kx;
                                S* gsrow = gsrc + size_t(y + ky) * in.w + kx;
                                for (int x = 0; x < ow; ++x) {
                                    gw_acc += grow[x] * srow[x];
                                    gsrow[x] += wv * grow[x];
                                }
                            }
                            gw_[kbase + size_t(ky) * kw_ + kx] += gw_acc;
                        }
                    }
                }
            }
        }
    }

    std::vector<ParamRef<S>> params() override {
        return {{"conv.w", w_.data(), w_.size()}, {"conv.b", b_.data(), b_.size()}};
    }
    std::vector<ParamRef<S>> grads() override {
        return {{"conv.w", gw_.data(), gw_.size()}, {"conv.b", gb_.data(), gb_.size()}};
    }

    const std::vector<S>& weights() const { return w_; }
    const std::vector<S>& bias() const { return b_; }
    std::vector<S>& weights_mut() { return w_; }

private:
    int in_ch_, out_ch_, kh_, kw_;
    std::vector<S> w_, b_, gw_, gb_;
    const Tensor<S>* in_ = nullptr;
};

// ---------------------------------------------------------------------------

/// Batch normalization per channel over (n, h, w). Train mode normalizes by
/// batch statistics and refreshes the running stats by EMA; eval mode uses
/// the running stats. Variance is floored at 1e-5 before the square root.
template <typename S>
class BatchNormLayer : public Layer<S> {
public:
    static constexpr double kVarFloor = 1e-5;
    static constexpr double kMomentum = 0.9;

    explicit BatchNormLayer(int channels) : c_(channels) {
        gamma_.assign(size_t(c_), S(1));
        beta_.assign(size_t(c_), S(0));
        ggamma_.assign(size_t(c_), S(0));
        gbeta_.assign(size_t(c_), S(0));
        run_mean_.assign(size_t(c_), S(0));
        run_var_.assign(size_t(c_), S(1));
    }

    LayerKind kind() const override { return LayerKind::BatchNorm; }
    std::vector<uint32_t> shape_words() const override { return {uint32_t(c_)}; }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool train, Rng*) override {
        if (in.c != c_) throw DimensionError("batchnorm: channel mismatch");
        in_ = &in;
        train_ = train;
        out.resize(in.n, in.c, in.h, in.w);
        xhat_.assign(in.size(), S(0));
        inv_.assign(size_t(c_), 0.0);
        floored_.assign(size_t(c_), 0);
        const size_t plane = in.plane();
        const double n_stat = double(in.n) * plane;

        for (int ch = 0; ch < c_; ++ch) {
            double mean, var;
            if (train) {
                double sum = 0.0, sq = 0.0;
                for (int s = 0; s < in.n; ++s) {
                    const S* src = in.channel(s, ch);
                    for (size_t k = 0; k < plane; ++k) {
                        sum += double(src[k]);
                        sq += double(src[k]) * double(src[k]);
                    }
                }
                mean = sum / n_stat;
                var = std::max(sq / n_stat - mean * mean, 0.0);
                update_running_stats(ch, mean, var);
                batch_mean_ = mean;  // last channel's, used by unit tests via accessors
            } else {
                mean = double(run_mean_[size_t(ch)]);
                var = double(run_var_[size_t(ch)]);
            }
            const bool floored = var < kVarFloor;
            const double inv = 1.0 / std::sqrt(floored ? kVarFloor : var);
            inv_[size_t(ch)] = inv;
            floored_[size_t(ch)] = floored ? 1 : 0;
            const double g = double(gamma_[size_t(ch)]);
            const double b = double(beta_[size_t(ch)]);
            for (int s = 0; s < in.n; ++s) {
                const S* src = in.channel(s, ch);
                S* dst = out.channel(s, ch);
                S* xh = xhat_.data() + (size_t(s) * c_ + ch) * plane;
                for (size_t k = 0; k < plane; ++k) {
                    const double x = (double(src[k]) - mean) * inv;
                    xh[k] = S(x);
                    dst[k] = S(g * x + b);
                }
            }
        }
    }

    /// EMA refresh, exposed so the update rule is testable in isolation.
    void update_running_stats(int channel, double batch_mean, double batch_var) {
        run_mean_[size_t(channel)] =
            S(kMomentum * double(run_mean_[size_t(channel)]) + (1.0 - kMomentum) * batch_mean);
        run_var_[size_t(channel)] =
            S(kMomentum * double(run_var_[size_t(channel)]) + (1.0 - kMomentum) * batch_var);
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        if (!train_) throw NumericError("batchnorm: backward requires a train-mode forward");
        const Tensor<S>& in = *in_;
        grad_in.resize(in.n, in.c, in.h, in.w);
        const size_t plane = in.plane();
        const double n_stat = double(in.n) * plane;
        for (int ch = 0; ch < c_; ++ch) {
            double sum_d = 0.0, sum_dx = 0.0;
            for (int s = 0; s < in.n; ++s) {
                const S* g = grad_out.channel(s, ch);
                const S* xh = xhat_.data() + (size_t(s) * c_ + ch) * plane;
                for (size_t k = 0; k < plane; ++k) {
                    sum_d += double(g[k]);
                    sum_dx += double(g[k]) * double(xh[k]);
                }
            }
            ggamma_[size_t(ch)] = S(sum_dx);
            gbeta_[size_t(ch)] = S(sum_d);
            const double gamma = double(gamma_[size_t(ch)]);
            const double inv = inv_[size_t(ch)];
            const double mean_d = sum_d / n_stat;
            const double mean_dx = floored_[size_t(ch)] ? 0.0 : sum_dx / n_stat;
            for (int s = 0; s < in.n; ++s) {
                const S* g = grad_out.channel(s, ch);
                const S* xh = xhat_.data() + (size_t(s) * c_ + ch) * plane;
                S* gi = grad_in.channel(s, ch);
                for (size_t k = 0; k < plane; ++k)
                    gi[k] = S(gamma * inv *
                              (double(g[k]) - mean_d - double(xh[k]) * mean_dx));
            }
        }
    }

    std::vector<ParamRef<S>> params() override {
        return {{"bn.gamma", gamma_.data(), gamma_.size()},
                {"bn.beta", beta_.data(), beta_.size()}};
    }
    std::vector<ParamRef<S>> grads() override {
        return {{"bn.gamma", ggamma_.data(), ggamma_.size()},
                {"bn.beta", gbeta_.data(), gbeta_.size()}};
    }
    std::vector<ParamRef<S>> state() override {
        return {{"bn.run_mean", run_mean_.data(), run_mean_.size()},
                {"bn.run_var", run_var_.data(), run_var_.size()}};
    }

    S running_mean(int ch) const { return run_mean_[size_t(ch)]; }
    S running_var(int ch) const { return run_var_[size_t(ch)]; }

private:
    int c_;
    std::vector<S> gamma_, beta_, ggamma_, gbeta_, run_mean_, run_var_;
    std::vector<S> xhat_;
    std::vector<double> inv_;
    std::vector<uint8_t> floored_;
    double batch_mean_ = 0.0;
    bool train_ = false;
    const Tensor<S>* in_ = nullptr;
};

// ---------------------------------------------------------------------------

template <typename S>
class ReluLayer : public Layer<S> {
public:
    LayerKind kind() const override { return LayerKind::ReLU; }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool, Rng*) override {
        out.resize(in.n, in.c, in.h, in.w);
        out_ = &out;
        for (size_t k = 0; k < in.size(); ++k) out.v[k] = in.v[k] > S(0) ? in.v[k] : S(0);
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        const Tensor<S>& out = *out_;
        grad_in.resize(out.n, out.c, out.h, out.w);
        for (size_t k = 0; k < out.size(); ++k)
            grad_in.v[k] = out.v[k] > S(0) ? grad_out.v[k] : S(0);
    }

private:
    const Tensor<S>* out_ = nullptr;
};

// ---------------------------------------------------------------------------

/// 2x2 max pooling, stride 2, trailing row/column dropped on odd sizes.
template <typename S>
class MaxPoolLayer : public Layer<S> {
public:
    LayerKind kind() const override { return LayerKind::MaxPool; }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool, Rng*) override {
        const int oh = in.h / 2, ow = in.w / 2;
        if (oh < 1 || ow < 1) throw ConfigError("maxpool: input smaller than 2x2");
        out.resize(in.n, in.c, oh, ow);
        in_shape_ = {in.n, in.c, in.h, in.w};
        argmax_.assign(out.size(), 0);
        size_t oidx = 0;
        for (int s = 0; s < in.n; ++s) {
            for (int ch = 0; ch < in.c; ++ch) {
                const S* src = in.channel(s, ch);
                S* dst = out.channel(s, ch);
                for (int y = 0; y < oh; ++y) {
                    for (int x = 0; x < ow; ++x) {
                        size_t best = size_t(2 * y) * in.w + 2 * x;
                        S bv = src[best];
                        const size_t cand[3] = {best + 1, best + size_t(in.w),
                                                best + size_t(in.w) + 1};
                        for (size_t c : cand)
                            if (src[c] > bv) {
                                bv = src[c];
                                best = c;
                            }
                        dst[size_t(y) * ow + x] = bv;
                        argmax_[oidx++] = uint32_t(best);
                    }
                }
            }
        }
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        grad_in.resize(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        size_t oidx = 0;
        for (int s = 0; s < grad_out.n; ++s) {
            for (int ch = 0; ch < grad_out.c; ++ch) {
                S* gsrc = grad_in.channel(s, ch);
                const S* gout = grad_out.channel(s, ch);
                for (size_t k = 0; k < grad_out.plane(); ++k)
                    gsrc[argmax_[oidx++]] += gout[k];
            }
        }
    }

private:
    std::array<int, 4> in_shape_{};
    std::vector<uint32_t> argmax_;
};

// ---------------------------------------------------------------------------

/// Spatial dropout: whole feature maps are zeroed per sample with the given
/// rate, survivors scaled by 1/(1-rate). Identity in eval mode.
template <typename S>
class SpatialDropoutLayer : public Layer<S> {
public:
    explicit SpatialDropoutLayer(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0)
            throw ConfigError("spatial_dropout: rate must be in [0, 1)");
    }

    LayerKind kind() const override { return LayerKind::SpatialDropout; }
    std::vector<uint32_t> shape_words() const override {
        return {uint32_t(std::llround(rate_ * 1e6))};
    }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool train, Rng* rng) override {
        out.resize(in.n, in.c, in.h, in.w);
        scale_.assign(size_t(in.n) * in.c, S(1));
        if (train && rate_ > 0.0) {
            if (!rng) throw NumericError("spatial_dropout: train forward needs an rng");
            const S keep_scale = S(1.0 / (1.0 - rate_));
            for (size_t m = 0; m < scale_.size(); ++m)
                scale_[m] = rng->uniform() < rate_ ? S(0) : keep_scale;
        }
        for (int s = 0; s < in.n; ++s)
            for (int ch = 0; ch < in.c; ++ch) {
                const S sc = scale_[size_t(s) * in.c + ch];
                const S* src = in.channel(s, ch);
                S* dst = out.channel(s, ch);
                for (size_t k = 0; k < in.plane(); ++k) dst[k] = sc * src[k];
            }
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        grad_in.resize(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
        for (int s = 0; s < grad_out.n; ++s)
            for (int ch = 0; ch < grad_out.c; ++ch) {
                const S sc = scale_[size_t(s) * grad_out.c + ch];
                const S* g = grad_out.channel(s, ch);
                S* gi = grad_in.channel(s, ch);
                for (size_t k = 0; k < grad_out.plane(); ++k) gi[k] = sc * g[k];
            }
    }

    double rate() const { return rate_; }

private:
    double rate_;
    std::vector<S> scale_;
};

// ---------------------------------------------------------------------------

template <typename S>
class FlattenLayer : public Layer<S> {
public:
    LayerKind kind() const override { return LayerKind::Flatten; }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool, Rng*) override {
        in_shape_ = {in.n, in.c, in.h, in.w};
        out.resize(in.n, int(in.per_sample()), 1, 1);
        out.v = in.v;
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        grad_in.resize(in_shape_[0], in_shape_[1], in_shape_[2], in_shape_[3]);
        grad_in.v = grad_out.v;
    }

private:
    std::array<int, 4> in_shape_{};
};

// ---------------------------------------------------------------------------

template <typename S>
class DenseLayer : public Layer<S> {
public:
    DenseLayer(int in_units, int out_units) : in_(in_units), out_(out_units) {
        w_.assign(size_t(out_) * in_, S(0));
        b_.assign(size_t(out_), S(0));
        gw_.assign(w_.size(), S(0));
        gb_.assign(b_.size(), S(0));
    }

    LayerKind kind() const override { return LayerKind::Dense; }
    std::vector<uint32_t> shape_words() const override {
        return {uint32_t(out_), uint32_t(in_)};
    }

    void init(Rng& rng) override {
        const double limit = std::sqrt(6.0 / (double(in_) + double(out_)));
        for (S& w : w_) w = S((2.0 * rng.uniform() - 1.0) * limit);
        std::fill(b_.begin(), b_.end(), S(0));
    }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool, Rng*) override {
        if (int(in.per_sample()) != in_) throw DimensionError("dense: input size mismatch");
        input_ = &in;
        out.resize(in.n, out_, 1, 1);
        for (int s = 0; s < in.n; ++s) {
            const S* x = in.sample(s);
            S* y = out.sample(s);
            for (int o = 0; o < out_; ++o) {
                const S* wr = w_.data() + size_t(o) * in_;
                S acc = b_[size_t(o)];
                for (int i = 0; i < in_; ++i) acc += wr[i] * x[i];
                y[o] = acc;
            }
        }
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        const Tensor<S>& in = *input_;
        std::fill(gw_.begin(), gw_.end(), S(0));
        std::fill(gb_.begin(), gb_.end(), S(0));
        grad_in.resize(in.n, in.c, in.h, in.w);
        for (int s = 0; s < in.n; ++s) {
            const S* x = in.sample(s);
            const S* g = grad_out.sample(s);
            S* gi = grad_in.sample(s);
            for (int o = 0; o < out_; ++o) {
                const S go = g[o];
                gb_[size_t(o)] += go;
                S* gwr = gw_.data() + size_t(o) * in_;
                const S* wr = w_.data() + size_t(o) * in_;
                for (int i = 0; i < in_; ++i) {
                    gwr[i] += go * x[i];
                    gi[i] += go * wr[i];
                }
            }
        }
    }

    std::vector<ParamRef<S>> params() override {
        return {{"dense.w", w_.data(), w_.size()}, {"dense.b", b_.data(), b_.size()}};
    }
    std::vector<ParamRef<S>> grads() override {
        return {{"dense.w", gw_.data(), gw_.size()}, {"dense.b", gb_.data(), gb_.size()}};
    }

    const std::vector<S>& weights() const { return w_; }
    const std::vector<S>& bias() const { return b_; }

private:
    int in_, out_;
    std::vector<S> w_, b_, gw_, gb_;
    const Tensor<S>* input_ = nullptr;
};

// ---------------------------------------------------------------------------

template <typename S>
class SigmoidLayer : public Layer<S> {
public:
    LayerKind kind() const override { return LayerKind::Sigmoid; }

    void forward(const Tensor<S>& in, Tensor<S>& out, bool, Rng*) override {
        out.resize(in.n, in.c, in.h, in.w);
        out_ = &out;
        // Clamp keeps the output strictly inside (0, 1) at this precision.
        const double eps = sizeof(S) == 4 ? 1e-6 : 1e-12;
        for (size_t k = 0; k < in.size(); ++k) {
            const double x = double(in.v[k]);
            const double q = x >= 0 ? 1.0 / (1.0 + std::exp(-x))
                                    : std::exp(x) / (1.0 + std::exp(x));
            out.v[k] = S(std::clamp(q, eps, 1.0 - eps));
        }
    }

    void backward(const Tensor<S>& grad_out, Tensor<S>& grad_in) override {
        const Tensor<S>& out = *out_;
        grad_in.resize(out.n, out.c, out.h, out.w);
        for (size_t k = 0; k < out.size(); ++k) {
            const double q = double(out.v[k]);
            grad_in.v[k] = S(double(grad_out.v[k]) * q * (1.0 - q));
        }
    }

private:
    const Tensor<S>* out_ = nullptr;
};

// ---------------------------------------------------------------------------

constexpr double kBceEps = 1e-7;

/// An ordered layer stack with cached activations. Serves both as a full
/// classifier head (ending in sigmoid, trained against BCE) and as a trunk
/// inside the two-tower aggregation network.
template <typename S>
class Network {
public:
    void add(std::unique_ptr<Layer<S>> layer) { layers_.push_back(std::move(layer)); }

    size_t layer_count() const { return layers_.size(); }
    Layer<S>& layer(size_t i) { return *layers_[i]; }
    const Layer<S>& layer(size_t i) const { return *layers_[i]; }

    void init(Rng& rng) {
        for (auto& l : layers_) l->init(rng);
    }

    /// Runs the stack; the returned tensor stays valid until the next call.
    const Tensor<S>& forward(const Tensor<S>& input, bool train, Rng* dropout_rng) {
        acts_.resize(layers_.size() + 1);
        gacts_.resize(layers_.size() + 1);
        acts_[0] = input;
        for (size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(acts_[i], acts_[i + 1], train, dropout_rng);
            for (const S v : acts_[i + 1].v)
                if (!std::isfinite(double(v)))
                    throw NumericError("network: non-finite activation after layer " +
                                       std::to_string(i));
        }
        return acts_.back();
    }

    const Tensor<S>& output() const { return acts_.back(); }

    /// Per-sample sigmoid outputs (requires a single output unit).
    std::vector<S> outputs() const {
        const Tensor<S>& out = acts_.back();
        std::vector<S> q(size_t(out.n));
        for (int s = 0; s < out.n; ++s) q[size_t(s)] = out.v[size_t(s)];
        return q;
    }

    /// Mean binary cross-entropy of the last forward's outputs, with the
    /// probability clamped into [eps, 1-eps] (eps = 1e-7).
    double bce_loss(const std::vector<S>& targets) const {
        const Tensor<S>& out = acts_.back();
        double loss = 0.0;
        for (int s = 0; s < out.n; ++s) {
            const double q = std::clamp(double(out.v[size_t(s)]), kBceEps, 1.0 - kBceEps);
            const double z = double(targets[size_t(s)]);
            loss -= z * std::log(q) + (1.0 - z) * std::log(1.0 - q);
        }
        return loss / out.n;
    }

    /// BCE backward through the whole stack. The final sigmoid is fused with
    /// the loss: d loss / d pre-activation = (q - z) / n.
    double backward_bce(const std::vector<S>& targets) {
        if (layers_.empty() || layers_.back()->kind() != LayerKind::Sigmoid)
            throw NumericError("network: BCE backward requires a final sigmoid layer");
        const Tensor<S>& out = acts_.back();
        if (int(targets.size()) != out.n)
            throw DimensionError("network: target count does not match batch");
        const double loss = bce_loss(targets);
        Tensor<S>& dpre = gacts_[layers_.size() - 1];
        dpre.resize(out.n, out.c, out.h, out.w);
        for (int s = 0; s < out.n; ++s)
            dpre.v[size_t(s)] =
                S((double(out.v[size_t(s)]) - double(targets[size_t(s)])) / out.n);
        for (size_t i = layers_.size() - 1; i-- > 0;)
            layers_[i]->backward(gacts_[i + 1], gacts_[i]);
        return loss;
    }

    /// Backward from an externally supplied output gradient (trunk mode).
    const Tensor<S>& backward_from(const Tensor<S>& grad_output) {
        gacts_[layers_.size()] = grad_output;
        for (size_t i = layers_.size(); i-- > 0;)
            layers_[i]->backward(gacts_[i + 1], gacts_[i]);
        return gacts_[0];
    }

    /// Gradient w.r.t. the stack input after any backward pass.
    const Tensor<S>& input_grad() const { return gacts_[0]; }

    std::vector<ParamRef<S>> params() { return collect(&Layer<S>::params); }
    std::vector<ParamRef<S>> grads() { return collect(&Layer<S>::grads); }
    std::vector<ParamRef<S>> state() { return collect(&Layer<S>::state); }

    size_t param_count() {
        size_t n = 0;
        for (const auto& p : params()) n += p.size;
        return n;
    }

private:
    std::vector<ParamRef<S>> collect(std::vector<ParamRef<S>> (Layer<S>::*fn)()) {
        std::vector<ParamRef<S>> all;
        for (auto& l : layers_)
            for (auto& p : ((*l).*fn)()) all.push_back(p);
        return all;
    }

    std::vector<std::unique_ptr<Layer<S>>> layers_;
    std::vector<Tensor<S>> acts_, gacts_;
};

// ---------------------------------------------------------------------------

/// Input bundle: `primary` feeds single-stack networks and tower A;
/// `secondary` feeds tower B in the two-tower aggregation.
template <typename S>
struct BatchInput {
    Tensor<S> primary;
    Tensor<S> secondary;
};

template <typename S>
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual uint32_t kind_tag() const = 0;  // 1 = single stack, 2 = two towers
    virtual std::vector<S> forward(const BatchInput<S>& batch, bool train,
                                   uint64_t dropout_seed) = 0;
    virtual double backward_bce(const std::vector<S>& targets) = 0;
    virtual std::vector<ParamRef<S>> params() = 0;
    virtual std::vector<ParamRef<S>> grads() = 0;
    virtual std::vector<ParamRef<S>> state() = 0;
    virtual std::vector<Network<S>*> stacks() = 0;

    /// Warm start: copies every parameter and running statistic from a
    /// structurally identical donor. Throws CheckpointError on mismatch.
    void copy_parameters_from(Classifier<S>& donor) {
        copy_refs(donor.params(), params(), "parameters");
        copy_refs(donor.state(), state(), "running stats");
    }

private:
    static void copy_refs(std::vector<ParamRef<S>> from, std::vector<ParamRef<S>> to,
                          const char* what) {
        if (from.size() != to.size())
            throw CheckpointError(std::string("warm start: incompatible ") + what);
        for (size_t i = 0; i < from.size(); ++i) {
            if (from[i].size != to[i].size)
                throw CheckpointError(std::string("warm start: shape mismatch in ") +
                                      from[i].name);
            std::copy(from[i].data, from[i].data + from[i].size, to[i].data);
        }
    }
};

template <typename S>
class SingleClassifier : public Classifier<S> {
public:
    explicit SingleClassifier(Network<S> net) : net_(std::move(net)) {}
    Network<S>& net() { return net_; }

    uint32_t kind_tag() const override { return 1; }
    std::vector<S> forward(const BatchInput<S>& batch, bool train,
                           uint64_t dropout_seed) override {
        Rng rng(dropout_seed, rng_stream::dropout);
        net_.forward(batch.primary, train, &rng);
        return net_.outputs();
    }
    double backward_bce(const std::vector<S>& targets) override {
        return net_.backward_bce(targets);
    }
    std::vector<ParamRef<S>> params() override { return net_.params(); }
    std::vector<ParamRef<S>> grads() override { return net_.grads(); }
    std::vector<ParamRef<S>> state() override { return net_.state(); }
    std::vector<Network<S>*> stacks() override { return {&net_}; }

private:
    Network<S> net_;
};

/// Two independent trunks whose flattened/dense outputs are concatenated
/// into a single final decision layer (the combined aggregation protocol).
template <typename S>
class TwoTowerClassifier : public Classifier<S> {
public:
    TwoTowerClassifier(Network<S> tower_a, Network<S> tower_b, Network<S> head)
        : tower_a_(std::move(tower_a)),
          tower_b_(std::move(tower_b)),
          head_(std::move(head)) {}

    uint32_t kind_tag() const override { return 2; }

    std::vector<S> forward(const BatchInput<S>& batch, bool train,
                           uint64_t dropout_seed) override {
        Rng rng_a(seed_fold(dropout_seed, 0), rng_stream::dropout);
        Rng rng_b(seed_fold(dropout_seed, 1), rng_stream::dropout);
        const Tensor<S>& oa = tower_a_.forward(batch.primary, train, &rng_a);
        const Tensor<S>& ob = tower_b_.forward(batch.secondary, train, &rng_b);
        if (oa.n != ob.n) throw DimensionError("two-tower: batch size mismatch");
        concat_.resize(oa.n, int(oa.per_sample() + ob.per_sample()), 1, 1);
        for (int s = 0; s < oa.n; ++s) {
            S* dst = concat_.sample(s);
            std::copy(oa.sample(s), oa.sample(s) + oa.per_sample(), dst);
            std::copy(ob.sample(s), ob.sample(s) + ob.per_sample(),
                      dst + oa.per_sample());
        }
        split_ = int(oa.per_sample());
        head_.forward(concat_, train, nullptr);
        return head_.outputs();
    }

    double backward_bce(const std::vector<S>& targets) override {
        const double loss = head_.backward_bce(targets);
        const Tensor<S>& gconcat = head_.input_grad();
        Tensor<S> ga, gb;
        ga.resize(gconcat.n, split_, 1, 1);
        gb.resize(gconcat.n, int(gconcat.per_sample()) - split_, 1, 1);
        for (int s = 0; s < gconcat.n; ++s) {
            const S* src = gconcat.sample(s);
            std::copy(src, src + split_, ga.sample(s));
            std::copy(src + split_, src + gconcat.per_sample(), gb.sample(s));
        }
        tower_a_.backward_from(ga);
        tower_b_.backward_from(gb);
        return loss;
    }

    std::vector<ParamRef<S>> params() override {
        return concat_refs(tower_a_.params(), tower_b_.params(), head_.params());
    }
    std::vector<ParamRef<S>> grads() override {
        return concat_refs(tower_a_.grads(), tower_b_.grads(), head_.grads());
    }
    std::vector<ParamRef<S>> state() override {
        return concat_refs(tower_a_.state(), tower_b_.state(), head_.state());
    }
    std::vector<Network<S>*> stacks() override { return {&tower_a_, &tower_b_, &head_}; }

private:
    static std::vector<ParamRef<S>> concat_refs(std::vector<ParamRef<S>> a,
                                                std::vector<ParamRef<S>> b,
                                                std::vector<ParamRef<S>> c) {
        a.insert(a.end(), b.begin(), b.end());
        a.insert(a.end(), c.begin(), c.end());
        return a;
    }

    Network<S> tower_a_, tower_b_, head_;
    Tensor<S> concat_;
    int split_ = 0;
};

// ---------------------------------------------------------------------------

/// Architecture knobs. Full scale follows the published stack (12x12 and 9x9
/// filters, 32 channels, dense 64 on 64x64 inputs); the desk preset shrinks
/// kernels and channels so the same shape fits a 16x16 spectral grid.
struct NetArch {
    int input_rows = 16;
    int input_cols = 16;
    int conv_channels = 8;
    int dense_hidden = 32;
    int kernel1 = 3;
    int kernel2 = 3;
    double dropout_rate = 0.3;
};

inline NetArch desk_arch() { return NetArch{}; }

inline NetArch full_arch() {
    NetArch a;
    a.input_rows = 64;
    a.input_cols = 64;
    a.conv_channels = 32;
    a.dense_hidden = 64;
    a.kernel1 = 12;
    a.kernel2 = 9;
    return a;
}

/// conv-BN-ReLU x2, maxpool, dropout, conv-BN-ReLU x2, dropout, flatten,
/// dense-BN-ReLU, dense(1), sigmoid. Glorot-uniform weights, zero biases.
template <typename S>
Network<S> build_stack(int input_channels, const NetArch& a, bool with_head) {
    if (a.input_rows < 1 || a.input_cols < 1)
        throw ConfigError("network: empty input");
    int h = a.input_rows, w = a.input_cols;
    auto shrink = [&](int k) {
        h = h - k + 1;
        w = w - k + 1;
        if (h < 1 || w < 1)
            throw ConfigError("network: input smaller than the receptive-field minimum");
    };
    Network<S> net;
    net.add(std::make_unique<ConvLayer<S>>(input_channels, a.conv_channels, a.kernel1, a.kernel1));
    shrink(a.kernel1);
    net.add(std::make_unique<BatchNormLayer<S>>(a.conv_channels));
    net.add(std::make_unique<ReluLayer<S>>());
    net.add(std::make_unique<ConvLayer<S>>(a.conv_channels, a.conv_channels, a.kernel1, a.kernel1));
    shrink(a.kernel1);
    net.add(std::make_unique<BatchNormLayer<S>>(a.conv_channels));
    net.add(std::make_unique<ReluLayer<S>>());
    net.add(std::make_unique<MaxPoolLayer<S>>());
    h /= 2;
    w /= 2;
    if (h < 1 || w < 1)
        throw ConfigError("network: input smaller than the receptive-field minimum");
    net.add(std::make_unique<SpatialDropoutLayer<S>>(a.dropout_rate));
    net.add(std::make_unique<ConvLayer<S>>(a.conv_channels, a.conv_channels, a.kernel2, a.kernel2));
    shrink(a.kernel2);
    net.add(std::make_unique<BatchNormLayer<S>>(a.conv_channels));
    net.add(std::make_unique<ReluLayer<S>>());
    net.add(std::make_unique<ConvLayer<S>>(a.conv_channels, a.conv_channels, a.kernel2, a.kernel2));
    shrink(a.kernel2);
    net.add(std::make_unique<BatchNormLayer<S>>(a.conv_channels));
    net.add(std::make_unique<ReluLayer<S>>());
    net.add(std::make_unique<SpatialDropoutLayer<S>>(a.dropout_rate));
    net.add(std::make_unique<FlattenLayer<S>>());
    net.add(std::make_unique<DenseLayer<S>>(a.conv_channels * h * w, a.dense_hidden));
    net.add(std::make_unique<BatchNormLayer<S>>(a.dense_hidden));
    net.add(std::make_unique<ReluLayer<S>>());
    if (with_head) {
        net.add(std::make_unique<DenseLayer<S>>(a.dense_hidden, 1));
        net.add(std::make_unique<SigmoidLayer<S>>());
    }
    return net;
}

template <typename S>
std::unique_ptr<Classifier<S>> build_default_network(int input_channels, const NetArch& arch,
                                                     uint64_t init_seed) {
    if (input_channels != 2 && input_channels != 4)
        throw ConfigError("network: input_channels must be 2 or 4");
    Network<S> net = build_stack<S>(input_channels, arch, true);
    Rng rng(init_seed, rng_stream::init);
    net.init(rng);
    return std::make_unique<SingleClassifier<S>>(std::move(net));
}

template <typename S>
std::unique_ptr<Classifier<S>> build_two_tower(const NetArch& arch, uint64_t init_seed) {
    Network<S> a = build_stack<S>(2, arch, false);
    Network<S> b = build_stack<S>(2, arch, false);
    Network<S> head;
    head.add(std::make_unique<DenseLayer<S>>(arch.dense_hidden * 2, 1));
    head.add(std::make_unique<SigmoidLayer<S>>());
    Rng rng(init_seed, rng_stream::init);
    a.init(rng);
    b.init(rng);
    head.init(rng);
    return std::make_unique<TwoTowerClassifier<S>>(std::move(a), std::move(b), std::move(head));
}

}  // namespace heatcast::nn
