// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "uwacr/core.hpp"
#include "uwacr/sensing.hpp"

namespace uwacr {

enum class ConvActivation { Tanh, LogCosh };

inline std::string to_string(ConvActivation a) { return a == ConvActivation::Tanh ? "tanh" : "logcosh"; }

/// Layer sizes of the two-part network: a convolutional sensing extractor
/// over the n_sens x 2 spectrum, then a fully connected main module fed by
/// the extracted features and the per-RB CQI features.
struct NetworkShape {
    std::size_t n_sens = 128;
    std::size_t n_rb = 5;
    std::size_t conv_channels = 8;
    std::size_t conv_width = 8;
    std::size_t conv_stride = 4;
    std::size_t pool = 2;
    std::size_t sensing_features = 32;
    std::size_t hidden1 = 64;
    std::size_t hidden2 = 64;
    ConvActivation conv_activation = ConvActivation::LogCosh;

    std::size_t conv_length() const { return (n_sens - conv_width) / conv_stride + 1; }
    std::size_t pooled_length() const { return conv_length() / pool; }
    std::size_t flat_features() const { return conv_channels * pooled_length(); }
    std::size_t main_inputs() const { return sensing_features + n_rb; }

    void validate() const {
        if (n_sens == 0 || n_rb == 0) throw ConfigError("agent.n_sens", "network input sizes must be positive");
        if (conv_channels == 0) throw ConfigError("agent.conv_channels", "must be positive");
        if (conv_width == 0 || conv_width > n_sens) throw ConfigError("agent.conv_width", "must lie in [1, n_sens]");
        if (conv_stride == 0) throw ConfigError("agent.conv_stride", "must be positive");
        if (pool == 0 || pool > conv_length()) throw ConfigError("agent.pool", "must lie in [1, conv output length]");
        if (sensing_features == 0) throw ConfigError("agent.sensing_features", "must be positive");
        if (hidden1 == 0) throw ConfigError("agent.hidden1", "must be positive");
        if (hidden2 == 0) throw ConfigError("agent.hidden2", "must be positive");
    }

    bool operator==(const NetworkShape&) const = default;

    /// Smallest shape used for gradient checks.
    static NetworkShape toy() {
        NetworkShape s;
        s.n_sens = 2;
        s.n_rb = 2;
        s.conv_channels = 2;
        s.conv_width = 1;
        s.conv_stride = 1;
        s.pool = 1;
        s.sensing_features = 2;
        s.hidden1 = 2;
        s.hidden2 = 2;
        return s;
    }
};

/// Network input: spectrum rows x 2 (row-major) and per-RB CQI features.
struct NetInput {
    RVec spectrum;
    RVec cqi;
};

/// Spectrum rows in polar form: log(1 + |X|^2 / noise variance) and the
/// phase over pi. CQI mapped to its Shannon rate log2(1 + cqi).
inline NetInput encode_observation(const Observation& obs) {
    const double noise_variance = obs.noise_variance;
    if (!(noise_variance > 0.0)) throw Error("encode_observation: noise variance must be positive");
    NetInput in;
    const auto& v = obs.spectrum.values;
    in.spectrum.reserve(v.size());
    for (std::size_t r = 0; 2 * r + 1 < v.size(); ++r) {
        const double re = v[2 * r];
        const double im = v[2 * r + 1];
        in.spectrum.push_back(std::log1p((re * re + im * im) / noise_variance));
        in.spectrum.push_back(std::atan2(im, re) / kPi);
    }
    in.cqi.reserve(obs.cqi.size());
    for (double c : obs.cqi) in.cqi.push_back(std::log2(1.0 + std::max(c, 0.0)));
    return in;
}

/// Activations kept for the backward pass.
struct NetCache {
    NetInput input;
    RVec conv_pre;  // channels x conv_length
    RVec pooled;    // channels x pooled_length
    RVec features;  // tanh output of the sensing dense layer
    RVec main_in;
    RVec h1;
    RVec h2;
};

/// Two-part network with a linear output layer of configurable width.
/// Parameters live in one flat vector owned by the caller.
class TwoPartNet {
public:
    TwoPartNet() = default;
    TwoPartNet(NetworkShape shape, std::size_t outputs) : shape_(shape), outputs_(outputs) {
        shape_.validate();
        if (outputs_ == 0) throw ShapeError("network needs at least one output");
        std::size_t o = 0;
        auto take = [&o](std::size_t n) {
            const std::size_t at = o;
            o += n;
            return at;
        };
        conv_w_ = take(shape_.conv_channels * 2 * shape_.conv_width);
        conv_b_ = take(shape_.conv_channels);
        sens_w_ = take(shape_.sensing_features * shape_.flat_features());
        sens_b_ = take(shape_.sensing_features);
        w1_ = take(shape_.hidden1 * shape_.main_inputs());
        b1_ = take(shape_.hidden1);
        w2_ = take(shape_.hidden2 * shape_.hidden1);
        b2_ = take(shape_.hidden2);
        wo_ = take(outputs_ * shape_.hidden2);
        bo_ = take(outputs_);
        size_ = o;
    }

    const NetworkShape& shape() const { return shape_; }
    std::size_t outputs() const { return outputs_; }
    std::size_t parameter_count() const { return size_; }
    std::size_t output_weight_offset() const { return wo_; }
    std::size_t output_bias_offset() const { return bo_; }

    /// Uniform fan-in scaled weights, zero biases; the output layer is
    /// scaled by output_gain.
    RVec initialize(Rng& rng, double output_gain = 1.0) const {
        RVec p(size_, 0.0);
        auto fill = [&](std::size_t at, std::size_t rows, std::size_t cols, double gain) {
            const double a = gain * std::sqrt(3.0 / static_cast<double>(cols));
            for (std::size_t i = 0; i < rows * cols; ++i) p[at + i] = a * (2.0 * uniform01(rng) - 1.0);
        };
        fill(conv_w_, shape_.conv_channels, 2 * shape_.conv_width, 1.0);
        fill(sens_w_, shape_.sensing_features, shape_.flat_features(), 1.0);
        fill(w1_, shape_.hidden1, shape_.main_inputs(), 1.0);
        fill(w2_, shape_.hidden2, shape_.hidden1, 1.0);
        fill(wo_, outputs_, shape_.hidden2, output_gain);
        return p;
    }

    void check_input(const NetInput& in) const {
        if (in.spectrum.size() != 2 * shape_.n_sens) throw ShapeError("spectrum input must be n_sens x 2");
        if (in.cqi.size() != shape_.n_rb) throw ShapeError("cqi input must have n_rb entries");
    }

    RVec forward(const RVec& p, const NetInput& in, NetCache& c) const {
        check_params(p);
        check_input(in);
        const auto& s = shape_;
        const std::size_t lc = s.conv_length();
        const std::size_t lp = s.pooled_length();
        c.input = in;
        c.conv_pre.assign(s.conv_channels * lc, 0.0);
        c.pooled.assign(s.conv_channels * lp, 0.0);
        for (std::size_t ch = 0; ch < s.conv_channels; ++ch) {
            for (std::size_t pos = 0; pos < lc; ++pos) {
                double acc = p[conv_b_ + ch];
                for (std::size_t k = 0; k < s.conv_width; ++k) {
                    const std::size_t row = pos * s.conv_stride + k;
                    acc += p[conv_index(ch, 0, k)] * in.spectrum[2 * row];
                    acc += p[conv_index(ch, 1, k)] * in.spectrum[2 * row + 1];
                }
                c.conv_pre[ch * lc + pos] = acc;
            }
            for (std::size_t q = 0; q < lp; ++q) {
                double acc = 0.0;
                for (std::size_t u = 0; u < s.pool; ++u) acc += activate(c.conv_pre[ch * lc + q * s.pool + u]);
                c.pooled[ch * lp + q] = acc / static_cast<double>(s.pool);
            }
        }
        c.features = dense(p, sens_w_, sens_b_, c.pooled, s.sensing_features);
        for (double& v : c.features) v = std::tanh(v);
        c.main_in = c.features;
        c.main_in.insert(c.main_in.end(), in.cqi.begin(), in.cqi.end());
        c.h1 = dense(p, w1_, b1_, c.main_in, s.hidden1);
        for (double& v : c.h1) v = std::tanh(v);
        c.h2 = dense(p, w2_, b2_, c.h1, s.hidden2);
        for (double& v : c.h2) v = std::tanh(v);
        return dense(p, wo_, bo_, c.h2, outputs_);
    }

    RVec forward(const RVec& p, const NetInput& in) const {
        NetCache c;
        return forward(p, in, c);
    }

    /// Accumulates d(loss)/d(params) into grad given d(loss)/d(outputs).
    void backward(const RVec& p, const NetCache& c, const RVec& d_out, RVec& grad) const {
        check_params(p);
        if (grad.size() != size_) throw ShapeError("gradient buffer has the wrong size");
        if (d_out.size() != outputs_) throw ShapeError("output gradient has the wrong size");
        const auto& s = shape_;
        RVec d_h2 = dense_backward(p, wo_, bo_, c.h2, d_out, grad);
        for (std::size_t i = 0; i < d_h2.size(); ++i) d_h2[i] *= 1.0 - c.h2[i] * c.h2[i];
        RVec d_h1 = dense_backward(p, w2_, b2_, c.h1, d_h2, grad);
        for (std::size_t i = 0; i < d_h1.size(); ++i) d_h1[i] *= 1.0 - c.h1[i] * c.h1[i];
        RVec d_main = dense_backward(p, w1_, b1_, c.main_in, d_h1, grad);
        RVec d_feat(d_main.begin(), d_main.begin() + static_cast<long>(s.sensing_features));
        for (std::size_t i = 0; i < d_feat.size(); ++i) d_feat[i] *= 1.0 - c.features[i] * c.features[i];
        const RVec d_pooled = dense_backward(p, sens_w_, sens_b_, c.pooled, d_feat, grad);

        const std::size_t lc = s.conv_length();
        const std::size_t lp = s.pooled_length();
        for (std::size_t ch = 0; ch < s.conv_channels; ++ch) {
            for (std::size_t q = 0; q < lp; ++q) {
                const double dq = d_pooled[ch * lp + q] / static_cast<double>(s.pool);
                for (std::size_t u = 0; u < s.pool; ++u) {
                    const std::size_t pos = q * s.pool + u;
                    const double dz = dq * activate_derivative(c.conv_pre[ch * lc + pos]);
                    grad[conv_b_ + ch] += dz;
                    for (std::size_t k = 0; k < s.conv_width; ++k) {
                        const std::size_t row = pos * s.conv_stride + k;
                        grad[conv_index(ch, 0, k)] += dz * c.input.spectrum[2 * row];
                        grad[conv_index(ch, 1, k)] += dz * c.input.spectrum[2 * row + 1];
                    }
                }
            }
        }
    }

private:
    void check_params(const RVec& p) const {
        if (p.size() != size_) throw ShapeError("parameter vector has the wrong size");
    }

    std::size_t conv_index(std::size_t ch, std::size_t in_ch, std::size_t k) const {
        return conv_w_ + (ch * 2 + in_ch) * shape_.conv_width + k;
    }

    double activate(double x) const {
        if (shape_.conv_activation == ConvActivation::Tanh) return std::tanh(x);
        const double a = std::abs(x);
        return a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0);
    }

    double activate_derivative(double x) const {
        const double t = std::tanh(x);
        return shape_.conv_activation == ConvActivation::Tanh ? 1.0 - t * t : t;
    }

    static RVec dense(const RVec& p, std::size_t w, std::size_t b, const RVec& x, std::size_t rows) {
        RVec y(rows);
        const std::size_t cols = x.size();
        for (std::size_t r = 0; r < rows; ++r) {
            double acc = p[b + r];
            const double* row = &p[w + r * cols];
            for (std::size_t k = 0; k < cols; ++k) acc += row[k] * x[k];
            y[r] = acc;
        }
        return y;
    }

    static RVec dense_backward(const RVec& p, std::size_t w, std::size_t b, const RVec& x, const RVec& dy,
                               RVec& grad) {
        const std::size_t cols = x.size();
        RVec dx(cols, 0.0);
        for (std::size_t r = 0; r < dy.size(); ++r) {
            const double g = dy[r];
            if (g == 0.0) continue;
            grad[b + r] += g;
            const double* row = &p[w + r * cols];
            double* grow = &grad[w + r * cols];
            for (std::size_t k = 0; k < cols; ++k) {
                grow[k] += g * x[k];
                dx[k] += g * row[k];
            }
        }
        return dx;
    }

    NetworkShape shape_;
    std::size_t outputs_ = 0;
    std::size_t size_ = 0;
    std::size_t conv_w_ = 0, conv_b_ = 0, sens_w_ = 0, sens_b_ = 0;
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, wo_ = 0, bo_ = 0;
};

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adam on a flat parameter vector; step() descends the given gradient.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t size, AdamConfig cfg) : cfg_(cfg), m_(size, 0.0), v_(size, 0.0) {}

    void step(RVec& params, const RVec& grad) {
        if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("adam: size mismatch");
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
            v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            params[i] -= cfg_.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.epsilon);
        }
    }

    std::size_t steps() const { return t_; }
    double learning_rate() const { return cfg_.learning_rate; }
    void set_learning_rate(double lr) { cfg_.learning_rate = lr; }

private:
    AdamConfig cfg_;
    RVec m_;
    RVec v_;
    std::size_t t_ = 0;
};

}  // namespace uwacr
