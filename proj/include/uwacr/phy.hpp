// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "uwacr/chanmodel.hpp"
#include "uwacr/dsp.hpp"
#include "uwacr/ofdm.hpp"

namespace uwacr {

/// Circulant channel operator H (first column = zero-padded taps).
/// F H F^H = diag(D) with D the unnormalized DFT of the taps.
class CirculantOperator {
public:
    CirculantOperator(const DiscreteChannel& channel, std::size_t n) : n_(n) {
        channel.validate(n);
        column_.assign(n, cplx{0.0, 0.0});
        for (std::size_t i = 0; i < channel.h.size(); ++i) column_[i] = channel.h[i];
        eigen_ = dsp::frequency_response(channel.h, n);
    }

    std::size_t size() const { return n_; }
    const CVec& first_column() const { return column_; }
    const CVec& eigenvalues() const { return eigen_; }

    cplx operator()(std::size_t row, std::size_t col) const { return column_[(row + n_ - col) % n_]; }

    CVec apply(const CVec& x) const {
        if (x.size() != n_) throw ShapeError("circulant apply: vector length mismatch");
        CVec y(n_, cplx{0.0, 0.0});
        for (std::size_t l = 0; l < n_; ++l) {
            if (column_[l] == cplx{0.0, 0.0}) continue;
            for (std::size_t i = 0; i < n_; ++i) y[(i + l) % n_] += column_[l] * x[i];
        }
        return y;
    }

    /// Row-major dense matrix, for tests and diagnostics.
    std::vector<CVec> dense() const {
        std::vector<CVec> m(n_, CVec(n_));
        for (std::size_t r = 0; r < n_; ++r)
            for (std::size_t c = 0; c < n_; ++c) m[r][c] = (*this)(r, c);
        return m;
    }

private:
    std::size_t n_;
    CVec column_;
    CVec eigen_;
};

inline CirculantOperator build_circulant(const DiscreteChannel& channel, std::size_t n_fft) {
    return CirculantOperator(channel, n_fft);
}

/// Frequency-domain data of one OFDM symbol, nonzero only on its allocation.
struct DataSymbol {
    CVec d;
    std::vector<std::size_t> allocation;
    double power = 1.0;  // E|d[k]|^2 on allocated bins
};

/// Circular Gaussian data of the given power on the allocated bins.
inline DataSymbol make_data_symbol(std::size_t n_fft, const std::vector<std::size_t>& allocation, double power,
                                   Rng& rng) {
    DataSymbol s{CVec(n_fft, cplx{0.0, 0.0}), allocation, power};
    for (std::size_t k : allocation) {
        if (k >= n_fft) throw ShapeError("allocation bin out of range");
        s.d[k] = complex_gaussian(rng, power);
    }
    return s;
}

inline CVec add_cyclic_prefix(const CVec& body, std::size_t cp) {
    CVec out;
    out.reserve(body.size() + cp);
    out.insert(out.end(), body.end() - static_cast<std::ptrdiff_t>(cp), body.end());
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

/// Transmitted samples of one node on its own time axis: symbol j occupies
/// [j * (N + cp), (j + 1) * (N + cp)), cyclic prefix first.
struct SampleStream {
    long start = 0;
    CVec samples;

    long end() const { return start + static_cast<long>(samples.size()); }
    bool covers(long first, long last_inclusive) const { return first >= start && last_inclusive < end(); }
    cplx at(long t) const { return samples[static_cast<std::size_t>(t - start)]; }
};

inline SampleStream make_ofdm_stream(const std::vector<CVec>& symbols, long first_symbol_index,
                                     const OfdmConfig& cfg) {
    SampleStream s;
    s.start = first_symbol_index * static_cast<long>(cfg.symbol_samples());
    for (const auto& d : symbols) {
        if (d.size() != cfg.n_fft) throw ShapeError("OFDM symbol length differs from n_fft");
        const CVec t = add_cyclic_prefix(dsp::idft(d), cfg.cp_samples());
        s.samples.insert(s.samples.end(), t.begin(), t.end());
    }
    return s;
}

/// y[i] = sum_l h[l] x(first + i - l), i = 0..length-1, x on the stream's own
/// time axis (linear convolution cut to a window).
inline CVec convolve_window(const DiscreteChannel& channel, const SampleStream& stream, long first,
                            std::size_t length) {
    const long taps = static_cast<long>(channel.h.size());
    const long lo = first - (taps - 1);
    const long hi = first + static_cast<long>(length) - 1;
    if (!stream.covers(lo, hi))
        throw WindowUnderrunError("stream covers [" + std::to_string(stream.start) + ", " +
                                  std::to_string(stream.end()) + ") but the window needs [" + std::to_string(lo) +
                                  ", " + std::to_string(hi + 1) + ")");
    CVec y(length, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < length; ++i) {
        cplx acc{0.0, 0.0};
        const long t = first + static_cast<long>(i);
        for (long l = 0; l < taps; ++l) acc += channel.h[static_cast<std::size_t>(l)] * stream.at(t - l);
        y[i] = acc;
    }
    return y;
}

/// Symbols [first, last] of a stream needed to convolve a window whose
/// first output depends on local sample `first_local`.
inline std::pair<long, long> symbols_for_window(long first_local, std::size_t length, std::size_t channel_length,
                                                const OfdmConfig& cfg) {
    const long period = static_cast<long>(cfg.symbol_samples());
    const long lo = first_local - static_cast<long>(channel_length) + 1;
    const long hi = first_local + static_cast<long>(length) - 1;
    auto floor_div = [](long a, long b) { return a >= 0 ? a / b : -((-a + b - 1) / b); };
    return {floor_div(lo, period), floor_div(hi, period)};
}

/// Interferer symbols [first, last] that reach the victim's FFT window when the
/// interferer's symbol boundaries sit at victim time gap + j * (N + cp).
inline std::pair<long, long> overlapping_symbols(long gap, std::size_t channel_length, const OfdmConfig& cfg) {
    return symbols_for_window(static_cast<long>(cfg.cp_samples()) - gap, cfg.n_fft, channel_length, cfg);
}

/// Interferer contribution in the victim's FFT window:
/// y[n] = sum_l h[l] x(cp + n - l - gap), n = 0..N-1, with x on the
/// interferer's own time axis. This is the windowed Toeplitz product; for
/// gap = 0 and a channel within the CP it equals circular convolution.
inline CVec build_windowed_toeplitz(const DiscreteChannel& channel, long gap, const SampleStream& stream,
                                    const OfdmConfig& cfg) {
    return convolve_window(channel, stream, static_cast<long>(cfg.cp_samples()) - gap, cfg.n_fft);
}

/// An asynchronous node whose signal leaks into the victim's window.
struct InterfererSpec {
    int node = 0;
    DiscreteChannel channel;
    long gap = 0;  // samples, interferer symbol start relative to the victim's
    std::vector<std::size_t> allocation;
    double power = 1.0;
    long first_symbol = 0;
    std::vector<CVec> symbols;  // frequency-domain data, symbols first_symbol..
};

inline bool reaches_window(long gap, const OfdmConfig& cfg) {
    return std::labs(gap) < static_cast<long>(cfg.symbol_samples());
}

/// Fills spec.symbols with fresh Gaussian data covering the victim window.
inline void draw_interferer_symbols(InterfererSpec& spec, const OfdmConfig& cfg, Rng& rng) {
    const auto [first, last] = overlapping_symbols(spec.gap, spec.channel.h.size(), cfg);
    spec.first_symbol = first;
    spec.symbols.clear();
    for (long j = first; j <= last; ++j)
        spec.symbols.push_back(make_data_symbol(cfg.n_fft, spec.allocation, spec.power, rng).d);
}

/// Time-domain received symbol (after CP removal), components kept apart.
struct ReceivedSymbol {
    CVec desired;
    CVec interference;
    CVec noise;

    CVec y() const {
        CVec out(desired.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = desired[i] + interference[i] + noise[i];
        return out;
    }
};

inline CVec interferer_contribution(const InterfererSpec& spec, const OfdmConfig& cfg) {
    if (!reaches_window(spec.gap, cfg)) return CVec(cfg.n_fft, cplx{0.0, 0.0});
    const SampleStream stream = make_ofdm_stream(spec.symbols, spec.first_symbol, cfg);
    return build_windowed_toeplitz(spec.channel, spec.gap, stream, cfg);
}

/// desired = H_s F^H d, interference = sum of windowed interferer
/// contributions, noise white with per-sample variance noise_variance.
inline ReceivedSymbol synthesize_received(const DiscreteChannel& channel, const DataSymbol& data,
                                          const std::vector<InterfererSpec>& interferers, double noise_variance,
                                          std::uint64_t seed, const OfdmConfig& cfg) {
    if (data.d.size() != cfg.n_fft) throw ShapeError("data symbol length differs from n_fft");
    if (noise_variance < 0.0) throw Error("noise variance must be nonnegative");
    const auto h = build_circulant(channel, cfg.n_fft);
    ReceivedSymbol rx;
    rx.desired = h.apply(dsp::idft(data.d));
    rx.interference.assign(cfg.n_fft, cplx{0.0, 0.0});
    for (const auto& spec : interferers) {
        if (std::abs(spec.channel.sampling_period - channel.sampling_period) >
            1e-12 * std::abs(channel.sampling_period))
            throw Error("interferer channel sampled at a different rate");
        const CVec c = interferer_contribution(spec, cfg);
        for (std::size_t i = 0; i < c.size(); ++i) rx.interference[i] += c[i];
    }
    rx.noise.assign(cfg.n_fft, cplx{0.0, 0.0});
    if (noise_variance > 0.0) {
        Rng rng(seed);
        for (auto& z : rx.noise) z = complex_gaussian(rng, noise_variance);
    }
    return rx;
}

}  // namespace uwacr
