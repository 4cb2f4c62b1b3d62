// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "uwacr/oracle.hpp"

namespace uwacr {

enum class WindowKind { Rectangular, Hann };

inline std::string to_string(WindowKind w) { return w == WindowKind::Hann ? "hann" : "rectangular"; }

struct SensingConfig {
    std::size_t n_sens = 128;
    WindowKind window = WindowKind::Rectangular;
    std::size_t symbols = 1;  // sensing duration in OFDM symbols (DFT length n_fft * symbols)

    std::size_t dft_length(const OfdmConfig& ofdm) const { return ofdm.n_fft * symbols; }
    std::size_t first_row_bin(const OfdmConfig& ofdm) const { return dft_length(ofdm) / 2 - n_sens / 2; }

    void validate(const OfdmConfig& ofdm) const {
        if (symbols == 0) throw ConfigError("sensing.symbols", "must be at least 1");
        if (n_sens == 0 || n_sens > ofdm.n_fft) throw ConfigError("sensing.n_sens", "must lie in [1, n_fft]");
        const std::size_t lo = ofdm.first_occupied_bin() * symbols;
        const std::size_t hi = (ofdm.first_occupied_bin() + ofdm.occupied_bins()) * symbols;
        const std::size_t row0 = first_row_bin(ofdm);
        if (lo < row0 || hi > row0 + n_sens) throw ConfigError("sensing.n_sens", "does not cover the occupied band");
    }
};

/// Truncated spectrum, one row per kept bin, columns (re, im).
struct SpectrumMatrix {
    std::size_t rows = 0;
    std::size_t first_bin = 0;  // DFT bin of row 0
    RVec values;                // row-major rows x 2

    double re(std::size_t r) const { return values[2 * r]; }
    double im(std::size_t r) const { return values[2 * r + 1]; }
    double energy() const {
        double e = 0.0;
        for (double v : values) e += v * v;
        return e;
    }
};

/// Agent state: per-RB CQI (linear SNR) and the sensed spectrum.
struct Observation {
    RVec cqi;
    SpectrumMatrix spectrum;
    double noise_variance = 1.0;  // receiver noise level the CQI is referenced to
};

/// DFT of the windowed sensing samples, truncated symmetrically around the
/// carrier's baseband image and split into real and imaginary columns.
inline SpectrumMatrix observe_spectrum(const CVec& samples, const OfdmConfig& ofdm, const SensingConfig& cfg) {
    const std::size_t m = cfg.dft_length(ofdm);
    if (samples.size() < m)
        throw Error("observe_spectrum: need " + std::to_string(m) + " samples, got " + std::to_string(samples.size()));
    CVec seg(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(m));
    if (cfg.window == WindowKind::Hann)
        for (std::size_t i = 0; i < m; ++i)
            seg[i] *= 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(m));
    const CVec spec = dsp::dft(seg);
    SpectrumMatrix out;
    out.rows = cfg.n_sens;
    out.first_bin = cfg.first_row_bin(ofdm);
    out.values.resize(2 * out.rows);
    for (std::size_t r = 0; r < out.rows; ++r) {
        out.values[2 * r] = spec[out.first_bin + r].real();
        out.values[2 * r + 1] = spec[out.first_bin + r].imag();
    }
    return out;
}

/// Spectrum rows belonging to each RB.
inline std::vector<std::vector<std::size_t>> rb_rows(const OfdmConfig& ofdm, const SensingConfig& cfg) {
    std::vector<std::vector<std::size_t>> rows(ofdm.n_rb);
    const std::size_t row0 = cfg.first_row_bin(ofdm);
    for (std::size_t rb = 0; rb < ofdm.n_rb; ++rb)
        for (std::size_t k : ofdm.rb_bins(rb))
            for (std::size_t f = 0; f < cfg.symbols; ++f) rows[rb].push_back(k * cfg.symbols + f - row0);
    return rows;
}

/// Per-RB mean of re^2 + im^2 over the RB's rows.
inline RVec energy_detect(const SpectrumMatrix& spectrum, const OfdmConfig& ofdm, const SensingConfig& cfg) {
    const auto rows = rb_rows(ofdm, cfg);
    RVec e(ofdm.n_rb, 0.0);
    for (std::size_t rb = 0; rb < ofdm.n_rb; ++rb) {
        for (std::size_t r : rows[rb]) {
            if (r >= spectrum.rows) throw ShapeError("spectrum does not cover RB " + std::to_string(rb));
            e[rb] += spectrum.re(r) * spectrum.re(r) + spectrum.im(r) * spectrum.im(r);
        }
        e[rb] /= static_cast<double>(rows[rb].size());
    }
    return e;
}

/// Pilot-aided least-squares SNR per bin, averaged per RB:
/// mean_k P |Y[k] / p[k]|^2 / sigma^2, with Y averaged over the beacon symbols.
/// Noiseless and interference-free this is exactly compute_cqi.
inline RVec beacon_cqi(const std::vector<CVec>& beacon_symbols, const BeaconSpec& beacon, double noise_variance,
                       double signal_power, const OfdmConfig& ofdm) {
    if (beacon_symbols.empty()) throw Error("beacon_cqi: no beacon symbol");
    if (!beacon.covers_all(ofdm)) throw Error("beacon_cqi: pilots missing for some RB");
    if (!(noise_variance > 0.0)) throw Error("beacon_cqi: noise variance must be positive");
    std::vector<CVec> spectra;
    for (const auto& y : beacon_symbols) {
        if (y.size() != ofdm.n_fft) throw ShapeError("beacon symbol length differs from n_fft");
        spectra.push_back(dsp::dft(y));
    }
    RVec sum(ofdm.n_rb, 0.0);
    std::vector<std::size_t> count(ofdm.n_rb, 0);
    for (std::size_t k : beacon.bins) {
        const std::size_t rb = ofdm.rb_of_bin(k);
        if (rb >= ofdm.n_rb) continue;
        if (std::abs(beacon.pilots[k]) == 0.0) throw Error("beacon_cqi: missing pilot on bin " + std::to_string(k));
        cplx avg{0.0, 0.0};
        for (const auto& s : spectra) avg += s[k];
        avg /= static_cast<double>(spectra.size());
        sum[rb] += signal_power * std::norm(avg / beacon.pilots[k]) / noise_variance;
        ++count[rb];
    }
    for (std::size_t rb = 0; rb < ofdm.n_rb; ++rb) sum[rb] /= static_cast<double>(count[rb]);
    return sum;
}

/// Debug export: bin, frequency (Hz), re, im.
inline void write_spectrum_csv(std::ostream& os, const SpectrumMatrix& spectrum, const OfdmConfig& ofdm,
                               const SensingConfig& cfg) {
    os << "bin,freq_hz,re,im\n";
    const double df = ofdm.subcarrier_spacing() / static_cast<double>(cfg.symbols);
    const double center = static_cast<double>(cfg.dft_length(ofdm) / 2);
    for (std::size_t r = 0; r < spectrum.rows; ++r) {
        const std::size_t bin = spectrum.first_bin + r;
        os << bin << ',' << ofdm.carrier_hz + (static_cast<double>(bin) - center) * df << ',' << spectrum.re(r) << ','
           << spectrum.im(r) << '\n';
    }
}

}  // namespace uwacr
