// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>

#include "uwacr/core.hpp"

namespace uwacr {

/// OFDM numerology. Defaults follow the reference deployment: 256-point FFT,
/// 128 ms symbols, 30 ms cyclic prefix, 5 RBs of 10 subcarriers at 1.2 kHz.
///
/// Everything is simulated in complex baseband: the baseband sample period is
/// symbol_duration / n_fft (0.5 ms by default) and the subcarrier spacing is
/// 1 / symbol_duration. passband_sample_period is carried for the frequency
/// axis of exported spectra only.
struct OfdmConfig {
    std::size_t n_fft = 256;
    double symbol_duration = 0.128;
    double cp_duration = 0.030;
    std::size_t n_rb = 5;
    std::size_t subcarriers_per_rb = 10;
    double carrier_hz = 1200.0;
    double passband_sample_period = 45.455e-6;
    std::size_t symbols_per_packet = 4;

    double sample_period() const { return symbol_duration / static_cast<double>(n_fft); }
    double subcarrier_spacing() const { return 1.0 / symbol_duration; }
    std::size_t cp_samples() const {
        return static_cast<std::size_t>(std::llround(cp_duration / sample_period()));
    }
    std::size_t symbol_samples() const { return n_fft + cp_samples(); }
    std::size_t occupied_bins() const { return n_rb * subcarriers_per_rb; }

    // RBs are contiguous blocks centered in the FFT grid; the rest are guards.
    std::size_t first_occupied_bin() const { return (n_fft - occupied_bins()) / 2; }
    std::size_t center_bin() const { return n_fft / 2; }

    std::vector<std::size_t> rb_bins(std::size_t rb) const {
        std::vector<std::size_t> bins(subcarriers_per_rb);
        const std::size_t first = first_occupied_bin() + rb * subcarriers_per_rb;
        for (std::size_t i = 0; i < subcarriers_per_rb; ++i) bins[i] = first + i;
        return bins;
    }

    std::vector<std::size_t> all_rb_bins() const {
        std::vector<std::size_t> bins(occupied_bins());
        for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = first_occupied_bin() + i;
        return bins;
    }

    /// RB index owning bin k, or n_rb for guard bins.
    std::size_t rb_of_bin(std::size_t k) const {
        const std::size_t first = first_occupied_bin();
        if (k < first || k >= first + occupied_bins()) return n_rb;
        return (k - first) / subcarriers_per_rb;
    }

    void validate() const {
        if (n_fft < 2) throw ConfigError("ofdm.n_fft", "must be at least 2");
        if (!(symbol_duration > 0.0)) throw ConfigError("ofdm.symbol_duration", "must be positive");
        if (!(cp_duration > 0.0)) throw ConfigError("ofdm.cp_duration", "must be positive");
        if (!(passband_sample_period > 0.0))
            throw ConfigError("ofdm.passband_sample_period", "must be positive");
        if (!(carrier_hz > 0.0)) throw ConfigError("ofdm.carrier_hz", "must be positive");
        if (n_rb == 0) throw ConfigError("ofdm.n_rb", "must be at least 1");
        if (subcarriers_per_rb == 0) throw ConfigError("ofdm.subcarriers_per_rb", "must be at least 1");
        if (occupied_bins() > n_fft)
            throw ConfigError("ofdm.n_rb", "n_rb * subcarriers_per_rb exceeds n_fft");
        if (cp_samples() == 0) throw ConfigError("ofdm.cp_duration", "shorter than one baseband sample");
        if (symbols_per_packet == 0) throw ConfigError("ofdm.symbols_per_packet", "must be at least 1");
    }
};

}  // namespace uwacr
