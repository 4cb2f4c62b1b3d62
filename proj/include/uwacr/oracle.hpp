// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact per-subcarrier SINR of an asynchronous OFDMA uplink.
//
// With data symbols drawn i.i.d. circular Gaussian, every interferer
// contribution in the victim's window is a linear map of its data, so the
// expected interference power per bin is a quadratic form that can be
// evaluated column by column (one unit tone per allocated bin and per
// overlapping symbol) without sampling.

#include <cmath>
#include <limits>
#include <vector>

#include "uwacr/phy.hpp"

namespace uwacr {

inline constexpr double kSingularFloor = 1e-9;

/// Statistical description of one interferer seen by the victim's receiver.
struct InterferenceSource {
    DiscreteChannel channel;
    long gap = 0;
    std::vector<std::size_t> allocation;
    double power = 1.0;
};

inline InterferenceSource to_source(const InterfererSpec& spec) {
    return {spec.channel, spec.gap, spec.allocation, spec.power};
}

/// E|(F J)[k]|^2 for k = 0..N-1 due to one interferer.
inline RVec interference_psd(const InterferenceSource& src, const OfdmConfig& cfg) {
    const std::size_t n = cfg.n_fft;
    RVec psd(n, 0.0);
    if (!reaches_window(src.gap, cfg) || src.allocation.empty() || src.power == 0.0) return psd;

    const long nl = static_cast<long>(n);
    const long cp = static_cast<long>(cfg.cp_samples());
    const long period = static_cast<long>(cfg.symbol_samples());
    const long taps = static_cast<long>(src.channel.h.size());
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
    CVec roots(n);
    for (std::size_t r = 0; r < n; ++r) {
        const double ang = 2.0 * kPi * static_cast<double>(r) / static_cast<double>(n);
        roots[r] = {std::cos(ang), std::sin(ang)};
    }
    auto unit_root = [&](long e) {
        long r = e % nl;
        if (r < 0) r += nl;
        return roots[static_cast<std::size_t>(r)];
    };

    const auto [first, last] = overlapping_symbols(src.gap, src.channel.h.size(), cfg);
    CVec prefix(static_cast<std::size_t>(taps) + 1);
    CVec y(n);
    for (long j = first; j <= last; ++j) {
        const long offset = src.gap + j * period;  // victim time of this symbol's CP start
        for (std::size_t m : src.allocation) {
            const long ml = static_cast<long>(m);
            prefix[0] = 0.0;
            for (long l = 0; l < taps; ++l)
                prefix[static_cast<std::size_t>(l) + 1] =
                    prefix[static_cast<std::size_t>(l)] + src.channel.h[static_cast<std::size_t>(l)] * unit_root(-ml * l);
            bool any = false;
            for (long i = 0; i < nl; ++i) {
                // taps l whose input sample cp + i - l falls inside this symbol
                const long lo = std::max(0L, i - offset - nl + 1);
                const long hi = std::min(taps - 1, cp + i - offset);
                if (lo > hi) {
                    y[static_cast<std::size_t>(i)] = 0.0;
                    continue;
                }
                any = true;
                const cplx partial = prefix[static_cast<std::size_t>(hi) + 1] - prefix[static_cast<std::size_t>(lo)];
                y[static_cast<std::size_t>(i)] = inv_sqrt_n * unit_root(ml * (i - offset)) * partial;
            }
            if (!any) continue;
            const CVec col = dsp::dft(y);
            for (std::size_t k = 0; k < n; ++k) psd[k] += src.power * std::norm(col[k]);
        }
    }
    return psd;
}

inline RVec total_interference_psd(const std::vector<InterferenceSource>& sources, const OfdmConfig& cfg) {
    RVec total(cfg.n_fft, 0.0);
    for (const auto& s : sources) {
        const RVec p = interference_psd(s, cfg);
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += p[k];
    }
    return total;
}

inline void check_bin(const CVec& eigen, std::size_t k, double floor) {
    const double mag = std::abs(eigen[k]);
    if (mag < floor) throw SingularChannelError(k, mag);
}

/// D^{-1} F y = d + F H^{-1} J + D^{-1} F z. Bins listed in `bins` must be
/// nonsingular; other singular bins are returned as 0.
inline CVec equalize(const CVec& y, const CirculantOperator& h, const std::vector<std::size_t>& bins,
                     double floor = kSingularFloor) {
    if (y.size() != h.size()) throw ShapeError("equalize: length mismatch");
    const CVec& eigen = h.eigenvalues();
    for (std::size_t k : bins) check_bin(eigen, k, floor);
    CVec out = dsp::dft(y);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::abs(eigen[k]) < floor ? cplx{0.0, 0.0} : out[k] / eigen[k];
    return out;
}

inline CVec equalize(const ReceivedSymbol& rx, const CirculantOperator& h, const std::vector<std::size_t>& bins,
                     double floor = kSingularFloor) {
    return equalize(rx.y(), h, bins, floor);
}

/// SINR_k = E|d[k]|^2 / (E|(F H^-1 J)[k]|^2 + sigma^2 |D^-1 D^-H|_kk).
/// interference_psd is E|(F J)[k]|^2 before equalization.
inline double subcarrier_sinr(std::size_t k, const CirculantOperator& h, const RVec& interference_psd,
                              double noise_variance, double signal_power, double floor = kSingularFloor) {
    check_bin(h.eigenvalues(), k, floor);
    const double gain = std::norm(h.eigenvalues()[k]);
    const double distortion = interference_psd[k] / gain + noise_variance / gain;
    if (distortion == 0.0) return std::numeric_limits<double>::infinity();
    return signal_power / distortion;
}

struct SinrReport {
    std::vector<std::size_t> allocation;
    std::vector<RVec> sinr;  // [w][i], i indexes allocation
    double rate = 0.0;       // bits/s/Hz
};

/// Mean of log2(1 + SINR) over every stored (symbol, subcarrier) entry.
inline double packet_rate(const std::vector<RVec>& sinr) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& row : sinr)
        for (double s : row) {
            acc += std::log2(1.0 + s);
            ++count;
        }
    if (count == 0) throw Error("packet_rate: no subcarriers");
    return acc / static_cast<double>(count);
}

/// Per-symbol SINR over the packet. Symbol w sees the interferers shifted by
/// w * gap_drift samples.
inline SinrReport sinr_report(const CirculantOperator& h, const std::vector<std::size_t>& allocation,
                              const std::vector<InterferenceSource>& sources, double noise_variance,
                              double signal_power, const OfdmConfig& cfg, long gap_drift = 0,
                              double floor = kSingularFloor) {
    if (allocation.empty()) throw Error("sinr_report: empty allocation");
    SinrReport rep;
    rep.allocation = allocation;
    RVec psd;
    for (std::size_t w = 0; w < cfg.symbols_per_packet; ++w) {
        if (w == 0 || gap_drift != 0) {
            std::vector<InterferenceSource> shifted = sources;
            for (auto& s : shifted) s.gap += static_cast<long>(w) * gap_drift;
            psd = total_interference_psd(shifted, cfg);
        }
        RVec row;
        row.reserve(allocation.size());
        for (std::size_t k : allocation) row.push_back(subcarrier_sinr(k, h, psd, noise_variance, signal_power, floor));
        rep.sinr.push_back(std::move(row));
    }
    rep.rate = packet_rate(rep.sinr);
    return rep;
}

/// Known full-band pilot sent by the sink.
struct BeaconSpec {
    std::vector<std::size_t> bins;  // every RB bin
    CVec pilots;                    // length n_fft, unit modulus on bins
    double period = 1.0;            // s

    /// Covers every RB of the configuration.
    bool covers_all(const OfdmConfig& cfg) const {
        std::vector<bool> seen(cfg.n_rb, false);
        for (std::size_t k : bins)
            if (cfg.rb_of_bin(k) < cfg.n_rb) seen[cfg.rb_of_bin(k)] = true;
        for (bool s : seen)
            if (!s) return false;
        return true;
    }
};

/// Chirp pilots exp(i pi k^2 / N) on all RB bins.
inline BeaconSpec make_beacon(const OfdmConfig& cfg, double period = 1.0) {
    BeaconSpec b;
    b.bins = cfg.all_rb_bins();
    b.pilots.assign(cfg.n_fft, cplx{0.0, 0.0});
    for (std::size_t k : b.bins) {
        const double ang = kPi * static_cast<double>((k * k) % (2 * cfg.n_fft)) / static_cast<double>(cfg.n_fft);
        b.pilots[k] = {std::cos(ang), std::sin(ang)};
    }
    b.period = period;
    return b;
}

/// Interference-free per-RB CQI: mean over the RB's beacon bins of
/// P / (sigma^2 |D^-1 D^-H|_kk) = P |D[k]|^2 / sigma^2.
inline RVec compute_cqi(const BeaconSpec& beacon, const CirculantOperator& h, double noise_variance,
                        double signal_power, const OfdmConfig& cfg, double floor = kSingularFloor) {
    if (!beacon.covers_all(cfg)) throw Error("beacon does not cover every RB");
    RVec sum(cfg.n_rb, 0.0);
    std::vector<std::size_t> count(cfg.n_rb, 0);
    for (std::size_t k : beacon.bins) {
        const std::size_t rb = cfg.rb_of_bin(k);
        if (rb >= cfg.n_rb) continue;
        check_bin(h.eigenvalues(), k, floor);
        sum[rb] += signal_power * std::norm(h.eigenvalues()[k]) / noise_variance;
        ++count[rb];
    }
    for (std::size_t rb = 0; rb < cfg.n_rb; ++rb) sum[rb] /= static_cast<double>(count[rb]);
    return sum;
}

struct GroundTruth {
    RVec v_rb;    // 1 = available
    RVec v_rate;  // achievable rate, 0 on occupied RBs

    bool any_available() const {
        for (double v : v_rb)
            if (v > 0.5) return true;
        return false;
    }
};

/// RB i is occupied when any interferer allocation touches it.
inline std::vector<bool> occupied_rbs(const std::vector<InterferenceSource>& sources, const OfdmConfig& cfg) {
    std::vector<bool> occ(cfg.n_rb, false);
    for (const auto& s : sources)
        for (std::size_t k : s.allocation)
            if (cfg.rb_of_bin(k) < cfg.n_rb) occ[cfg.rb_of_bin(k)] = true;
    return occ;
}

/// Simulator-omniscient availability and achievable rate of every RB for the
/// victim, given the interferers active during its packet.
inline GroundTruth ground_truth(const CirculantOperator& h, const std::vector<InterferenceSource>& sources,
                                double noise_variance, double signal_power, const OfdmConfig& cfg,
                                long gap_drift = 0, double floor = kSingularFloor) {
    GroundTruth gt{RVec(cfg.n_rb, 0.0), RVec(cfg.n_rb, 0.0)};
    const auto occ = occupied_rbs(sources, cfg);
    std::vector<RVec> psd_per_symbol;
    for (std::size_t w = 0; w < cfg.symbols_per_packet; ++w) {
        if (w == 0 || gap_drift != 0) {
            std::vector<InterferenceSource> shifted = sources;
            for (auto& s : shifted) s.gap += static_cast<long>(w) * gap_drift;
            psd_per_symbol.push_back(total_interference_psd(shifted, cfg));
        } else {
            psd_per_symbol.push_back(psd_per_symbol.front());
        }
    }
    for (std::size_t rb = 0; rb < cfg.n_rb; ++rb) {
        if (occ[rb]) continue;
        gt.v_rb[rb] = 1.0;
        std::vector<RVec> sinr;
        for (const auto& psd : psd_per_symbol) {
            RVec row;
            for (std::size_t k : cfg.rb_bins(rb))
                row.push_back(subcarrier_sinr(k, h, psd, noise_variance, signal_power, floor));
            sinr.push_back(std::move(row));
        }
        gt.v_rate[rb] = packet_rate(sinr);
    }
    return gt;
}

}  // namespace uwacr
