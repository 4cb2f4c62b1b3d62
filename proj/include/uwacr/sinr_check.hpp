// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iomanip>
#include <ostream>
#include <vector>

#include "uwacr/oracle.hpp"
#include "uwacr/phy.hpp"

namespace uwacr {

/// Closed-form SINR against a time-domain Monte-Carlo estimate on a small
/// random scene.
struct SinrCheckConfig {
    OfdmConfig ofdm = small_ofdm();
    std::size_t interferers = 2;
    std::size_t trials = 10000;
    std::size_t taps = 6;
    double noise_variance = 0.05;
    double signal_power = 1.0;
    std::uint64_t seed = 1;

    static OfdmConfig small_ofdm() {
        OfdmConfig c;
        c.n_fft = 64;
        c.symbol_duration = 64 * 0.5e-3;
        c.cp_duration = 16 * 0.5e-3;
        c.n_rb = 4;
        c.subcarriers_per_rb = 8;
        c.symbols_per_packet = 1;
        return c;
    }
};

struct SinrCheckScene {
    DiscreteChannel victim;
    std::size_t victim_rb = 0;
    std::vector<InterfererSpec> interferers;
};

/// Random taps of length up to cp + 1 with exponentially decaying power.
inline DiscreteChannel random_channel(std::size_t max_taps, std::size_t cp, double sampling_period, Rng& rng) {
    const std::size_t len = 1 + static_cast<std::size_t>(rng() % (cp + 1));
    DiscreteChannel c{CVec(len, cplx{0.0, 0.0}), sampling_period};
    c.h[0] = complex_gaussian(rng, 1.0);
    for (std::size_t i = 1; i < std::min(max_taps, len); ++i) {
        const std::size_t at = 1 + static_cast<std::size_t>(rng() % (len - 1));
        c.h[at] += complex_gaussian(rng, std::exp(-static_cast<double>(at) / static_cast<double>(cp)));
    }
    c.h[len - 1] += complex_gaussian(rng, 0.1);
    return c;
}

/// Victim on one RB, each interferer on a distinct other RB with a gap
/// uniform over the span that reaches the window.
inline SinrCheckScene make_sinr_check_scene(const SinrCheckConfig& cfg) {
    const auto& o = cfg.ofdm;
    if (cfg.interferers + 1 > o.n_rb) throw ConfigError("sinr_check.interferers", "more interferers than free RBs");
    Rng rng(cfg.seed);
    SinrCheckScene s;
    std::vector<std::size_t> rbs(o.n_rb);
    for (std::size_t i = 0; i < rbs.size(); ++i) rbs[i] = i;
    for (std::size_t i = rbs.size(); i > 1; --i) std::swap(rbs[i - 1], rbs[rng() % i]);
    s.victim_rb = rbs[0];
    s.victim = random_channel(cfg.taps, o.cp_samples(), o.sample_period(), rng);
    const long span = static_cast<long>(o.symbol_samples()) - 1;
    for (std::size_t i = 0; i < cfg.interferers; ++i) {
        InterfererSpec spec;
        spec.node = static_cast<int>(i + 1);
        spec.channel = random_channel(cfg.taps, o.cp_samples(), o.sample_period(), rng);
        spec.gap = static_cast<long>(rng() % static_cast<std::uint64_t>(2 * span + 1)) - span;
        spec.allocation = o.rb_bins(rbs[i + 1]);
        spec.power = cfg.signal_power;
        s.interferers.push_back(std::move(spec));
    }
    return s;
}

struct SinrCheckRow {
    std::size_t bin = 0;
    double closed_form = 0.0;
    double monte_carlo = 0.0;
    double relative_error = 0.0;
};

struct SinrCheckReport {
    SinrCheckScene scene;
    std::vector<SinrCheckRow> rows;
    double max_relative_error = 0.0;
};

/// Monte-Carlo SINR_k = P / mean |D^-1 F y - d|^2 over fresh data and noise.
inline SinrCheckReport run_sinr_check(const SinrCheckConfig& cfg) {
    const auto& o = cfg.ofdm;
    o.validate();
    SinrCheckReport rep;
    rep.scene = make_sinr_check_scene(cfg);
    const auto& sc = rep.scene;
    const auto h = build_circulant(sc.victim, o.n_fft);
    const auto bins = o.rb_bins(sc.victim_rb);
    std::vector<InterferenceSource> sources;
    for (const auto& i : sc.interferers) sources.push_back(to_source(i));
    const RVec psd = total_interference_psd(sources, o);

    RVec err(bins.size(), 0.0);
    Rng rng(mix_seed(cfg.seed, 0x51A));
    auto interferers = sc.interferers;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const DataSymbol data = make_data_symbol(o.n_fft, bins, cfg.signal_power, rng);
        for (auto& i : interferers) draw_interferer_symbols(i, o, rng);
        const auto rx = synthesize_received(sc.victim, data, interferers, cfg.noise_variance, rng(), o);
        const CVec est = equalize(rx, h, bins);
        for (std::size_t i = 0; i < bins.size(); ++i) err[i] += std::norm(est[bins[i]] - data.d[bins[i]]);
    }
    for (std::size_t i = 0; i < bins.size(); ++i) {
        SinrCheckRow row;
        row.bin = bins[i];
        row.closed_form = subcarrier_sinr(bins[i], h, psd, cfg.noise_variance, cfg.signal_power);
        row.monte_carlo = cfg.signal_power / (err[i] / static_cast<double>(cfg.trials));
        row.relative_error = std::abs(row.monte_carlo - row.closed_form) / row.closed_form;
        rep.max_relative_error = std::max(rep.max_relative_error, row.relative_error);
        rep.rows.push_back(row);
    }
    return rep;
}

inline void write_sinr_check_csv(std::ostream& os, const SinrCheckReport& rep) {
    os << "bin,sinr_closed_form,sinr_monte_carlo,relative_error\n" << std::setprecision(10);
    for (const auto& r : rep.rows)
        os << r.bin << ',' << r.closed_form << ',' << r.monte_carlo << ',' << r.relative_error << '\n';
}

}  // namespace uwacr
