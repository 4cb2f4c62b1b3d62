// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "uwacr/phy.hpp"

using namespace uwacr;

namespace {

OfdmConfig small_config() {
    OfdmConfig c;
    c.n_fft = 64;
    c.symbol_duration = 64 * 0.5e-3;
    c.cp_duration = 16 * 0.5e-3;
    c.n_rb = 4;
    c.subcarriers_per_rb = 8;
    return c;
}

// Dense unitary DFT matrix from the definition.
std::vector<CVec> dft_matrix(std::size_t n) {
    std::vector<CVec> f(n, CVec(n));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t t = 0; t < n; ++t) {
            const double a = -2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n);
            f[k][t] = std::polar(1.0 / std::sqrt(static_cast<double>(n)), a);
        }
    return f;
}

CVec naive_idft(const CVec& d) {
    const std::size_t n = d.size();
    CVec x(n, cplx{0.0, 0.0});
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < n; ++k)
            x[t] += d[k] * std::polar(1.0 / std::sqrt(static_cast<double>(n)),
                                      2.0 * kPi * static_cast<double>(k * t) / static_cast<double>(n));
    return x;
}

DiscreteChannel random_taps(std::size_t len, Rng& rng) {
    DiscreteChannel c{CVec(len), 0.5e-3};
    for (auto& h : c.h) h = complex_gaussian(rng, 1.0);
    return c;
}

}  // namespace

TEST(Ofdm, DefaultNumerology) {
    const OfdmConfig c;
    EXPECT_EQ(c.cp_samples(), 60u);
    EXPECT_NEAR(c.subcarrier_spacing(), 7.8125, 1e-12);
    EXPECT_EQ(c.first_occupied_bin(), 103u);
    // RB map is a partition of the occupied band
    std::vector<int> seen(c.n_fft, 0);
    for (std::size_t rb = 0; rb < c.n_rb; ++rb)
        for (std::size_t k : c.rb_bins(rb)) {
            ++seen[k];
            EXPECT_EQ(c.rb_of_bin(k), rb);
        }
    for (std::size_t k = 0; k < c.n_fft; ++k) EXPECT_LE(seen[k], 1);
    EXPECT_NO_THROW(c.validate());
}

TEST(Ofdm, RejectsOverfullBand) {
    OfdmConfig c;
    c.n_rb = 30;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Dsp, UnitaryDft) {
    Rng rng(3);
    for (std::size_t n : {64u, 256u, 48u}) {
        CVec x(n);
        for (auto& v : x) v = complex_gaussian(rng, 1.0);
        const CVec y = dsp::dft(x);
        EXPECT_NEAR(energy(y), energy(x), 1e-12 * energy(x));
        const CVec z = dsp::idft(y);
        for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(std::abs(z[i] - x[i]), 0.0, 1e-12);
        const auto f = dft_matrix(n);
        for (std::size_t k = 0; k < n; k += 7) {
            cplx acc{0.0, 0.0};
            for (std::size_t t = 0; t < n; ++t) acc += f[k][t] * x[t];
            EXPECT_NEAR(std::abs(acc - y[k]), 0.0, 1e-11);
        }
    }
}

TEST(Circulant, IdentityChannel) {
    const auto h = build_circulant(DiscreteChannel::identity(), 16);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(h(r, c), cplx(r == c ? 1.0 : 0.0, 0.0));
}

TEST(Circulant, FirstColumnIsPaddedTaps) {
    Rng rng(5);
    const auto ch = random_taps(9, rng);
    const auto h = build_circulant(ch, 64);
    for (std::size_t r = 0; r < 64; ++r) EXPECT_EQ(h(r, 0), r < 9 ? ch.h[r] : cplx(0.0, 0.0));
}

TEST(Circulant, DftDiagonalizesDenseMatrix) {
    Rng rng(6);
    const std::size_t n = 64;
    const auto f = dft_matrix(n);
    for (int trial = 0; trial < 3; ++trial) {
        const auto ch = random_taps(1 + rng() % 30, rng);
        const auto h = build_circulant(ch, n).dense();
        // M = F H F^H
        std::vector<CVec> fh(n, CVec(n, cplx{0.0, 0.0}));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < n; ++k)
                for (std::size_t j = 0; j < n; ++j) fh[i][j] += f[i][k] * h[k][j];
        double max_diag = 0.0;
        double max_off = 0.0;
        const auto eig = build_circulant(ch, n).eigenvalues();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cplx m{0.0, 0.0};
                for (std::size_t k = 0; k < n; ++k) m += fh[i][k] * std::conj(f[j][k]);
                if (i == j) {
                    max_diag = std::max(max_diag, std::abs(m));
                    EXPECT_NEAR(std::abs(m - eig[i]), 0.0, 1e-10 * std::abs(eig[i]) + 1e-12);
                } else {
                    max_off = std::max(max_off, std::abs(m));
                }
            }
        EXPECT_LE(max_off, 1e-10 * max_diag);
    }
}

TEST(Circulant, ApplyMatchesDense) {
    Rng rng(7);
    const auto ch = random_taps(12, rng);
    const auto op = build_circulant(ch, 64);
    const auto m = op.dense();
    CVec x(64);
    for (auto& v : x) v = complex_gaussian(rng, 1.0);
    const CVec y = op.apply(x);
    for (std::size_t r = 0; r < 64; ++r) {
        cplx acc{0.0, 0.0};
        for (std::size_t c = 0; c < 64; ++c) acc += m[r][c] * x[c];
        EXPECT_NEAR(std::abs(acc - y[r]), 0.0, 1e-12);
    }
}

TEST(DataSymbol, SupportAndPower) {
    Rng rng(9);
    const OfdmConfig c;
    const auto bins = c.rb_bins(2);
    double p = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        const auto s = make_data_symbol(c.n_fft, bins, 2.0, rng);
        for (std::size_t k = 0; k < c.n_fft; ++k)
            if (std::find(bins.begin(), bins.end(), k) == bins.end()) {
                ASSERT_EQ(s.d[k], cplx(0.0, 0.0));
            }
        p += std::norm(s.d[bins[3]]);
    }
    EXPECT_NEAR(p / trials, 2.0, 0.1);
}

TEST(WindowedToeplitz, SynchronousEqualsCirculant) {
    const auto c = small_config();
    Rng rng(10);
    const auto ch = random_taps(c.cp_samples() + 1, rng);
    const auto data = make_data_symbol(c.n_fft, c.rb_bins(1), 1.0, rng);
    const auto stream = make_ofdm_stream({data.d}, 0, c);
    const CVec win = build_windowed_toeplitz(ch, 0, stream, c);
    const CVec circ = build_circulant(ch, c.n_fft).apply(dsp::idft(data.d));
    for (std::size_t i = 0; i < c.n_fft; ++i) EXPECT_NEAR(std::abs(win[i] - circ[i]), 0.0, 1e-10);
}

TEST(WindowedToeplitz, ZeroStream) {
    const auto c = small_config();
    Rng rng(11);
    const auto ch = random_taps(5, rng);
    const auto [j0, j1] = overlapping_symbols(20, ch.length(), c);
    std::vector<CVec> zeros(static_cast<std::size_t>(j1 - j0 + 1), CVec(c.n_fft, cplx{0.0, 0.0}));
    const CVec y = build_windowed_toeplitz(ch, 20, make_ofdm_stream(zeros, j0, c), c);
    for (const auto& v : y) EXPECT_EQ(v, cplx(0.0, 0.0));
}

TEST(WindowedToeplitz, HalfSymbolGapMatchesSampleConvolution) {
    const auto c = small_config();
    Rng rng(12);
    const auto ch = random_taps(10, rng);
    const long gap = static_cast<long>(c.n_fft / 2);
    const std::size_t tone = c.rb_bins(2)[3];
    const auto [j0, j1] = overlapping_symbols(gap, ch.length(), c);
    ASSERT_LT(j0, j1);  // straddles two symbols
    std::vector<CVec> symbols;
    for (long j = j0; j <= j1; ++j) {
        CVec d(c.n_fft, cplx{0.0, 0.0});
        d[tone] = complex_gaussian(rng, 1.0);
        symbols.push_back(d);
    }
    const CVec y = build_windowed_toeplitz(ch, gap, make_ofdm_stream(symbols, j0, c), c);

    // brute force on the victim's time axis
    const long period = static_cast<long>(c.symbol_samples());
    const long cp = static_cast<long>(c.cp_samples());
    std::vector<std::pair<long, cplx>> tx;  // (victim time, sample)
    for (long j = j0; j <= j1; ++j) {
        const CVec body = naive_idft(symbols[static_cast<std::size_t>(j - j0)]);
        for (long n = 0; n < period; ++n) {
            const long idx = n < cp ? static_cast<long>(c.n_fft) - cp + n : n - cp;
            tx.push_back({gap + j * period + n, body[static_cast<std::size_t>(idx)]});
        }
    }
    double e_ref = 0.0;
    for (std::size_t i = 0; i < c.n_fft; ++i) {
        const long t = cp + static_cast<long>(i);
        cplx acc{0.0, 0.0};
        for (const auto& [time, s] : tx) {
            const long l = t - time;
            if (l >= 0 && l < static_cast<long>(ch.length())) acc += ch.h[static_cast<std::size_t>(l)] * s;
        }
        EXPECT_NEAR(std::abs(acc - y[i]), 0.0, 1e-12);
        e_ref += std::norm(acc);
    }
    EXPECT_NEAR(energy(y), e_ref, 1e-9 * e_ref);
}

TEST(WindowedToeplitz, UnderrunDetected) {
    const auto c = small_config();
    Rng rng(13);
    const auto ch = random_taps(5, rng);
    const auto data = make_data_symbol(c.n_fft, c.rb_bins(0), 1.0, rng);
    EXPECT_THROW(build_windowed_toeplitz(ch, 30, make_ofdm_stream({data.d}, 0, c), c), WindowUnderrunError);
}

TEST(Synthesize, NoiselessIdentity) {
    const auto c = small_config();
    Rng rng(14);
    const auto data = make_data_symbol(c.n_fft, c.rb_bins(1), 1.0, rng);
    const auto rx = synthesize_received(DiscreteChannel{{cplx{1.0, 0.0}}, c.sample_period()}, data, {}, 0.0, 1, c);
    const CVec y = dsp::dft(rx.y());
    for (std::size_t k = 0; k < c.n_fft; ++k) EXPECT_NEAR(std::abs(y[k] - data.d[k]), 0.0, 1e-12);
}

TEST(Synthesize, SynchronousDisjointRbsOrthogonal) {
    const auto c = small_config();
    Rng rng(15);
    const auto hs = random_taps(c.cp_samples(), rng);
    const auto data = make_data_symbol(c.n_fft, c.rb_bins(1), 1.0, rng);
    InterfererSpec spec{1, random_taps(c.cp_samples() + 1, rng), 0, c.rb_bins(2), 1.0, 0, {}};
    draw_interferer_symbols(spec, c, rng);
    const auto rx = synthesize_received(hs, data, {spec}, 0.0, 1, c);
    const CVec y = dsp::dft(rx.y());
    const CVec eig = build_circulant(hs, c.n_fft).eigenvalues();
    for (std::size_t k : c.rb_bins(1)) EXPECT_LE(std::abs(y[k] - eig[k] * data.d[k]), 1e-10);
}

TEST(Synthesize, AsynchronousGapLeaks) {
    const auto c = small_config();
    Rng rng(16);
    const auto data = make_data_symbol(c.n_fft, c.rb_bins(1), 1.0, rng);
    const long span = static_cast<long>(c.symbol_samples()) - 1;
    for (int t = 0; t < 100; ++t) {
        // channel as long as the CP plus one: every nonzero gap breaks orthogonality
        InterfererSpec spec{1, random_taps(c.cp_samples() + 1, rng), 0, c.rb_bins(2), 1.0, 0, {}};
        do spec.gap = static_cast<long>(rng() % static_cast<std::uint64_t>(2 * span + 1)) - span;
        while (spec.gap == 0);
        draw_interferer_symbols(spec, c, rng);
        const auto rx = synthesize_received(DiscreteChannel::identity(c.sample_period()), data, {spec}, 0.0, 1, c);
        const CVec j = dsp::dft(rx.interference);
        double leak = 0.0;
        for (std::size_t k : c.rb_bins(1)) leak += std::norm(j[k]);
        EXPECT_GT(leak, 0.0) << "gap " << spec.gap;
    }
}

TEST(Synthesize, ComponentsSumAndDeterminism) {
    const auto c = small_config();
    Rng rng(17);
    const auto data = make_data_symbol(c.n_fft, c.rb_bins(1), 1.0, rng);
    InterfererSpec spec{1, random_taps(4, rng), -37, c.rb_bins(3), 1.0, 0, {}};
    draw_interferer_symbols(spec, c, rng);
    const auto a = synthesize_received(random_taps(3, rng), data, {spec}, 0.3, 42, c);
    Rng rng2(17);
    const auto data2 = make_data_symbol(c.n_fft, c.rb_bins(1), 1.0, rng2);
    InterfererSpec spec2{1, random_taps(4, rng2), -37, c.rb_bins(3), 1.0, 0, {}};
    draw_interferer_symbols(spec2, c, rng2);
    const auto b = synthesize_received(random_taps(3, rng2), data2, {spec2}, 0.3, 42, c);
    const CVec y = a.y();
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_EQ(y[i], a.desired[i] + a.interference[i] + a.noise[i]);
        EXPECT_EQ(y[i], b.y()[i]);
    }
}

TEST(Synthesize, DistantInterfererDropped) {
    const auto c = small_config();
    EXPECT_TRUE(reaches_window(static_cast<long>(c.symbol_samples()) - 1, c));
    EXPECT_FALSE(reaches_window(static_cast<long>(c.symbol_samples()), c));
    EXPECT_FALSE(reaches_window(-static_cast<long>(c.symbol_samples()), c));
}
