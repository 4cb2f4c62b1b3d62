// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "reference.hpp"
#include "uwacr/sensing.hpp"

using namespace uwacr;

namespace {

DiscreteChannel random_taps(std::size_t len, Rng& rng) {
    DiscreteChannel c{CVec(len), 0.5e-3};
    for (auto& v : c.h) v = complex_gaussian(rng, 1.0 / static_cast<double>(len));
    return c;
}

// Samples of one FFT window received from a node occupying `rb`, its symbol
// boundaries `gap` samples after the window's.
CVec node_window(const OfdmConfig& o, std::size_t rb, long gap, double power, const DiscreteChannel& ch, Rng& rng) {
    std::vector<CVec> symbols;
    for (int j = 0; j < 4; ++j) symbols.push_back(make_data_symbol(o.n_fft, o.rb_bins(rb), power, rng).d);
    const auto stream = make_ofdm_stream(symbols, -1, o);
    return build_windowed_toeplitz(ch, gap, stream, o);
}

void add_noise(CVec& x, double variance, Rng& rng) {
    for (auto& v : x) v += complex_gaussian(rng, variance);
}

}  // namespace

TEST(SensingConfig, DefaultCoversBand) {
    const OfdmConfig o;
    SensingConfig s;
    EXPECT_NO_THROW(s.validate(o));
    EXPECT_EQ(s.first_row_bin(o), 64u);
    s.n_sens = 32;
    EXPECT_THROW(s.validate(o), ConfigError);
    s.n_sens = 512;
    EXPECT_THROW(s.validate(o), ConfigError);
}

TEST(ObserveSpectrum, SilenceIsZero) {
    const OfdmConfig o;
    const SensingConfig s;
    const auto m = observe_spectrum(CVec(o.n_fft, cplx{0.0, 0.0}), o, s);
    EXPECT_EQ(m.rows, s.n_sens);
    EXPECT_EQ(m.values.size(), 2 * s.n_sens);
    for (double v : m.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(energy_detect(m, o, s), RVec(o.n_rb, 0.0));
}

TEST(ObserveSpectrum, TooFewSamples) {
    const OfdmConfig o;
    EXPECT_THROW(observe_spectrum(CVec(o.n_fft - 1), o, SensingConfig{}), Error);
}

TEST(ObserveSpectrum, RowsAreTruncatedDft) {
    const OfdmConfig o;
    const SensingConfig s;
    Rng rng(1);
    CVec x(o.n_fft);
    for (auto& v : x) v = complex_gaussian(rng, 1.0);
    const auto m = observe_spectrum(x, o, s);
    const CVec full = ref::dft(x);
    for (std::size_t r = 0; r < m.rows; ++r) {
        EXPECT_NEAR(m.re(r), full[m.first_bin + r].real(), 1e-12);
        EXPECT_NEAR(m.im(r), full[m.first_bin + r].imag(), 1e-12);
    }
    // truncation keeps at most the time-domain energy
    EXPECT_LE(m.energy(), energy(x) * (1.0 + 1e-12));
    const auto again = observe_spectrum(x, o, s);
    EXPECT_EQ(m.values, again.values);
}

TEST(ObserveSpectrum, SingleRbEnergyConcentrated) {
    const OfdmConfig o;
    const SensingConfig s;
    Rng rng(2);
    for (std::size_t rb = 0; rb < o.n_rb; ++rb) {
        CVec x = node_window(o, rb, 0, 1.0, random_taps(20, rng), rng);
        add_noise(x, 1e-4, rng);
        const auto m = observe_spectrum(x, o, s);
        const auto rows = rb_rows(o, s);
        double on = 0.0;
        for (std::size_t r : rows[rb]) on += m.re(r) * m.re(r) + m.im(r) * m.im(r);
        EXPECT_GE(on, 0.9 * m.energy()) << "rb " << rb;
        const RVec e = energy_detect(m, o, s);
        EXPECT_EQ(argmax(e), rb);
    }
}

TEST(ObserveSpectrum, BeaconFillsEveryRbBin) {
    const OfdmConfig o;
    const SensingConfig s;
    const auto b = make_beacon(o);
    Rng rng(3);
    const auto rx = synthesize_received(random_taps(15, rng), DataSymbol{b.pilots, b.bins, 1.0}, {}, 0.0, 1, o);
    const auto m = observe_spectrum(rx.y(), o, s);
    for (const auto& rows : rb_rows(o, s))
        for (std::size_t r : rows) EXPECT_GT(m.re(r) * m.re(r) + m.im(r) * m.im(r), 0.0);
}

TEST(ObserveSpectrum, HannWindowAndLongerSensing) {
    const OfdmConfig o;
    SensingConfig s;
    s.window = WindowKind::Hann;
    s.symbols = 2;
    EXPECT_NO_THROW(s.validate(o));
    const auto rows = rb_rows(o, s);
    for (const auto& rb : rows) {
        EXPECT_EQ(rb.size(), 2 * o.subcarriers_per_rb);
        for (std::size_t r : rb) EXPECT_LT(r, s.n_sens);
    }
    Rng rng(4);
    CVec x(2 * o.n_fft);
    for (auto& v : x) v = complex_gaussian(rng, 1.0);
    const auto m = observe_spectrum(x, o, s);
    CVec w = x;
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] *= 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(w.size()));
    const CVec full = ref::dft(w);
    for (std::size_t r = 0; r < m.rows; r += 9) EXPECT_NEAR(m.re(r), full[m.first_bin + r].real(), 1e-12);
}

TEST(BeaconCqi, NoiselessMatchesOracle) {
    const OfdmConfig o;
    Rng rng(5);
    const auto b = make_beacon(o);
    const auto ch = random_taps(25, rng);
    const auto rx = synthesize_received(ch, DataSymbol{b.pilots, b.bins, 1.0}, {}, 0.0, 1, o);
    const RVec est = beacon_cqi({rx.y()}, b, 0.01, 2.0, o);
    const RVec cqi = compute_cqi(b, build_circulant(ch, o.n_fft), 0.01, 2.0, o);
    for (std::size_t rb = 0; rb < o.n_rb; ++rb) EXPECT_NEAR(est[rb], cqi[rb], 1e-9 * cqi[rb]);
}

TEST(BeaconCqi, DoublingNoiseHalvesEstimate) {
    const OfdmConfig o;
    Rng rng(6);
    const auto b = make_beacon(o);
    const auto ch = random_taps(10, rng);
    const double sigma2 = 0.01;
    auto mean_cqi = [&](double var) {
        RVec acc(o.n_rb, 0.0);
        for (int t = 0; t < 1000; ++t) {
            const auto rx = synthesize_received(ch, DataSymbol{b.pilots, b.bins, 1.0}, {}, var, rng(), o);
            const RVec e = beacon_cqi({rx.y()}, b, var, 1.0, o);
            for (std::size_t rb = 0; rb < o.n_rb; ++rb) acc[rb] += e[rb] / 1000.0;
        }
        return acc;
    };
    const RVec a = mean_cqi(sigma2);
    const RVec d = mean_cqi(2.0 * sigma2);
    for (std::size_t rb = 0; rb < o.n_rb; ++rb) EXPECT_NEAR(d[rb] / a[rb], 0.5, 0.05) << "rb " << rb;
}

TEST(BeaconCqi, InterferenceBiasesEstimate) {
    const OfdmConfig o;
    Rng rng(7);
    const auto b = make_beacon(o);
    const auto ch = random_taps(10, rng);
    const auto ich = random_taps(30, rng);
    const double sigma2 = 0.05;
    RVec clean(o.n_rb, 0.0);
    RVec dirty(o.n_rb, 0.0);
    RVec sq(o.n_rb, 0.0);
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const auto rx = synthesize_received(ch, DataSymbol{b.pilots, b.bins, 1.0}, {}, sigma2, rng(), o);
        const RVec e0 = beacon_cqi({rx.y()}, b, sigma2, 1.0, o);
        CVec y = rx.y();
        const CVec j = node_window(o, 2, 47, 1.0, ich, rng);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += j[i];
        const RVec e1 = beacon_cqi({y}, b, sigma2, 1.0, o);
        for (std::size_t rb = 0; rb < o.n_rb; ++rb) {
            clean[rb] += e0[rb] / trials;
            dirty[rb] += e1[rb] / trials;
            sq[rb] += (e1[rb] - e0[rb]) * (e1[rb] - e0[rb]) / trials;
        }
    }
    // the occupied RB's estimate is inflated well beyond Monte-Carlo error
    const double se = std::sqrt(sq[2] / trials);
    EXPECT_GT(dirty[2] - clean[2], 5.0 * se);
}

TEST(BeaconCqi, Errors) {
    const OfdmConfig o;
    const auto b = make_beacon(o);
    EXPECT_THROW(beacon_cqi({}, b, 1.0, 1.0, o), Error);
    EXPECT_THROW(beacon_cqi({CVec(o.n_fft)}, b, 0.0, 1.0, o), Error);
    auto missing = b;
    missing.pilots[missing.bins[3]] = 0.0;
    EXPECT_THROW(beacon_cqi({CVec(o.n_fft)}, missing, 1.0, 1.0, o), Error);
}

TEST(EnergyDetect, MeanOverRbRows) {
    const OfdmConfig o;
    const SensingConfig s;
    SpectrumMatrix m{s.n_sens, s.first_row_bin(o), RVec(2 * s.n_sens, 0.0)};
    const auto rows = rb_rows(o, s);
    m.values[2 * rows[3][0]] = 3.0;
    m.values[2 * rows[3][1] + 1] = 4.0;
    const RVec e = energy_detect(m, o, s);
    EXPECT_NEAR(e[3], 25.0 / 10.0, 1e-15);
    EXPECT_EQ(e[0], 0.0);
}

TEST(EnergyDetect, AsynchronousNeighborRaisesFreeRbAboveNoise) {
    const OfdmConfig o;
    const SensingConfig s;
    Rng rng(8);
    const auto ch = random_taps(30, rng);
    const double sigma2 = 1e-3;
    double noise_only = 0.0;
    double leaky = 0.0;
    for (int t = 0; t < 200; ++t) {
        CVec z(o.n_fft, cplx{0.0, 0.0});
        add_noise(z, sigma2, rng);
        noise_only += energy_detect(observe_spectrum(z, o, s), o, s)[1];
        CVec x = node_window(o, 2, 90, 1.0, ch, rng);
        add_noise(x, sigma2, rng);
        leaky += energy_detect(observe_spectrum(x, o, s), o, s)[1];
    }
    EXPECT_GT(leaky, 2.0 * noise_only);
}

TEST(EnergyDetect, LeakageIncreasesWithPower) {
    const OfdmConfig o;
    const SensingConfig s;
    Rng rng(9);
    const auto ch = random_taps(30, rng);
    double prev = 0.0;
    for (double p : {0.01, 0.1, 0.5, 1.0, 2.0, 10.0}) {
        Rng data(10);  // same data realization scaled by sqrt(p)
        double e = 0.0;
        for (int t = 0; t < 20; ++t)
            e += energy_detect(observe_spectrum(node_window(o, 2, 90, p, ch, data), o, s), o, s)[1];
        EXPECT_GT(e, prev) << "power " << p;
        prev = e;
    }
}

TEST(Spectrum, CsvExport) {
    const OfdmConfig o;
    const SensingConfig s;
    std::ostringstream os;
    write_spectrum_csv(os, observe_spectrum(CVec(o.n_fft, cplx{1.0, 0.0}), o, s), o, s);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "bin,freq_hz,re,im");
    std::size_t n = 0;
    while (std::getline(is, line)) ++n;
    EXPECT_EQ(n, s.n_sens);
}
