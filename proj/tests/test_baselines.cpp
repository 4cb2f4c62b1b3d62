// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <tuple>

#include "uwacr/baselines.hpp"

using namespace uwacr;

namespace {

EpsilonPolicyConfig cqi_policy(double eps, std::size_t k) { return {eps, k, HeuristicMode::Cqi}; }

}  // namespace

TEST(CqiEpsilon, WorkedExamples) {
    const RVec cqi{1, 3, 7, 15, 31};
    const auto a = cqi_epsilon_decide(cqi, cqi_policy(0.0, 1), 0);
    EXPECT_EQ(a.rb, 4u);
    EXPECT_NEAR(a.rate, 5.0, 1e-12);
    const auto b = cqi_epsilon_decide(cqi, cqi_policy(0.37, 1), 0);
    EXPECT_EQ(b.rb, 4u);
    EXPECT_NEAR(b.rate, 3.15, 1e-12);
    const auto c = cqi_epsilon_decide(cqi, cqi_policy(0.0, 3), 0);
    EXPECT_EQ(c.rb, 2u);
    EXPECT_NEAR(c.rate, 3.0, 1e-12);
}

TEST(CqiEpsilon, TiesKeepIndexOrder) {
    const RVec cqi{2, 5, 5, 1};
    EXPECT_EQ(cqi_epsilon_decide(cqi, cqi_policy(0.0, 1), 0).rb, 1u);
    EXPECT_EQ(cqi_epsilon_decide(cqi, cqi_policy(0.0, 2), 0).rb, 2u);
}

TEST(CqiEpsilon, RandomRankReproducibleAndUniform) {
    const RVec cqi{1, 3, 7, 15, 31};
    std::vector<int> hits(5, 0);
    for (std::uint64_t s = 0; s < 5000; ++s) {
        const auto d = cqi_epsilon_decide(cqi, cqi_policy(0.2, 0), s);
        EXPECT_EQ(d.rb, cqi_epsilon_decide(cqi, cqi_policy(0.2, 0), s).rb);
        EXPECT_NEAR(d.rate, 0.8 * std::log2(1.0 + cqi[d.rb]), 1e-12);
        ++hits[d.rb];
    }
    for (int h : hits) EXPECT_NEAR(h / 5000.0, 0.2, 0.03);
}

TEST(CqiEpsilon, ZeroEpsilonIsShannonRate) {
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        RVec cqi(5);
        for (auto& c : cqi) c = 20.0 * uniform01(rng);
        const auto d = cqi_epsilon_decide(cqi, cqi_policy(0.0, 1), 0);
        EXPECT_EQ(d.rate, std::log2(1.0 + cqi[d.rb]));
    }
}

TEST(CqiEpsilon, Validation) {
    EXPECT_THROW(cqi_epsilon_decide({1, 2}, cqi_policy(1.0, 1), 0), ConfigError);
    EXPECT_THROW(cqi_epsilon_decide({1, 2}, cqi_policy(-0.1, 1), 0), ConfigError);
    EXPECT_THROW(cqi_epsilon_decide({1, 2}, cqi_policy(0.1, 3), 0), ConfigError);
    EXPECT_THROW(cqi_epsilon_decide({}, cqi_policy(0.1, 1), 0), ShapeError);
}

TEST(EdEpsilon, WorkedExamples) {
    const RVec cqi{1, 3, 7, 15, 31};
    const EpsilonPolicyConfig ed{0.0, 1, HeuristicMode::EnergyDetection};
    const auto a = ed_epsilon_decide({5, 1, 5, 5, 5}, cqi, ed);
    EXPECT_EQ(a.rb, 1u);
    EXPECT_NEAR(a.rate, 2.0, 1e-12);
    EXPECT_EQ(ed_epsilon_decide({2, 2, 2, 2, 2}, cqi, ed).rb, 0u);
    const auto b = ed_epsilon_decide({5, 1, 5, 5, 5}, cqi, {0.39, 1, HeuristicMode::EnergyDetection});
    EXPECT_NEAR(b.rate, 0.61 * 2.0, 1e-12);
    EXPECT_THROW(ed_epsilon_decide({1, 2}, {1, 2, 3}, ed), ShapeError);
}

TEST(EdEpsilon, LeakageMisranksFreeRb) {
    // strong asynchronous node on RB 2, weak distant node on RB 4
    const OfdmConfig o;
    const SensingConfig s;
    Rng rng(2);
    const DiscreteChannel strong{{cplx{1.0, 0.0}, cplx{0.0, 0.5}, cplx{-0.3, 0.2}}, o.sample_period()};
    const DiscreteChannel weak{{cplx{0.01, 0.0}}, o.sample_period()};
    CVec samples(o.n_fft, cplx{0.0, 0.0});
    for (const auto& [ch, rb, gap] : {std::tuple{strong, 2u, 140L}, std::tuple{weak, 4u, 0L}}) {
        InterfererSpec spec{1, ch, gap, o.rb_bins(rb), 1.0, 0, {}};
        draw_interferer_symbols(spec, o, rng);
        const CVec c = interferer_contribution(spec, o);
        for (std::size_t i = 0; i < c.size(); ++i) samples[i] += c[i];
    }
    for (auto& v : samples) v += complex_gaussian(rng, 1e-8);
    const RVec e = energy_detect(observe_spectrum(samples, o, s), o, s);
    EXPECT_GT(e[1], e[4]);  // free neighbor looks busier than an occupied RB
    const auto d = ed_epsilon_decide(e, RVec(5, 1.0), {0.0, 1, HeuristicMode::EnergyDetection});
    EXPECT_NE(d.rb, 1u);
}

TEST(HeuristicAction, CarriesDecision) {
    Observation obs;
    obs.cqi = {1, 3, 7};
    const Decision d{1, 1.5};
    const auto a = heuristic_action(obs, d, 0.25);
    EXPECT_EQ(select_decision(a).rb, 1u);
    EXPECT_EQ(select_decision(a).rate, 1.5);
    EXPECT_NEAR(a.rate[2], 0.75 * 3.0, 1e-12);
}

TEST(Calibration, SyntheticBisection) {
    const std::vector<CalibrationSample> s{{1.0, 0.5}, {1.0, 0.6}, {1.0, 0.7}, {1.0, 0.8}};
    EXPECT_NEAR(success_fraction(s, 0.0), 0.0, 0.0);
    EXPECT_NEAR(success_fraction(s, 0.35), 0.5, 0.0);
    EXPECT_NEAR(success_fraction(s, 0.45), 0.75, 0.0);
    const auto r = calibrate_epsilon(s, 0.5);
    EXPECT_NEAR(r.epsilon, 0.3, 1e-5);
    EXPECT_GE(r.success, 0.5);
    EXPECT_THROW(calibrate_epsilon(s, 1.0), Error);
    EXPECT_THROW(calibrate_epsilon(std::vector<CalibrationSample>{{1.0, 0.0}}, 0.5), Error);
    EXPECT_EQ(calibrate_epsilon(std::vector<CalibrationSample>{{1.0, 2.0}}, 0.5).epsilon, 0.0);
}

TEST(Calibration, InterferenceFreeNeedsNoBackoff) {
    EnvConfig e;
    e.scenario.min_active = 0;
    e.scenario.max_active = 0;
    e.scenario.ideal_cqi = true;
    e.scenario.horizon = 8;
    e.acoustic.direct_path_only = true;
    const auto r = calibrate_epsilon(e, cqi_policy(0.0, 1), 0.9, 200, 3);
    EXPECT_NEAR(r.epsilon, 0.0, 0.05);
}

TEST(Calibration, SuccessMonotoneInEpsilon) {
    EnvConfig e;
    e.scenario.horizon = 8;
    e.scenario.gap_distribution = GapDistribution::Asynchronous;
    for (auto family : {cqi_policy(0.0, 0), EpsilonPolicyConfig{0.0, 1, HeuristicMode::EnergyDetection}}) {
        const auto samples = collect_calibration_samples(e, family, 300, 5);
        EXPECT_GE(samples.size(), 300u);
        double prev = -1.0;
        for (int i = 0; i < 20; ++i) {
            const double f = success_fraction(samples, i / 20.0);
            EXPECT_GE(f, prev);
            prev = f;
        }
    }
}

TEST(Calibration, Deterministic) {
    EnvConfig e;
    e.scenario.horizon = 8;
    const auto a = collect_calibration_samples(e, cqi_policy(0.0, 0), 100, 9);
    const auto b = collect_calibration_samples(e, cqi_policy(0.0, 0), 100, 9);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].base_rate, b[i].base_rate);
        EXPECT_EQ(a[i].achievable, b[i].achievable);
    }
}
