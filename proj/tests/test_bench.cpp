// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <sstream>

#include "uwacr/bench.hpp"

using namespace uwacr;

namespace {

std::string key_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<accepted>";
}

AppConfig small_bench() {
    AppConfig c;
    c.env.scenario.horizon = 8;
    c.bench.snr_grid_db = {12.0};
    c.bench.episodes = 20;
    c.bench.calibrate = false;
    c.bench.policies = {"oracle", "random", "cqi_eps_k1"};
    return c;
}

std::vector<TrainingLogRow> log_of(const RVec& rewards) {
    std::vector<TrainingLogRow> log;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        TrainingLogRow r;
        r.episode = i;
        r.reward = rewards[i];
        r.throughput = 2.0 * rewards[i];
        r.success_rate = 0.5;
        log.push_back(r);
    }
    return log;
}

}  // namespace

TEST(Config, MinimalIsDefault) {
    const AppConfig c = parse_config_text(R"({"version": 1})");
    EXPECT_EQ(config_hash(c), config_hash(AppConfig{}));
}

TEST(Config, StrictKeysNameTheOffender) {
    EXPECT_EQ(key_of(R"({"version": 1, "scenario": {"horizn": 3}})"), "scenario.horizn");
    EXPECT_EQ(key_of(R"({"version": 1, "scenaro": {}})"), "scenaro");
    EXPECT_EQ(key_of(R"({"scenario": {"horizon": 3}})"), "version");
    EXPECT_EQ(key_of(R"({"version": 2})"), "version");
    EXPECT_EQ(key_of(R"({"version": "1"})"), "version");
    EXPECT_EQ(key_of(R"({"version": 1, "scenario": {"horizon": "long"}})"), "scenario.horizon");
    EXPECT_EQ(key_of(R"({"version": 1, "bench": {"policies": ["magic"]}})"), "bench.policies");
    EXPECT_EQ(key_of(R"({"version": 1,)"), "<root>");
    EXPECT_EQ(key_of(R"({"version": 1, "scenario": {"horizon": 3}})"), "<accepted>");
}

TEST(Config, RoundTripAndHashStable) {
    AppConfig c;
    c.env.scenario.horizon = 12;
    c.env.scenario.snr_db = 3.5;
    c.bench.policies = {"oracle"};
    c.agent.entropy_coef = 0.03;
    const AppConfig back = parse_config(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(config_hash(back), config_hash(c));
    EXPECT_EQ(config_hash(c).size(), 16u);
    AppConfig d = c;
    d.env.scenario.horizon = 13;
    EXPECT_NE(config_hash(d), config_hash(c));
}

TEST(Config, MissingFileThrows) { EXPECT_THROW(load_config("/nonexistent/cfg.json"), Error); }

TEST(Stats, HalfWidthAndZ) {
    EXPECT_EQ(half_width({1.0}), 0.0);
    const RVec x{1, 2, 3, 4, 5};
    // sample sd sqrt(2.5), n = 5
    EXPECT_NEAR(half_width(x), kZ95 * std::sqrt(2.5 / 5.0), 1e-12);
    const RVec y{0, 1, 2, 3, 4};
    const double se = std::sqrt(2.0 * 2.5 / 5.0);
    EXPECT_NEAR(difference_z(x, y), 1.0 / se, 1e-12);
    EXPECT_FALSE(exceeds_with_confidence(x, y));
    EXPECT_TRUE(exceeds_with_confidence(RVec{3, 3, 3}, RVec{1, 1, 1}));
    EXPECT_EQ(difference_z(RVec{1, 1}, RVec{1, 1}), 0.0);
}

TEST(Curves, WindowOneIsIdentity) {
    const auto log = log_of({1, -2, 3.5, 0.25});
    const auto c = emit_training_curves(log, 1);
    ASSERT_EQ(c.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(c[i].reward_smoothed, log[i].reward);
        EXPECT_EQ(c[i].throughput_smoothed, log[i].throughput);
        EXPECT_EQ(c[i].reward, log[i].reward);
    }
    EXPECT_THROW(emit_training_curves(log, 0), Error);
    EXPECT_TRUE(emit_training_curves({}, 5).empty());
}

TEST(Curves, ConstantAndRamp) {
    for (const auto& r : emit_training_curves(log_of(RVec(30, 0.7)), 7)) EXPECT_NEAR(r.reward_smoothed, 0.7, 1e-12);
    RVec ramp(40);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
    const std::size_t w = 5;
    const auto c = emit_training_curves(log_of(ramp), w);
    for (std::size_t i = 0; i < ramp.size(); ++i) {
        // trailing mean of 0..i or of i-w+1..i
        const double expect = i + 1 < w ? static_cast<double>(i) / 2.0 : static_cast<double>(i) - (w - 1) / 2.0;
        EXPECT_NEAR(c[i].reward_smoothed, expect, 1e-12) << i;
        EXPECT_NEAR(c[i].throughput_smoothed, 2.0 * expect, 1e-12);
        EXPECT_NEAR(c[i].success_smoothed, 0.5, 1e-12);
    }
}

TEST(Output, CsvCarriesHashLine) {
    const AppConfig c;
    const std::string hash = config_hash(c);
    std::ostringstream m, l, k;
    write_metrics_csv(m, {MetricsRow{}}, hash);
    write_training_log_csv(l, log_of({1, 2}), hash);
    write_curves_csv(k, emit_training_curves(log_of({1, 2}), 2), hash);
    for (const auto* os : {&m, &l, &k}) {
        std::istringstream is(os->str());
        std::string first, header;
        std::getline(is, first);
        std::getline(is, header);
        EXPECT_EQ(first, "# config_hash=" + hash);
        EXPECT_EQ(header.rfind("episode", 0) == 0 || header.rfind("policy", 0) == 0, true) << header;
    }
}

TEST(Output, TraceIsJsonLines) {
    std::vector<TraceRecord> t(2);
    t[1].t = 1;
    std::ostringstream os;
    write_trace_jsonl(os, t);
    std::istringstream is(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j.at("t").get<std::size_t>(), n);
        ++n;
    }
    EXPECT_EQ(n, 2u);
}

TEST(Sweep, OracleAlwaysSucceedsAndBeatsRandom) {
    const auto r = run_sweep(small_bench());
    ASSERT_EQ(r.rows.size(), 3u);
    const MetricsRow& oracle = r.rows[0];
    const MetricsRow& random = r.rows[1];
    EXPECT_EQ(oracle.policy, "oracle");
    EXPECT_EQ(oracle.success_rate, 1.0);
    EXPECT_EQ(oracle.episodes, 20u);
    EXPECT_EQ(oracle.episode_se.size(), 20u);
    EXPECT_TRUE(exceeds_with_confidence(oracle.episode_se, random.episode_se));
    EXPECT_GT(oracle.se, r.rows[2].se);
    EXPECT_EQ(r.rows[2].epsilon, small_bench().bench.epsilon_cqi);
}

TEST(Sweep, Deterministic) {
    const auto a = run_sweep(small_bench());
    const auto b = run_sweep(small_bench());
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].episode_se, b.rows[i].episode_se);
}

TEST(Sweep, ZeroEpisodesAndMissingAgent) {
    AppConfig c = small_bench();
    c.bench.episodes = 0;
    EXPECT_TRUE(run_sweep(c).rows.empty());
    c.bench.episodes = 2;
    c.bench.policies = {"agent"};
    EXPECT_THROW(run_sweep(c), Error);
}

TEST(Sweep, TracesKeyedByPolicyAndSnr) {
    AppConfig c = small_bench();
    c.bench.episodes = 2;
    c.bench.policies = {"oracle"};
    c.bench.write_traces = true;
    const auto r = run_sweep(c);
    ASSERT_EQ(r.traces.count("oracle@12"), 1u);
    EXPECT_EQ(r.traces.at("oracle@12").size(), 2u * c.env.scenario.horizon);
}
