// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <sstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "uwacr/config.hpp"

namespace uwacr {

struct MetricsRow {
    std::string policy;
    double snr_db = 0.0;
    double se = 0.0;            // bps/Hz, failures count as 0
    double se_half_width = 0.0; // 95% normal interval over per-episode means
    double success_rate = 0.0;  // successes over transmission attempts
    double success_half_width = 0.0;
    double epsilon = 0.0;       // heuristic back-off, 0 for other policies
    std::size_t episodes = 0;
    RVec episode_se;            // per-episode means, kept for comparisons
    RVec episode_success;
};

inline constexpr double kZ95 = 1.959963984540054;

inline double half_width(const RVec& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) ss += (v - m) * (v - m);
    return kZ95 * std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()));
}

/// z statistic of mean(a) - mean(b) for independent per-episode samples.
inline double difference_z(const RVec& a, const RVec& b) {
    const double se = std::hypot(half_width(a), half_width(b)) / kZ95;
    const double d = mean(a) - mean(b);
    if (se == 0.0) return d > 0.0 ? std::numeric_limits<double>::infinity() : (d < 0.0 ? -std::numeric_limits<double>::infinity() : 0.0);
    return d / se;
}

/// mean(a) > mean(b) at the two-sided 95% level.
inline bool exceeds_with_confidence(const RVec& a, const RVec& b) { return difference_z(a, b) > kZ95; }

/// Decision maker used by the sweep; returns the action passed to step()
/// together with the decision it encodes.
class Policy {
public:
    virtual ~Policy() = default;
    virtual std::pair<ActionMatrix, Decision> act(const Environment& env, const Observation& obs, Rng& rng) = 0;
};

class AgentPolicy : public Policy {
public:
    explicit AgentPolicy(const Agent& agent) : agent_(agent) {}
    std::pair<ActionMatrix, Decision> act(const Environment&, const Observation& obs, Rng&) override {
        ActionMatrix a = agent_.greedy_action(obs);
        const Decision d = select_decision(a);
        return {std::move(a), d};
    }

private:
    const Agent& agent_;
};

class HeuristicPolicy : public Policy {
public:
    explicit HeuristicPolicy(EpsilonPolicyConfig cfg) : cfg_(cfg) {}
    std::pair<ActionMatrix, Decision> act(const Environment& env, const Observation& obs, Rng& rng) override {
        const Decision d = heuristic_decide(obs, cfg_, env.config().ofdm, env.config().sensing, rng());
        return {heuristic_action(obs, d, cfg_.epsilon), d};
    }

private:
    EpsilonPolicyConfig cfg_;
};

/// Reads the ground truth: best free RB at its achievable rate.
class OraclePolicy : public Policy {
public:
    std::pair<ActionMatrix, Decision> act(const Environment& env, const Observation&, Rng&) override {
        const GroundTruth& t = env.truth();
        const Decision d = env.oracle_decision();
        return {ActionMatrix::one_hot(t.v_rb.size(), d.rb, t.v_rate), d};
    }
};

/// Uniform RB, uniform rate in [0, rate_max].
class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(double rate_max) : rate_max_(rate_max) {}
    std::pair<ActionMatrix, Decision> act(const Environment& env, const Observation&, Rng& rng) override {
        const std::size_t n = env.config().ofdm.n_rb;
        RVec rate(n);
        for (double& r : rate) r = rate_max_ * uniform01(rng);
        const std::size_t rb = static_cast<std::size_t>(rng() % n);
        const Decision d{rb, rate[rb]};
        return {ActionMatrix::one_hot(n, rb, std::move(rate)), d};
    }

private:
    double rate_max_;
};

struct EpisodeStats {
    double se = 0.0;
    std::size_t attempts = 0;
    std::size_t successes = 0;
    double reward = 0.0;
};

/// Runs one episode; the trace of every step is appended when given.
inline EpisodeStats run_episode(Environment& env, Policy& policy, std::uint64_t seed, Rng& rng,
                                std::vector<TraceRecord>* trace = nullptr) {
    env.record_trace(trace != nullptr);
    Observation obs = env.reset(seed);
    EpisodeStats s;
    std::size_t steps = 0;
    while (!env.done()) {
        auto [a, d] = policy.act(env, obs, rng);
        const StepOutcome out = env.step(a, d);
        s.se += out.throughput;
        s.reward += out.reward;
        if (!out.skipped) {
            ++s.attempts;
            s.successes += out.success ? 1 : 0;
        }
        ++steps;
        obs = out.next;
    }
    s.se /= static_cast<double>(steps);
    s.reward /= static_cast<double>(steps);
    if (trace) trace->insert(trace->end(), env.trace().begin(), env.trace().end());
    env.record_trace(false);
    return s;
}

/// Evaluates a policy over episodes with seeds mix_seed(seed, e), shared by
/// every policy at a point.
inline MetricsRow evaluate_policy(const EnvConfig& env_cfg, Policy& policy, const std::string& id,
                                  std::size_t episodes, std::uint64_t seed, std::vector<TraceRecord>* trace = nullptr) {
    MetricsRow row;
    row.policy = id;
    row.snr_db = env_cfg.scenario.snr_db;
    row.episodes = episodes;
    if (episodes == 0) return row;
    Environment env(env_cfg);
    Rng rng(mix_seed(seed, 0x9011C7));
    std::size_t attempts = 0;
    std::size_t successes = 0;
    for (std::size_t e = 0; e < episodes; ++e) {
        const EpisodeStats s = run_episode(env, policy, mix_seed(seed, e), rng, trace);
        row.episode_se.push_back(s.se);
        row.episode_success.push_back(s.attempts ? static_cast<double>(s.successes) / static_cast<double>(s.attempts) : 0.0);
        attempts += s.attempts;
        successes += s.successes;
    }
    row.se = mean(row.episode_se);
    row.se_half_width = half_width(row.episode_se);
    row.success_rate = attempts ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.0;
    row.success_half_width = half_width(row.episode_success);
    return row;
}

struct SweepResult {
    std::vector<MetricsRow> rows;
    std::map<std::string, std::vector<TraceRecord>> traces;  // by "policy@snr"
};

inline std::string snr_label(double snr_db) {
    std::ostringstream os;
    os << snr_db;
    return os.str();
}

/// Every (policy, SNR) point of the config. The agent policy needs a
/// trained agent. Heuristic epsilons are calibrated per SNR point when
/// bench.calibrate is set, on seeds disjoint from the evaluation seeds.
inline SweepResult run_sweep(const AppConfig& cfg, const Agent* agent = nullptr) {
    cfg.validate();
    SweepResult out;
    const auto& b = cfg.bench;
    if (b.episodes == 0) return out;
    const bool needs_agent = std::find(b.policies.begin(), b.policies.end(), "agent") != b.policies.end();
    if (needs_agent && !agent) throw Error("run_sweep: the agent policy needs a trained checkpoint");
    for (double snr : b.snr_grid_db) {
        EnvConfig env_cfg = cfg.env;
        env_cfg.scenario.snr_db = snr;
        const std::uint64_t eval_seed = mix_seed(b.seed, static_cast<std::uint64_t>(std::llround(snr * 1000.0)) + 17);
        for (const auto& id : b.policies) {
            std::unique_ptr<Policy> policy;
            double eps = 0.0;
            if (id == "agent") {
                policy = std::make_unique<AgentPolicy>(*agent);
            } else if (id == "oracle") {
                policy = std::make_unique<OraclePolicy>();
            } else if (id == "random") {
                policy = std::make_unique<RandomPolicy>(b.random_rate_max);
            } else {
                EpsilonPolicyConfig pc;
                pc.mode = id == "ed_eps" ? HeuristicMode::EnergyDetection : HeuristicMode::Cqi;
                pc.k = id == "cqi_eps_random" ? 0 : 1;
                if (b.calibrate) {
                    eps = calibrate_epsilon(env_cfg, pc, b.calibration_target, b.calibration_decisions,
                                            mix_seed(eval_seed, 0xCA11B))
                              .epsilon;
                } else {
                    eps = pc.mode == HeuristicMode::Cqi ? b.epsilon_cqi : b.epsilon_ed;
                }
                pc.epsilon = eps;
                policy = std::make_unique<HeuristicPolicy>(pc);
            }
            std::vector<TraceRecord> trace;
            MetricsRow row = evaluate_policy(env_cfg, *policy, id, b.episodes, eval_seed, b.write_traces ? &trace : nullptr);
            row.epsilon = eps;
            if (b.write_traces) out.traces[id + "@" + snr_label(snr)] = std::move(trace);
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

// ----- persistence ----------------------------------------------------------

inline void write_hash_line(std::ostream& os, const std::string& hash) { os << "# config_hash=" << hash << '\n'; }

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows, const std::string& hash) {
    write_hash_line(os, hash);
    os << "policy,snr_db,se_bps_hz,se_ci95,success_rate,success_ci95,epsilon,episodes\n";
    os << std::setprecision(10);
    for (const auto& r : rows)
        os << r.policy << ',' << r.snr_db << ',' << r.se << ',' << r.se_half_width << ',' << r.success_rate << ','
           << r.success_half_width << ',' << r.epsilon << ',' << r.episodes << '\n';
}

struct CurveRow {
    std::size_t episode = 0;
    double reward = 0.0;
    double throughput = 0.0;
    double success_rate = 0.0;
    double reward_smoothed = 0.0;
    double throughput_smoothed = 0.0;
    double success_smoothed = 0.0;
};

/// Trailing moving average over the last `window` episodes (fewer at the
/// start); raw columns kept.
inline std::vector<CurveRow> emit_training_curves(const std::vector<TrainingLogRow>& log, std::size_t window) {
    if (window == 0) throw Error("smoothing window must be at least 1");
    std::vector<CurveRow> out;
    double sr = 0.0, st = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < log.size(); ++i) {
        sr += log[i].reward;
        st += log[i].throughput;
        ss += log[i].success_rate;
        if (i >= window) {
            sr -= log[i - window].reward;
            st -= log[i - window].throughput;
            ss -= log[i - window].success_rate;
        }
        const double n = static_cast<double>(std::min(i + 1, window));
        out.push_back({log[i].episode, log[i].reward, log[i].throughput, log[i].success_rate, sr / n, st / n, ss / n});
    }
    return out;
}

inline void write_training_log_csv(std::ostream& os, const std::vector<TrainingLogRow>& log, const std::string& hash) {
    write_hash_line(os, hash);
    os << "episode,reward,throughput,success_rate\n" << std::setprecision(12);
    for (const auto& r : log) os << r.episode << ',' << r.reward << ',' << r.throughput << ',' << r.success_rate << '\n';
}

inline void write_curves_csv(std::ostream& os, const std::vector<CurveRow>& rows, const std::string& hash) {
    write_hash_line(os, hash);
    os << "episode,reward,throughput,success_rate,reward_smoothed,throughput_smoothed,success_rate_smoothed\n"
       << std::setprecision(12);
    for (const auto& r : rows)
        os << r.episode << ',' << r.reward << ',' << r.throughput << ',' << r.success_rate << ',' << r.reward_smoothed
           << ',' << r.throughput_smoothed << ',' << r.success_smoothed << '\n';
}

/// One JSON object per step.
inline void write_trace_jsonl(std::ostream& os, const std::vector<TraceRecord>& trace) {
    for (const auto& r : trace) {
        nlohmann::json j = {{"t", r.t},           {"rb", r.rb},         {"rate", r.rate},
                            {"success", r.success}, {"skipped", r.skipped}, {"reward", r.reward},
                            {"v_rb", r.v_rb},     {"v_rate", r.v_rate}};
        os << j.dump() << '\n';
    }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error("cannot create output directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream os(path);
    if (!os) throw Error("cannot write " + path.string());
    return os;
}

/// resolved_config.json with the RB-to-bin map alongside.
inline void write_resolved_config(const std::filesystem::path& dir, const AppConfig& cfg) {
    nlohmann::json j = to_json(cfg);
    nlohmann::json map = nlohmann::json::array();
    for (std::size_t rb = 0; rb < cfg.env.ofdm.n_rb; ++rb) map.push_back(cfg.env.ofdm.rb_bins(rb));
    nlohmann::json out = {{"config", j}, {"config_hash", config_hash(cfg)}, {"rb_bins", map}};
    auto os = open_output(dir / "resolved_config.json");
    os << out.dump(2) << '\n';
}

}  // namespace uwacr
