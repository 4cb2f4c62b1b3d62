// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "uwacr/chanmodel.hpp"
#include "uwacr/oracle.hpp"
#include "uwacr/phy.hpp"
#include "uwacr/sensing.hpp"

namespace uwacr {

// ----- actions and reward ---------------------------------------------------

/// Agent output [v_rb | v_rate]: an RB probability column and a rate column.
struct ActionMatrix {
    RVec rb_prob;
    RVec rate;

    void validate(std::size_t n_rb) const {
        if (rb_prob.size() != n_rb || rate.size() != n_rb) throw ShapeError("action matrix must be n_rb x 2");
        double sum = 0.0;
        for (double p : rb_prob) {
            if (!(p >= 0.0)) throw Error("action probabilities must be nonnegative");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw Error("action probabilities must sum to 1");
        for (double r : rate)
            if (!(r >= 0.0)) throw Error("action rates must be nonnegative");
    }

    /// One-hot probability column at rb with the given rate vector.
    static ActionMatrix one_hot(std::size_t n_rb, std::size_t rb, RVec rate) {
        ActionMatrix a{RVec(n_rb, 0.0), std::move(rate)};
        a.rb_prob[rb] = 1.0;
        return a;
    }
};

struct Decision {
    std::size_t rb = 0;
    double rate = 0.0;
};

/// rb* = argmax(v_rate * v_rb), lowest index on ties; rate = v_rate[rb*].
inline Decision select_decision(const ActionMatrix& a) {
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.rb_prob.size(); ++i) {
        const double v = a.rate[i] * a.rb_prob[i];
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    return {best, a.rate[best]};
}

enum class ThroughputTerm {
    Estimate,  // w7 multiplies the agent's own rate at its chosen RB
    Realized,  // w7 multiplies the realized throughput (0 on failure)
};

struct RewardWeights {
    std::array<double, 7> w{1.0, 1.0, 1.0, 1.0, 0.5, 0.5, 1.0};
    ThroughputTerm throughput_term = ThroughputTerm::Realized;

    void validate() const {
        for (std::size_t i = 0; i < w.size(); ++i)
            if (!(w[i] >= 0.0)) throw ConfigError("reward.w" + std::to_string(i + 1), "must be nonnegative");
        if (!(w[4] > 0.0 || w[5] > 0.0 || w[6] > 0.0))
            throw ConfigError("reward.w5", "at least one of w5, w6, w7 must be positive");
    }
};

struct RewardTerms {
    double rb = 0.0;
    double rate = 0.0;
    double throughput = 0.0;
    double total = 0.0;
};

inline constexpr double kProbabilityFloor = 1e-12;

/// Auxiliary terms and total reward.
///   r_rb   = -w1 CE(v_rb_hat, argmax v_rate) - w2 MSE(v_rb_hat, v_rb)
///   r_rate = -w3 MSE(clip(v_rate_hat), v_rate) - w4 (v_rate_hat[j*] - max v_rate)^2
///   r      = w5 r_rb + w6 r_rate + w7 throughput_value
/// clip() zeroes every estimate exceeding the achievable rate. CE uses the
/// natural log with probabilities floored at 1e-12.
inline RewardTerms reward_terms(const ActionMatrix& a, const GroundTruth& truth, const RewardWeights& weights,
                                double throughput_value) {
    const std::size_t n = truth.v_rb.size();
    if (a.rb_prob.size() != n || a.rate.size() != n) throw ShapeError("reward: action and truth sizes differ");
    if (!truth.any_available()) throw StateError("reward undefined: every RB is occupied");
    const auto& w = weights.w;
    const std::size_t best = argmax(truth.v_rate);
    const double best_rate = truth.v_rate[best];

    const double ce = -std::log(std::max(a.rb_prob[best], kProbabilityFloor));
    double mse_rb = 0.0;
    double mse_rate = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mse_rb += (a.rb_prob[i] - truth.v_rb[i]) * (a.rb_prob[i] - truth.v_rb[i]);
        const double clipped = a.rate[i] > truth.v_rate[i] ? 0.0 : a.rate[i];
        mse_rate += (clipped - truth.v_rate[i]) * (clipped - truth.v_rate[i]);
    }
    mse_rb /= static_cast<double>(n);
    mse_rate /= static_cast<double>(n);
    const double best_err = (a.rate[best] - best_rate) * (a.rate[best] - best_rate);

    RewardTerms t;
    t.rb = -w[0] * ce - w[1] * mse_rb;
    t.rate = -w[2] * mse_rate - w[3] * best_err;
    t.throughput = throughput_value;
    t.total = w[4] * t.rb + w[5] * t.rate + w[6] * throughput_value;
    return t;
}

/// Reward with the throughput term read literally: the agent's own rate
/// estimate at argmax(v_rate_hat * v_rb_hat).
inline double compute_reward(const ActionMatrix& a, const GroundTruth& truth, const RewardWeights& weights) {
    return reward_terms(a, truth, weights, select_decision(a).rate).total;
}

inline constexpr double kRateSlack = 1e-12;

/// Success iff the RB is free and the rate does not exceed the achievable rate.
inline bool transmission_succeeds(const Decision& d, const GroundTruth& truth) {
    return truth.v_rb[d.rb] > 0.5 && d.rate <= truth.v_rate[d.rb] * (1.0 + kRateSlack);
}

/// Throughput term value for a decision under the given reward convention.
inline double throughput_term_value(const Decision& d, const GroundTruth& truth, ThroughputTerm term) {
    if (term == ThroughputTerm::Estimate) return d.rate;
    return transmission_succeeds(d, truth) ? d.rate : 0.0;
}

/// Best reward reachable by a one-hot RB choice over free RBs and rates on
/// a grid of the given step, all other rate entries set to the truth.
inline double oracle_best_reward(const GroundTruth& truth, const RewardWeights& weights, double rate_step = 0.01) {
    if (!(rate_step > 0.0)) throw Error("oracle_best_reward: rate step must be positive");
    if (!truth.any_available()) throw StateError("oracle_best_reward: every RB is occupied");
    const std::size_t n = truth.v_rb.size();
    const double top = *std::max_element(truth.v_rate.begin(), truth.v_rate.end());
    const auto steps = static_cast<std::size_t>(std::ceil(top / rate_step)) + 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t rb = 0; rb < n; ++rb) {
        if (truth.v_rb[rb] < 0.5) continue;
        for (std::size_t q = 0; q <= steps; ++q) {
            ActionMatrix a = ActionMatrix::one_hot(n, rb, truth.v_rate);
            a.rate[rb] = static_cast<double>(q) * rate_step;
            const Decision d{rb, a.rate[rb]};
            best = std::max(best, reward_terms(a, truth, weights,
                                               throughput_term_value(d, truth, weights.throughput_term)).total);
        }
    }
    return best;
}

// ----- scenario -------------------------------------------------------------

enum class GapDistribution {
    Uniform,       // integer uniform in [-gap_max, gap_max]
    Asynchronous,  // as Uniform, excluding offsets the cyclic prefix absorbs
    Fixed,         // always gap_fixed
};

struct ScenarioConfig {
    std::size_t num_nodes = 6;  // node 0 is the learner
    std::size_t min_active = 1;
    std::size_t max_active = 3;
    double snr_db = 6.0;
    double snr_spread_db = 0.0;  // per-episode SNR uniform in snr_db +- spread
    GapDistribution gap_distribution = GapDistribution::Uniform;
    long gap_max = 0;            // 0 selects half a symbol period
    long gap_fixed = 0;
    long gap_drift = 0;          // samples per OFDM symbol within a packet
    double mean_dwell = 8.0;     // steps an interferer holds its RB; 0 = whole episode
    std::size_t horizon = 64;
    bool static_channels = false;
    std::optional<std::uint64_t> geometry_seed;  // fixed placement and channels across episodes
    bool collision_free_start = true;
    bool beacon_interference = false;
    bool ideal_cqi = false;
    std::size_t beacon_symbols = 1;
    double drift_speed = 0.0;    // m/s
    double signal_power = 1.0;

    long resolved_gap_max(const OfdmConfig& ofdm) const {
        return gap_max > 0 ? gap_max : static_cast<long>(ofdm.symbol_samples()) / 2;
    }

    void validate(const OfdmConfig& ofdm) const {
        if (num_nodes < 1) throw ConfigError("scenario.num_nodes", "must be at least 1");
        if (min_active > max_active) throw ConfigError("scenario.min_active", "exceeds max_active");
        if (max_active + 1 > num_nodes) throw ConfigError("scenario.max_active", "more active nodes than interferers");
        if (collision_free_start && max_active > ofdm.n_rb)
            throw ConfigError("scenario.max_active", "infeasible: more active nodes than RBs");
        if (horizon < 1) throw ConfigError("scenario.horizon", "must be at least 1");
        if (mean_dwell < 0.0 || (mean_dwell > 0.0 && mean_dwell < 1.0))
            throw ConfigError("scenario.mean_dwell", "must be 0 or at least 1");
        if (gap_max < 0 || gap_max >= static_cast<long>(ofdm.symbol_samples()))
            throw ConfigError("scenario.gap_max", "must lie in [0, n_fft + cp)");
        if (std::labs(gap_fixed) >= static_cast<long>(ofdm.symbol_samples()))
            throw ConfigError("scenario.gap_fixed", "must lie within one symbol period");
        if (gap_distribution == GapDistribution::Asynchronous && resolved_gap_max(ofdm) < 1)
            throw ConfigError("scenario.gap_max", "asynchronous gaps need a nonzero range");
        if (beacon_symbols < 1) throw ConfigError("scenario.beacon_symbols", "must be at least 1");
        if (!(signal_power > 0.0)) throw ConfigError("scenario.signal_power", "must be positive");
        if (snr_spread_db < 0.0) throw ConfigError("scenario.snr_spread_db", "must be nonnegative");
        if (drift_speed < 0.0) throw ConfigError("scenario.drift_speed", "must be nonnegative");
    }
};

struct EnvConfig {
    OfdmConfig ofdm;
    AcousticConfig acoustic;
    SensingConfig sensing;
    ScenarioConfig scenario;
    RewardWeights reward;
    double singular_floor = kSingularFloor;

    void validate() const {
        ofdm.validate();
        acoustic.validate();
        sensing.validate(ofdm);
        scenario.validate(ofdm);
        reward.validate();
        if (acoustic.spread_cap > ofdm.cp_duration + 1e-12)
            throw ConfigError("acoustic.spread_cap", "delay spread cap exceeds the cyclic prefix");
    }
};

struct ActiveNode {
    int node = 0;
    std::size_t rb = 0;
};

struct StepOutcome {
    double reward = 0.0;
    RewardTerms terms;
    bool success = false;
    bool skipped = false;  // no free RB, nothing transmitted
    double throughput = 0.0;
    Decision decision;
    GroundTruth truth;
    Observation next;
    bool done = false;
};

struct TraceRecord {
    std::size_t t = 0;
    std::size_t rb = 0;
    double rate = 0.0;
    bool success = false;
    bool skipped = false;
    double reward = 0.0;
    RVec v_rb;
    RVec v_rate;
};

/// Cognitive-radio episode: one learning node (node 0) facing scripted
/// asynchronous interferers on an OFDMA uplink to a single sink.
class Environment {
public:
    explicit Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        beacon_ = make_beacon(cfg_.ofdm);
    }

    const EnvConfig& config() const { return cfg_; }

    Observation reset(std::uint64_t seed) {
        const auto& sc = cfg_.scenario;
        rng_.seed(seed);
        t_ = 0;
        done_ = false;
        started_ = true;
        trace_.clear();

        snr_db_ = sc.snr_db;
        if (sc.snr_spread_db > 0.0) snr_db_ += (2.0 * uniform01(rng_) - 1.0) * sc.snr_spread_db;

        if (sc.geometry_seed) {
            Rng g(*sc.geometry_seed);
            geometry_ = Geometry3D::random(sc.num_nodes, g);
            channel_seed_ = mix_seed(*sc.geometry_seed, 0xC0FFEE);
        } else {
            geometry_ = Geometry3D::random(sc.num_nodes, rng_);
            channel_seed_ = rng_();
        }
        geometry_.drift = {0.0, 0.0, 0.0};
        if (sc.drift_speed > 0.0) {
            const double az = 2.0 * kPi * uniform01(rng_);
            geometry_.drift = {sc.drift_speed * std::cos(az), sc.drift_speed * std::sin(az), 0.0};
        }

        // active set
        const std::size_t span = sc.max_active - sc.min_active + 1;
        const std::size_t count = sc.min_active + static_cast<std::size_t>(rng_() % span);
        std::vector<int> candidates;
        for (std::size_t i = 1; i < sc.num_nodes; ++i) candidates.push_back(static_cast<int>(i));
        std::vector<std::size_t> rbs(cfg_.ofdm.n_rb);
        for (std::size_t i = 0; i < rbs.size(); ++i) rbs[i] = i;
        shuffle(candidates);
        shuffle(rbs);
        active_.clear();
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t rb = sc.collision_free_start ? rbs[i] : static_cast<std::size_t>(rng_() % cfg_.ofdm.n_rb);
            active_.push_back({candidates[i], rb});
        }

        channels_.assign(sc.num_nodes, {});
        refresh_frame(true);
        return obs_;
    }

    /// Applies an action. The decision defaults to select_decision(a); a
    /// stochastic policy or a heuristic may pass its own.
    StepOutcome step(const ActionMatrix& a, std::optional<Decision> decision = std::nullopt) {
        if (!started_) throw StateError("step called before reset");
        if (done_) throw StateError("episode already terminated");
        a.validate(cfg_.ofdm.n_rb);
        StepOutcome out;
        out.decision = decision ? *decision : select_decision(a);
        if (out.decision.rb >= cfg_.ofdm.n_rb) throw ShapeError("decision RB out of range");
        out.truth = truth_;
        if (!truth_.any_available()) {
            out.skipped = true;
        } else {
            out.success = transmission_succeeds(out.decision, truth_);
            out.throughput = out.success ? out.decision.rate : 0.0;
            out.terms = reward_terms(a, truth_, cfg_.reward,
                                     throughput_term_value(out.decision, truth_, cfg_.reward.throughput_term));
            out.reward = out.terms.total;
        }
        if (record_trace_)
            trace_.push_back({t_, out.decision.rb, out.decision.rate, out.success, out.skipped, out.reward,
                              truth_.v_rb, truth_.v_rate});

        ++t_;
        advance();
        out.next = obs_;
        out.done = done_;
        return out;
    }

    bool done() const { return done_; }
    std::size_t time() const { return t_; }
    const Observation& observation() const { return obs_; }
    const GroundTruth& truth() const { return truth_; }
    const std::vector<ActiveNode>& active() const { return active_; }
    double noise_variance() const { return noise_variance_; }
    double snr_db() const { return snr_db_; }
    const Geometry3D& geometry() const { return geometry_; }
    const DiscreteChannel& learner_channel() const { return learner_channel_; }
    const std::vector<InterferenceSource>& sources() const { return sources_; }

    void record_trace(bool on) { record_trace_ = on; }
    const std::vector<TraceRecord>& trace() const { return trace_; }

    /// Best free RB at its achievable rate (reads the ground truth).
    Decision oracle_decision() const {
        const std::size_t rb = argmax(truth_.v_rate);
        return {rb, truth_.v_rate[rb]};
    }

private:
    struct NodeChannels {
        bool valid = false;
        DiscreteChannel to_sink;
        DiscreteChannel to_learner;
    };

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng_() % i)]);
    }

    DiscreteChannel make_channel(int src, int dst, std::uint64_t seed) const {
        const auto cir = generate_cir(geometry_, LinkId{src, dst}, cfg_.acoustic, seed).relative_to_first_arrival();
        return discretize(cir, cfg_.ofdm.sample_period(), cfg_.ofdm.n_fft);
    }

    void ensure_channels(int node, bool regenerate) {
        auto& c = channels_[static_cast<std::size_t>(node)];
        if (c.valid && !regenerate) return;
        const std::uint64_t epoch = cfg_.scenario.static_channels ? 0 : static_cast<std::uint64_t>(t_) + 1;
        const std::uint64_t base = mix_seed(channel_seed_, epoch);
        c.to_sink = make_channel(node, kSinkNode, mix_seed(base, 2 * static_cast<std::uint64_t>(node)));
        if (node != 0) c.to_learner = make_channel(node, 0, mix_seed(base, 2 * static_cast<std::uint64_t>(node) + 1));
        c.valid = true;
    }

    long draw_gap(std::size_t channel_length) {
        const auto& sc = cfg_.scenario;
        if (sc.gap_distribution == GapDistribution::Fixed) return sc.gap_fixed;
        const long g_max = sc.resolved_gap_max(cfg_.ofdm);
        const long absorbed = static_cast<long>(cfg_.ofdm.cp_samples()) - static_cast<long>(channel_length) + 1;
        for (;;) {
            const long g = static_cast<long>(rng_() % static_cast<std::uint64_t>(2 * g_max + 1)) - g_max;
            if (sc.gap_distribution == GapDistribution::Asynchronous && g >= 0 && g <= absorbed) continue;
            return g;
        }
    }

    static bool same_sources(const std::vector<InterferenceSource>& a, const std::vector<InterferenceSource>& b) {
        if (a.size() != b.size()) return false;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].gap != b[i].gap || a[i].power != b[i].power || a[i].allocation != b[i].allocation ||
                a[i].channel.h != b[i].channel.h)
                return false;
        return true;
    }

    void refresh_frame(bool regenerate_all) {
        const auto& sc = cfg_.scenario;
        const auto& ofdm = cfg_.ofdm;
        const bool regen = regenerate_all || !sc.static_channels;
        if (regenerate_all) std::fill(channels_.begin(), channels_.end(), NodeChannels{});
        ensure_channels(0, regen);
        for (const auto& a : active_) ensure_channels(a.node, regen);
        learner_channel_ = channels_[0].to_sink;
        const CirculantOperator h(learner_channel_, ofdm.n_fft);

        double mean_gain = 0.0;
        for (std::size_t k : ofdm.all_rb_bins()) mean_gain += std::norm(h.eigenvalues()[k]);
        mean_gain /= static_cast<double>(ofdm.occupied_bins());
        noise_variance_ = sc.signal_power * mean_gain / std::pow(10.0, snr_db_ / 10.0);

        sources_.clear();
        std::vector<InterfererSpec> sensing_specs;
        for (const auto& a : active_) {
            const auto& c = channels_[static_cast<std::size_t>(a.node)];
            const auto bins = ofdm.rb_bins(a.rb);
            sources_.push_back({c.to_sink, draw_gap(c.to_sink.length()), bins, sc.signal_power});
            InterfererSpec spec;
            spec.node = a.node;
            spec.channel = c.to_learner;
            spec.gap = draw_gap(c.to_learner.length());
            spec.allocation = bins;
            spec.power = sc.signal_power;
            sensing_specs.push_back(std::move(spec));
        }
        if (!truth_cache_valid_ || !same_sources(sources_, cached_sources_) || cached_noise_ != noise_variance_ ||
            cached_channel_.h != learner_channel_.h) {
            truth_ = ground_truth(h, sources_, noise_variance_, sc.signal_power, ofdm, sc.gap_drift,
                                  cfg_.singular_floor);
            cached_sources_ = sources_;
            cached_noise_ = noise_variance_;
            cached_channel_ = learner_channel_;
            truth_cache_valid_ = true;
        }

        // beacon from the sink over the reciprocal learner link
        if (sc.ideal_cqi) {
            obs_.cqi = compute_cqi(beacon_, h, noise_variance_, sc.signal_power, ofdm, cfg_.singular_floor);
        } else {
            std::vector<CVec> beacon_rx;
            DataSymbol pilot{beacon_.pilots, beacon_.bins, 1.0};
            for (std::size_t b = 0; b < sc.beacon_symbols; ++b) {
                std::vector<InterfererSpec> interferers;
                if (sc.beacon_interference) {
                    interferers = sensing_specs;
                    for (auto& s : interferers) draw_interferer_symbols(s, ofdm, rng_);
                }
                beacon_rx.push_back(
                    synthesize_received(learner_channel_, pilot, interferers, noise_variance_, rng_(), ofdm).y());
            }
            obs_.cqi = beacon_cqi(beacon_rx, beacon_, noise_variance_, sc.signal_power, ofdm);
        }

        // spectrum sensing at the learner
        const std::size_t m = cfg_.sensing.dft_length(ofdm);
        CVec samples(m, cplx{0.0, 0.0});
        for (const auto& spec : sensing_specs) {
            const long first = static_cast<long>(ofdm.cp_samples()) - spec.gap;
            const auto [j0, j1] = symbols_for_window(first, m, spec.channel.length(), ofdm);
            std::vector<CVec> symbols;
            for (long j = j0; j <= j1; ++j) symbols.push_back(make_data_symbol(ofdm.n_fft, spec.allocation, spec.power, rng_).d);
            const auto stream = make_ofdm_stream(symbols, j0, ofdm);
            const CVec c = convolve_window(spec.channel, stream, first, m);
            for (std::size_t i = 0; i < m; ++i) samples[i] += c[i];
        }
        for (auto& s : samples) s += complex_gaussian(rng_, noise_variance_);
        obs_.spectrum = observe_spectrum(samples, ofdm, cfg_.sensing);
        obs_.noise_variance = noise_variance_;
    }

    void advance() {
        const auto& sc = cfg_.scenario;
        if (t_ >= sc.horizon) done_ = true;
        if (sc.mean_dwell > 0.0) {
            const double leave = 1.0 / sc.mean_dwell;
            for (std::size_t i = 0; i < active_.size(); ++i) {
                if (uniform01(rng_) >= leave) continue;
                std::vector<int> idle;
                for (std::size_t n = 1; n < sc.num_nodes; ++n) {
                    const bool busy = std::any_of(active_.begin(), active_.end(),
                                                  [&](const ActiveNode& a) { return a.node == static_cast<int>(n); });
                    if (!busy) idle.push_back(static_cast<int>(n));
                }
                std::vector<std::size_t> free_rbs;
                for (std::size_t rb = 0; rb < cfg_.ofdm.n_rb; ++rb) {
                    const bool used = std::any_of(active_.begin(), active_.end(), [&](const ActiveNode& a) {
                        return a.rb == rb && a.node != active_[i].node;
                    });
                    if (!used) free_rbs.push_back(rb);
                }
                if (!idle.empty()) active_[i].node = idle[static_cast<std::size_t>(rng_() % idle.size())];
                if (!free_rbs.empty()) active_[i].rb = free_rbs[static_cast<std::size_t>(rng_() % free_rbs.size())];
            }
        }
        if (sc.drift_speed > 0.0 && !sc.static_channels) {
            const double dt = static_cast<double>(cfg_.ofdm.symbols_per_packet * cfg_.ofdm.symbol_samples()) *
                              cfg_.ofdm.sample_period();
            geometry_.advance(dt);
        }
        refresh_frame(false);
    }

    EnvConfig cfg_;
    BeaconSpec beacon_;
    Rng rng_;
    std::uint64_t channel_seed_ = 0;
    std::size_t t_ = 0;
    bool done_ = false;
    bool started_ = false;
    double snr_db_ = 0.0;
    Geometry3D geometry_;
    std::vector<ActiveNode> active_;
    std::vector<NodeChannels> channels_;
    DiscreteChannel learner_channel_;
    std::vector<InterferenceSource> sources_;
    double noise_variance_ = 0.0;
    GroundTruth truth_;
    bool truth_cache_valid_ = false;
    std::vector<InterferenceSource> cached_sources_;
    double cached_noise_ = 0.0;
    DiscreteChannel cached_channel_;
    Observation obs_;
    bool record_trace_ = false;
    std::vector<TraceRecord> trace_;
};

}  // namespace uwacr
