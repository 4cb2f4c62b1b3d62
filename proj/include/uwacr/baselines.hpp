// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "uwacr/env.hpp"

namespace uwacr {

enum class HeuristicMode { Cqi, EnergyDetection };

/// epsilon-rate control: transmit (1 - epsilon) of the CQI-implied rate.
struct EpsilonPolicyConfig {
    double epsilon = 0.0;
    std::size_t k = 1;  // rank of the chosen CQI, 1 = best; 0 = uniformly random RB
    HeuristicMode mode = HeuristicMode::Cqi;

    bool random_rank() const { return k == 0; }

    void validate(std::size_t n_rb) const {
        if (!(epsilon >= 0.0 && epsilon < 1.0)) throw ConfigError("epsilon", "must lie in [0, 1)");
        if (k > n_rb) throw ConfigError("k", "must lie in [1, n_rb] or be 0 for random");
    }
};

inline double cqi_rate(double cqi) { return std::log2(1.0 + std::max(cqi, 0.0)); }

/// RB with the k-th largest CQI (stable: equal CQIs keep index order), or a
/// uniformly random RB when k is random.
inline Decision cqi_epsilon_decide(const RVec& cqi, const EpsilonPolicyConfig& cfg, std::uint64_t seed) {
    if (cqi.empty()) throw ShapeError("cqi vector is empty");
    cfg.validate(cqi.size());
    std::size_t rb = 0;
    if (cfg.random_rank()) {
        Rng rng(seed);
        rb = static_cast<std::size_t>(rng() % cqi.size());
    } else {
        std::vector<std::size_t> order(cqi.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cqi[a] > cqi[b]; });
        rb = order[cfg.k - 1];
    }
    return {rb, (1.0 - cfg.epsilon) * cqi_rate(cqi[rb])};
}

/// Least-energy RB, rate from its CQI.
inline Decision ed_epsilon_decide(const RVec& energy, const RVec& cqi, const EpsilonPolicyConfig& cfg) {
    if (energy.empty() || energy.size() != cqi.size()) throw ShapeError("energy and cqi vectors must match");
    cfg.validate(cqi.size());
    const std::size_t rb = argmin(energy);
    return {rb, (1.0 - cfg.epsilon) * cqi_rate(cqi[rb])};
}

/// Decision of a heuristic on an observation; seed drives the random rank.
inline Decision heuristic_decide(const Observation& obs, const EpsilonPolicyConfig& cfg, const OfdmConfig& ofdm,
                                 const SensingConfig& sensing, std::uint64_t seed) {
    if (cfg.mode == HeuristicMode::Cqi) return cqi_epsilon_decide(obs.cqi, cfg, seed);
    return ed_epsilon_decide(energy_detect(obs.spectrum, ofdm, sensing), obs.cqi, cfg);
}

/// Action matrix carrying a heuristic decision: one-hot RB, CQI rates.
inline ActionMatrix heuristic_action(const Observation& obs, const Decision& d, double epsilon) {
    RVec rate;
    for (double c : obs.cqi) rate.push_back((1.0 - epsilon) * cqi_rate(c));
    rate[d.rb] = d.rate;
    return ActionMatrix::one_hot(obs.cqi.size(), d.rb, std::move(rate));
}

/// One epsilon-free decision on a free RB, kept for replay under any epsilon.
struct CalibrationSample {
    double base_rate = 0.0;  // CQI-implied rate at epsilon = 0
    double achievable = 0.0;

    bool succeeds(double epsilon) const { return (1.0 - epsilon) * base_rate <= achievable * (1.0 + kRateSlack); }
};

/// Decisions at epsilon = 0 over fresh episodes. Only attempts on free RBs
/// are kept; the same samples are reused for every epsilon.
inline std::vector<CalibrationSample> collect_calibration_samples(const EnvConfig& env_cfg, EpsilonPolicyConfig family,
                                                                  std::size_t min_decisions, std::uint64_t seed) {
    family.epsilon = 0.0;
    Environment env(env_cfg);
    std::vector<CalibrationSample> out;
    std::size_t attempts = 0;
    for (std::uint64_t ep = 0; out.size() < min_decisions; ++ep) {
        Observation obs = env.reset(mix_seed(seed, ep));
        while (!env.done()) {
            const Decision d = heuristic_decide(obs, family, env_cfg.ofdm, env_cfg.sensing,
                                                mix_seed(seed ^ 0x9E37, attempts++));
            const GroundTruth& truth = env.truth();
            if (truth.v_rb[d.rb] > 0.5) out.push_back({d.rate, truth.v_rate[d.rb]});
            obs = env.step(heuristic_action(obs, d, 0.0), d).next;
        }
        if (ep > 100 * (min_decisions + 1)) throw Error("calibration: no decision lands on a free RB");
    }
    return out;
}

inline double success_fraction(const std::vector<CalibrationSample>& samples, double epsilon) {
    if (samples.empty()) throw Error("success_fraction: no samples");
    std::size_t ok = 0;
    for (const auto& s : samples) ok += s.succeeds(epsilon) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(samples.size());
}

struct CalibrationResult {
    double epsilon = 0.0;
    double success = 0.0;
    std::size_t decisions = 0;
};

/// Smallest epsilon (to the given resolution) whose success fraction meets
/// the target, by bisection on the monotone success curve.
inline CalibrationResult calibrate_epsilon(const std::vector<CalibrationSample>& samples, double target,
                                           double resolution = 1e-6) {
    if (!(target > 0.0 && target < 1.0)) throw Error("calibrate_epsilon: target must lie in (0, 1)");
    const double hi_limit = 1.0 - resolution;
    if (success_fraction(samples, hi_limit) < target)
        throw Error("calibrate_epsilon: target success unattainable for epsilon in [0, 1)");
    if (success_fraction(samples, 0.0) >= target) return {0.0, success_fraction(samples, 0.0), samples.size()};
    double lo = 0.0;
    double hi = hi_limit;
    while (hi - lo > resolution) {
        const double mid = 0.5 * (lo + hi);
        (success_fraction(samples, mid) >= target ? hi : lo) = mid;
    }
    return {hi, success_fraction(samples, hi), samples.size()};
}

inline CalibrationResult calibrate_epsilon(const EnvConfig& env_cfg, const EpsilonPolicyConfig& family, double target,
                                           std::size_t min_decisions = 1000, std::uint64_t seed = 1) {
    if (min_decisions < 1) throw Error("calibrate_epsilon: need at least one decision");
    return calibrate_epsilon(collect_calibration_samples(env_cfg, family, min_decisions, seed), target);
}

}  // namespace uwacr
