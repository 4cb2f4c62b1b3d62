// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uwacr/env.hpp"
#include "uwacr/nn.hpp"

namespace uwacr {

struct GaeConfig {
    double gamma = 0.95;
    double lambda = 0.9;

    void validate() const {
        if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma", "must lie in (0, 1]");
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("agent.lambda", "must lie in [0, 1]");
    }
};

/// a_t = sum_l (gamma lambda)^l delta_{t+l},
/// delta_t = r_t + gamma V_{t+1} - V_t, with V_T = bootstrap.
/// rewards[t] is the reward that follows the action taken at t.
inline RVec compute_gae(const RVec& rewards, const RVec& values, double bootstrap, const GaeConfig& cfg) {
    if (values.size() != rewards.size()) throw ShapeError("compute_gae: one value per step required");
    const std::size_t n = rewards.size();
    RVec adv(n, 0.0);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double next = i + 1 < n ? values[i + 1] : bootstrap;
        const double delta = rewards[i] + cfg.gamma * next - values[i];
        running = delta + cfg.gamma * cfg.lambda * running;
        adv[i] = running;
    }
    return adv;
}

struct AgentConfig {
    NetworkShape shape;
    GaeConfig gae;
    double actor_learning_rate = 3e-4;
    double critic_learning_rate = 1e-3;
    double final_learning_rate_fraction = 1.0;  // linear anneal target, 1 keeps rates constant
    double entropy_coef = 0.0;
    double rate_sigma_initial = 0.5;
    double rate_sigma_final = 0.05;
    double rate_sigma_decay = 0.998;  // per episode, multiplicative
    double initial_rate = 1.0;        // rate head output at initialization
    double max_grad_norm = 5.0;       // 0 disables clipping
    bool center_advantages = true;
    bool bootstrap_at_horizon = true;
    std::size_t episodes = 2000;      // T_max
    std::size_t episodes_per_update = 1;
    std::size_t plateau_window = 0;   // 0 disables plateau stopping
    double plateau_tolerance = 1e-3;
    std::size_t plateau_patience = 200;
    std::uint64_t seed = 1;

    void validate() const {
        shape.validate();
        gae.validate();
        if (!(actor_learning_rate > 0.0)) throw ConfigError("agent.actor_learning_rate", "must be positive");
        if (critic_learning_rate < actor_learning_rate)
            throw ConfigError("agent.critic_learning_rate", "must be at least the actor learning rate");
        if (!(final_learning_rate_fraction > 0.0 && final_learning_rate_fraction <= 1.0))
            throw ConfigError("agent.final_learning_rate_fraction", "must lie in (0, 1]");
        if (entropy_coef < 0.0) throw ConfigError("agent.entropy_coef", "must be nonnegative");
        if (!(rate_sigma_initial > 0.0)) throw ConfigError("agent.rate_sigma_initial", "must be positive");
        if (!(rate_sigma_final > 0.0) || rate_sigma_final > rate_sigma_initial)
            throw ConfigError("agent.rate_sigma_final", "must lie in (0, rate_sigma_initial]");
        if (!(rate_sigma_decay > 0.0 && rate_sigma_decay <= 1.0))
            throw ConfigError("agent.rate_sigma_decay", "must lie in (0, 1]");
        if (!(initial_rate > 0.0)) throw ConfigError("agent.initial_rate", "must be positive");
        if (max_grad_norm < 0.0) throw ConfigError("agent.max_grad_norm", "must be nonnegative");
        if (episodes_per_update == 0) throw ConfigError("agent.episodes_per_update", "must be positive");
        if (plateau_window > 0 && plateau_patience == 0)
            throw ConfigError("agent.plateau_patience", "must be positive when plateau stopping is on");
    }

    /// Learning-rate multiplier at an episode: 1 at the start, the final
    /// fraction at the last episode.
    double learning_rate_scale_at(std::size_t episode) const {
        if (episodes < 2) return 1.0;
        const double progress = static_cast<double>(episode) / static_cast<double>(episodes - 1);
        return 1.0 - (1.0 - final_learning_rate_fraction) * std::min(progress, 1.0);
    }

    double sigma_at(std::size_t episode) const {
        return std::max(rate_sigma_final, rate_sigma_initial * std::pow(rate_sigma_decay, static_cast<double>(episode)));
    }
};

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct PolicyOutput {
    RVec logits;
    RVec prob;       // v_rb_hat
    RVec rate_pre;
    RVec rate;       // v_rate_hat = softplus(rate_pre)

    ActionMatrix action() const { return {prob, rate}; }
};

inline PolicyOutput policy_from_outputs(const RVec& out, std::size_t n_rb) {
    if (out.size() != 2 * n_rb) throw ShapeError("actor output must have 2 n_rb entries");
    PolicyOutput po;
    po.logits.assign(out.begin(), out.begin() + static_cast<long>(n_rb));
    po.rate_pre.assign(out.begin() + static_cast<long>(n_rb), out.end());
    const double top = *std::max_element(po.logits.begin(), po.logits.end());
    double z = 0.0;
    po.prob.resize(n_rb);
    for (std::size_t i = 0; i < n_rb; ++i) z += po.prob[i] = std::exp(po.logits[i] - top);
    for (double& p : po.prob) p /= z;
    for (double x : po.rate_pre) po.rate.push_back(softplus(x));
    return po;
}

struct SampledAction {
    ActionMatrix action;  // [v_rb_hat | sampled rates clamped at 0]
    Decision decision;
    RVec rate_sample;     // before clamping
    double sigma = 0.0;   // 0 in greedy mode
    double log_prob = 0.0;
};

/// Categorical RB, Gaussian rate column. Greedy mode takes argmax v_rb_hat
/// and the head's rate exactly.
inline SampledAction sample_action(const PolicyOutput& po, bool explore, double sigma, Rng& rng) {
    const std::size_t n = po.prob.size();
    SampledAction s;
    if (!explore) {
        const std::size_t rb = argmax(po.prob);
        s.action = po.action();
        s.rate_sample = po.rate;
        s.decision = {rb, po.rate[rb]};
        s.log_prob = std::log(std::max(po.prob[rb], kProbabilityFloor));
        return s;
    }
    if (!(sigma > 0.0)) throw Error("sample_action: exploration scale must be positive");
    const double u = uniform01(rng);
    std::size_t rb = n - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += po.prob[i];
        if (u < acc) {
            rb = i;
            break;
        }
    }
    s.sigma = sigma;
    s.rate_sample.resize(n);
    s.action.rb_prob = po.prob;
    s.action.rate.resize(n);
    s.log_prob = std::log(std::max(po.prob[rb], kProbabilityFloor));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = gaussian(rng);
        s.rate_sample[i] = po.rate[i] + sigma * z;
        s.action.rate[i] = std::max(0.0, s.rate_sample[i]);
        s.log_prob += -0.5 * z * z - std::log(sigma * std::sqrt(2.0 * kPi));
    }
    s.decision = {rb, s.action.rate[rb]};
    return s;
}

/// Joint log-density of a sampled action under the policy output.
inline double action_log_prob(const PolicyOutput& po, std::size_t rb, const RVec& rate_sample, double sigma) {
    double lp = std::log(std::max(po.prob[rb], kProbabilityFloor));
    for (std::size_t i = 0; i < rate_sample.size(); ++i) {
        const double z = (rate_sample[i] - po.rate[i]) / sigma;
        lp += -0.5 * z * z - std::log(sigma * std::sqrt(2.0 * kPi));
    }
    return lp;
}

inline double policy_entropy(const PolicyOutput& po) {
    double h = 0.0;
    for (double p : po.prob)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

struct TrajectoryStep {
    NetInput input;
    std::size_t rb = 0;
    RVec rate_sample;
    double sigma = 1.0;
    double reward = 0.0;  // follows the action taken at this step
    double value = 0.0;
    double log_prob = 0.0;
};

struct Trajectory {
    std::size_t episode = 0;
    std::vector<TrajectoryStep> steps;
    double bootstrap = 0.0;  // V of the state after the last step, 0 if terminal

    RVec rewards() const {
        RVec r;
        for (const auto& s : steps) r.push_back(s.reward);
        return r;
    }
    RVec values() const {
        RVec v;
        for (const auto& s : steps) v.push_back(s.value);
        return v;
    }
};

inline RVec compute_gae(const Trajectory& traj, const GaeConfig& cfg) {
    return compute_gae(traj.rewards(), traj.values(), traj.bootstrap, cfg);
}

struct UpdateDiagnostics {
    double actor_objective = 0.0;
    double critic_loss = 0.0;
    double actor_grad_norm = 0.0;
    double critic_grad_norm = 0.0;
    double mean_advantage = 0.0;
    bool rejected = false;
    std::string incident;
};

inline double l2_norm(const RVec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Actor and critic sharing the two-part layout with separate parameters.
class Agent {
public:
    Agent() = default;
    explicit Agent(AgentConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        actor_ = TwoPartNet(cfg_.shape, 2 * cfg_.shape.n_rb);
        critic_ = TwoPartNet(cfg_.shape, 1);
        Rng rng(mix_seed(cfg_.seed, 0xA11CE));
        theta_ = actor_.initialize(rng, 0.1);
        const double rate_bias = std::log(std::expm1(cfg_.initial_rate));
        for (std::size_t i = 0; i < cfg_.shape.n_rb; ++i)
            theta_[actor_.output_bias_offset() + cfg_.shape.n_rb + i] = rate_bias;
        w_ = critic_.initialize(rng, 0.1);
        reset_optimizers();
    }

    const AgentConfig& config() const { return cfg_; }
    const TwoPartNet& actor_net() const { return actor_; }
    const TwoPartNet& critic_net() const { return critic_; }
    const RVec& actor_params() const { return theta_; }
    const RVec& critic_params() const { return w_; }
    RVec& actor_params() { return theta_; }
    RVec& critic_params() { return w_; }

    void scale_learning_rates(double scale) {
        actor_opt_.set_learning_rate(scale * cfg_.actor_learning_rate);
        critic_opt_.set_learning_rate(scale * cfg_.critic_learning_rate);
    }

    void reset_optimizers() {
        actor_opt_ = Adam(theta_.size(), {cfg_.actor_learning_rate});
        critic_opt_ = Adam(w_.size(), {cfg_.critic_learning_rate});
    }

    PolicyOutput actor_forward(const RVec& theta, const NetInput& in, NetCache* cache = nullptr) const {
        NetCache local;
        return policy_from_outputs(actor_.forward(theta, in, cache ? *cache : local), cfg_.shape.n_rb);
    }
    PolicyOutput actor_forward(const NetInput& in) const { return actor_forward(theta_, in); }

    double critic_forward(const RVec& w, const NetInput& in, NetCache* cache = nullptr) const {
        NetCache local;
        return critic_.forward(w, in, cache ? *cache : local)[0];
    }
    double critic_forward(const NetInput& in) const { return critic_forward(w_, in); }

    /// Greedy action matrix for an observation; the environment applies
    /// its own decision rule to it.
    ActionMatrix greedy_action(const Observation& obs) const { return actor_forward(encode_observation(obs)).action(); }

    /// Surrogate sum_t A_t log pi(a_t|s_t) + beta H(s_t) and its gradient.
    double actor_objective(const RVec& theta, const std::vector<const TrajectoryStep*>& steps, const RVec& adv,
                           RVec* grad) const {
        if (steps.size() != adv.size()) throw ShapeError("actor_objective: one advantage per step required");
        const std::size_t n = cfg_.shape.n_rb;
        double obj = 0.0;
        NetCache cache;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const auto& s = *steps[t];
            const PolicyOutput po = actor_forward(theta, s.input, &cache);
            const double h = policy_entropy(po);
            obj += adv[t] * action_log_prob(po, s.rb, s.rate_sample, s.sigma) + cfg_.entropy_coef * h;
            if (!grad) continue;
            RVec d_out(2 * n, 0.0);  // gradient of the negated objective
            for (std::size_t i = 0; i < n; ++i) {
                const double d_logp = (i == s.rb ? 1.0 : 0.0) - po.prob[i];
                const double d_ent = -po.prob[i] * (std::log(std::max(po.prob[i], 1e-300)) + h);
                d_out[i] = -(adv[t] * d_logp + cfg_.entropy_coef * d_ent);
                const double d_rate = (s.rate_sample[i] - po.rate[i]) / (s.sigma * s.sigma);
                d_out[n + i] = -adv[t] * d_rate * sigmoid(po.rate_pre[i]);
            }
            actor_.backward(theta, cache, d_out, *grad);
        }
        return obj;
    }

    /// 0.5 sum_t (V(s_t) - target_t)^2 and its gradient.
    double critic_loss(const RVec& w, const std::vector<const TrajectoryStep*>& steps, const RVec& targets,
                       RVec* grad) const {
        if (steps.size() != targets.size()) throw ShapeError("critic_loss: one target per step required");
        double loss = 0.0;
        NetCache cache;
        for (std::size_t t = 0; t < steps.size(); ++t) {
            const double v = critic_forward(w, steps[t]->input, &cache);
            const double e = v - targets[t];
            loss += 0.5 * e * e;
            if (grad) critic_.backward(w, cache, RVec{e}, *grad);
        }
        return loss;
    }

    /// One A2C update on a batch of trajectories.
    UpdateDiagnostics update(const std::vector<Trajectory>& batch) {
        UpdateDiagnostics d;
        std::vector<const TrajectoryStep*> steps;
        RVec adv;
        RVec targets;
        for (const auto& traj : batch) {
            const RVec a = compute_gae(traj, cfg_.gae);
            for (std::size_t t = 0; t < traj.steps.size(); ++t) {
                steps.push_back(&traj.steps[t]);
                adv.push_back(a[t]);
                targets.push_back(a[t] + traj.steps[t].value);
            }
        }
        if (steps.empty()) return d;
        const double count = static_cast<double>(steps.size());
        d.mean_advantage = std::accumulate(adv.begin(), adv.end(), 0.0) / count;
        if (cfg_.center_advantages)
            for (double& a : adv) a -= d.mean_advantage;

        RVec g_actor(theta_.size(), 0.0);
        RVec g_critic(w_.size(), 0.0);
        d.actor_objective = actor_objective(theta_, steps, adv, &g_actor) / count;
        d.critic_loss = critic_loss(w_, steps, targets, &g_critic) / count;
        for (double& g : g_actor) g /= count;
        for (double& g : g_critic) g /= count;
        d.actor_grad_norm = l2_norm(g_actor);
        d.critic_grad_norm = l2_norm(g_critic);
        if (!std::isfinite(d.actor_grad_norm) || !std::isfinite(d.critic_grad_norm)) {
            d.rejected = true;
            d.incident = "non-finite gradient, update rejected";
            return d;
        }
        clip(g_actor, d.actor_grad_norm);
        clip(g_critic, d.critic_grad_norm);
        actor_opt_.step(theta_, g_actor);
        critic_opt_.step(w_, g_critic);
        return d;
    }

    nlohmann::json checkpoint() const {
        const auto& s = cfg_.shape;
        nlohmann::json shape = {{"n_sens", s.n_sens},
                                {"n_rb", s.n_rb},
                                {"conv_channels", s.conv_channels},
                                {"conv_width", s.conv_width},
                                {"conv_stride", s.conv_stride},
                                {"pool", s.pool},
                                {"sensing_features", s.sensing_features},
                                {"hidden1", s.hidden1},
                                {"hidden2", s.hidden2},
                                {"conv_activation", to_string(s.conv_activation)}};
        return {{"format", "uwacr-checkpoint"}, {"version", 1}, {"shape", shape}, {"actor", theta_}, {"critic", w_}};
    }

    void save(const std::string& path) const {
        std::ofstream os(path);
        if (!os) throw Error("cannot write checkpoint " + path);
        os << checkpoint().dump() << '\n';
        if (!os) throw Error("failed writing checkpoint " + path);
    }

    /// Loads parameters; the stored shape must equal the configured one.
    void restore(const nlohmann::json& j) {
        try {
            if (j.at("format") != "uwacr-checkpoint") throw Error("not a checkpoint");
            if (j.at("version") != 1) throw Error("unsupported checkpoint version");
            const auto& js = j.at("shape");
            NetworkShape s;
            s.n_sens = js.at("n_sens");
            s.n_rb = js.at("n_rb");
            s.conv_channels = js.at("conv_channels");
            s.conv_width = js.at("conv_width");
            s.conv_stride = js.at("conv_stride");
            s.pool = js.at("pool");
            s.sensing_features = js.at("sensing_features");
            s.hidden1 = js.at("hidden1");
            s.hidden2 = js.at("hidden2");
            s.conv_activation = js.at("conv_activation") == "tanh" ? ConvActivation::Tanh : ConvActivation::LogCosh;
            if (!(s == cfg_.shape)) throw ShapeError("checkpoint shape differs from the configured network");
            RVec theta = j.at("actor").get<RVec>();
            RVec w = j.at("critic").get<RVec>();
            if (theta.size() != theta_.size() || w.size() != w_.size())
                throw ShapeError("checkpoint parameter count differs from the configured network");
            theta_ = std::move(theta);
            w_ = std::move(w);
        } catch (const nlohmann::json::exception& e) {
            throw Error(std::string("malformed checkpoint: ") + e.what());
        }
        reset_optimizers();
    }

    void load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw Error("cannot read checkpoint " + path);
        nlohmann::json j;
        try {
            is >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error("malformed checkpoint " + path + ": " + e.what());
        }
        restore(j);
    }

private:
    void clip(RVec& g, double norm) const {
        if (cfg_.max_grad_norm <= 0.0 || norm <= cfg_.max_grad_norm) return;
        const double s = cfg_.max_grad_norm / norm;
        for (double& x : g) x *= s;
    }

    AgentConfig cfg_;
    TwoPartNet actor_;
    TwoPartNet critic_;
    RVec theta_;
    RVec w_;
    Adam actor_opt_;
    Adam critic_opt_;
};

struct TrainingLogRow {
    std::size_t episode = 0;
    double reward = 0.0;        // mean per-step reward
    double throughput = 0.0;    // mean realized throughput, failures as 0
    double success_rate = 0.0;  // over steps with a free RB
    double sigma = 0.0;
    double critic_loss = 0.0;
    bool rejected = false;
};

struct TrainResult {
    Agent agent;
    std::vector<TrainingLogRow> log;
    bool plateaued = false;
    std::size_t rejected_updates = 0;
};

/// Collects one episode with the stochastic policy.
inline Trajectory rollout(const Agent& agent, Environment& env, std::uint64_t seed, double sigma, Rng& rng,
                          TrainingLogRow* row = nullptr) {
    Trajectory traj;
    Observation obs = env.reset(seed);
    std::size_t attempts = 0;
    std::size_t successes = 0;
    double reward = 0.0;
    double throughput = 0.0;
    while (!env.done()) {
        TrajectoryStep st;
        st.input = encode_observation(obs);
        const PolicyOutput po = agent.actor_forward(st.input);
        const SampledAction sa = sample_action(po, true, sigma, rng);
        st.value = agent.critic_forward(st.input);
        const StepOutcome out = env.step(sa.action, sa.decision);
        st.rb = sa.decision.rb;
        st.rate_sample = sa.rate_sample;
        st.sigma = sa.sigma;
        st.reward = out.reward;
        st.log_prob = sa.log_prob;
        traj.steps.push_back(std::move(st));
        reward += out.reward;
        throughput += out.throughput;
        if (!out.skipped) {
            ++attempts;
            successes += out.success ? 1 : 0;
        }
        obs = out.next;
    }
    if (agent.config().bootstrap_at_horizon) traj.bootstrap = agent.critic_forward(encode_observation(obs));
    if (row) {
        const double n = static_cast<double>(traj.steps.size());
        row->reward = reward / n;
        row->throughput = throughput / n;
        row->success_rate = attempts ? static_cast<double>(successes) / static_cast<double>(attempts) : 0.0;
        row->sigma = sigma;
    }
    return traj;
}

/// Reset, rollout, advantage estimation and update, repeated for
/// cfg.episodes episodes or until the moving-average reward plateaus.
inline TrainResult train(const EnvConfig& env_cfg, const AgentConfig& cfg,
                         const std::function<void(const TrainingLogRow&)>& on_episode = {}) {
    TrainResult result{Agent(cfg), {}, false, 0};
    Environment env(env_cfg);
    Rng rng(mix_seed(cfg.seed, 0x5A3D1E));
    std::vector<Trajectory> batch;
    double best_avg = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    double window_sum = 0.0;
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        TrainingLogRow row;
        row.episode = ep;
        const double sigma = cfg.sigma_at(ep);
        batch.push_back(rollout(result.agent, env, mix_seed(cfg.seed, ep), sigma, rng, &row));
        batch.back().episode = ep;
        if (batch.size() == cfg.episodes_per_update || ep + 1 == cfg.episodes) {
            result.agent.scale_learning_rates(cfg.learning_rate_scale_at(ep));
            const UpdateDiagnostics d = result.agent.update(batch);
            row.critic_loss = d.critic_loss;
            row.rejected = d.rejected;
            if (d.rejected) ++result.rejected_updates;
            batch.clear();
        }
        result.log.push_back(row);
        if (on_episode) on_episode(row);

        if (cfg.plateau_window > 0) {
            window_sum += row.reward;
            if (result.log.size() > cfg.plateau_window) window_sum -= result.log[result.log.size() - 1 - cfg.plateau_window].reward;
            if (result.log.size() < cfg.plateau_window) continue;
            const double avg = window_sum / static_cast<double>(cfg.plateau_window);
            if (avg > best_avg + cfg.plateau_tolerance) {
                best_avg = avg;
                since_best = 0;
            } else if (++since_best >= cfg.plateau_patience) {
                result.plateaued = true;
                break;
            }
        }
    }
    return result;
}

}  // namespace uwacr
