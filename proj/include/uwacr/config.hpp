// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "uwacr/agent.hpp"
#include "uwacr/baselines.hpp"

namespace uwacr {

inline constexpr int kConfigVersion = 1;

struct BenchConfig {
    std::vector<double> snr_grid_db{-4, -2, 0, 2, 4, 6, 8, 10, 12};
    std::size_t episodes = 200;  // per (policy, SNR) point
    std::vector<std::string> policies{"agent", "ed_eps", "cqi_eps_k1", "cqi_eps_random", "oracle", "random"};
    std::uint64_t seed = 1;
    std::string checkpoint = "agent.json";
    bool calibrate = true;            // epsilon from calibration at each SNR point
    double epsilon_cqi = 0.37;        // used when calibrate is false
    double epsilon_ed = 0.39;
    double calibration_target = 0.9;
    std::size_t calibration_decisions = 2000;
    double random_rate_max = 6.0;     // bps/Hz, upper end of the random policy's rate
    std::size_t smoothing_window = 50;
    bool write_traces = false;
};

struct AppConfig {
    int version = kConfigVersion;
    EnvConfig env;
    AgentConfig agent;
    BenchConfig bench;

    void validate() const;
};

inline const std::vector<std::string>& known_policies() {
    static const std::vector<std::string> p{"agent", "ed_eps", "cqi_eps_k1", "cqi_eps_random", "oracle", "random"};
    return p;
}

inline void AppConfig::validate() const {
    if (version != kConfigVersion) throw ConfigError("version", "unsupported config version " + std::to_string(version));
    env.validate();
    agent.validate();
    if (agent.shape.n_sens != env.sensing.n_sens) throw ConfigError("agent.n_sens", "must equal sensing.n_sens");
    if (agent.shape.n_rb != env.ofdm.n_rb) throw ConfigError("agent.n_rb", "must equal ofdm.n_rb");
    if (bench.snr_grid_db.empty()) throw ConfigError("bench.snr_grid_db", "must not be empty");
    if (bench.policies.empty()) throw ConfigError("bench.policies", "at least one policy required");
    for (const auto& p : bench.policies)
        if (std::find(known_policies().begin(), known_policies().end(), p) == known_policies().end())
            throw ConfigError("bench.policies", "unknown policy '" + p + "'");
    if (!(bench.epsilon_cqi >= 0.0 && bench.epsilon_cqi < 1.0)) throw ConfigError("bench.epsilon_cqi", "must lie in [0, 1)");
    if (!(bench.epsilon_ed >= 0.0 && bench.epsilon_ed < 1.0)) throw ConfigError("bench.epsilon_ed", "must lie in [0, 1)");
    if (!(bench.calibration_target > 0.0 && bench.calibration_target < 1.0))
        throw ConfigError("bench.calibration_target", "must lie in (0, 1)");
    if (bench.calibration_decisions < 1000)
        throw ConfigError("bench.calibration_decisions", "at least 1000 decisions required");
    if (!(bench.random_rate_max > 0.0)) throw ConfigError("bench.random_rate_max", "must be positive");
    if (bench.smoothing_window < 1) throw ConfigError("bench.smoothing_window", "must be at least 1");
}

namespace detail {

template <typename E>
struct EnumNames;

template <>
struct EnumNames<GapDistribution> {
    static inline const std::vector<std::pair<GapDistribution, std::string>> names{
        {GapDistribution::Uniform, "uniform"},
        {GapDistribution::Asynchronous, "asynchronous"},
        {GapDistribution::Fixed, "fixed"}};
};
template <>
struct EnumNames<ThroughputTerm> {
    static inline const std::vector<std::pair<ThroughputTerm, std::string>> names{
        {ThroughputTerm::Realized, "realized"}, {ThroughputTerm::Estimate, "estimate"}};
};
template <>
struct EnumNames<WindowKind> {
    static inline const std::vector<std::pair<WindowKind, std::string>> names{
        {WindowKind::Rectangular, "rectangular"}, {WindowKind::Hann, "hann"}};
};
template <>
struct EnumNames<ConvActivation> {
    static inline const std::vector<std::pair<ConvActivation, std::string>> names{
        {ConvActivation::LogCosh, "logcosh"}, {ConvActivation::Tanh, "tanh"}};
};

/// Reads one section, remembering which keys were consumed.
class SectionReader {
public:
    SectionReader(const nlohmann::json& root, std::string name) : name_(std::move(name)) {
        if (!root.contains(name_)) return;
        obj_ = &root.at(name_);
        if (!obj_->is_object()) throw ConfigError(name_, "section must be an object");
    }

    template <typename T>
    void field(const std::string& key, T& out) {
        if (!obj_) return;
        seen_.insert(key);
        auto it = obj_->find(key);
        if (it == obj_->end()) return;
        try {
            read(*it, out);
        } catch (const nlohmann::json::exception&) {
            throw ConfigError(name_ + "." + key, "wrong type");
        } catch (const std::invalid_argument& e) {
            throw ConfigError(name_ + "." + key, e.what());
        }
    }

    void finish() const {
        if (!obj_) return;
        for (auto it = obj_->begin(); it != obj_->end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(name_ + "." + it.key(), "unknown key");
    }

private:
    template <typename T>
    static void read(const nlohmann::json& j, T& out) {
        if constexpr (std::is_enum_v<T>) {
            const std::string s = j.get<std::string>();
            for (const auto& [v, n] : EnumNames<T>::names)
                if (n == s) {
                    out = v;
                    return;
                }
            throw std::invalid_argument("unknown value '" + s + "'");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw std::invalid_argument("expected a boolean");
            out = j.get<bool>();
        } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
            if (!j.is_number_integer() || j.get<long long>() < 0) throw std::invalid_argument("expected a nonnegative integer");
            out = j.get<T>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
            out = j.get<T>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!j.is_number()) throw std::invalid_argument("expected a number");
            out = j.get<T>();
        } else {
            out = j.get<T>();
        }
    }

    std::string name_;
    const nlohmann::json* obj_ = nullptr;
    std::set<std::string> seen_;
};

class SectionWriter {
public:
    explicit SectionWriter(nlohmann::json& root, const std::string& name) : obj_(root[name]) {
        obj_ = nlohmann::json::object();
    }

    template <typename T>
    void field(const std::string& key, const T& v) {
        if constexpr (std::is_enum_v<T>) {
            for (const auto& [e, n] : EnumNames<T>::names)
                if (e == v) obj_[key] = n;
        } else {
            obj_[key] = v;
        }
    }
    void finish() const {}

private:
    nlohmann::json& obj_;
};

/// Single table of every config key, shared by reading and writing.
template <typename Io, typename Cfg>
void visit_config(const std::function<Io(const std::string&)>& section, Cfg& c) {
    {
        Io s = section("ofdm");
        auto& o = c.env.ofdm;
        s.field("n_fft", o.n_fft);
        s.field("symbol_duration", o.symbol_duration);
        s.field("cp_duration", o.cp_duration);
        s.field("n_rb", o.n_rb);
        s.field("subcarriers_per_rb", o.subcarriers_per_rb);
        s.field("carrier_hz", o.carrier_hz);
        s.field("passband_sample_period", o.passband_sample_period);
        s.field("symbols_per_packet", o.symbols_per_packet);
        s.finish();
    }
    {
        Io s = section("acoustic");
        auto& a = c.env.acoustic;
        s.field("sound_speed", a.sound_speed);
        s.field("reference_distance", a.reference_distance);
        s.field("spreading_exponent", a.spreading_exponent);
        s.field("absorption_frequency_hz", a.absorption_frequency_hz);
        s.field("surface_reflection", a.surface_reflection);
        s.field("bottom_reflection", a.bottom_reflection);
        s.field("max_bounces", a.max_bounces);
        s.field("min_diffuse", a.min_diffuse);
        s.field("max_diffuse", a.max_diffuse);
        s.field("diffuse_mean_interarrival", a.diffuse_mean_interarrival);
        s.field("diffuse_decay", a.diffuse_decay);
        s.field("diffuse_gain", a.diffuse_gain);
        s.field("spread_cap", a.spread_cap);
        s.field("direct_path_only", a.direct_path_only);
        s.finish();
    }
    {
        Io s = section("sensing");
        auto& x = c.env.sensing;
        s.field("n_sens", x.n_sens);
        s.field("window", x.window);
        s.field("symbols", x.symbols);
        s.finish();
    }
    {
        Io s = section("scenario");
        auto& x = c.env.scenario;
        s.field("num_nodes", x.num_nodes);
        s.field("min_active", x.min_active);
        s.field("max_active", x.max_active);
        s.field("snr_db", x.snr_db);
        s.field("snr_spread_db", x.snr_spread_db);
        s.field("gap_distribution", x.gap_distribution);
        s.field("gap_max", x.gap_max);
        s.field("gap_fixed", x.gap_fixed);
        s.field("gap_drift", x.gap_drift);
        s.field("mean_dwell", x.mean_dwell);
        s.field("horizon", x.horizon);
        s.field("static_channels", x.static_channels);
        std::int64_t geometry_seed = x.geometry_seed ? static_cast<std::int64_t>(*x.geometry_seed) : -1;
        s.field("geometry_seed", geometry_seed);
        if (geometry_seed >= 0)
            x.geometry_seed = static_cast<std::uint64_t>(geometry_seed);
        else
            x.geometry_seed.reset();
        s.field("collision_free_start", x.collision_free_start);
        s.field("beacon_interference", x.beacon_interference);
        s.field("ideal_cqi", x.ideal_cqi);
        s.field("beacon_symbols", x.beacon_symbols);
        s.field("drift_speed", x.drift_speed);
        s.field("signal_power", x.signal_power);
        s.field("singular_floor", c.env.singular_floor);
        s.finish();
    }
    {
        Io s = section("reward");
        auto& r = c.env.reward;
        for (std::size_t i = 0; i < r.w.size(); ++i) s.field("w" + std::to_string(i + 1), r.w[i]);
        s.field("throughput_term", r.throughput_term);
        s.finish();
    }
    {
        Io s = section("agent");
        auto& a = c.agent;
        s.field("n_sens", a.shape.n_sens);
        s.field("n_rb", a.shape.n_rb);
        s.field("conv_channels", a.shape.conv_channels);
        s.field("conv_width", a.shape.conv_width);
        s.field("conv_stride", a.shape.conv_stride);
        s.field("pool", a.shape.pool);
        s.field("sensing_features", a.shape.sensing_features);
        s.field("hidden1", a.shape.hidden1);
        s.field("hidden2", a.shape.hidden2);
        s.field("conv_activation", a.shape.conv_activation);
        s.field("gamma", a.gae.gamma);
        s.field("lambda", a.gae.lambda);
        s.field("actor_learning_rate", a.actor_learning_rate);
        s.field("critic_learning_rate", a.critic_learning_rate);
        s.field("final_learning_rate_fraction", a.final_learning_rate_fraction);
        s.field("entropy_coef", a.entropy_coef);
        s.field("rate_sigma_initial", a.rate_sigma_initial);
        s.field("rate_sigma_final", a.rate_sigma_final);
        s.field("rate_sigma_decay", a.rate_sigma_decay);
        s.field("initial_rate", a.initial_rate);
        s.field("max_grad_norm", a.max_grad_norm);
        s.field("center_advantages", a.center_advantages);
        s.field("bootstrap_at_horizon", a.bootstrap_at_horizon);
        s.field("episodes", a.episodes);
        s.field("episodes_per_update", a.episodes_per_update);
        s.field("plateau_window", a.plateau_window);
        s.field("plateau_tolerance", a.plateau_tolerance);
        s.field("plateau_patience", a.plateau_patience);
        s.field("seed", a.seed);
        s.finish();
    }
    {
        Io s = section("bench");
        auto& b = c.bench;
        s.field("snr_grid_db", b.snr_grid_db);
        s.field("episodes", b.episodes);
        s.field("policies", b.policies);
        s.field("seed", b.seed);
        s.field("checkpoint", b.checkpoint);
        s.field("calibrate", b.calibrate);
        s.field("epsilon_cqi", b.epsilon_cqi);
        s.field("epsilon_ed", b.epsilon_ed);
        s.field("calibration_target", b.calibration_target);
        s.field("calibration_decisions", b.calibration_decisions);
        s.field("random_rate_max", b.random_rate_max);
        s.field("smoothing_window", b.smoothing_window);
        s.field("write_traces", b.write_traces);
        s.finish();
    }
}

}  // namespace detail

inline const std::vector<std::string>& config_sections() {
    static const std::vector<std::string> s{"ofdm", "acoustic", "sensing", "scenario", "reward", "agent", "bench"};
    return s;
}

/// Strict reader: unknown sections or keys and ill-typed values raise
/// ConfigError naming the dotted key. Missing keys keep their defaults.
inline AppConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("<root>", "config must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "version" && std::find(config_sections().begin(), config_sections().end(), it.key()) ==
                                         config_sections().end())
            throw ConfigError(it.key(), "unknown section");
    if (!j.contains("version")) throw ConfigError("version", "missing");
    if (!j.at("version").is_number_integer()) throw ConfigError("version", "expected an integer");
    AppConfig c;
    c.version = j.at("version").get<int>();
    if (c.version != kConfigVersion) throw ConfigError("version", "unsupported config version " + std::to_string(c.version));
    // agent input sizes follow the environment unless given explicitly
    const bool explicit_sens = j.contains("agent") && j.at("agent").is_object() && j.at("agent").contains("n_sens");
    const bool explicit_rb = j.contains("agent") && j.at("agent").is_object() && j.at("agent").contains("n_rb");
    detail::visit_config<detail::SectionReader, AppConfig>(
        [&j](const std::string& name) { return detail::SectionReader(j, name); }, c);
    if (!explicit_sens) c.agent.shape.n_sens = c.env.sensing.n_sens;
    if (!explicit_rb) c.agent.shape.n_rb = c.env.ofdm.n_rb;
    c.validate();
    return c;
}

inline AppConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("<root>", std::string("malformed config: ") + e.what());
    }
    return parse_config(j);
}

inline AppConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("cannot open config file " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str());
}

/// Fully resolved config, every key present.
inline nlohmann::json to_json(const AppConfig& c) {
    nlohmann::json j;
    j["version"] = c.version;
    AppConfig copy = c;
    detail::visit_config<detail::SectionWriter, AppConfig>(
        [&j](const std::string& name) { return detail::SectionWriter(j, name); }, copy);
    return j;
}

/// FNV-1a 64 of the canonical (sorted-key, compact) resolved config.
inline std::string config_hash(const AppConfig& c) {
    const std::string text = to_json(c).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace uwacr
