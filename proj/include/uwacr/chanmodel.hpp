// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "uwacr/core.hpp"

namespace uwacr {

inline constexpr int kSinkNode = -1;

struct LinkId {
    int source = 0;
    int destination = kSinkNode;
    friend bool operator==(const LinkId&, const LinkId&) = default;
};

/// Node placement inside the simulation box. z is depth, 0 at the surface.
struct Geometry3D {
    std::vector<Vec3> nodes;
    Vec3 sink{500.0, 500.0, 100.0};
    Vec3 drift{0.0, 0.0, 0.0};  // m/s, shared by all sensor nodes
    Vec3 box{1000.0, 1000.0, 200.0};

    bool inside(Vec3 p) const {
        return p.x >= 0.0 && p.x <= box.x && p.y >= 0.0 && p.y <= box.y && p.z >= 0.0 && p.z <= box.z;
    }

    Vec3 position(int node) const {
        if (node == kSinkNode) return sink;
        if (node < 0 || static_cast<std::size_t>(node) >= nodes.size())
            throw Error("node id " + std::to_string(node) + " out of range");
        return nodes[static_cast<std::size_t>(node)];
    }

    void validate() const {
        if (!inside(sink)) throw Error("sink lies outside the simulation box");
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (!inside(nodes[i])) throw Error("node " + std::to_string(i) + " lies outside the simulation box");
    }

    /// Moves every sensor node by drift * dt, reflecting at the box walls.
    void advance(double dt) {
        auto reflect = [](double v, double hi) {
            if (hi <= 0.0) return 0.0;
            const double period = 2.0 * hi;
            double m = std::fmod(v, period);
            if (m < 0.0) m += period;
            return m <= hi ? m : period - m;
        };
        for (auto& p : nodes) {
            p = p + dt * drift;
            p = {reflect(p.x, box.x), reflect(p.y, box.y), reflect(p.z, box.z)};
        }
    }

    static Geometry3D random(std::size_t count, Rng& rng, Vec3 box = {1000.0, 1000.0, 200.0},
                             double min_sink_distance = 50.0) {
        Geometry3D g;
        g.box = box;
        g.sink = {box.x / 2.0, box.y / 2.0, box.z / 2.0};
        g.nodes.reserve(count);
        while (g.nodes.size() < count) {
            const Vec3 p{uniform01(rng) * box.x, uniform01(rng) * box.y, uniform01(rng) * box.z};
            if (norm(p - g.sink) < min_sink_distance) continue;
            g.nodes.push_back(p);
        }
        return g;
    }
};

struct Tap {
    double delay = 0.0;  // seconds
    cplx gain{0.0, 0.0};
    friend bool operator==(const Tap&, const Tap&) = default;
};

struct ChannelImpulseResponse {
    std::vector<Tap> taps;
    LinkId link;

    double energy() const {
        double e = 0.0;
        for (const auto& t : taps) e += std::norm(t.gain);
        return e;
    }

    double delay_spread() const {
        if (taps.empty()) return 0.0;
        return taps.back().delay - taps.front().delay;
    }

    void validate() const {
        if (taps.empty()) throw ChannelError("impulse response has no taps");
        for (std::size_t i = 0; i < taps.size(); ++i) {
            if (!(taps[i].delay >= 0.0) || !std::isfinite(taps[i].delay))
                throw ChannelError("tap " + std::to_string(i) + " has an invalid delay");
            if (i > 0 && taps[i].delay < taps[i - 1].delay) throw ChannelError("taps are not sorted by delay");
        }
        const double e = energy();
        if (!(e > 0.0) || !std::isfinite(e)) throw ChannelError("impulse response energy must be finite and positive");
    }

    /// Same taps with the bulk propagation delay removed (first arrival at 0).
    /// The receiver synchronizes to the first arrival; the bulk delay of an
    /// interfering link is carried by its time gap instead.
    ChannelImpulseResponse relative_to_first_arrival() const {
        ChannelImpulseResponse out = *this;
        if (out.taps.empty()) return out;
        const double t0 = out.taps.front().delay;
        for (auto& t : out.taps) t.delay -= t0;
        return out;
    }
};

/// Baseband tap samples of a link at a fixed sampling period.
struct DiscreteChannel {
    CVec h;
    double sampling_period = 0.0;

    std::size_t length() const { return h.size(); }
    double energy() const { return uwacr::energy(h); }

    void validate(std::size_t n_fft) const {
        if (h.empty()) throw ChannelError("discrete channel is empty");
        if (h.size() > n_fft) throw ChannelError("discrete channel longer than the FFT size");
        if (!(energy() > 0.0)) throw ChannelError("discrete channel has zero energy");
    }

    static DiscreteChannel identity(double sampling_period = 1.0) { return {CVec{cplx{1.0, 0.0}}, sampling_period}; }
};

/// Parameters of the multipath surrogate.
struct AcousticConfig {
    double sound_speed = 1500.0;        // m/s
    double reference_distance = 1000.0; // m, unit spreading gain
    double spreading_exponent = 1.5;    // practical spreading
    double absorption_frequency_hz = 1200.0;
    double surface_reflection = 0.9;    // amplitude per surface bounce
    double bottom_reflection = 0.5;     // amplitude per bottom bounce
    int max_bounces = 3;
    std::size_t min_diffuse = 0;        // extra scattered arrivals per link
    std::size_t max_diffuse = 4;
    double diffuse_mean_interarrival = 0.004;  // s
    double diffuse_decay = 0.010;              // s, amplitude e-folding time
    double diffuse_gain = 0.5;
    double spread_cap = 0.030;          // s, arrivals later than this after the first are dropped
    bool direct_path_only = false;

    void validate() const {
        if (!(sound_speed > 0.0)) throw ConfigError("acoustic.sound_speed", "must be positive");
        if (!(reference_distance > 0.0)) throw ConfigError("acoustic.reference_distance", "must be positive");
        if (spreading_exponent < 0.0) throw ConfigError("acoustic.spreading_exponent", "must be nonnegative");
        if (surface_reflection < 0.0 || surface_reflection > 1.0)
            throw ConfigError("acoustic.surface_reflection", "must lie in [0, 1]");
        if (bottom_reflection < 0.0 || bottom_reflection > 1.0)
            throw ConfigError("acoustic.bottom_reflection", "must lie in [0, 1]");
        if (max_bounces < 0) throw ConfigError("acoustic.max_bounces", "must be nonnegative");
        if (min_diffuse > max_diffuse) throw ConfigError("acoustic.min_diffuse", "exceeds max_diffuse");
        if (!(diffuse_mean_interarrival > 0.0))
            throw ConfigError("acoustic.diffuse_mean_interarrival", "must be positive");
        if (!(diffuse_decay > 0.0)) throw ConfigError("acoustic.diffuse_decay", "must be positive");
        if (diffuse_gain < 0.0) throw ConfigError("acoustic.diffuse_gain", "must be nonnegative");
        if (!(spread_cap >= 0.0)) throw ConfigError("acoustic.spread_cap", "must be nonnegative");
    }
};

/// Thorp absorption in dB/km at frequency f.
inline double thorp_db_per_km(double f_hz) {
    const double f = f_hz / 1000.0;
    const double f2 = f * f;
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003;
}

namespace detail {

struct ImageSource {
    double z;
    int surface_bounces;
    int bottom_bounces;
};

// Image sources for a flat waveguide [0, depth]; consecutive reflections
// alternate between the two boundaries.
inline std::vector<ImageSource> image_sources(double z_src, double depth, int max_bounces) {
    std::vector<ImageSource> out{{z_src, 0, 0}};
    struct Frontier {
        ImageSource img;
        int last;  // 0 none, 1 surface, 2 bottom
    };
    std::vector<Frontier> frontier{{{z_src, 0, 0}, 0}};
    for (int order = 1; order <= max_bounces; ++order) {
        std::vector<Frontier> next;
        for (const auto& f : frontier) {
            if (f.last != 1)
                next.push_back({{-f.img.z, f.img.surface_bounces + 1, f.img.bottom_bounces}, 1});
            if (f.last != 2)
                next.push_back({{2.0 * depth - f.img.z, f.img.surface_bounces, f.img.bottom_bounces + 1}, 2});
        }
        for (const auto& n : next) out.push_back(n.img);
        frontier = std::move(next);
    }
    return out;
}

}  // namespace detail

/// Multipath impulse response between two points.
///
/// Image-method arrivals (surface and bottom bounces with lumped per-bounce
/// loss) plus a random number of diffuse arrivals with exponential
/// inter-arrival times. Each path carries spreading loss, Thorp absorption and
/// a uniformly random phase (the direct path keeps phase 0). Arrivals more
/// than spread_cap after the first one are discarded.
inline ChannelImpulseResponse generate_cir(Vec3 src, Vec3 dst, LinkId link, const AcousticConfig& cfg,
                                           double water_depth, std::uint64_t seed) {
    cfg.validate();
    const double d0 = norm(dst - src);
    if (!(d0 > 0.0)) throw ChannelError("zero-distance link: source and destination coincide");

    Rng rng(seed);
    const double absorption_db = thorp_db_per_km(cfg.absorption_frequency_hz);
    auto path_amplitude = [&](double len) {
        const double spreading = std::pow(cfg.reference_distance / len, cfg.spreading_exponent / 2.0);
        return spreading * std::pow(10.0, -absorption_db * len / 1000.0 / 20.0);
    };

    ChannelImpulseResponse cir;
    cir.link = link;
    const double direct_amp = path_amplitude(d0);
    cir.taps.push_back({d0 / cfg.sound_speed, cplx{direct_amp, 0.0}});
    if (cfg.direct_path_only) return cir;

    const double horizontal = std::hypot(dst.x - src.x, dst.y - src.y);
    const auto images = detail::image_sources(src.z, water_depth, cfg.max_bounces);
    for (std::size_t i = 1; i < images.size(); ++i) {
        const auto& img = images[i];
        const double len = std::hypot(horizontal, dst.z - img.z);
        const double amp = path_amplitude(len) * std::pow(cfg.surface_reflection, img.surface_bounces) *
                           std::pow(cfg.bottom_reflection, img.bottom_bounces);
        const double phase = 2.0 * kPi * uniform01(rng);
        cir.taps.push_back({len / cfg.sound_speed, std::polar(amp, phase)});
    }

    const std::size_t span = cfg.max_diffuse - cfg.min_diffuse + 1;
    const std::size_t n_diffuse =
        cfg.min_diffuse + static_cast<std::size_t>(std::min<double>(uniform01(rng) * span, span - 1));
    std::exponential_distribution<double> interarrival(1.0 / cfg.diffuse_mean_interarrival);
    double excess = 0.0;
    for (std::size_t i = 0; i < n_diffuse; ++i) {
        excess += interarrival(rng);
        const double rayleigh = std::sqrt(-std::log(std::max(uniform01(rng), 1e-300)));
        const double amp = direct_amp * cfg.diffuse_gain * std::exp(-excess / cfg.diffuse_decay) * rayleigh;
        const double phase = 2.0 * kPi * uniform01(rng);
        cir.taps.push_back({d0 / cfg.sound_speed + excess, std::polar(amp, phase)});
    }

    std::stable_sort(cir.taps.begin(), cir.taps.end(), [](const Tap& a, const Tap& b) { return a.delay < b.delay; });
    const double first = cir.taps.front().delay;
    std::erase_if(cir.taps, [&](const Tap& t) { return t.delay - first > cfg.spread_cap; });
    return cir;
}

inline ChannelImpulseResponse generate_cir(const Geometry3D& geometry, LinkId link, const AcousticConfig& cfg,
                                           std::uint64_t seed) {
    geometry.validate();
    return generate_cir(geometry.position(link.source), geometry.position(link.destination), link, cfg,
                        geometry.box.z, seed);
}

/// Nearest-bin accumulation of taps onto a uniform grid.
///
/// Taps landing in distinct bins keep their energy exactly; taps sharing a
/// bin add coherently.
inline DiscreteChannel discretize(const ChannelImpulseResponse& cir, double sampling_period, std::size_t max_length) {
    if (!(sampling_period > 0.0)) throw ChannelError("sampling period must be positive");
    cir.validate();
    const double limit = static_cast<double>(max_length) * sampling_period;
    std::size_t last_bin = 0;
    std::vector<std::size_t> bins;
    bins.reserve(cir.taps.size());
    for (const auto& t : cir.taps) {
        if (t.delay >= limit) throw DelayOverflowError("tap delay " + std::to_string(t.delay) + " s exceeds the window");
        const auto b = static_cast<std::size_t>(std::llround(t.delay / sampling_period));
        if (b >= max_length) throw DelayOverflowError("tap delay rounds past the last bin");
        bins.push_back(b);
        last_bin = std::max(last_bin, b);
    }
    DiscreteChannel out{CVec(last_bin + 1, cplx{0.0, 0.0}), sampling_period};
    for (std::size_t i = 0; i < bins.size(); ++i) out.h[bins[i]] += cir.taps[i].gain;
    if (!(out.energy() > 0.0)) throw ChannelError("taps cancelled to a zero-energy channel");
    return out;
}

}  // namespace uwacr
