// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace uwacr {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using RVec = std::vector<double>;
using Rng = std::mt19937_64;

inline constexpr double kPi = 3.14159265358979323846;

// ----- errors ---------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error("config key '" + key + "': " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ChannelError : public Error {
public:
    using Error::Error;
};

class DelayOverflowError : public ChannelError {
public:
    using ChannelError::ChannelError;
};

class SingularChannelError : public Error {
public:
    SingularChannelError(std::size_t bin, double magnitude)
        : Error("channel response |D[" + std::to_string(bin) + "]| = " + std::to_string(magnitude) +
                " is below the singular-bin floor"),
          bin_(bin) {}
    std::size_t bin() const { return bin_; }

private:
    std::size_t bin_;
};

class WindowUnderrunError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

// ----- small helpers --------------------------------------------------------

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double norm(Vec3 v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

// splitmix64 finalizer; used to derive independent sub-seeds from (seed, tag).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double gaussian(Rng& rng, double stddev = 1.0) {
    return std::normal_distribution<double>(0.0, stddev)(rng);
}

// Circular complex Gaussian with E|z|^2 = variance.
inline cplx complex_gaussian(Rng& rng, double variance) {
    const double s = std::sqrt(variance / 2.0);
    const double re = gaussian(rng, 1.0);
    const double im = gaussian(rng, 1.0);
    return {s * re, s * im};
}

inline double energy(const CVec& v) {
    double e = 0.0;
    for (const auto& x : v) e += std::norm(x);
    return e;
}

inline std::size_t argmax(const RVec& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline std::size_t argmin(const RVec& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[best]) best = i;
    return best;
}

inline double mean(const RVec& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace uwacr
