// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>

#include "uwacr/core.hpp"

namespace uwacr::dsp {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Unnormalized transform, forward kernel exp(-2*pi*i*k*n/N).
// Radix-2 for power-of-two sizes, direct evaluation otherwise.
inline void fft_inplace(CVec& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    const double sign = inverse ? 1.0 : -1.0;
    if (!is_pow2(n)) {
        CVec out(n);
        for (std::size_t k = 0; k < n; ++k) {
            cplx acc = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = sign * 2.0 * kPi * static_cast<double>((k * t) % n) / static_cast<double>(n);
                acc += a[t] * cplx(std::cos(ang), std::sin(ang));
            }
            out[k] = acc;
        }
        a.swap(out);
        return;
    }
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    // twiddles evaluated directly, not by recurrence, to keep machine precision
    thread_local CVec table;
    thread_local std::size_t table_n = 0;
    if (table_n != n) {
        table.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
            table[k] = {std::cos(ang), std::sin(ang)};
        }
        table_n = n;
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < half; ++j) {
                const cplx w = inverse ? std::conj(table[j * stride]) : table[j * stride];
                const cplx u = a[i + j];
                const cplx v = a[i + j + half] * w;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
}

/// Unitary DFT (the F of the signal model): ||dft(x)|| == ||x||.
inline CVec dft(CVec x) {
    fft_inplace(x, false);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : x) v *= s;
    return x;
}

/// Unitary inverse DFT (F^H).
inline CVec idft(CVec x) {
    fft_inplace(x, true);
    const double s = 1.0 / std::sqrt(static_cast<double>(x.size()));
    for (auto& v : x) v *= s;
    return x;
}

/// Frequency response sum_l h[l] exp(-2 pi i k l / n), k = 0..n-1.
inline CVec frequency_response(const CVec& h, std::size_t n) {
    CVec padded(n, cplx{0.0, 0.0});
    for (std::size_t i = 0; i < h.size() && i < n; ++i) padded[i] = h[i];
    fft_inplace(padded, false);
    return padded;
}

}  // namespace uwacr::dsp
