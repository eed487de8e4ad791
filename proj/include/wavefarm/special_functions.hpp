#pragma once

#include <cmath>
#include <vector>

#include "wavefarm/constants.hpp"
#include "wavefarm/error.hpp"

namespace wavefarm {

namespace detail {

inline constexpr double kEulerGamma = 0.57721566490153286061;

// Power series, accurate to ~1e-14 absolute for x <= 8.
inline void bessel01_series(double x, double& j0, double& y0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double harmonic = 0.0;
    double sum_j = 1.0;
    double sum_y = 0.0;
    for (int k = 1; k < 60; ++k) {
        term *= -q / (static_cast<double>(k) * k);
        harmonic += 1.0 / k;
        sum_j += term;
        sum_y -= harmonic * term;
        if (std::abs(term) * (1.0 + harmonic) < 1e-18 * std::abs(sum_j) && k > 4) break;
    }
    j0 = sum_j;
    y0 = (2.0 / kPi) * ((std::log(0.5 * x) + kEulerGamma) * sum_j + sum_y);
}

// Miller backward recurrence with the Neumann series for Y0.
inline void bessel01_miller(double x, double& j0, double& y0) {
    int top = static_cast<int>(x) + 40;
    if (top % 2) ++top;
    double j_next = 0.0;
    double j_cur = 1e-30;
    double norm = 0.0;       // J0 + 2 sum J_2k
    double neumann = 0.0;    // sum_{k>=1} (-1)^(k+1) J_2k / k
    for (int n = top; n > 0; --n) {
        const double j_prev = 2.0 * n / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        const int m = n - 1;  // j_cur now holds J_m (unnormalized)
        if (m > 0 && m % 2 == 0) {
            norm += 2.0 * j_cur;
            const int k = m / 2;
            neumann += ((k % 2) ? 1.0 : -1.0) * j_cur / k;
        }
        if (std::abs(j_cur) > 1e250) {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
            neumann *= 1e-250;
        }
    }
    norm += j_cur;
    j0 = j_cur / norm;
    y0 = (2.0 / kPi) * ((std::log(0.5 * x) + kEulerGamma) * j0 + 2.0 * neumann / norm);
}

// Hankel asymptotic expansion, used for x >= 25 where the truncation error is ~exp(-2x).
inline void bessel01_asymptotic(double x, double& j0, double& y0) {
    const double inv8x = 1.0 / (8.0 * x);
    double p = 1.0;
    double q = 0.0;
    double a = 1.0;  // a_k / x^k
    double prev = 1.0;
    for (int k = 1; k < 60; ++k) {
        const double odd = 2.0 * k - 1.0;
        a *= odd * odd * inv8x / k;
        if (std::abs(a) > prev) break;  // series started diverging
        prev = std::abs(a);
        switch (k % 4) {
            case 1: q -= a; break;
            case 2: p -= a; break;
            case 3: q += a; break;
            case 0: p += a; break;
        }
        if (a < 1e-18) break;
    }
    const double s = std::sin(x);
    const double c = std::cos(x);
    // chi = x - pi/4
    const double cos_chi = (c + s) * std::numbers::sqrt2 * 0.5;
    const double sin_chi = (s - c) * std::numbers::sqrt2 * 0.5;
    const double amp = std::sqrt(2.0 / (kPi * x));
    j0 = amp * (p * cos_chi - q * sin_chi);
    y0 = amp * (p * sin_chi + q * cos_chi);
}

inline void bessel01(double x, double& j0, double& y0) {
    if (x < 8.0) {
        bessel01_series(x, j0, y0);
    } else if (x < 25.0) {
        bessel01_miller(x, j0, y0);
    } else {
        bessel01_asymptotic(x, j0, y0);
    }
}

}  // namespace detail

/// Bessel function of the first kind, order zero.
inline double bessel_j0(double x) {
    x = std::abs(x);
    if (x == 0.0) return 1.0;
    double j0, y0;
    detail::bessel01(x, j0, y0);
    return j0;
}

/// Bessel function of the second kind, order zero. Requires x > 0.
inline double bessel_y0(double x) {
    if (!(x > 0.0)) throw DomainError("bessel_y0: argument must be positive");
    double j0, y0;
    detail::bessel01(x, j0, y0);
    return y0;
}

}  // namespace wavefarm
