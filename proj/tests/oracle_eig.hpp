#pragma once

// Test-only spectral radius oracle for matrices up to 4x4: characteristic
// polynomial by Faddeev-LeVerrier, closed-form roots (quadratic formula,
// Cardano, Ferrari) polished by a few complex Newton steps. Entirely
// independent of the norm-growth estimator it checks.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "esnnet/tensor.hpp"

namespace oracle {

using cplx = std::complex<double>;

/// Monic characteristic polynomial coefficients c, p(x) = x^n + c[0] x^{n-1}
/// + ... + c[n-1], via Faddeev-LeVerrier.
inline std::vector<double> char_poly(const esnnet::Tensor<double>& w) {
    const std::size_t n = w.extent(0);
    std::vector<double> m(w.values().begin(), w.values().end());  // M_1 = A
    std::vector<double> a(w.values().begin(), w.values().end());
    std::vector<double> coeffs;
    for (std::size_t k = 1; k <= n; ++k) {
        double tr = 0;
        for (std::size_t i = 0; i < n; ++i) tr += m[i * n + i];
        const double ck = -tr / double(k);
        coeffs.push_back(ck);
        if (k == n) break;
        // M_{k+1} = A (M_k + c_k I)
        std::vector<double> shifted = m;
        for (std::size_t i = 0; i < n; ++i) shifted[i * n + i] += ck;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0;
                for (std::size_t l = 0; l < n; ++l) s += a[i * n + l] * shifted[l * n + j];
                m[i * n + j] = s;
            }
    }
    return coeffs;
}

inline std::vector<cplx> roots_quadratic(double b, double c) {
    const cplx disc = std::sqrt(cplx(b * b - 4.0 * c));
    return {(-b + disc) / 2.0, (-b - disc) / 2.0};
}

/// Cardano for x^3 + a x^2 + b x + c.
inline std::vector<cplx> roots_cubic(double a, double b, double c) {
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    const cplx s = std::sqrt(cplx(q * q / 4.0 + p * p * p / 27.0));
    cplx u = std::pow(-q / 2.0 + s, 1.0 / 3.0);
    if (std::abs(u) < 1e-30) u = std::pow(-q / 2.0 - s, 1.0 / 3.0);
    const cplx omega(-0.5, std::sqrt(3.0) / 2.0);
    std::vector<cplx> out;
    cplx uk = u;
    for (int k = 0; k < 3; ++k) {
        const cplx t = std::abs(uk) < 1e-30 ? cplx(0.0) : uk - p / (3.0 * uk);
        out.push_back(t - a / 3.0);
        uk *= omega;
    }
    return out;
}

/// Ferrari for x^4 + a x^3 + b x^2 + c x + d.
inline std::vector<cplx> roots_quartic(double a, double b, double c, double d) {
    const double p = b - 3.0 * a * a / 8.0;
    const double q = c - a * b / 2.0 + a * a * a / 8.0;
    const double r = d - a * c / 4.0 + a * a * b / 16.0 - 3.0 * a * a * a * a / 256.0;
    std::vector<cplx> out;
    if (std::abs(q) < 1e-14) {
        // Biquadratic: y^4 + p y^2 + r.
        for (const cplx& y2 : roots_quadratic(p, r)) {
            const cplx y = std::sqrt(y2);
            out.push_back(y - a / 4.0);
            out.push_back(-y - a / 4.0);
        }
        return out;
    }
    // Resolvent cubic z^3 - p z^2 - 4 r z + (4 p r - q^2); pick the most-real root.
    const std::vector<cplx> zs = roots_cubic(-p, -4.0 * r, 4.0 * p * r - q * q);
    cplx z = zs[0];
    for (const cplx& cand : zs)
        if (std::abs(cand.imag()) < std::abs(z.imag())) z = cand;
    const cplx s = std::sqrt(z - p);
    const cplx t = std::abs(s) < 1e-14 ? std::sqrt(z * z / 4.0 - r) : q / (2.0 * s);
    // (y^2 + z/2)^2 = (s y - t)^2  ->  y^2 -+ s y + (z/2 +- t) = 0
    for (const int sign : {+1, -1}) {
        const cplx sb = double(-sign) * s;
        const cplx sc = z / 2.0 + double(sign) * t;
        const cplx disc = std::sqrt(sb * sb - 4.0 * sc);
        out.push_back((-sb + disc) / 2.0 - a / 4.0);
        out.push_back((-sb - disc) / 2.0 - a / 4.0);
    }
    return out;
}

/// Max |eigenvalue| of an n<=4 matrix from its characteristic polynomial.
inline double spectral_radius_oracle(const esnnet::Tensor<double>& w) {
    const std::size_t n = w.extent(0);
    const std::vector<double> c = char_poly(w);
    std::vector<cplx> roots;
    switch (n) {
        case 1: roots = {cplx(-c[0], 0.0)}; break;
        case 2: roots = roots_quadratic(c[0], c[1]); break;
        case 3: roots = roots_cubic(c[0], c[1], c[2]); break;
        case 4: roots = roots_quartic(c[0], c[1], c[2], c[3]); break;
        default: throw std::logic_error("oracle handles n <= 4 only");
    }
    // Newton polish on the monic characteristic polynomial.
    auto eval = [&](const cplx& x, cplx& df) {
        cplx f(1.0, 0.0);
        df = cplx(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            df = df * x + f;
            f = f * x + c[i];
        }
        return f;
    };
    double radius = 0;
    for (cplx root : roots) {
        for (int it = 0; it < 12; ++it) {
            cplx df;
            const cplx f = eval(root, df);
            if (std::abs(df) < 1e-30) break;
            const cplx step = f / df;
            root -= step;
            if (std::abs(step) < 1e-14 * std::max(1.0, std::abs(root))) break;
        }
        radius = std::max(radius, std::abs(root));
    }
    return radius;
}

}  // namespace oracle
