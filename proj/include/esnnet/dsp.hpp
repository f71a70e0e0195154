#pragma once

// Zero-phase Butterworth band-pass filtering. Design runs in double precision
// regardless of the pipeline scalar type: analog prototype poles, lowpass ->
// bandpass transform, bilinear transform with prewarped edges, polynomial
// coefficients from the pole/zero sets. Application is forward-backward
// (filtfilt) with odd reflection padding and steady-state initial conditions.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "esnnet/common.hpp"
#include "esnnet/tensor.hpp"

namespace esnnet {

struct FilterCoeffs {
    std::vector<double> b;  // numerator, b[0] first
    std::vector<double> a;  // denominator, a[0] == 1
    int order = 0;          // analog prototype order; the bandpass has 2*order poles
};

namespace detail {

using cplx = std::complex<double>;

/// Expands a monic polynomial from its roots; imaginary residue is dropped
/// (roots come in conjugate pairs).
inline std::vector<double> poly_from_roots(const std::vector<cplx>& roots) {
    std::vector<cplx> coeffs{1.0};
    for (const cplx& r : roots) {
        std::vector<cplx> next(coeffs.size() + 1, 0.0);
        for (std::size_t i = 0; i < coeffs.size(); ++i) {
            next[i] += coeffs[i];
            next[i + 1] -= coeffs[i] * r;
        }
        coeffs = std::move(next);
    }
    std::vector<double> out(coeffs.size());
    for (std::size_t i = 0; i < coeffs.size(); ++i) out[i] = coeffs[i].real();
    return out;
}

}  // namespace detail

/// Digital Butterworth band-pass of analog prototype order `order`
/// (2*order poles after the band transform), sampled at `fs`.
inline FilterCoeffs butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
    if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0))
        throw ConfigError("bandpass: need 0 < low < high < fs/2, got [" + std::to_string(low_hz) +
                          ", " + std::to_string(high_hz) + "] at fs=" + std::to_string(fs));
    if (order < 1) throw ConfigError("bandpass: order must be >= 1");
    using detail::cplx;
    const double pi = std::numbers::pi;

    // Analog prototype poles on the unit circle, left half plane.
    std::vector<cplx> poles;
    for (int k = 1; k <= order; ++k) {
        const double theta = pi * (2.0 * k + order - 1.0) / (2.0 * order);
        poles.emplace_back(std::cos(theta), std::sin(theta));
    }

    // Prewarped band edges and lowpass -> bandpass transform.
    const double fs2 = 2.0 * fs;
    const double warped_lo = fs2 * std::tan(pi * low_hz / fs);
    const double warped_hi = fs2 * std::tan(pi * high_hz / fs);
    const double bw = warped_hi - warped_lo;
    const double w0 = std::sqrt(warped_lo * warped_hi);

    std::vector<cplx> bp_poles;
    for (const cplx& p : poles) {
        const cplx scaled = p * (bw / 2.0);
        const cplx disc = std::sqrt(scaled * scaled - w0 * w0);
        bp_poles.push_back(scaled + disc);
        bp_poles.push_back(scaled - disc);
    }
    std::vector<cplx> bp_zeros(order, cplx(0.0, 0.0));  // order zeros at s = 0
    double gain = std::pow(bw, order);

    // Bilinear transform; the degree gap adds zeros at z = -1.
    std::vector<cplx> z_poles, z_zeros;
    cplx num(1.0, 0.0), den(1.0, 0.0);
    for (const cplx& p : bp_poles) {
        z_poles.push_back((fs2 + p) / (fs2 - p));
        den *= fs2 - p;
    }
    for (const cplx& z : bp_zeros) {
        z_zeros.push_back((fs2 + z) / (fs2 - z));
        num *= fs2 - z;
    }
    while (z_zeros.size() < z_poles.size()) z_zeros.emplace_back(-1.0, 0.0);
    gain *= (num / den).real();

    FilterCoeffs coeffs;
    coeffs.order = order;
    coeffs.b = detail::poly_from_roots(z_zeros);
    for (double& v : coeffs.b) v *= gain;
    coeffs.a = detail::poly_from_roots(z_poles);
    return coeffs;
}

/// Steady-state initial conditions for a direct-form II transposed filter,
/// scaled by the first sample so startup transients vanish on constants.
inline std::vector<double> lfilter_zi(const FilterCoeffs& f) {
    const std::size_t n = std::max(f.a.size(), f.b.size());
    const std::size_t m = n - 1;
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(m, m);
    // I - companion(a)^T
    for (std::size_t i = 0; i < m; ++i) {
        sys(i, 0) = f.a[i + 1];
        if (i + 1 < m) sys(i, i + 1) = -1.0;
        sys(i, i) += 1.0;
    }
    Eigen::VectorXd rhs(m);
    for (std::size_t i = 0; i < m; ++i) rhs(i) = f.b[i + 1] - f.a[i + 1] * f.b[0];
    const Eigen::VectorXd zi = sys.partialPivLu().solve(rhs);
    return {zi.data(), zi.data() + m};
}

/// Direct-form II transposed IIR filter with caller-provided initial state.
inline void lfilter(const FilterCoeffs& f, const double* x, double* y, std::size_t n,
                    std::vector<double> state) {
    const std::size_t m = std::max(f.a.size(), f.b.size()) - 1;
    std::vector<double> b = f.b, a = f.a;
    b.resize(m + 1, 0.0);
    a.resize(m + 1, 0.0);
    state.resize(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double xi = x[i];
        const double yi = b[0] * xi + state[0];
        for (std::size_t j = 0; j + 1 < m; ++j)
            state[j] = b[j + 1] * xi + state[j + 1] - a[j + 1] * yi;
        state[m - 1] = b[m] * xi - a[m] * yi;
        y[i] = yi;
    }
}

namespace detail {

inline std::vector<double> odd_extension(const std::vector<double>& x, std::size_t pad) {
    const std::size_t n = x.size();
    std::vector<double> ext(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) ext[i] = 2.0 * x[0] - x[pad - i];
    std::copy(x.begin(), x.end(), ext.begin() + pad);
    for (std::size_t i = 0; i < pad; ++i) ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
    return ext;
}

}  // namespace detail

/// Forward-backward filtering with odd reflection padding of
/// 3 * (number of poles) samples on each side.
inline std::vector<double> filtfilt(const FilterCoeffs& f, const std::vector<double>& x) {
    const std::size_t pad = 3 * static_cast<std::size_t>(2 * f.order);
    if (x.size() <= pad)
        throw DataError("filtfilt: signal length " + std::to_string(x.size()) +
                        " does not exceed the warm-up length " + std::to_string(pad));
    const std::size_t n = x.size();
    std::vector<double> ext = detail::odd_extension(x, pad);

    const std::vector<double> zi = lfilter_zi(f);
    auto scaled = [&zi](double v) {
        std::vector<double> s(zi.size());
        for (std::size_t i = 0; i < zi.size(); ++i) s[i] = zi[i] * v;
        return s;
    };

    std::vector<double> fwd(ext.size());
    lfilter(f, ext.data(), fwd.data(), ext.size(), scaled(ext.front()));
    std::reverse(fwd.begin(), fwd.end());
    std::vector<double> bwd(ext.size());
    lfilter(f, fwd.data(), bwd.data(), fwd.size(), scaled(fwd.front()));
    std::reverse(bwd.begin(), bwd.end());
    return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
            bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

// ---------------------------------------------------------------------------
// Second-order sections. The single-polynomial form above is kept as the
// reference for coefficient checks; filtering runs in cascaded biquads, which
// keeps round-off well-behaved with poles close to the unit circle (the 1 Hz
// edge at fs = 500 puts them there).
// ---------------------------------------------------------------------------

struct Biquad {
    double b0 = 0, b1 = 0, b2 = 0;  // numerator
    double a1 = 0, a2 = 0;          // denominator, monic
};

struct SosFilter {
    std::vector<Biquad> sections;
    int order = 0;  // analog prototype order
};

/// Same design as butterworth_bandpass, emitted as conjugate-pole biquads.
/// Every section carries one zero at z=+1 and one at z=-1; the overall gain
/// is spread evenly across sections.
inline SosFilter butterworth_bandpass_sos(int order, double low_hz, double high_hz, double fs) {
    if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0))
        throw ConfigError("bandpass: need 0 < low < high < fs/2, got [" + std::to_string(low_hz) +
                          ", " + std::to_string(high_hz) + "] at fs=" + std::to_string(fs));
    if (order < 1) throw ConfigError("bandpass: order must be >= 1");
    using detail::cplx;
    const double pi = std::numbers::pi;

    std::vector<cplx> poles;
    for (int k = 1; k <= order; ++k) {
        const double theta = pi * (2.0 * k + order - 1.0) / (2.0 * order);
        poles.emplace_back(std::cos(theta), std::sin(theta));
    }
    const double fs2 = 2.0 * fs;
    const double warped_lo = fs2 * std::tan(pi * low_hz / fs);
    const double warped_hi = fs2 * std::tan(pi * high_hz / fs);
    const double bw = warped_hi - warped_lo;
    const double w0 = std::sqrt(warped_lo * warped_hi);

    std::vector<cplx> bp_poles;
    for (const cplx& p : poles) {
        const cplx scaled = p * (bw / 2.0);
        const cplx disc = std::sqrt(scaled * scaled - w0 * w0);
        bp_poles.push_back(scaled + disc);
        bp_poles.push_back(scaled - disc);
    }
    cplx den(1.0, 0.0);
    std::vector<cplx> z_poles;
    for (const cplx& p : bp_poles) {
        z_poles.push_back((fs2 + p) / (fs2 - p));
        den *= fs2 - p;
    }
    double gain = std::pow(bw, order) * (std::pow(cplx(fs2, 0.0), order) / den).real();

    // Group the digital poles into conjugate (or real) pairs.
    std::vector<cplx> remaining = z_poles;
    std::vector<std::pair<cplx, cplx>> pairs;
    while (!remaining.empty()) {
        // Take the pole with the largest |imag| first.
        std::size_t pick = 0;
        for (std::size_t i = 1; i < remaining.size(); ++i)
            if (std::abs(remaining[i].imag()) > std::abs(remaining[pick].imag())) pick = i;
        const cplx p = remaining[pick];
        remaining.erase(remaining.begin() + std::ptrdiff_t(pick));
        // Find its conjugate (or, for a real pole, the closest real partner).
        std::size_t mate = 0;
        double best = 1e300;
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            const double dist = std::abs(remaining[i] - std::conj(p));
            if (dist < best) {
                best = dist;
                mate = i;
            }
        }
        const cplx q = remaining[mate];
        remaining.erase(remaining.begin() + std::ptrdiff_t(mate));
        pairs.emplace_back(p, q);
    }

    SosFilter sos;
    sos.order = order;
    const double g_section = std::pow(std::abs(gain), 1.0 / double(order));
    const double g_sign = gain < 0 ? -1.0 : 1.0;
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        const auto& [p, q] = pairs[s];
        Biquad bi;
        bi.a1 = -(p + q).real();
        bi.a2 = (p * q).real();
        const double g = s == 0 ? g_sign * g_section : g_section;
        bi.b0 = g;          // zeros at +1 and -1: g (z^2 - 1)
        bi.b1 = 0.0;
        bi.b2 = -g;
        sos.sections.push_back(bi);
    }
    return sos;
}

namespace detail {

/// Steady-state initial conditions per section, scaled by the cumulative DC
/// gain of the preceding sections.
inline std::vector<std::array<double, 2>> sos_zi(const SosFilter& sos) {
    std::vector<std::array<double, 2>> zi;
    double scale = 1.0;
    for (const Biquad& s : sos.sections) {
        FilterCoeffs f;
        f.b = {s.b0, s.b1, s.b2};
        f.a = {1.0, s.a1, s.a2};
        const std::vector<double> z = lfilter_zi(f);
        zi.push_back({z[0] * scale, z[1] * scale});
        const double dc_den = 1.0 + s.a1 + s.a2;
        scale *= dc_den != 0.0 ? (s.b0 + s.b1 + s.b2) / dc_den : 0.0;
    }
    return zi;
}

/// One cascade pass; zi_template already carries the cumulative DC scaling
/// across sections, so every section is seeded with template * x0.
inline void sos_filter_pass(const SosFilter& sos, std::vector<double>& x,
                            const std::vector<std::array<double, 2>>& zi_template, double x0) {
    for (std::size_t s = 0; s < sos.sections.size(); ++s) {
        const Biquad& bi = sos.sections[s];
        double z0 = zi_template[s][0] * x0, z1 = zi_template[s][1] * x0;
        for (double& v : x) {
            const double in = v;
            const double out = bi.b0 * in + z0;
            z0 = bi.b1 * in + z1 - bi.a1 * out;
            z1 = bi.b2 * in - bi.a2 * out;
            v = out;
        }
    }
}

}  // namespace detail

/// Zero-phase filtering through cascaded biquads with odd reflection padding.
inline std::vector<double> filtfilt_sos(const SosFilter& sos, const std::vector<double>& x) {
    const std::size_t pad = 3 * static_cast<std::size_t>(2 * sos.order);
    if (x.size() <= pad)
        throw DataError("filtfilt: signal length " + std::to_string(x.size()) +
                        " does not exceed the warm-up length " + std::to_string(pad));
    const std::size_t n = x.size();
    const auto zi = detail::sos_zi(sos);

    std::vector<double> ext = detail::odd_extension(x, pad);
    detail::sos_filter_pass(sos, ext, zi, ext.front());
    std::reverse(ext.begin(), ext.end());
    detail::sos_filter_pass(sos, ext, zi, ext.front());
    std::reverse(ext.begin(), ext.end());
    return {ext.begin() + static_cast<std::ptrdiff_t>(pad),
            ext.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

/// Per-channel zero-phase band-pass of a multichannel recording.
template <Scalar T>
Tensor<T> bandpass(const Tensor<T>& signal, double low_hz, double high_hz, double fs,
                   int order = 4) {
    if (signal.rank() != 2) throw ShapeError("bandpass: signal must be [C,N]");
    const SosFilter sos = butterworth_bandpass_sos(order, low_hz, high_hz, fs);
    const std::size_t C = signal.extent(0), N = signal.extent(1);
    Tensor<T> out({C, N});
    std::vector<double> row(N);
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < N; ++i) row[i] = double(signal[c * N + i]);
        const std::vector<double> filtered = filtfilt_sos(sos, row);
        for (std::size_t i = 0; i < N; ++i) out[c * N + i] = static_cast<T>(filtered[i]);
    }
    return out;
}

}  // namespace esnnet
