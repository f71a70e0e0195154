#include <catch2/catch_amalgamated.hpp>

#include <numbers>

#include "esnnet/dsp.hpp"

using namespace esnnet;
using Catch::Approx;

namespace {

/// Test-side amplitude oracle: single-bin DFT magnitude at frequency f.
double dft_amplitude(const std::vector<double>& x, double f_hz, double fs) {
    double re = 0, im = 0;
    const double w = 2.0 * std::numbers::pi * f_hz / fs;
    for (std::size_t i = 0; i < x.size(); ++i) {
        re += x[i] * std::cos(w * double(i));
        im += x[i] * std::sin(w * double(i));
    }
    return 2.0 * std::hypot(re, im) / double(x.size());
}

std::vector<double> sine(double f_hz, double fs, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = std::sin(2.0 * std::numbers::pi * f_hz * double(i) / fs);
    return x;
}

}  // namespace

TEST_CASE("bandpass rejects invalid bands and too-short signals") {
    REQUIRE_THROWS_AS(butterworth_bandpass(4, 40.0, 1.0, 500.0), ConfigError);
    REQUIRE_THROWS_AS(butterworth_bandpass(4, 0.0, 40.0, 500.0), ConfigError);
    REQUIRE_THROWS_AS(butterworth_bandpass(4, 1.0, 300.0, 500.0), ConfigError);
    const SosFilter f = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    std::vector<double> too_short(20, 1.0);
    REQUIRE_THROWS_AS(filtfilt_sos(f, too_short), DataError);
}

TEST_CASE("DC input is attenuated below 1e-3") {
    const SosFilter f = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    std::vector<double> dc(1000, 1.0);
    const std::vector<double> y = filtfilt_sos(f, dc);
    double peak = 0;
    for (const double v : y) peak = std::max(peak, std::abs(v));
    REQUIRE(peak < 1e-3);
}

TEST_CASE("10 Hz passband gain is at least 0.9") {
    const SosFilter f = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    const std::vector<double> y = filtfilt_sos(f, sine(10.0, 500.0, 1000));
    REQUIRE(dft_amplitude(y, 10.0, 500.0) >= 0.9);
}

TEST_CASE("60 Hz is at least 20 dB below the 10 Hz response") {
    const SosFilter f = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    const double a10 = dft_amplitude(filtfilt_sos(f, sine(10.0, 500.0, 1000)), 10.0, 500.0);
    const double a60 = dft_amplitude(filtfilt_sos(f, sine(60.0, 500.0, 1000)), 60.0, 500.0);
    REQUIRE(20.0 * std::log10(a10 / a60) >= 20.0);
}

TEST_CASE("expanded SOS cascade reproduces the polynomial coefficients") {
    const FilterCoeffs poly = butterworth_bandpass(4, 1.0, 40.0, 500.0);
    const SosFilter sos = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    // Multiply the biquads back out and compare against the direct design.
    std::vector<double> b{1.0}, a{1.0};
    auto mul = [](const std::vector<double>& p, const std::array<double, 3>& q) {
        std::vector<double> out(p.size() + 2, 0.0);
        for (std::size_t i = 0; i < p.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j) out[i + j] += p[i] * q[j];
        return out;
    };
    for (const Biquad& s2 : sos.sections) {
        b = mul(b, {s2.b0, s2.b1, s2.b2});
        a = mul(a, {1.0, s2.a1, s2.a2});
    }
    REQUIRE(b.size() == poly.b.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
        REQUIRE(b[i] == Approx(poly.b[i]).margin(1e-12));
        REQUIRE(a[i] == Approx(poly.a[i]).margin(1e-9));
    }
}

TEST_CASE("single-section filtfilt agrees between forms") {
    // Both implementations share the padding and zi conventions; on a
    // well-conditioned band they must agree closely.
    const FilterCoeffs poly = butterworth_bandpass(1, 5.0, 45.0, 500.0);
    const SosFilter sos = butterworth_bandpass_sos(1, 5.0, 45.0, 500.0);
    const std::vector<double> x = sine(10.0, 500.0, 400);
    const auto a = filtfilt(poly, x);
    const auto b = filtfilt_sos(sos, x);
    for (std::size_t i = 0; i < x.size(); ++i) REQUIRE(a[i] == Approx(b[i]).margin(1e-9));
}

TEST_CASE("zero-phase filtering is linear") {
    RngStream rng(3);
    const std::size_t n = 400;
    std::vector<double> x(n), y(n), mix(n);
    const double a = 1.3, b = -0.6;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.uniform(-1.0, 1.0);
        y[i] = rng.uniform(-1.0, 1.0);
        mix[i] = a * x[i] + b * y[i];
    }
    const SosFilter f = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    const auto fx = filtfilt_sos(f, x), fy = filtfilt_sos(f, y), fm = filtfilt_sos(f, mix);
    for (std::size_t i = 0; i < n; ++i)
        REQUIRE(fm[i] == Approx(a * fx[i] + b * fy[i]).margin(1e-9));
}

TEST_CASE("multichannel bandpass filters each channel independently") {
    RngStream rng(4);
    Tensor<double> sig({3, 300});
    for (std::size_t i = 0; i < sig.numel(); ++i) sig[i] = rng.uniform(-1.0, 1.0);
    const auto filtered = bandpass(sig, 1.0, 40.0, 500.0);
    REQUIRE(filtered.shape() == sig.shape());
    // Channel 1 of the multichannel call equals a single-channel call.
    const SosFilter f = butterworth_bandpass_sos(4, 1.0, 40.0, 500.0);
    std::vector<double> row(300);
    for (std::size_t i = 0; i < 300; ++i) row[i] = sig.at({1, i});
    const auto expect = filtfilt_sos(f, row);
    for (std::size_t i = 0; i < 300; ++i)
        REQUIRE(filtered.at({1, i}) == Approx(expect[i]).margin(1e-12));
}
