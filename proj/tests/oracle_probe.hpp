#pragma once

// Test-side learnability oracle: ridge regression on per-channel log band
// powers, evaluated on a stratified hold-out. Establishes that the synthetic
// generator's classes are separable before the network is blamed.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "esnnet/data.hpp"
#include "esnnet/eval.hpp"

namespace oracle {

/// Log band powers around the three class frequencies, per channel.
template <esnnet::Scalar T>
std::vector<double> band_power_features(const esnnet::Tensor<T>& segment, double fs) {
    const std::size_t C = segment.extent(0), Tn = segment.extent(1);
    const double bin_hz = fs / double(Tn);
    const std::pair<double, double> bands[3] = {{6.0, 10.0}, {12.0, 16.0}, {20.0, 24.0}};
    std::vector<double> feat;
    feat.reserve(C * 3);
    for (std::size_t c = 0; c < C; ++c) {
        for (const auto& [lo, hi] : bands) {
            double power = 0;
            const int k_lo = int(std::ceil(lo / bin_hz)), k_hi = int(std::floor(hi / bin_hz));
            for (int k = k_lo; k <= k_hi; ++k) {
                double re = 0, im = 0;
                const double w = 2.0 * std::numbers::pi * double(k) / double(Tn);
                for (std::size_t t = 0; t < Tn; ++t) {
                    re += double(segment[c * Tn + t]) * std::cos(w * double(t));
                    im += double(segment[c * Tn + t]) * std::sin(w * double(t));
                }
                power += re * re + im * im;
            }
            feat.push_back(std::log(power + 1e-12));
        }
    }
    return feat;
}

/// Hold-out accuracy of a ridge one-vs-rest classifier on band-power features.
template <esnnet::Scalar T>
double linear_probe_accuracy(const std::vector<esnnet::Segment<T>>& segments, double fs,
                             std::uint64_t seed = 99, double ridge = 1.0) {
    std::vector<int> labels;
    for (const auto& s : segments) labels.push_back(s.label);
    const esnnet::SplitPlan plan = esnnet::stratified_split(labels, seed);

    const std::size_t dim = band_power_features(segments[0].data, fs).size() + 1;  // + bias
    Eigen::MatrixXd x(plan.train.size(), dim);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(plan.train.size(), 3);
    for (std::size_t r = 0; r < plan.train.size(); ++r) {
        const auto f = band_power_features(segments[plan.train[r]].data, fs);
        for (std::size_t j = 0; j < f.size(); ++j) x(r, j) = f[j];
        x(r, dim - 1) = 1.0;
        y(r, labels[plan.train[r]]) = 1.0;
    }
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += ridge;
    const Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);

    std::size_t correct = 0;
    for (const std::size_t i : plan.val) {
        const auto f = band_power_features(segments[i].data, fs);
        Eigen::RowVectorXd row(dim);
        for (std::size_t j = 0; j < f.size(); ++j) row(j) = f[j];
        row(dim - 1) = 1.0;
        const Eigen::RowVector3d scores = row * w;
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (scores(k) > scores(best)) best = k;
        if (best == labels[i]) ++correct;
    }
    return plan.val.empty() ? 0.0 : double(correct) / double(plan.val.size());
}

}  // namespace oracle
