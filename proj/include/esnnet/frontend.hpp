#pragma once

// Fused batched implementation of temporal conv -> BN -> ELU -> spatial conv
// -> BN -> ELU. The [B,D,C,T] intermediate is never materialized: each
// (sample, filter) plane is produced, consumed and discarded inside one
// cache-resident [C,T] buffer.
//
// Batch statistics and kernel gradients that would normally need extra passes
// over the big intermediate come from closed forms instead. With P the raw
// convolution output, S_j = sum U[t+j] and R_ij = sum U[t+i] U[t+j] over the
// whole batch:
//   sum P      = sum_j ker_j S_j
//   sum P^2    = ker' R ker
//   dker_j     = g*inv * (A_j - (s1/m) S_j - (s2/m) B_j),
// where A_j = sum dz U[t+j], B_j = inv (sum_i ker_i R_ij - mu S_j), and
// s1 = sum dz, s2 = sum dz*xhat accumulate in the same single pass as A_j.
// grad_check over the full model exercises every branch of this algebra.

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "esnnet/layers.hpp"

namespace esnnet {

namespace detail {

template <Scalar T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <Scalar T>
using ConstArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

/// y = max(z,0) + exp(min(z,0)) - 1, single fused traversal.
template <Scalar T>
inline void elu_array(const T* z, T* y, std::size_t n) {
    ConstArrMap<T> zm(z, n);
    ArrMap<T> ym(y, n);
    ym = zm.max(T(0)) + (zm.min(T(0))).exp() - T(1);
}

/// Vectorized dot product of two rows, widened at row granularity.
template <Scalar T>
inline double row_dot(const T* a, const T* b, std::size_t n) {
    return double((ConstArrMap<T>(a, n) * ConstArrMap<T>(b, n)).sum());
}

template <Scalar T>
inline double row_sum(const T* a, std::size_t n) {
    return double(ConstArrMap<T>(a, n).sum());
}

}  // namespace detail

template <Scalar T>
struct FrontEndCache {
    std::size_t batch = 0, channels = 0, time_len = 0, filters = 0, taps = 0;
    Mode mode = Mode::train;
    aligned_vector<T> padded;         // [B, C, T + k - 1]
    std::vector<double> shift_sum;    // S_j, [k]
    std::vector<double> shift_corr;   // R_ij, [k, k]
    std::vector<double> mu1, inv1;    // temporal BN stats actually applied
    std::vector<double> mu2, inv2;    // spatial BN stats actually applied
    Tensor<T> spat_pre;               // [B, D, T] spatial conv output, pre BN
    Tensor<T> out;                    // [B, D, T]
};

/// Batched forward for the whole convolutional front-end.
template <Scalar T>
void frontend_forward(TemporalConv<T>& temporal, SpatialConv<T>& spatial,
                      const Tensor<T>& batch, Mode mode, FrontEndCache<T>& cache) {
    if (batch.rank() != 3) throw ShapeError("frontend: batch must be [B,C,T]");
    if (!temporal.normalize || !temporal.activate || !spatial.normalize || !spatial.activate)
        throw StateError("frontend: fused path requires BN and activation enabled");
    const std::size_t B = batch.extent(0), C = batch.extent(1), Tn = batch.extent(2);
    const std::size_t D = temporal.filters(), k = temporal.kernel_len();
    if (C != spatial.channels())
        throw ShapeError("frontend: spatial weights expect " +
                         std::to_string(spatial.channels()) + " channels, batch has " +
                         std::to_string(C));
    if (Tn < k) throw ShapeError("frontend: T shorter than kernel");
    const std::size_t pad = k / 2, Tp = Tn + 2 * pad;

    cache.batch = B;
    cache.channels = C;
    cache.time_len = Tn;
    cache.filters = D;
    cache.taps = k;
    cache.mode = mode;

    // Zero-padded copy of every channel row.
    cache.padded.assign(B * C * Tp, T(0));
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < C; ++c) {
            const T* src = batch.data() + (b * C + c) * Tn;
            T* dst = cache.padded.data() + (b * C + c) * Tp + pad;
            for (std::size_t t = 0; t < Tn; ++t) dst[t] = src[t];
        }

    const std::size_t pool1 = B * C * Tn;
    cache.mu1.assign(D, 0.0);
    cache.inv1.assign(D, 1.0);
    const T* ker = temporal.kernels.value.data();

    if (mode == Mode::train) {
        // Shift sums and autocorrelation of the padded input, shared by all d.
        cache.shift_sum.assign(k, 0.0);
        cache.shift_corr.assign(k * k, 0.0);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                const T* u = cache.padded.data() + (b * C + c) * Tp;
                for (std::size_t i = 0; i < k; ++i) {
                    cache.shift_sum[i] += detail::row_sum(u + i, Tn);
                    for (std::size_t j = i; j < k; ++j)
                        cache.shift_corr[i * k + j] += detail::row_dot(u + i, u + j, Tn);
                }
            }
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < i; ++j)
                cache.shift_corr[i * k + j] = cache.shift_corr[j * k + i];

        for (std::size_t d = 0; d < D; ++d) {
            double sum_p = 0, sum_p2 = 0;
            for (std::size_t i = 0; i < k; ++i) {
                const double ki = ker[d * k + i];
                sum_p += ki * cache.shift_sum[i];
                for (std::size_t j = 0; j < k; ++j)
                    sum_p2 += ki * double(ker[d * k + j]) * cache.shift_corr[i * k + j];
            }
            const double mu = sum_p / double(pool1);
            const double var = std::max(0.0, sum_p2 / double(pool1) - mu * mu);
            cache.mu1[d] = mu;
            cache.inv1[d] = 1.0 / std::sqrt(var + temporal.bn.eps);
            temporal.bn.update_running(d, mu, var, pool1);
        }
    } else {
        for (std::size_t d = 0; d < D; ++d) {
            cache.mu1[d] = temporal.bn.running_mean[d];
            cache.inv1[d] =
                1.0 / std::sqrt(double(temporal.bn.running_var[d]) + temporal.bn.eps);
        }
    }

    // Produce the spatial conv output plane by plane.
    cache.spat_pre = Tensor<T>({B, D, Tn}, T(0));
    aligned_vector<T> prow(C * Tn), yrow(C * Tn);
    const T* ws = spatial.weights.value.data();
    for (std::size_t b = 0; b < B; ++b) {
        const T* upad = cache.padded.data() + b * C * Tp;
        for (std::size_t d = 0; d < D; ++d) {
            const T a = static_cast<T>(cache.inv1[d] * double(temporal.bn.gamma.value[d]));
            const T bias = static_cast<T>(double(temporal.bn.beta.value[d]) -
                                          cache.mu1[d] * double(a));
            const T* kd = ker + d * k;
            for (std::size_t c = 0; c < C; ++c) {
                const T* u = upad + c * Tp;
                T* p = prow.data() + c * Tn;
                const T k0 = kd[0];
                for (std::size_t t = 0; t < Tn; ++t) p[t] = k0 * u[t];
                for (std::size_t j = 1; j < k; ++j) {
                    const T kj = kd[j];
                    for (std::size_t t = 0; t < Tn; ++t) p[t] += kj * u[t + j];
                }
                for (std::size_t t = 0; t < Tn; ++t) p[t] = p[t] * a + bias;
            }
            detail::elu_array(prow.data(), yrow.data(), C * Tn);
            T* g = cache.spat_pre.data() + (b * D + d) * Tn;
            for (std::size_t c = 0; c < C; ++c) {
                const T w = ws[d * C + c];
                const T* y = yrow.data() + c * Tn;
                for (std::size_t t = 0; t < Tn; ++t) g[t] += w * y[t];
            }
        }
    }

    // Spatial BN over (batch, time) per filter, then ELU.
    const std::size_t pool2 = B * Tn;
    cache.mu2.assign(D, 0.0);
    cache.inv2.assign(D, 1.0);
    for (std::size_t d = 0; d < D; ++d) {
        double mu, inv;
        if (mode == Mode::train) {
            double s = 0, s2 = 0;
            for (std::size_t b = 0; b < B; ++b) {
                const T* g = cache.spat_pre.data() + (b * D + d) * Tn;
                s += detail::row_sum(g, Tn);
                s2 += detail::row_dot(g, g, Tn);
            }
            mu = s / double(pool2);
            const double var = std::max(0.0, s2 / double(pool2) - mu * mu);
            inv = 1.0 / std::sqrt(var + spatial.bn.eps);
            spatial.bn.update_running(d, mu, var, pool2);
        } else {
            mu = spatial.bn.running_mean[d];
            inv = 1.0 / std::sqrt(double(spatial.bn.running_var[d]) + spatial.bn.eps);
        }
        cache.mu2[d] = mu;
        cache.inv2[d] = inv;
    }

    cache.out = Tensor<T>({B, D, Tn});
    aligned_vector<T> zrow(Tn);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t d = 0; d < D; ++d) {
            const T a = static_cast<T>(cache.inv2[d] * double(spatial.bn.gamma.value[d]));
            const T bias =
                static_cast<T>(double(spatial.bn.beta.value[d]) - cache.mu2[d] * double(a));
            const T* g = cache.spat_pre.data() + (b * D + d) * Tn;
            T* f = cache.out.data() + (b * D + d) * Tn;
            for (std::size_t t = 0; t < Tn; ++t) zrow[t] = g[t] * a + bias;
            detail::elu_array(zrow.data(), f, Tn);
        }
}

/// Batched backward. Accumulates parameter gradients for both conv layers;
/// input gradients are not produced (the temporal layer is the first stage).
template <Scalar T>
void frontend_backward(TemporalConv<T>& temporal, SpatialConv<T>& spatial,
                       const FrontEndCache<T>& cache, const Tensor<T>& d_out) {
    if (cache.mode != Mode::train)
        throw StateError("frontend backward: forward ran in inference mode");
    const std::size_t B = cache.batch, C = cache.channels, Tn = cache.time_len;
    const std::size_t D = cache.filters, k = cache.taps;
    const std::size_t Tp = Tn + 2 * (k / 2);
    d_out.require_shape({B, D, Tn}, "frontend backward");

    // --- spatial BN + ELU backward; d_spat becomes the gradient at the
    // raw spatial conv output.
    Tensor<T> d_spat({B, D, Tn});
    const std::size_t pool2 = B * Tn;
    for (std::size_t d = 0; d < D; ++d) {
        const double g2 = spatial.bn.gamma.value[d];
        const double mu = cache.mu2[d], inv = cache.inv2[d];
        const T a = static_cast<T>(inv * g2);
        const T bias = static_cast<T>(double(spatial.bn.beta.value[d]) - mu * double(a));
        double s1 = 0, s_dz_g = 0;
        for (std::size_t b = 0; b < B; ++b) {
            const T* gp = cache.spat_pre.data() + (b * D + d) * Tn;
            detail::ConstArrMap<T> gm(gp, Tn);
            detail::ConstArrMap<T> dpm(d_out.data() + (b * D + d) * Tn, Tn);
            detail::ArrMap<T> dzm(d_spat.data() + (b * D + d) * Tn, Tn);
            dzm = dpm * ((gm * a + bias).min(T(0))).exp();  // ELU' at the BN output
            s1 += detail::row_sum(d_spat.data() + (b * D + d) * Tn, Tn);
            s_dz_g += detail::row_dot(d_spat.data() + (b * D + d) * Tn, gp, Tn);
        }
        const double s2 = (s_dz_g - mu * s1) * inv;  // sum dz * xhat
        spatial.bn.gamma.grad[d] += static_cast<T>(s2);
        spatial.bn.beta.grad[d] += static_cast<T>(s1);
        const double m1 = s1 / double(pool2), m2 = s2 / double(pool2);
        const T c0 = static_cast<T>(g2 * inv * (-m1 + mu * inv * m2));
        const T c1 = static_cast<T>(g2 * inv);
        const T c2 = static_cast<T>(-g2 * inv * inv * m2);
        for (std::size_t b = 0; b < B; ++b) {
            detail::ConstArrMap<T> gm(cache.spat_pre.data() + (b * D + d) * Tn, Tn);
            detail::ArrMap<T> dzm(d_spat.data() + (b * D + d) * Tn, Tn);
            dzm = c1 * dzm + c2 * gm + c0;  // g2*inv*(dz - m1 - xhat*m2) expanded
        }
    }

    // --- single fused pass per (b, d) plane: recompute the conv, gather
    // every reduction backward needs.
    const std::size_t pool1 = B * C * Tn;
    const T* ker = temporal.kernels.value.data();
    const T* ws = spatial.weights.value.data();
    std::vector<double> s1v(D, 0.0), s_dz_p(D, 0.0);
    std::vector<double> acc_shift(D * k, 0.0);   // A_j per filter
    std::vector<double> dws(D * C, 0.0);
    aligned_vector<T> prow(Tn), zrow(Tn), yrow(Tn), dzrow(Tn);

    for (std::size_t b = 0; b < B; ++b) {
        const T* upad = cache.padded.data() + b * C * Tp;
        for (std::size_t d = 0; d < D; ++d) {
            const T a = static_cast<T>(cache.inv1[d] * double(temporal.bn.gamma.value[d]));
            const T bias = static_cast<T>(double(temporal.bn.beta.value[d]) -
                                          cache.mu1[d] * double(a));
            const T* kd = ker + d * k;
            const T* dg = d_spat.data() + (b * D + d) * Tn;
            detail::ConstArrMap<T> dgm(dg, Tn);
            double l_s1 = 0, l_sdzp = 0;
            for (std::size_t c = 0; c < C; ++c) {
                const T* u = upad + c * Tp;
                const T k0 = kd[0];
                for (std::size_t t = 0; t < Tn; ++t) prow[t] = k0 * u[t];
                for (std::size_t j = 1; j < k; ++j) {
                    const T kj = kd[j];
                    for (std::size_t t = 0; t < Tn; ++t) prow[t] += kj * u[t + j];
                }
                for (std::size_t t = 0; t < Tn; ++t) zrow[t] = prow[t] * a + bias;
                detail::elu_array(zrow.data(), yrow.data(), Tn);
                const T w = ws[d * C + c];
                detail::ConstArrMap<T> ym(yrow.data(), Tn);
                detail::ArrMap<T> dzm(dzrow.data(), Tn);
                // elup = exp(z) for z < 0, else 1; recovered from y as min(y,0)+1.
                dzm = (w * dgm) * (ym.min(T(0)) + T(1));
                l_s1 += detail::row_sum(dzrow.data(), Tn);
                l_sdzp += detail::row_dot(dzrow.data(), prow.data(), Tn);
                dws[d * C + c] += double((dgm * ym).sum());
                for (std::size_t j = 0; j < k; ++j)
                    acc_shift[d * k + j] += detail::row_dot(dzrow.data(), u + j, Tn);
            }
            s1v[d] += l_s1;
            s_dz_p[d] += l_sdzp;
        }
    }

    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t c = 0; c < C; ++c)
            spatial.weights.grad[d * C + c] += static_cast<T>(dws[d * C + c]);

    // Closed-form kernel and BN gradients from the gathered reductions.
    for (std::size_t d = 0; d < D; ++d) {
        const double mu = cache.mu1[d], inv = cache.inv1[d];
        const double g1 = temporal.bn.gamma.value[d];
        const double s1 = s1v[d];
        const double s2 = (s_dz_p[d] - mu * s1) * inv;  // sum dz * xhat
        temporal.bn.gamma.grad[d] += static_cast<T>(s2);
        temporal.bn.beta.grad[d] += static_cast<T>(s1);
        for (std::size_t j = 0; j < k; ++j) {
            double ker_r = 0;
            for (std::size_t i = 0; i < k; ++i)
                ker_r += double(ker[d * k + i]) * cache.shift_corr[i * k + j];
            const double b_j = inv * (ker_r - mu * cache.shift_sum[j]);
            const double dk = g1 * inv *
                              (acc_shift[d * k + j] - s1 / double(pool1) * cache.shift_sum[j] -
                               s2 / double(pool1) * b_j);
            temporal.kernels.grad[d * k + j] += static_cast<T>(dk);
        }
    }
}

}  // namespace esnnet
