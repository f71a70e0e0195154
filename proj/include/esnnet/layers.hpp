#pragma once

// Convolutional front-end and classification-head primitives. Each op has a
// per-sample reference implementation (forward + backward over an explicit
// context). The model's training path uses the fused batch implementation in
// frontend.hpp; the two are equivalence-tested.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "esnnet/common.hpp"
#include "esnnet/parameter.hpp"
#include "esnnet/tensor.hpp"

namespace esnnet {

enum class Mode { train, infer };

/// ELU with unit coefficient: x for x > 0, exp(x) - 1 otherwise.
template <Scalar T>
inline T elu(T x) {
    return x > T(0) ? x : static_cast<T>(std::expm1(static_cast<double>(x)));
}

/// Derivative of ELU at pre-activation x.
template <Scalar T>
inline T elu_grad(T x) {
    return x > T(0) ? T(1) : static_cast<T>(std::exp(static_cast<double>(x)));
}

/// Per-feature batch normalization state. Statistics are pooled over
/// whichever axes the owning layer defines; this struct owns the affine
/// parameters, the running estimates used at inference, and the constants.
template <Scalar T>
struct BatchNorm {
    BatchNorm() = default;
    BatchNorm(const std::string& prefix, std::size_t features)
        : gamma(prefix + ".gamma", Tensor<T>({features}, T(1))),
          beta(prefix + ".beta", Tensor<T>({features}, T(0))),
          running_mean({features}, T(0)),
          running_var({features}, T(1)) {}

    std::size_t features() const { return gamma.value.numel(); }

    /// Fold one batch statistic into the running estimates. The running
    /// variance stores the unbiased estimate (pool_size / (pool_size - 1)).
    void update_running(std::size_t feature, double mean, double var, std::size_t pool) {
        const double unbiased = pool > 1 ? var * double(pool) / double(pool - 1) : var;
        running_mean[feature] =
            static_cast<T>((1.0 - momentum) * running_mean[feature] + momentum * mean);
        running_var[feature] =
            static_cast<T>((1.0 - momentum) * running_var[feature] + momentum * unbiased);
    }

    Parameter<T> gamma;
    Parameter<T> beta;
    Tensor<T> running_mean;
    Tensor<T> running_var;
    double eps = 1e-5;
    double momentum = 0.1;
};

/// Temporal convolution: one bank of D length-k kernels applied to every
/// channel independently, with symmetric zero padding so T is preserved.
template <Scalar T>
struct TemporalConv {
    TemporalConv() = default;
    TemporalConv(std::size_t filters, std::size_t kernel_len, RngStream rng)
        : kernels("temporal.kernels",
                  Tensor<T>::uniform({filters, kernel_len}, rng, -1.0, 1.0)),
          bn("temporal.bn", filters) {
        if (kernel_len % 2 == 0) throw ConfigError("temporal conv: kernel length must be odd");
        const T scale = static_cast<T>(1.0 / std::sqrt(double(kernel_len)));
        for (T& v : kernels.value.values()) v *= scale;
    }

    std::size_t filters() const { return kernels.value.extent(0); }
    std::size_t kernel_len() const { return kernels.value.extent(1); }

    Parameter<T> kernels;  // [D, k]
    BatchNorm<T> bn;
    bool normalize = true;
    bool activate = true;
};

/// Spatial convolution: per filter map, a learned linear combination of the
/// input channels at each time point.
template <Scalar T>
struct SpatialConv {
    SpatialConv() = default;
    SpatialConv(std::size_t filters, std::size_t channels, RngStream rng)
        : weights("spatial.weights",
                  Tensor<T>::uniform({filters, channels}, rng, -1.0, 1.0)),
          bn("spatial.bn", filters) {
        const T scale = static_cast<T>(1.0 / std::sqrt(double(channels)));
        for (T& v : weights.value.values()) v *= scale;
    }

    std::size_t filters() const { return weights.value.extent(0); }
    std::size_t channels() const { return weights.value.extent(1); }

    Parameter<T> weights;  // [D, C]
    BatchNorm<T> bn;
    bool normalize = true;
    bool activate = true;
};

/// Linear classification head producing three-class logits.
template <Scalar T>
struct Head {
    Head() = default;
    Head(std::size_t in_features, std::size_t classes, RngStream rng)
        : weight("head.weight", Tensor<T>::uniform({classes, in_features}, rng, -1.0, 1.0)),
          bias("head.bias", Tensor<T>({classes}, T(0))) {
        const T scale = static_cast<T>(1.0 / std::sqrt(double(in_features)));
        for (T& v : weight.value.values()) v *= scale;
    }

    std::size_t in_features() const { return weight.value.extent(1); }
    std::size_t classes() const { return weight.value.extent(0); }

    Parameter<T> weight;  // [classes, in]
    Parameter<T> bias;    // [classes]
};

// ---------------------------------------------------------------------------
// Per-sample reference ops. Contexts retain what backward needs.
// ---------------------------------------------------------------------------

template <Scalar T>
struct TemporalConvCtx {
    Tensor<T> input;    // [C, T]
    Tensor<T> conv;     // [D, C, T] raw convolution
    Tensor<T> pre_act;  // [D, C, T] after BN (or == conv when bypassed)
    Tensor<T> out;      // [D, C, T]
    std::vector<double> mean, inv_std;  // per d, train-mode batch stats
    Mode mode = Mode::train;
};

/// out[d,c,t] = act(BN_d(sum_j kernel[d,j] * U[c, t+j-pad])), T preserved.
template <Scalar T>
TemporalConvCtx<T> temporal_conv_forward(const Tensor<T>& input, TemporalConv<T>& layer,
                                         Mode mode) {
    if (input.rank() != 2) throw ShapeError("temporal conv: input must be [C,T]");
    const std::size_t C = input.extent(0), Tn = input.extent(1);
    const std::size_t D = layer.filters(), k = layer.kernel_len();
    if (Tn < k) throw ShapeError("temporal conv: T=" + std::to_string(Tn) + " shorter than kernel k=" +
                                 std::to_string(k));
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

    TemporalConvCtx<T> ctx;
    ctx.mode = mode;
    ctx.input = input;
    ctx.conv = Tensor<T>({D, C, Tn});
    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < Tn; ++t) {
                double acc = 0;
                for (std::size_t j = 0; j < k; ++j) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
                    if (src >= 0 && src < static_cast<std::ptrdiff_t>(Tn))
                        acc += double(layer.kernels.value.at({d, j})) *
                               double(input.at({c, static_cast<std::size_t>(src)}));
                }
                ctx.conv.at({d, c, t}) = static_cast<T>(acc);
            }

    ctx.pre_act = ctx.conv;
    if (layer.normalize) {
        ctx.mean.assign(D, 0.0);
        ctx.inv_std.assign(D, 1.0);
        const std::size_t pool = C * Tn;
        for (std::size_t d = 0; d < D; ++d) {
            double mu, inv;
            if (mode == Mode::train) {
                double s = 0, s2 = 0;
                for (std::size_t i = 0; i < pool; ++i) {
                    const double v = ctx.conv[d * pool + i];
                    s += v;
                    s2 += v * v;
                }
                mu = s / double(pool);
                const double var = std::max(0.0, s2 / double(pool) - mu * mu);
                inv = 1.0 / std::sqrt(var + layer.bn.eps);
                layer.bn.update_running(d, mu, var, pool);
            } else {
                mu = layer.bn.running_mean[d];
                inv = 1.0 / std::sqrt(double(layer.bn.running_var[d]) + layer.bn.eps);
            }
            ctx.mean[d] = mu;
            ctx.inv_std[d] = inv;
            const double g = layer.bn.gamma.value[d], b = layer.bn.beta.value[d];
            for (std::size_t i = 0; i < pool; ++i)
                ctx.pre_act[d * pool + i] =
                    static_cast<T>((double(ctx.conv[d * pool + i]) - mu) * inv * g + b);
        }
    }

    ctx.out = ctx.pre_act;
    if (layer.activate)
        for (T& v : ctx.out.values()) v = elu(v);
    return ctx;
}

/// Backward through the per-sample temporal op (train-mode statistics).
/// Accumulates kernel and BN gradients; returns the input gradient.
template <Scalar T>
Tensor<T> temporal_conv_backward(const TemporalConvCtx<T>& ctx, TemporalConv<T>& layer,
                                 const Tensor<T>& d_out) {
    d_out.require_shape(ctx.out.shape(), "temporal conv backward");
    const std::size_t D = layer.filters(), k = layer.kernel_len();
    const std::size_t C = ctx.input.extent(0), Tn = ctx.input.extent(1);
    const std::size_t pool = C * Tn;
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);

    Tensor<T> d_pre = d_out;
    if (layer.activate)
        for (std::size_t i = 0; i < d_pre.numel(); ++i)
            d_pre[i] = static_cast<T>(double(d_pre[i]) * double(elu_grad(ctx.pre_act[i])));

    Tensor<T> d_conv({D, C, Tn});
    if (layer.normalize) {
        if (ctx.mode != Mode::train)
            throw StateError("temporal conv backward: forward ran in inference mode");
        for (std::size_t d = 0; d < D; ++d) {
            const double g = layer.bn.gamma.value[d];
            const double inv = ctx.inv_std[d], mu = ctx.mean[d];
            double s1 = 0, s2 = 0;
            for (std::size_t i = 0; i < pool; ++i) {
                const double dz = d_pre[d * pool + i];
                const double xh = (double(ctx.conv[d * pool + i]) - mu) * inv;
                s1 += dz;
                s2 += dz * xh;
            }
            layer.bn.gamma.grad[d] += static_cast<T>(s2);
            layer.bn.beta.grad[d] += static_cast<T>(s1);
            for (std::size_t i = 0; i < pool; ++i) {
                const double dz = d_pre[d * pool + i];
                const double xh = (double(ctx.conv[d * pool + i]) - mu) * inv;
                d_conv[d * pool + i] =
                    static_cast<T>(g * inv * (dz - s1 / double(pool) - xh * s2 / double(pool)));
            }
        }
    } else {
        d_conv = d_pre;
    }

    Tensor<T> d_input({C, Tn}, T(0));
    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t t = 0; t < Tn; ++t) {
                const double dv = d_conv.at({d, c, t});
                for (std::size_t j = 0; j < k; ++j) {
                    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
                    if (src >= 0 && src < static_cast<std::ptrdiff_t>(Tn)) {
                        layer.kernels.grad.at({d, j}) += static_cast<T>(
                            dv * double(ctx.input.at({c, static_cast<std::size_t>(src)})));
                        d_input.at({c, static_cast<std::size_t>(src)}) +=
                            static_cast<T>(dv * double(layer.kernels.value.at({d, j})));
                    }
                }
            }
    return d_input;
}

template <Scalar T>
struct SpatialConvCtx {
    Tensor<T> input;    // [D, C, T]
    Tensor<T> conv;     // [D, T]
    Tensor<T> pre_act;  // [D, T]
    Tensor<T> out;      // [D, T]
    std::vector<double> mean, inv_std;
    Mode mode = Mode::train;
};

/// out[d,t] = act(BN_d(sum_c w[d,c] * F[d,c,t])).
template <Scalar T>
SpatialConvCtx<T> spatial_conv_forward(const Tensor<T>& input, SpatialConv<T>& layer, Mode mode) {
    if (input.rank() != 3) throw ShapeError("spatial conv: input must be [D,C,T]");
    const std::size_t D = input.extent(0), C = input.extent(1), Tn = input.extent(2);
    if (D != layer.filters() || C != layer.channels())
        throw ShapeError("spatial conv: weights " + shape_str(layer.weights.value.shape()) +
                         " against input " + shape_str(input.shape()));

    SpatialConvCtx<T> ctx;
    ctx.mode = mode;
    ctx.input = input;
    ctx.conv = Tensor<T>({D, Tn});
    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t t = 0; t < Tn; ++t) {
            double acc = 0;
            for (std::size_t c = 0; c < C; ++c)
                acc += double(layer.weights.value.at({d, c})) * double(input.at({d, c, t}));
            ctx.conv.at({d, t}) = static_cast<T>(acc);
        }

    ctx.pre_act = ctx.conv;
    if (layer.normalize) {
        ctx.mean.assign(D, 0.0);
        ctx.inv_std.assign(D, 1.0);
        for (std::size_t d = 0; d < D; ++d) {
            double mu, inv;
            if (mode == Mode::train) {
                double s = 0, s2 = 0;
                for (std::size_t t = 0; t < Tn; ++t) {
                    const double v = ctx.conv.at({d, t});
                    s += v;
                    s2 += v * v;
                }
                mu = s / double(Tn);
                const double var = std::max(0.0, s2 / double(Tn) - mu * mu);
                inv = 1.0 / std::sqrt(var + layer.bn.eps);
                layer.bn.update_running(d, mu, var, Tn);
            } else {
                mu = layer.bn.running_mean[d];
                inv = 1.0 / std::sqrt(double(layer.bn.running_var[d]) + layer.bn.eps);
            }
            ctx.mean[d] = mu;
            ctx.inv_std[d] = inv;
            const double g = layer.bn.gamma.value[d], b = layer.bn.beta.value[d];
            for (std::size_t t = 0; t < Tn; ++t)
                ctx.pre_act.at({d, t}) =
                    static_cast<T>((double(ctx.conv.at({d, t})) - mu) * inv * g + b);
        }
    }

    ctx.out = ctx.pre_act;
    if (layer.activate)
        for (T& v : ctx.out.values()) v = elu(v);
    return ctx;
}

template <Scalar T>
Tensor<T> spatial_conv_backward(const SpatialConvCtx<T>& ctx, SpatialConv<T>& layer,
                                const Tensor<T>& d_out) {
    d_out.require_shape(ctx.out.shape(), "spatial conv backward");
    const std::size_t D = ctx.input.extent(0), C = ctx.input.extent(1), Tn = ctx.input.extent(2);

    Tensor<T> d_pre = d_out;
    if (layer.activate)
        for (std::size_t i = 0; i < d_pre.numel(); ++i)
            d_pre[i] = static_cast<T>(double(d_pre[i]) * double(elu_grad(ctx.pre_act[i])));

    Tensor<T> d_conv({D, Tn});
    if (layer.normalize) {
        if (ctx.mode != Mode::train)
            throw StateError("spatial conv backward: forward ran in inference mode");
        for (std::size_t d = 0; d < D; ++d) {
            const double g = layer.bn.gamma.value[d];
            const double inv = ctx.inv_std[d], mu = ctx.mean[d];
            double s1 = 0, s2 = 0;
            for (std::size_t t = 0; t < Tn; ++t) {
                const double dz = d_pre.at({d, t});
                const double xh = (double(ctx.conv.at({d, t})) - mu) * inv;
                s1 += dz;
                s2 += dz * xh;
            }
            layer.bn.gamma.grad[d] += static_cast<T>(s2);
            layer.bn.beta.grad[d] += static_cast<T>(s1);
            for (std::size_t t = 0; t < Tn; ++t) {
                const double dz = d_pre.at({d, t});
                const double xh = (double(ctx.conv.at({d, t})) - mu) * inv;
                d_conv.at({d, t}) =
                    static_cast<T>(g * inv * (dz - s1 / double(Tn) - xh * s2 / double(Tn)));
            }
        }
    } else {
        d_conv = d_pre;
    }

    Tensor<T> d_input({D, C, Tn}, T(0));
    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t c = 0; c < C; ++c) {
            const double w = layer.weights.value.at({d, c});
            double dw = 0;
            for (std::size_t t = 0; t < Tn; ++t) {
                const double dv = d_conv.at({d, t});
                dw += dv * double(ctx.input.at({d, c, t}));
                d_input.at({d, c, t}) = static_cast<T>(dv * w);
            }
            layer.weights.grad.at({d, c}) += static_cast<T>(dw);
        }
    return d_input;
}

/// Global average pooling over the time axis: [H, T] -> [H].
template <Scalar T>
Tensor<T> gap(const Tensor<T>& states) {
    if (states.rank() != 2) throw ShapeError("gap: input must be [H,T]");
    const std::size_t H = states.extent(0), Tn = states.extent(1);
    Tensor<T> out({H});
    for (std::size_t h = 0; h < H; ++h) {
        double acc = 0;
        for (std::size_t t = 0; t < Tn; ++t) acc += double(states.at({h, t}));
        out[h] = static_cast<T>(acc / double(Tn));
    }
    return out;
}

template <Scalar T>
Tensor<T> gap_backward(const Tensor<T>& d_out, std::size_t time_len) {
    const std::size_t H = d_out.extent(0);
    Tensor<T> d_states({H, time_len});
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t t = 0; t < time_len; ++t)
            d_states.at({h, t}) = static_cast<T>(double(d_out[h]) / double(time_len));
    return d_states;
}

template <Scalar T>
struct SoftmaxXent {
    double loss = 0.0;
    Tensor<T> probabilities;  // [B, classes]
};

/// Numerically stable log-sum-exp cross-entropy; loss is the batch mean of
/// -log p(true class).
template <Scalar T>
SoftmaxXent<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw ShapeError("softmax: logits must be [B,classes]");
    const std::size_t B = logits.extent(0), K = logits.extent(1);
    if (labels.size() != B)
        throw DataError("softmax: " + std::to_string(labels.size()) + " labels for batch " +
                        std::to_string(B));
    SoftmaxXent<T> r;
    r.probabilities = Tensor<T>({B, K});
    double total = 0;
    for (std::size_t b = 0; b < B; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<std::size_t>(y) >= K)
            throw DataError("softmax: label " + std::to_string(y) + " out of range at row " +
                            std::to_string(b));
        double mx = logits.at({b, 0});
        for (std::size_t j = 1; j < K; ++j) mx = std::max(mx, double(logits.at({b, j})));
        double denom = 0;
        for (std::size_t j = 0; j < K; ++j) denom += std::exp(double(logits.at({b, j})) - mx);
        const double log_denom = std::log(denom);
        for (std::size_t j = 0; j < K; ++j)
            r.probabilities.at({b, j}) =
                static_cast<T>(std::exp(double(logits.at({b, j})) - mx - log_denom));
        total += -(double(logits.at({b, static_cast<std::size_t>(y)})) - mx - log_denom);
    }
    r.loss = total / double(B);
    return r;
}

/// d loss / d logits = (softmax - one_hot) / B.
template <Scalar T>
Tensor<T> softmax_cross_entropy_backward(const SoftmaxXent<T>& fwd, const std::vector<int>& labels) {
    const std::size_t B = fwd.probabilities.extent(0), K = fwd.probabilities.extent(1);
    Tensor<T> d = fwd.probabilities;
    for (std::size_t b = 0; b < B; ++b) {
        d.at({b, static_cast<std::size_t>(labels[b])}) -= T(1);
        for (std::size_t j = 0; j < K; ++j) d.at({b, j}) /= static_cast<T>(double(B));
    }
    return d;
}

}  // namespace esnnet
