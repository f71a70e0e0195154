#pragma once

// Echo State Network: sparse random fixed recurrent matrix with spectral
// radius scaling, leaky tanh state update, full backpropagation through time
// into the trainable input map. The recurrent matrix W never receives a
// gradient; its Parameter is flagged non-trainable.

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "esnnet/parameter.hpp"
#include "esnnet/rng.hpp"
#include "esnnet/tensor.hpp"

namespace esnnet {

struct SpectralRadiusEstimate {
    double value = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Estimates max |eigenvalue| by norm growth (Gelfand-style): repeatedly
/// apply W to a vector with renormalization and average the log growth over
/// the tail half of the run. Unlike plain power iteration this converges for
/// complex-conjugate dominant pairs, where the per-step growth oscillates
/// around the spectral radius. The start vector comes from a fixed internal
/// seed, so repeated calls on the same matrix return the same estimate.
template <Scalar T>
SpectralRadiusEstimate spectral_radius(const Tensor<T>& w, double tol = 1e-6,
                                       std::size_t max_iter = 25000) {
    if (w.rank() != 2 || w.extent(0) != w.extent(1))
        throw ShapeError("spectral_radius: matrix must be square, got " + shape_str(w.shape()));
    const std::size_t n = w.extent(0);
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Mat m(n, n);
    for (std::size_t i = 0; i < n * n; ++i) m.data()[i] = double(w[i]);

    SpectralRadiusEstimate est;
    RngStream rng(0x5EED0F00DULL);
    for (int attempt = 0; attempt < 3; ++attempt) {
        Eigen::VectorXd v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = rng.uniform(-1.0, 1.0);
        const double nv = v.norm();
        if (nv == 0.0) continue;
        v /= nv;

        const std::size_t warm = max_iter / 2;
        double log_sum_a = 0.0, log_sum_b = 0.0;  // two halves of the tail
        std::size_t count_a = 0, count_b = 0;
        bool dead = false;
        for (std::size_t it = 1; it <= max_iter; ++it) {
            Eigen::VectorXd next = m * v;
            const double g = next.norm();
            if (g == 0.0 || !std::isfinite(g)) {
                dead = true;
                est.iterations = it;
                break;
            }
            v = next / g;
            if (it > warm) {
                if (it <= warm + (max_iter - warm) / 2) {
                    log_sum_a += std::log(g);
                    ++count_a;
                } else {
                    log_sum_b += std::log(g);
                    ++count_b;
                }
            }
        }
        if (dead) {
            // Vector hit the kernel. A second start distinguishes nilpotent
            // matrices (spectral radius zero) from an unlucky start.
            continue;
        }
        const double est_a = std::exp(log_sum_a / double(count_a));
        const double est_b = std::exp(log_sum_b / double(count_b));
        est.value = std::exp((log_sum_a + log_sum_b) / double(count_a + count_b));
        est.converged = std::abs(est_a - est_b) <= tol * std::max(est.value, 1e-300);
        est.iterations = max_iter;
        return est;
    }
    // Every start collapsed to zero: nilpotent (or zero) matrix.
    est.value = 0.0;
    est.converged = true;
    return est;
}

/// Fixed sparse recurrent reservoir plus trainable input map.
template <Scalar T>
struct Reservoir {
    Parameter<T> w;       // [H, H], trainable = false, spectral radius = rho
    Parameter<T> w_in;    // [H, D], trainable
    std::size_t size = 0;
    std::size_t input_dim = 0;
    double rho = 0.99;
    double alpha = 0.1;
    double density = 0.1;
    std::uint64_t seed = 0;
};

/// Builds the reservoir: Bernoulli(density) support, active entries drawn
/// uniform(-1,1), then the whole matrix rescaled so the measured spectral
/// radius equals rho. W_in is uniform(-1,1)/sqrt(D).
template <Scalar T>
Reservoir<T> init_reservoir(std::size_t H, double density, double rho, std::size_t D,
                            RngStream rng, double alpha = 0.1) {
    if (H < 1) throw ConfigError("reservoir: H must be >= 1");
    if (!(density > 0.0 && density <= 1.0))
        throw ConfigError("reservoir: density must lie in (0, 1]");
    if (!(rho > 0.0)) throw ConfigError("reservoir: rho must be positive");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("reservoir: alpha must lie in (0, 1]");

    // Draw order (documented for the recount oracle): entries row-major, one
    // mask draw each; active entries take one value draw immediately after.
    Tensor<T> w({H, H}, T(0));
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < H * H; ++i)
        if (rng.bernoulli(density)) {
            w[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
            ++nonzero;
        }
    if (nonzero == 0)
        throw ConfigError("reservoir: empty support at H=" + std::to_string(H) + ", density=" +
                          std::to_string(density) + "; reseed or raise density");

    const SpectralRadiusEstimate raw = spectral_radius(w);
    if (!(raw.value > 0.0) || !std::isfinite(raw.value))
        throw ConfigError("reservoir: raw matrix has zero spectral radius; reseed");
    const double scale = rho / raw.value;
    for (T& v : w.values()) v = static_cast<T>(double(v) * scale);

    Reservoir<T> res;
    res.w = Parameter<T>("reservoir.w", std::move(w), /*trainable=*/false);
    Tensor<T> win = Tensor<T>::uniform({H, D}, rng, -1.0, 1.0);
    const T in_scale = static_cast<T>(1.0 / std::sqrt(double(D)));
    for (T& v : win.values()) v *= in_scale;
    res.w_in = Parameter<T>("reservoir.w_in", std::move(win), /*trainable=*/true);
    res.size = H;
    res.input_dim = D;
    res.rho = rho;
    res.alpha = alpha;
    res.density = density;
    res.seed = rng.seed();
    return res;
}

/// One sequence of reservoir states, plus what BPTT needs to run backward.
template <Scalar T>
struct StateTrajectory {
    Tensor<T> states;   // [H, T], state at t = 1..T
    Tensor<T> initial;  // [H] = h_0
    Tensor<T> inputs;   // [D, T] cached driving sequence
    bool cached = false;
};

/// Leaky recurrence h_t = (1-alpha) h_{t-1} + alpha tanh(W h_{t-1} + W_in u_t),
/// u_t the t-th input column.
template <Scalar T>
StateTrajectory<T> esn_forward(const Tensor<T>& inputs, const Reservoir<T>& res,
                               const Tensor<T>& h0) {
    if (inputs.rank() != 2 || inputs.extent(0) != res.input_dim)
        throw ShapeError("esn_forward: inputs must be [" + std::to_string(res.input_dim) +
                         ",T], got " + shape_str(inputs.shape()));
    h0.require_shape({res.size}, "esn_forward h0");
    if (!h0.all_finite()) throw NumericError("esn_forward: non-finite initial state");
    const std::size_t H = res.size, D = res.input_dim, Tn = inputs.extent(1);
    const double a = res.alpha;

    StateTrajectory<T> traj;
    traj.states = Tensor<T>({H, Tn});
    traj.initial = h0;
    traj.inputs = inputs;
    traj.cached = true;

    std::vector<double> h(H), pre(H);
    for (std::size_t i = 0; i < H; ++i) h[i] = h0[i];
    for (std::size_t t = 0; t < Tn; ++t) {
        for (std::size_t i = 0; i < H; ++i) {
            double acc = 0;
            const T* wr = res.w.value.data() + i * H;
            for (std::size_t j = 0; j < H; ++j) acc += double(wr[j]) * h[j];
            const T* vr = res.w_in.value.data() + i * D;
            for (std::size_t d = 0; d < D; ++d) acc += double(vr[d]) * double(inputs.at({d, t}));
            pre[i] = acc;
        }
        for (std::size_t i = 0; i < H; ++i) {
            h[i] = (1.0 - a) * h[i] + a * std::tanh(pre[i]);
            traj.states.at({i, t}) = static_cast<T>(h[i]);
        }
    }
    return traj;
}

/// Full BPTT. Accumulates into res.w_in.grad and returns the gradient with
/// respect to the input sequence. W receives nothing.
template <Scalar T>
Tensor<T> esn_backward(const StateTrajectory<T>& traj, Reservoir<T>& res,
                       const Tensor<T>& d_states) {
    if (!traj.cached) throw StateError("esn_backward: trajectory was not cached by a forward run");
    d_states.require_shape(traj.states.shape(), "esn_backward upstream");
    const std::size_t H = res.size, D = res.input_dim, Tn = traj.states.extent(1);
    const double a = res.alpha;

    Tensor<T> d_inputs({D, Tn}, T(0));
    if (a == 0.0) return d_inputs;  // inputs never enter the state
    std::vector<double> delta(H), dpre(H), next_delta(H);
    for (std::size_t i = 0; i < H; ++i) delta[i] = d_states.at({i, Tn - 1});

    for (std::size_t t = Tn; t-- > 0;) {
        // Recover tanh output a_t from the stored states.
        for (std::size_t i = 0; i < H; ++i) {
            const double prev = t == 0 ? double(traj.initial[i]) : double(traj.states.at({i, t - 1}));
            const double cur = traj.states.at({i, t});
            const double act = (cur - (1.0 - a) * prev) / a;
            dpre[i] = delta[i] * a * (1.0 - act * act);
        }
        for (std::size_t i = 0; i < H; ++i) {
            const double g = dpre[i];
            T* wrow = res.w_in.grad.data() + i * D;
            for (std::size_t d = 0; d < D; ++d)
                wrow[d] += static_cast<T>(g * double(traj.inputs.at({d, t})));
        }
        for (std::size_t d = 0; d < D; ++d) {
            double acc = 0;
            for (std::size_t i = 0; i < H; ++i)
                acc += double(res.w_in.value.at({i, d})) * dpre[i];
            d_inputs.at({d, t}) = static_cast<T>(acc);
        }
        if (t > 0) {
            for (std::size_t j = 0; j < H; ++j) {
                double acc = (1.0 - a) * delta[j] + double(d_states.at({j, t - 1}));
                for (std::size_t i = 0; i < H; ++i)
                    acc += double(res.w.value.at({i, j})) * dpre[i];
                next_delta[j] = acc;
            }
            delta.swap(next_delta);
        }
    }
    return d_inputs;
}

/// Distance between two trajectories driven by identical inputs from
/// different initial states; the echo-state property shows up as decay.
template <Scalar T>
std::vector<double> echo_state_probe(const Reservoir<T>& res, const Tensor<T>& inputs,
                                     const Tensor<T>& h0_a, const Tensor<T>& h0_b) {
    const StateTrajectory<T> ta = esn_forward(inputs, res, h0_a);
    const StateTrajectory<T> tb = esn_forward(inputs, res, h0_b);
    const std::size_t H = res.size, Tn = inputs.extent(1);
    std::vector<double> div(Tn, 0.0);
    for (std::size_t t = 0; t < Tn; ++t) {
        double acc = 0;
        for (std::size_t i = 0; i < H; ++i) {
            const double d = double(ta.states.at({i, t})) - double(tb.states.at({i, t}));
            acc += d * d;
        }
        div[t] = std::sqrt(acc);
    }
    return div;
}

// ---------------------------------------------------------------------------
// Batched path used by the model during training. Column-major [H, B] state
// blocks so each step is one GEMM against W.
// ---------------------------------------------------------------------------

template <Scalar T>
struct EsnBatchCache {
    std::size_t batch = 0, time_len = 0;
    aligned_vector<T> inputs_flat;  // [D, B*T] column for (t*B + b)
    aligned_vector<T> activ;        // [T][H, B] tanh outputs
    Tensor<T> gap_out;           // [B, H] time-mean of states
    bool cached = false;
};

template <Scalar T>
using ColMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Batched forward from h_0 = 0; returns time-averaged states per sample.
template <Scalar T>
void esn_forward_batch(const Reservoir<T>& res, const Tensor<T>& inputs /*[B,D,T]*/,
                       EsnBatchCache<T>& cache) {
    if (inputs.rank() != 3 || inputs.extent(1) != res.input_dim)
        throw ShapeError("esn_forward_batch: inputs must be [B,D,T]");
    const std::size_t B = inputs.extent(0), D = res.input_dim, Tn = inputs.extent(2);
    const std::size_t H = res.size;
    const T a = static_cast<T>(res.alpha);

    cache.batch = B;
    cache.time_len = Tn;
    cache.inputs_flat.assign(D * B * Tn, T(0));
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t d = 0; d < D; ++d) {
            const T* src = inputs.data() + (b * D + d) * Tn;
            for (std::size_t t = 0; t < Tn; ++t)
                cache.inputs_flat[(t * B + b) * D + d] = src[t];
        }

    Eigen::Map<const ColMat<T>> w(res.w.value.data(), H, H);          // W^T view (row-major data)
    Eigen::Map<const ColMat<T>> win(res.w_in.value.data(), D, H);     // W_in^T view
    Eigen::Map<const ColMat<T>> u_all(cache.inputs_flat.data(), D, B * Tn);

    // Row-major [H,H] seen column-major is the transpose; step uses W h, so
    // multiply with the transposed view.
    ColMat<T> wu = win.transpose() * u_all;  // [H, B*T]

    cache.activ.assign(Tn * H * B, T(0));
    ColMat<T> h = ColMat<T>::Zero(H, B), pre(H, B);
    ColMat<T> gap_sum = ColMat<T>::Zero(H, B);
    for (std::size_t t = 0; t < Tn; ++t) {
        pre.noalias() = w.transpose() * h;
        pre.noalias() += wu.middleCols(t * B, B);
        Eigen::Map<ColMat<T>> act(cache.activ.data() + t * H * B, H, B);
        act = pre.array().tanh();
        h = (T(1) - a) * h + a * act;
        gap_sum += h;
    }
    cache.gap_out = Tensor<T>({B, H});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < H; ++i)
            cache.gap_out.at({b, i}) = gap_sum(i, b) / static_cast<T>(double(Tn));
    cache.cached = true;
}

/// Batched BPTT given gradients of the time-averaged states; accumulates into
/// w_in.grad and returns d inputs as [B, D, T].
template <Scalar T>
Tensor<T> esn_backward_batch(Reservoir<T>& res, const Tensor<T>& d_gap /*[B,H]*/,
                             EsnBatchCache<T>& cache) {
    if (!cache.cached) throw StateError("esn_backward_batch: no cached forward");
    const std::size_t B = cache.batch, Tn = cache.time_len;
    const std::size_t H = res.size, D = res.input_dim;
    const T a = static_cast<T>(res.alpha);
    d_gap.require_shape({B, H}, "esn_backward_batch upstream");

    // Every state h_t receives d_gap / T from the pooling.
    ColMat<T> ext(H, B);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t i = 0; i < H; ++i)
            ext(i, b) = d_gap.at({b, i}) / static_cast<T>(double(Tn));

    Eigen::Map<const ColMat<T>> w(res.w.value.data(), H, H);
    Eigen::Map<const ColMat<T>> win(res.w_in.value.data(), D, H);

    ColMat<T> delta = ext, dpre_t(H, B);
    for (std::size_t t = Tn; t-- > 0;) {
        Eigen::Map<ColMat<T>> act(cache.activ.data() + t * H * B, H, B);
        dpre_t = delta.array() * a * (T(1) - act.array().square());
        act = dpre_t;  // slot reused: activation is no longer needed at this t
        if (t > 0) {
            // delta_{t-1} = (1-a) delta_t + W^T dpre_t + ext
            delta = (T(1) - a) * delta + ext;
            delta.noalias() += w * dpre_t;  // col-major view of row-major W is W^T
        }
    }

    Eigen::Map<const ColMat<T>> u_all(cache.inputs_flat.data(), D, B * Tn);
    Eigen::Map<const ColMat<T>> dpre_all(cache.activ.data(), H, B * Tn);
    ColMat<T> dwin = dpre_all * u_all.transpose();               // [H, D]
    for (std::size_t i = 0; i < H; ++i)
        for (std::size_t d = 0; d < D; ++d)
            res.w_in.grad[i * D + d] += dwin(i, d);

    ColMat<T> du_all = win * dpre_all;  // W_in^T dpre, [D, B*T]
    Tensor<T> d_inputs({B, D, Tn});
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t d = 0; d < D; ++d) {
            T* dst = d_inputs.data() + (b * D + d) * Tn;
            for (std::size_t t = 0; t < Tn; ++t) dst[t] = du_all(d, t * B + b);
        }
    cache.cached = false;
    return d_inputs;
}

}  // namespace esnnet
