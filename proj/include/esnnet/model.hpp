#pragma once

// ESNNet: temporal conv -> spatial conv -> ESN -> GAP -> linear -> softmax,
// plus the conv-only ablation variant where the reservoir stage is the
// identity and pooling runs directly over the spatial feature maps.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "esnnet/frontend.hpp"
#include "esnnet/layers.hpp"
#include "esnnet/reservoir.hpp"

namespace esnnet {

enum class Variant { full, conv_only };

inline const char* variant_name(Variant v) {
    return v == Variant::full ? "full" : "conv-only";
}

/// Every architectural and training hyperparameter.
struct ModelConfig {
    std::size_t channels = 72;       // C
    std::size_t samples = 250;       // T
    std::size_t filters = 180;       // D
    std::size_t kernel = 5;          // k, odd
    std::size_t reservoir = 100;     // H
    double rho = 0.99;
    double alpha = 0.1;
    double density = 0.1;
    double l2 = 1e-4;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 40;
    std::size_t patience = 8;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
    Variant variant = Variant::full;

    void validate() const {
        auto positive = [](std::size_t v, const char* field) {
            if (v < 1) throw ConfigError(std::string("model.") + field + ": must be >= 1");
        };
        positive(channels, "channels");
        positive(samples, "samples");
        positive(filters, "filters");
        positive(kernel, "kernel");
        positive(reservoir, "reservoir");
        positive(batch_size, "batch_size");
        positive(max_epochs, "max_epochs");
        positive(patience, "patience");
        if (kernel % 2 == 0) throw ConfigError("model.kernel: must be odd");
        if (kernel > samples) throw ConfigError("model.kernel: longer than the segment");
        if (!(rho > 0.0)) throw ConfigError("model.rho: must be positive");
        if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("model.alpha: must lie in (0, 1]");
        if (!(density > 0.0 && density <= 1.0))
            throw ConfigError("model.density: must lie in (0, 1]");
        if (l2 < 0.0) throw ConfigError("model.l2: must be non-negative");
        if (!(learning_rate > 0.0)) throw ConfigError("model.learning_rate: must be positive");
        if (seeds.empty()) throw ConfigError("model.seeds: at least one seed required");
    }
};

inline constexpr std::size_t kClasses = 3;

template <Scalar T>
class EsnNet {
  public:
    EsnNet() = default;

    /// Deterministic build: each component draws from its own stream forked
    /// off the seed, so the full and conv-only variants share byte-identical
    /// front-end initializations.
    EsnNet(const ModelConfig& config, std::uint64_t seed) : config_(config) {
        config.validate();
        const RngStream root(seed);
        temporal_ = TemporalConv<T>(config.filters, config.kernel, root.fork("temporal"));
        spatial_ = SpatialConv<T>(config.filters, config.channels, root.fork("spatial"));
        if (config.variant == Variant::full)
            reservoir_ = init_reservoir<T>(config.reservoir, config.density, config.rho,
                                           config.filters, root.fork("reservoir"), config.alpha);
        const std::size_t head_in =
            config.variant == Variant::full ? config.reservoir : config.filters;
        head_ = Head<T>(head_in, kClasses, root.fork("head"));
        build_seed_ = seed;
    }

    const ModelConfig& config() const { return config_; }
    Variant variant() const { return config_.variant; }
    std::uint64_t build_seed() const { return build_seed_; }

    TemporalConv<T>& temporal() { return temporal_; }
    SpatialConv<T>& spatial() { return spatial_; }
    Head<T>& head() { return head_; }
    Reservoir<T>& reservoir() {
        if (!reservoir_) throw StateError("model: conv-only variant has no reservoir");
        return *reservoir_;
    }
    bool has_reservoir() const { return reservoir_.has_value(); }

    /// Stable enumeration of all parameters (trainable and fixed).
    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out{&temporal_.kernels, &temporal_.bn.gamma,
                                       &temporal_.bn.beta,  &spatial_.weights,
                                       &spatial_.bn.gamma,  &spatial_.bn.beta};
        if (reservoir_) {
            out.push_back(&reservoir_->w);
            out.push_back(&reservoir_->w_in);
        }
        out.push_back(&head_.weight);
        out.push_back(&head_.bias);
        return out;
    }

    std::size_t trainable_count() {
        std::size_t n = 0;
        for (const Parameter<T>* p : parameters())
            if (p->trainable) n += p->value.numel();
        return n;
    }

    void zero_grad() {
        for (Parameter<T>* p : parameters()) p->zero_grad();
    }

    /// [B, C, T] -> logits [B, 3].
    Tensor<T> forward(const Tensor<T>& batch, Mode mode) {
        if (batch.rank() != 3 || batch.extent(1) != config_.channels ||
            batch.extent(2) != config_.samples)
            throw ShapeError("model forward: batch must be [B," + std::to_string(config_.channels) +
                             "," + std::to_string(config_.samples) + "], got " +
                             shape_str(batch.shape()));
        frontend_forward(temporal_, spatial_, batch, mode, front_);
        const std::size_t B = batch.extent(0), Tn = config_.samples;

        if (reservoir_) {
            esn_forward_batch(*reservoir_, front_.out, esn_);
            features_ = esn_.gap_out;  // [B, H]
        } else {
            const std::size_t D = config_.filters;
            features_ = Tensor<T>({B, D});
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t d = 0; d < D; ++d) {
                    const T* f = front_.out.data() + (b * D + d) * Tn;
                    double acc = 0;
                    for (std::size_t t = 0; t < Tn; ++t) acc += double(f[t]);
                    features_.at({b, d}) = static_cast<T>(acc / double(Tn));
                }
        }

        Tensor<T> logits({B, kClasses});
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < kClasses; ++i) {
                double acc = head_.bias.value[i];
                const T* wr = head_.weight.value.data() + i * head_.in_features();
                const T* x = features_.data() + b * head_.in_features();
                for (std::size_t j = 0; j < head_.in_features(); ++j)
                    acc += double(wr[j]) * double(x[j]);
                logits.at({b, i}) = static_cast<T>(acc);
            }
        return logits;
    }

    /// Batch-mean cross-entropy plus l2 * sum of squares of every trainable
    /// parameter (the fixed reservoir and BN running stats contribute nothing).
    double loss(const Tensor<T>& logits, const std::vector<int>& labels) {
        xent_ = softmax_cross_entropy(logits, labels);
        labels_ = labels;
        double penalty = 0;
        if (config_.l2 > 0)
            for (const Parameter<T>* p : parameters())
                if (p->trainable)
                    for (std::size_t i = 0; i < p->value.numel(); ++i)
                        penalty += double(p->value[i]) * double(p->value[i]);
        return xent_.loss + config_.l2 * penalty;
    }

    /// Reverse pass for the most recent forward + loss. Accumulates into the
    /// parameter gradients (callers zero_grad() between steps).
    void backward() {
        if (labels_.empty()) throw StateError("model backward: no cached loss");
        const std::size_t B = xent_.probabilities.extent(0);
        const Tensor<T> d_logits = softmax_cross_entropy_backward(xent_, labels_);

        const std::size_t in = head_.in_features();
        Tensor<T> d_feat({B, in}, T(0));
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t i = 0; i < kClasses; ++i) {
                const double dv = d_logits.at({b, i});
                head_.bias.grad[i] += static_cast<T>(dv);
                T* wg = head_.weight.grad.data() + i * in;
                const T* wr = head_.weight.value.data() + i * in;
                const T* x = features_.data() + b * in;
                T* df = d_feat.data() + b * in;
                for (std::size_t j = 0; j < in; ++j) {
                    wg[j] += static_cast<T>(dv * double(x[j]));
                    df[j] += static_cast<T>(dv * double(wr[j]));
                }
            }

        Tensor<T> d_front;
        const std::size_t Tn = config_.samples;
        if (reservoir_) {
            d_front = esn_backward_batch(*reservoir_, d_feat, esn_);
        } else {
            const std::size_t D = config_.filters;
            d_front = Tensor<T>({B, D, Tn});
            for (std::size_t b = 0; b < B; ++b)
                for (std::size_t d = 0; d < D; ++d) {
                    const T dv = static_cast<T>(double(d_feat.at({b, d})) / double(Tn));
                    T* row = d_front.data() + (b * D + d) * Tn;
                    for (std::size_t t = 0; t < Tn; ++t) row[t] = dv;
                }
        }
        frontend_backward(temporal_, spatial_, front_, d_front);

        if (config_.l2 > 0)
            for (Parameter<T>* p : parameters())
                if (p->trainable)
                    for (std::size_t i = 0; i < p->value.numel(); ++i)
                        p->grad[i] += static_cast<T>(2.0 * config_.l2 * double(p->value[i]));
        labels_.clear();
    }

    /// Checkpoint state: every parameter plus the BN running statistics.
    std::vector<std::pair<std::string, Tensor<T>*>> state_tensors() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        for (Parameter<T>* p : parameters()) out.emplace_back(p->name, &p->value);
        out.emplace_back("temporal.bn.running_mean", &temporal_.bn.running_mean);
        out.emplace_back("temporal.bn.running_var", &temporal_.bn.running_var);
        out.emplace_back("spatial.bn.running_mean", &spatial_.bn.running_mean);
        out.emplace_back("spatial.bn.running_var", &spatial_.bn.running_var);
        return out;
    }

  private:
    ModelConfig config_;
    std::uint64_t build_seed_ = 0;
    TemporalConv<T> temporal_;
    SpatialConv<T> spatial_;
    std::optional<Reservoir<T>> reservoir_;
    Head<T> head_;

    FrontEndCache<T> front_;
    EsnBatchCache<T> esn_;
    Tensor<T> features_;  // [B, head-in]
    SoftmaxXent<T> xent_;
    std::vector<int> labels_;
};

template <Scalar T>
EsnNet<T> build(const ModelConfig& config, std::uint64_t seed) {
    return EsnNet<T>(config, seed);
}

/// Argmax per row; ties break toward the lowest class index.
template <Scalar T>
std::vector<int> predict(const Tensor<T>& logits) {
    if (logits.rank() != 2) throw ShapeError("predict: logits must be [B,classes]");
    const std::size_t B = logits.extent(0), K = logits.extent(1);
    std::vector<int> out(B, 0);
    for (std::size_t b = 0; b < B; ++b) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < K; ++j)
            if (double(logits.at({b, j})) > double(logits.at({b, best}))) best = j;
        out[b] = static_cast<int>(best);
    }
    return out;
}

}  // namespace esnnet
