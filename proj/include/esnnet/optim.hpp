#pragma once

// Adam with bias correction, plus accuracy-maximizing early stopping.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "esnnet/common.hpp"
#include "esnnet/parameter.hpp"

namespace esnnet {

template <Scalar T>
class Adam {
  public:
    Adam() = default;
    explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// One update over the trainable parameters; non-trainable ones (the
    /// fixed reservoir) are skipped entirely. Throws on non-finite gradients.
    void step(std::vector<Parameter<T>*>& params) {
        if (moments_.empty()) {
            moments_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                if (!params[i]->trainable) continue;
                moments_[i].m.assign(params[i]->value.numel(), 0.0);
                moments_[i].v.assign(params[i]->value.numel(), 0.0);
            }
        }
        if (moments_.size() != params.size())
            throw StateError("adam: parameter list changed size mid-run");
        ++step_count_;
        const double bc1 = 1.0 - std::pow(beta1_, double(step_count_));
        const double bc2 = 1.0 - std::pow(beta2_, double(step_count_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Parameter<T>& p = *params[i];
            if (!p.trainable) continue;
            auto& mom = moments_[i];
            for (std::size_t j = 0; j < p.value.numel(); ++j) {
                const double g = p.grad[j];
                if (!std::isfinite(g))
                    throw NumericError("adam: non-finite gradient in " + p.name + "[" +
                                       std::to_string(j) + "]");
                mom.m[j] = beta1_ * mom.m[j] + (1.0 - beta1_) * g;
                mom.v[j] = beta2_ * mom.v[j] + (1.0 - beta2_) * g * g;
                const double m_hat = mom.m[j] / bc1;
                const double v_hat = mom.v[j] / bc2;
                p.value[j] -= static_cast<T>(lr_ * m_hat / (std::sqrt(v_hat) + eps_));
            }
        }
    }

    std::size_t step_count() const { return step_count_; }
    double learning_rate() const { return lr_; }

  private:
    struct Moments {
        std::vector<double> m, v;
    };
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::size_t step_count_ = 0;
    std::vector<Moments> moments_;
};

/// Stops after `patience` consecutive epochs without a strict improvement of
/// the monitored metric (validation accuracy, maximized).
class EarlyStopper {
  public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    /// Feed one epoch metric; returns true when training should stop.
    bool should_stop(double metric) {
        if (!std::isfinite(metric)) throw NumericError("early stop: non-finite metric");
        if (metric > best_) {
            best_ = metric;
            stale_ = 0;
        } else {
            ++stale_;
        }
        return stale_ >= patience_;
    }

    double best() const { return best_; }
    std::size_t epochs_since_improvement() const { return stale_; }

  private:
    std::size_t patience_;
    std::size_t stale_ = 0;
    double best_ = -std::numeric_limits<double>::infinity();
};

}  // namespace esnnet
