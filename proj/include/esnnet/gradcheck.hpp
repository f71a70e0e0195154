#pragma once

// Central-difference gradient verification. The loss closure must run a pure
// forward pass (no gradient accumulation), so the numeric route stays
// independent of the backward implementation it is checking.

#include <cmath>
#include <functional>
#include <span>
#include <string>

#include "esnnet/common.hpp"
#include "esnnet/parameter.hpp"

namespace esnnet {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

/// Compares the gradients already accumulated in each trainable parameter
/// against (L(p+eps) - L(p-eps)) / (2 eps), element by element. Relative
/// error is |a - n| / max(1e-8, |a| + |n|). 64-bit precision only; central
/// differences are unreliable in 32-bit.
inline GradCheckReport grad_check(std::span<Parameter<double>* const> params,
                                  const std::function<double()>& loss, double eps = 1e-5) {
    if (!(eps >= 1e-7 && eps <= 1e-4))
        throw ConfigError("grad_check: eps must lie in [1e-7, 1e-4]");
    GradCheckReport report;
    for (Parameter<double>* p : params) {
        if (!p->trainable) continue;
        for (std::size_t i = 0; i < p->value.numel(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + eps;
            const double up = loss();
            p->value[i] = saved - eps;
            const double down = loss();
            p->value[i] = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw NumericError("grad_check: non-finite loss while perturbing " + p->name +
                                   "[" + std::to_string(i) + "]");
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p->grad[i];
            const double rel =
                std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p->name;
                report.worst_index = i;
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

}  // namespace esnnet
