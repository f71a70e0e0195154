#pragma once

// A model weight: value plus accumulated gradient of identical shape. The
// trainable flag is how the fixed reservoir matrix is represented — the
// optimizer skips anything with trainable == false.

#include <string>
#include <utility>

#include "esnnet/tensor.hpp"

namespace esnnet {

template <Scalar T>
struct Parameter {
    Parameter() = default;
    Parameter(std::string name, Tensor<T> value, bool trainable = true)
        : name(std::move(name)),
          value(std::move(value)),
          grad(this->value.shape(), T(0)),
          trainable(trainable) {}

    void zero_grad() { grad.fill(T(0)); }

    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    bool trainable = true;
};

}  // namespace esnnet
