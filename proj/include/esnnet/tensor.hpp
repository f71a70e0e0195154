#pragma once

// Dense row-major tensor storage. This is deliberately small: the model uses
// a fixed op set, so the tensor only provides storage, shape bookkeeping,
// deterministic fills, and finiteness checks. No broadcasting: a shape
// mismatch is always an error, never a silent rule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "esnnet/common.hpp"
#include "esnnet/rng.hpp"

namespace esnnet {

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (const std::size_t e : s) n *= e;
    return n;
}

template <Scalar T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
        check_extents(shape_);
        data_.assign(shape_numel(shape_), fill);
    }

    Tensor(Shape shape, const std::vector<T>& values) : shape_(std::move(shape)) {
        check_extents(shape_);
        if (values.size() != shape_numel(shape_))
            throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " +
                             shape_str(shape_));
        data_.assign(values.begin(), values.end());
    }

    /// Every element drawn uniform from [lo, hi); consumes exactly numel draws.
    static Tensor uniform(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
        Tensor t(std::move(shape));
        for (T& v : t.data_) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    /// Every element drawn from N(0, sigma^2); consumes exactly numel draws.
    static Tensor normal(Shape shape, RngStream& rng, double sigma = 1.0) {
        Tensor t(std::move(shape));
        for (T& v : t.data_) v = static_cast<T>(sigma * rng.normal());
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
    std::size_t numel() const { return data_.size(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    aligned_vector<T>& values() { return data_; }
    const aligned_vector<T>& values() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    T& at(std::initializer_list<std::size_t> idx) { return data_[flat_index(idx)]; }
    const T& at(std::initializer_list<std::size_t> idx) const { return data_[flat_index(idx)]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// True iff every element is finite (no NaN, no Inf).
    bool all_finite() const {
        for (const T v : data_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    void require_shape(const Shape& expect, const char* what) const {
        if (shape_ != expect)
            throw ShapeError(std::string(what) + ": expected shape " + shape_str(expect) +
                             ", got " + shape_str(shape_));
    }

  private:
    static void check_extents(const Shape& s) {
        for (const std::size_t e : s)
            if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(s));
    }

    std::size_t flat_index(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape_.size())
            throw ShapeError("tensor: index rank " + std::to_string(idx.size()) +
                             " against shape " + shape_str(shape_));
        std::size_t flat = 0;
        std::size_t axis = 0;
        for (const std::size_t i : idx) {
            if (i >= shape_[axis])
                throw ShapeError("tensor: index out of range on axis " + std::to_string(axis));
            flat = flat * shape_[axis] + i;
            ++axis;
        }
        return flat;
    }

    Shape shape_;
    aligned_vector<T> data_;
};

}  // namespace esnnet
