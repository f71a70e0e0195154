#pragma once

// Shared error taxonomy and small utilities used across the library.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <new>
#include <stdexcept>
#include <string>
#include <vector>

namespace esnnet {

/// Scalar types the numeric stack is instantiated with.
template <typename T>
concept Scalar = std::same_as<T, float> || std::same_as<T, double>;

/// 64-byte-aligned allocator. Keeping every numeric buffer on the same
/// alignment makes the vectorized kernels take identical code paths on every
/// run, which is what turns "same seed" into "same bits".
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) {}

    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), alignment));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const {
        return true;
    }
};

template <typename T>
using aligned_vector = std::vector<T, AlignedAllocator<T>>;

/// Malformed configuration (bad key, invariant violation). Exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent data (manifest, labels, shapes of user input). Exit code 3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure (non-finite loss or gradient, divergence). Exit code 4.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failure (missing file, short read, checksum mismatch). Exit code 5.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Internal contract violation (caller bug): shape mismatch, missing cache.
struct ShapeError : std::logic_error {
    explicit ShapeError(const std::string& what) : std::logic_error(what) {}
};

struct StateError : std::logic_error {
    explicit StateError(const std::string& what) : std::logic_error(what) {}
};

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int data = 3;
inline constexpr int numeric = 4;
inline constexpr int io = 5;
}  // namespace exit_code

}  // namespace esnnet
