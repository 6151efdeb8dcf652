#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace slqi {

struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major tensor. float for training storage, double for the
/// high-precision checking mode.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(count(shape), T(0));
    }

    static std::size_t count(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int e : s) n *= static_cast<std::size_t>(e);
        return n;
    }

    std::size_t numel() const { return data.size(); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void reshape(std::vector<int> s) {
        if (shape != s) {
            shape = std::move(s);
            data.assign(count(shape), T(0));
        }
    }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const Tensor& o) const {
        return shape == o.shape && data == o.data;
    }
};

}  // namespace slqi
