#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "nfx/errors.hpp"

namespace nfx::nn {

/// Dense row-major value container. Rank is whatever the op needs; shape is
/// checked at op boundaries, not here.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(count(shape)), 0.0);
    }
    Tensor(std::vector<int> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::size_t>(count(shape)) != data.size())
            throw ShapeMismatch("tensor data does not match shape");
    }

    static std::int64_t count(const std::vector<int>& shape) {
        std::int64_t n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

/// A named trainable tensor with its persistent gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor(value.shape);
    }

    void zero_grad() { grad.fill(0.0); }
};

}  // namespace nfx::nn
