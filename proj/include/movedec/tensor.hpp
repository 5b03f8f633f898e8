#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "movedec/error.hpp"

namespace movedec::nn {

// Dense row-major n-d array of 64-bit reals. Gradients are kept as a second
// Tensor next to the value wherever a module needs them (see Param) rather
// than inside the Tensor itself.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(checked_numel(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<std::size_t>(numel_of(shape)) != v.size())
            throw ShapeError("tensor data length does not match shape");
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double x) {
        Tensor t(std::move(s));
        for (double& e : t.v) e = x;
        return t;
    }
    static Tensor scalar(double x) { return Tensor({1}, {x}); }

    int numel() const { return static_cast<int>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    double& operator[](std::size_t i) { return v[i]; }
    double operator[](std::size_t i) const { return v[i]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    static long numel_of(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) n *= d;
        return n;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += ",";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

private:
    static std::size_t checked_numel(const std::vector<int>& s) {
        long n = 1;
        for (int d : s) {
            if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
            n *= d;
        }
        return static_cast<std::size_t>(n);
    }
};

// A trainable tensor: value plus accumulated gradient.
struct Param {
    Tensor value;
    Tensor grad;

    Param() = default;
    explicit Param(Tensor v) : value(std::move(v)), grad(Tensor::zeros(value.shape)) {}

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

}  // namespace movedec::nn
