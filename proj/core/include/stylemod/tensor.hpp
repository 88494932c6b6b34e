#pragma once

#include <cassert>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylemod {

// Dense row-major double tensor. Rank is dynamic; most of the codebase uses
// rank 1 ([n]), rank 2 ([rows, cols]) and rank 3 ([channels, height, width]).
struct Tensor {
    std::vector<int> shape;
    std::vector<double> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), 0.0) {}
    Tensor(std::vector<int> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        if (static_cast<std::int64_t>(v.size()) != count(shape))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static std::int64_t count(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor full(std::vector<int> s, double value) {
        Tensor t(std::move(s));
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }
    static Tensor scalar(double value) { return Tensor({1}, {value}); }

    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    double& operator[](std::int64_t i) { return v[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return v[static_cast<std::size_t>(i)]; }

    // [C,H,W] indexing
    double& at3(int c, int y, int x) {
        return v[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape[1] + y) * shape[2] + x)];
    }
    double at3(int c, int y, int x) const {
        return v[static_cast<std::size_t>((static_cast<std::int64_t>(c) * shape[1] + y) * shape[2] + x)];
    }
    // [R,C] indexing
    double& at2(int r, int c) {
        return v[static_cast<std::size_t>(static_cast<std::int64_t>(r) * shape[1] + c)];
    }
    double at2(int r, int c) const {
        return v[static_cast<std::size_t>(static_cast<std::int64_t>(r) * shape[1] + c)];
    }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

}  // namespace stylemod
