#pragma once

#include <cmath>
#include <functional>

#include "stylemod/autodiff.hpp"
#include "stylemod/rng.hpp"

namespace testutil {

using stylemod::Rng;
using stylemod::Tensor;
using stylemod::Var;

// Central finite differences against the analytic gradient for a scalar
// function of several leaf tensors.
inline double max_rel_error(const std::function<Var(const std::vector<Var>&)>& f,
                            std::vector<Tensor> leaf_values, double h = 1e-6) {
    std::vector<Var> leaves;
    for (Tensor& t : leaf_values) leaves.push_back(stylemod::param(t));
    Var out = f(leaves);
    stylemod::backward(out);

    double worst = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::int64_t j = 0; j < leaf_values[li].size(); ++j) {
            auto eval = [&](double delta) {
                std::vector<Var> probe;
                for (std::size_t k = 0; k < leaf_values.size(); ++k) {
                    Tensor t = leaf_values[k];
                    if (k == li) t[j] += delta;
                    probe.push_back(stylemod::constant(std::move(t)));
                }
                return f(probe).val()[0];
            };
            const double fd = (eval(h) - eval(-h)) / (2.0 * h);
            const double an = leaves[li].grad().v.empty() ? 0.0 : leaves[li].grad()[j];
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-8});
            worst = std::max(worst, std::abs(fd - an) / denom);
        }
    }
    return worst;
}

inline Tensor rand_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (auto& x : t.v) x = rng.normal() * scale;
    return t;
}

inline Tensor rand_image(int canvas, Rng& rng) {
    Tensor t({3, canvas, canvas});
    for (auto& x : t.v) x = rng.uniform();
    return t;
}

}  // namespace testutil
