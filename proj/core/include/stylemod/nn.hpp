#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stylemod/autodiff.hpp"
#include "stylemod/rng.hpp"
#include "stylemod/tensor.hpp"

namespace stylemod {

// Named parameter registry. Every trainable component exposes its parameters
// through one of these so optimizers, checkpoints and checksums see the same
// ordered list.
struct ParamSet {
    std::vector<std::pair<std::string, Var>> items;

    Var add(const std::string& name, Tensor init) {
        Var p = param(std::move(init));
        items.emplace_back(name, p);
        return p;
    }
    void absorb(const ParamSet& other, const std::string& prefix) {
        for (const auto& [name, p] : other.items) items.emplace_back(prefix + "/" + name, p);
    }
    std::vector<Var> vars() const {
        std::vector<Var> out;
        out.reserve(items.size());
        for (const auto& [name, p] : items) out.push_back(p);
        return out;
    }
    std::int64_t count() const {
        std::int64_t n = 0;
        for (const auto& [name, p] : items) n += p.val().size();
        return n;
    }
    void zero_grads() {
        for (auto& [name, p] : items) p.zero_grad();
    }
    void freeze() { set_requires_grad(false); }
    void set_requires_grad(bool rg) {
        for (auto& [name, p] : items) p.set_requires_grad(rg);
    }
    // FNV-1a over the raw parameter bytes, in registry order.
    std::uint64_t checksum() const;
};

inline Tensor randn_tensor(std::vector<int> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (auto& x : t.v) x = rng.normal() * stddev;
    return t;
}

struct LinearLayer {
    Var w, b;
    LinearLayer() = default;
    LinearLayer(ParamSet& ps, const std::string& name, int in, int out, Rng& rng,
                double w_scale = -1.0, double b_init = 0.0) {
        const double s = w_scale > 0 ? w_scale : 1.0 / std::sqrt(static_cast<double>(in));
        w = ps.add(name + ".w", randn_tensor({out, in}, rng, s));
        b = ps.add(name + ".b", Tensor::full({out}, b_init));
    }
    Var operator()(const Var& x) const { return linear(x, w, b); }
};

struct ConvLayer {
    Var w, b;
    int stride = 1, pad = 1;
    ConvLayer() = default;
    ConvLayer(ParamSet& ps, const std::string& name, int in_ch, int out_ch, int k, Rng& rng,
              int stride_ = 1, int pad_ = 1)
        : stride(stride_), pad(pad_) {
        const double s = 1.0 / std::sqrt(static_cast<double>(in_ch * k * k));
        w = ps.add(name + ".w", randn_tensor({out_ch, in_ch, k, k}, rng, s));
        b = ps.add(name + ".b", Tensor::zeros({out_ch}));
    }
    Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

// Adam with per-parameter-tensor moment state, matched to the registry order.
class Adam {
public:
    Adam(std::vector<Var> params, double lr, double beta1 = 0.0, double beta2 = 0.99,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const Var& p : params_) {
            m_.push_back(Tensor::zeros(p.val().shape));
            v_.push_back(Tensor::zeros(p.val().shape));
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Var& p = params_[i];
            if (p.grad().v.empty()) continue;
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            Tensor& w = p.mutable_val();
            const Tensor& g = p.grad();
            for (std::int64_t j = 0; j < w.size(); ++j) {
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
                w[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
            }
        }
    }

    void zero_grads() {
        for (Var& p : params_) p.zero_grad();
    }

private:
    std::vector<Var> params_;
    double lr_, beta1_, beta2_, eps_;
    std::int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

}  // namespace stylemod
