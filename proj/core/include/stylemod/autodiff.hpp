#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "stylemod/tensor.hpp"

namespace stylemod {

// Reverse-mode autodiff over Tensor. A Var is a shared handle to a graph
// node; ops record parents and a backward closure only when some input
// requires a gradient, so inference-only paths build no graph.
namespace detail {
struct Node {
    Tensor val;
    Tensor grad;  // allocated lazily in backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> back;  // accumulates into parents' grads

    void ensure_grad() {
        if (grad.v.empty()) grad = Tensor::zeros(val.shape);
    }
};
}  // namespace detail

class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false)
        : n_(std::make_shared<detail::Node>()) {
        n_->val = std::move(value);
        n_->requires_grad = requires_grad;
    }

    bool defined() const { return n_ != nullptr; }
    const Tensor& val() const { return n_->val; }
    Tensor& mutable_val() { return n_->val; }  // leaf updates (optimizers)
    const Tensor& grad() const { return n_->grad; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    void zero_grad() {
        if (n_ && !n_->grad.v.empty()) std::fill(n_->grad.v.begin(), n_->grad.v.end(), 0.0);
    }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }
    detail::Node* node() const { return n_.get(); }
    const std::shared_ptr<detail::Node>& handle() const { return n_; }

    static Var from_node(std::shared_ptr<detail::Node> n) {
        Var v;
        v.n_ = std::move(n);
        return v;
    }

private:
    std::shared_ptr<detail::Node> n_;
};

inline Var constant(Tensor t) { return Var(std::move(t), false); }
inline Var param(Tensor t) { return Var(std::move(t), true); }

// Runs reverse accumulation from a scalar root. Grads accumulate; callers
// zero leaf grads between optimizer steps.
void backward(const Var& root);

// ---- elementwise / scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double c);
Var mul_scalar(const Var& a, double c);
Var neg(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.2);
Var tanh_v(const Var& a);
Var sigmoid_v(const Var& a);
Var softplus_v(const Var& a);
Var exp_v(const Var& a);
Var log_v(const Var& a);
Var sqrt_v(const Var& a);
Var square(const Var& a);
Var inv_v(const Var& a);
Var clamp01(const Var& a);  // straight-through inside [0,1], zero grad outside
Var stop_grad(const Var& a);

// ---- broadcast: s is [1] (all elements) or [C] against a [C,H,W] ----
Var bcast_mul(const Var& x, const Var& s);
Var bcast_add(const Var& x, const Var& s);

// ---- reductions ----
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);  // flat inner product -> [1]

// ---- shaping ----
Var reshape(const Var& a, std::vector<int> shape);
Var concat_flat(const std::vector<Var>& parts);  // -> rank-1
Var slice_flat(const Var& a, std::int64_t start, std::int64_t len);

// ---- linear algebra ----
Var matmul(const Var& a, const Var& b);              // [m,k]x[k,n]
Var matmul_nt(const Var& a, const Var& b);           // [m,k]x[n,k]^T -> [m,n]
Var linear(const Var& x, const Var& w, const Var& b);  // x [n,in] or [in]; w [out,in]; b [out] or undefined
Var gather_rows(const Var& table, const std::vector<int>& idx);  // table [v,d] -> [|idx|,d]

// ---- conv / spatial (single sample, NCHW without N) ----
Var conv2d(const Var& x, const Var& w, const Var& b, int stride = 1, int pad = 1);
Var upsample2(const Var& x);                       // nearest-neighbour 2x
Var shift2d(const Var& x, int dy, int dx);         // zero-padded translation
Var channel_mean_spatial(const Var& x);            // [C,H,W] -> [C,H,W] every pixel = per-pixel mean over C
Var spatial_mean(const Var& x);                    // [C,H,W] -> [C], per-channel spatial average
Var spatial_max(const Var& x);                     // [C,H,W] -> [C], per-channel spatial max

// ---- weight modulation helpers ([O,C,kh,kw] weights) ----
Var modulate_cin(const Var& w, const Var& s);      // scale input channels by s [C]
Var rows_sumsq(const Var& w);                      // -> [O], sum over (C,kh,kw)
Var scale_rows(const Var& w, const Var& d);        // scale output channels by d [O]

// ---- losses ----
// logits [n,c]; mean over batch of -log softmax(logits)[label]
Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels);

// x flat -> x / max(||x||, eps)
Var normalize_vec(const Var& x, double eps = 1e-12);

}  // namespace stylemod
