#include "stylemod/autodiff.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace stylemod {

using detail::Node;
using NodeRef = std::shared_ptr<Node>;

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

bool any_grad(std::initializer_list<const Var*> vars) {
    for (const Var* v : vars)
        if (v->defined() && v->requires_grad()) return true;
    return false;
}

Var make_op(Tensor value, std::initializer_list<const Var*> inputs,
            std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(value);
    if (any_grad(inputs)) {
        n->requires_grad = true;
        for (const Var* v : inputs)
            if (v->defined()) n->parents.push_back(v->handle());
        n->back = std::move(back);
    }
    return Var::from_node(std::move(n));
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.val().same_shape(b.val()))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.val().shape_str() +
                                    " vs " + b.val().shape_str());
}

// im2col for [C,H,W] -> [C*kh*kw, OH*OW]
void im2col(const Tensor& x, int kh, int kw, int stride, int pad, Tensor& cols, int oh, int ow) {
    const int C = x.shape[0], H = x.shape[1], W = x.shape[2];
    double* out = cols.v.data();
    const std::int64_t plane = static_cast<std::int64_t>(oh) * ow;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                double* row = out + ((static_cast<std::int64_t>(c) * kh + ky) * kw + kx) * plane;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride + ky - pad;
                    for (int xo = 0; xo < ow; ++xo) {
                        const int ix = xo * stride + kx - pad;
                        row[static_cast<std::int64_t>(y) * ow + xo] =
                            (iy >= 0 && iy < H && ix >= 0 && ix < W) ? x.at3(c, iy, ix) : 0.0;
                    }
                }
            }
}

void col2im_add(const Tensor& cols, int C, int H, int W, int kh, int kw, int stride, int pad,
                Tensor& gx, int oh, int ow) {
    const double* in = cols.v.data();
    const std::int64_t plane = static_cast<std::int64_t>(oh) * ow;
    for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < kh; ++ky)
            for (int kx = 0; kx < kw; ++kx) {
                const double* row = in + ((static_cast<std::int64_t>(c) * kh + ky) * kw + kx) * plane;
                for (int y = 0; y < oh; ++y) {
                    const int iy = y * stride + ky - pad;
                    if (iy < 0 || iy >= H) continue;
                    for (int xo = 0; xo < ow; ++xo) {
                        const int ix = xo * stride + kx - pad;
                        if (ix < 0 || ix >= W) continue;
                        gx.at3(c, iy, ix) += row[static_cast<std::int64_t>(y) * ow + xo];
                    }
                }
            }
}

Var unary_map(const Var& a, double (*f)(double), double (*df)(double)) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = f(a.val()[i]);
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an, df](Node& self) {
        if (!an->requires_grad) return;
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.val.size(); ++i)
            an->grad[i] += self.grad[i] * df(an->val[i]);
    });
}

}  // namespace

void backward(const Var& root) {
    if (root.val().size() != 1)
        throw std::invalid_argument("backward: root must be scalar, got " + root.val().shape_str());
    if (!root.requires_grad()) return;

    // iterative post-order topological sort
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.node());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    root.node()->ensure_grad();
    root.node()->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->back && !n->grad.v.empty()) n->back(*n);
    }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] + b.val()[i];
    NodeRef an = a.handle(), bn = b.handle();
    return make_op(std::move(out), {&a, &b}, [an, bn](Node& self) {
        for (const NodeRef& p : {an, bn}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::int64_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] - b.val()[i];
    NodeRef an = a.handle(), bn = b.handle();
    return make_op(std::move(out), {&a, &b}, [an, bn](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::int64_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::int64_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] * b.val()[i];
    NodeRef an = a.handle(), bn = b.handle();
    return make_op(std::move(out), {&a, &b}, [an, bn](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::int64_t i = 0; i < self.grad.size(); ++i)
                an->grad[i] += self.grad[i] * bn->val[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::int64_t i = 0; i < self.grad.size(); ++i)
                bn->grad[i] += self.grad[i] * an->val[i];
        }
    });
}

Var add_scalar(const Var& a, double c) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] + c;
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

Var mul_scalar(const Var& a, double c) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = a.val()[i] * c;
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an, c](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * c;
    });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var leaky_relu(const Var& a, double slope) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) {
        double x = a.val()[i];
        out[i] = x >= 0.0 ? x : slope * x;
    }
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an, slope](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * (an->val[i] >= 0.0 ? 1.0 : slope);
    });
}

Var tanh_v(const Var& a) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.val()[i]);
    NodeRef an = a.handle();
    Tensor saved = out;
    return make_op(std::move(out), {&a}, [an, saved](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * (1.0 - saved[i] * saved[i]);
    });
}

Var sigmoid_v(const Var& a) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.val()[i]));
    NodeRef an = a.handle();
    Tensor saved = out;
    return make_op(std::move(out), {&a}, [an, saved](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * saved[i] * (1.0 - saved[i]);
    });
}

Var softplus_v(const Var& a) {
    // numerically stable softplus: max(x,0) + log1p(exp(-|x|))
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) {
        double x = a.val()[i];
        out[i] = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
    }
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] / (1.0 + std::exp(-an->val[i]));
    });
}

Var exp_v(const Var& a) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::exp(a.val()[i]);
    NodeRef an = a.handle();
    Tensor saved = out;
    return make_op(std::move(out), {&a}, [an, saved](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * saved[i];
    });
}

Var log_v(const Var& a) {
    return unary_map(
        a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var sqrt_v(const Var& a) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(a.val()[i]);
    NodeRef an = a.handle();
    Tensor saved = out;
    return make_op(std::move(out), {&a}, [an, saved](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i)
            an->grad[i] += self.grad[i] * 0.5 / saved[i];
    });
}

Var square(const Var& a) {
    return unary_map(
        a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var inv_v(const Var& a) {
    return unary_map(
        a, [](double x) { return 1.0 / x; }, [](double x) { return -1.0 / (x * x); });
}

Var clamp01(const Var& a) {
    Tensor out(a.val().shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a.val()[i], 0.0, 1.0);
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i) {
            double x = an->val[i];
            if (x >= 0.0 && x <= 1.0) an->grad[i] += self.grad[i];
        }
    });
}

Var stop_grad(const Var& a) { return constant(a.val()); }

// ---------------------------------------------------------------- broadcast

namespace {
enum class BcastKind { Scalar, Channel };

BcastKind bcast_kind(const Var& x, const Var& s, const char* op) {
    if (s.val().size() == 1) return BcastKind::Scalar;
    if (x.val().rank() == 3 && s.val().rank() == 1 && s.val().dim(0) == x.val().dim(0))
        return BcastKind::Channel;
    throw std::invalid_argument(std::string(op) + ": unsupported broadcast " + x.val().shape_str() +
                                " vs " + s.val().shape_str());
}
}  // namespace

Var bcast_mul(const Var& x, const Var& s) {
    BcastKind kind = bcast_kind(x, s, "bcast_mul");
    Tensor out(x.val().shape);
    if (kind == BcastKind::Scalar) {
        double c = s.val()[0];
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x.val()[i] * c;
    } else {
        const std::int64_t plane = static_cast<std::int64_t>(x.val().dim(1)) * x.val().dim(2);
        for (int c = 0; c < x.val().dim(0); ++c)
            for (std::int64_t i = 0; i < plane; ++i)
                out[c * plane + i] = x.val()[c * plane + i] * s.val()[c];
    }
    NodeRef xn = x.handle(), sn = s.handle();
    return make_op(std::move(out), {&x, &s}, [xn, sn, kind](Node& self) {
        if (kind == BcastKind::Scalar) {
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (std::int64_t i = 0; i < self.grad.size(); ++i)
                    xn->grad[i] += self.grad[i] * sn->val[0];
            }
            if (sn->requires_grad) {
                sn->ensure_grad();
                double acc = 0.0;
                for (std::int64_t i = 0; i < self.grad.size(); ++i)
                    acc += self.grad[i] * xn->val[i];
                sn->grad[0] += acc;
            }
        } else {
            const std::int64_t plane =
                static_cast<std::int64_t>(xn->val.dim(1)) * xn->val.dim(2);
            if (xn->requires_grad) {
                xn->ensure_grad();
                for (int c = 0; c < xn->val.dim(0); ++c)
                    for (std::int64_t i = 0; i < plane; ++i)
                        xn->grad[c * plane + i] += self.grad[c * plane + i] * sn->val[c];
            }
            if (sn->requires_grad) {
                sn->ensure_grad();
                for (int c = 0; c < xn->val.dim(0); ++c) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < plane; ++i)
                        acc += self.grad[c * plane + i] * xn->val[c * plane + i];
                    sn->grad[c] += acc;
                }
            }
        }
    });
}

Var bcast_add(const Var& x, const Var& s) {
    BcastKind kind = bcast_kind(x, s, "bcast_add");
    Tensor out(x.val().shape);
    if (kind == BcastKind::Scalar) {
        double c = s.val()[0];
        for (std::int64_t i = 0; i < out.size(); ++i) out[i] = x.val()[i] + c;
    } else {
        const std::int64_t plane = static_cast<std::int64_t>(x.val().dim(1)) * x.val().dim(2);
        for (int c = 0; c < x.val().dim(0); ++c)
            for (std::int64_t i = 0; i < plane; ++i)
                out[c * plane + i] = x.val()[c * plane + i] + s.val()[c];
    }
    NodeRef xn = x.handle(), sn = s.handle();
    return make_op(std::move(out), {&x, &s}, [xn, sn, kind](Node& self) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::int64_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            if (kind == BcastKind::Scalar) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i];
                sn->grad[0] += acc;
            } else {
                const std::int64_t plane =
                    static_cast<std::int64_t>(xn->val.dim(1)) * xn->val.dim(2);
                for (int c = 0; c < xn->val.dim(0); ++c) {
                    double acc = 0.0;
                    for (std::int64_t i = 0; i < plane; ++i) acc += self.grad[c * plane + i];
                    sn->grad[c] += acc;
                }
            }
        }
    });
}

// ---------------------------------------------------------------- reductions

Var sum(const Var& a) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.val().size(); ++i) acc += a.val()[i];
    NodeRef an = a.handle();
    return make_op(Tensor::scalar(acc), {&a}, [an](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0];
    });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.val().size());
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.val().size(); ++i) acc += a.val()[i];
    NodeRef an = a.handle();
    return make_op(Tensor::scalar(acc / n), {&a}, [an, n](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < an->grad.size(); ++i) an->grad[i] += self.grad[0] / n;
    });
}

Var dot(const Var& a, const Var& b) {
    if (a.val().size() != b.val().size())
        throw std::invalid_argument("dot: size mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.val().size(); ++i) acc += a.val()[i] * b.val()[i];
    NodeRef an = a.handle(), bn = b.handle();
    return make_op(Tensor::scalar(acc), {&a, &b}, [an, bn](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::int64_t i = 0; i < an->grad.size(); ++i)
                an->grad[i] += self.grad[0] * bn->val[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::int64_t i = 0; i < bn->grad.size(); ++i)
                bn->grad[i] += self.grad[0] * an->val[i];
        }
    });
}

// ---------------------------------------------------------------- shaping

Var reshape(const Var& a, std::vector<int> shape) {
    if (Tensor::count(shape) != a.val().size())
        throw std::invalid_argument("reshape: element count mismatch");
    Tensor out(std::move(shape), a.val().v);
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

Var concat_flat(const std::vector<Var>& parts) {
    std::int64_t total = 0;
    for (const Var& p : parts) total += p.val().size();
    Tensor out({static_cast<int>(total)});
    std::int64_t off = 0;
    for (const Var& p : parts) {
        std::copy(p.val().v.begin(), p.val().v.end(), out.v.begin() + off);
        off += p.val().size();
    }
    bool needs = false;
    for (const Var& p : parts)
        if (p.requires_grad()) needs = true;
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    if (needs) {
        n->requires_grad = true;
        std::vector<NodeRef> handles;
        for (const Var& p : parts) {
            n->parents.push_back(p.handle());
            handles.push_back(p.handle());
        }
        n->back = [handles](Node& self) {
            std::int64_t off2 = 0;
            for (const NodeRef& p : handles) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::int64_t i = 0; i < p->val.size(); ++i)
                        p->grad[i] += self.grad[off2 + i];
                }
                off2 += p->val.size();
            }
        };
    }
    return Var::from_node(std::move(n));
}

Var slice_flat(const Var& a, std::int64_t start, std::int64_t len) {
    if (start < 0 || start + len > a.val().size())
        throw std::invalid_argument("slice_flat: out of range");
    Tensor out({static_cast<int>(len)});
    std::copy(a.val().v.begin() + start, a.val().v.begin() + start + len, out.v.begin());
    NodeRef an = a.handle();
    return make_op(std::move(out), {&a}, [an, start](Node& self) {
        an->ensure_grad();
        for (std::int64_t i = 0; i < self.grad.size(); ++i) an->grad[start + i] += self.grad[i];
    });
}

// ---------------------------------------------------------------- linear algebra

Var matmul(const Var& a, const Var& b) {
    if (a.val().rank() != 2 || b.val().rank() != 2 || a.val().dim(1) != b.val().dim(0))
        throw std::invalid_argument("matmul: incompatible shapes " + a.val().shape_str() + " x " +
                                    b.val().shape_str());
    const int m = a.val().dim(0), k = a.val().dim(1), n = b.val().dim(1);
    Tensor out({m, n});
    CMatMap A(a.val().v.data(), m, k), B(b.val().v.data(), k, n);
    MatMap(out.v.data(), m, n).noalias() = A * B;
    NodeRef an = a.handle(), bn = b.handle();
    return make_op(std::move(out), {&a, &b}, [an, bn, m, k, n](Node& self) {
        CMatMap G(self.grad.v.data(), m, n);
        if (an->requires_grad) {
            an->ensure_grad();
            CMatMap B(bn->val.v.data(), k, n);
            MatMap(an->grad.v.data(), m, k).noalias() += G * B.transpose();
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            CMatMap A(an->val.v.data(), m, k);
            MatMap(bn->grad.v.data(), k, n).noalias() += A.transpose() * G;
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    if (a.val().rank() != 2 || b.val().rank() != 2 || a.val().dim(1) != b.val().dim(1))
        throw std::invalid_argument("matmul_nt: incompatible shapes " + a.val().shape_str() +
                                    " x " + b.val().shape_str());
    const int m = a.val().dim(0), k = a.val().dim(1), n = b.val().dim(0);
    Tensor out({m, n});
    CMatMap A(a.val().v.data(), m, k), B(b.val().v.data(), n, k);
    MatMap(out.v.data(), m, n).noalias() = A * B.transpose();
    NodeRef an = a.handle(), bn = b.handle();
    return make_op(std::move(out), {&a, &b}, [an, bn, m, k, n](Node& self) {
        CMatMap G(self.grad.v.data(), m, n);
        if (an->requires_grad) {
            an->ensure_grad();
            CMatMap B(bn->val.v.data(), n, k);
            MatMap(an->grad.v.data(), m, k).noalias() += G * B;
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            CMatMap A(an->val.v.data(), m, k);
            MatMap(bn->grad.v.data(), n, k).noalias() += G.transpose() * A;
        }
    });
}

Var linear(const Var& x, const Var& w, const Var& b) {
    const bool vec = x.val().rank() == 1;
    const int n = vec ? 1 : x.val().dim(0);
    const int in = vec ? x.val().dim(0) : x.val().dim(1);
    const int out_dim = w.val().dim(0);
    if (w.val().rank() != 2 || w.val().dim(1) != in)
        throw std::invalid_argument("linear: weight shape mismatch");
    Tensor out(vec ? std::vector<int>{out_dim} : std::vector<int>{n, out_dim});
    CMatMap X(x.val().v.data(), n, in), W(w.val().v.data(), out_dim, in);
    MatMap Y(out.v.data(), n, out_dim);
    Y.noalias() = X * W.transpose();
    if (b.defined()) {
        CMatMap B(b.val().v.data(), 1, out_dim);
        Y.rowwise() += B.row(0);
    }
    NodeRef xn = x.handle(), wn = w.handle();
    NodeRef bn = b.defined() ? b.handle() : nullptr;
    Var result = b.defined() ? make_op(std::move(out), {&x, &w, &b}, nullptr)
                             : make_op(std::move(out), {&x, &w}, nullptr);
    if (result.requires_grad()) {
        result.node()->back = [xn, wn, bn, n, in, out_dim](Node& self) {
            CMatMap G(self.grad.v.data(), n, out_dim);
            if (xn->requires_grad) {
                xn->ensure_grad();
                CMatMap W(wn->val.v.data(), out_dim, in);
                MatMap(xn->grad.v.data(), n, in).noalias() += G * W;
            }
            if (wn->requires_grad) {
                wn->ensure_grad();
                CMatMap X(xn->val.v.data(), n, in);
                MatMap(wn->grad.v.data(), out_dim, in).noalias() += G.transpose() * X;
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                MatMap(bn->grad.v.data(), 1, out_dim) += G.colwise().sum();
            }
        };
    }
    return result;
}

Var gather_rows(const Var& table, const std::vector<int>& idx) {
    if (table.val().rank() != 2) throw std::invalid_argument("gather_rows: table must be rank 2");
    const int d = table.val().dim(1);
    Tensor out({static_cast<int>(idx.size()), d});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= table.val().dim(0))
            throw std::out_of_range("gather_rows: index out of range");
        std::copy_n(table.val().v.begin() + static_cast<std::int64_t>(idx[r]) * d, d,
                    out.v.begin() + static_cast<std::int64_t>(r) * d);
    }
    NodeRef tn = table.handle();
    std::vector<int> idx_copy = idx;
    return make_op(std::move(out), {&table}, [tn, idx_copy, d](Node& self) {
        tn->ensure_grad();
        for (std::size_t r = 0; r < idx_copy.size(); ++r)
            for (int j = 0; j < d; ++j)
                tn->grad[static_cast<std::int64_t>(idx_copy[r]) * d + j] +=
                    self.grad[static_cast<std::int64_t>(r) * d + j];
    });
}

// ---------------------------------------------------------------- conv / spatial

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    if (x.val().rank() != 3 || w.val().rank() != 4)
        throw std::invalid_argument("conv2d: expected x [C,H,W], w [O,C,kh,kw]");
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    const int O = w.val().dim(0), kh = w.val().dim(2), kw = w.val().dim(3);
    if (w.val().dim(1) != C)
        throw std::invalid_argument("conv2d: channel mismatch x" + x.val().shape_str() + " w" +
                                    w.val().shape_str());
    const int oh = (H + 2 * pad - kh) / stride + 1;
    const int ow = (W + 2 * pad - kw) / stride + 1;
    const int ck = C * kh * kw;

    Tensor cols({ck, oh * ow});
    im2col(x.val(), kh, kw, stride, pad, cols, oh, ow);
    Tensor out({O, oh, ow});
    {
        CMatMap Wm(w.val().v.data(), O, ck), Cm(cols.v.data(), ck, oh * ow);
        MatMap Y(out.v.data(), O, oh * ow);
        Y.noalias() = Wm * Cm;
        if (b.defined())
            for (int o = 0; o < O; ++o) Y.row(o).array() += b.val()[o];
    }
    NodeRef xn = x.handle(), wn = w.handle();
    NodeRef bn = b.defined() ? b.handle() : nullptr;
    auto back = [xn, wn, bn, C, H, W, O, kh, kw, stride, pad, oh, ow, ck](Node& self) {
        CMatMap G(self.grad.v.data(), O, oh * ow);
        // recomputed rather than cached: keeps graph memory flat
        Tensor cols2({ck, oh * ow});
        im2col(xn->val, kh, kw, stride, pad, cols2, oh, ow);
        if (wn->requires_grad) {
            wn->ensure_grad();
            CMatMap Cm(cols2.v.data(), ck, oh * ow);
            MatMap(wn->grad.v.data(), O, ck).noalias() += G * Cm.transpose();
        }
        if (xn->requires_grad) {
            xn->ensure_grad();
            Tensor gcols({ck, oh * ow});
            CMatMap Wm(wn->val.v.data(), O, ck);
            MatMap(gcols.v.data(), ck, oh * ow).noalias() = Wm.transpose() * G;
            col2im_add(gcols, C, H, W, kh, kw, stride, pad, xn->grad, oh, ow);
        }
        if (bn && bn->requires_grad) {
            bn->ensure_grad();
            for (int o = 0; o < O; ++o) bn->grad[o] += G.row(o).sum();
        }
    };
    return b.defined() ? make_op(std::move(out), {&x, &w, &b}, back)
                       : make_op(std::move(out), {&x, &w}, back);
}

Var upsample2(const Var& x) {
    if (x.val().rank() != 3) throw std::invalid_argument("upsample2: expected [C,H,W]");
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    Tensor out({C, 2 * H, 2 * W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < 2 * H; ++y)
            for (int xx = 0; xx < 2 * W; ++xx) out.at3(c, y, xx) = x.val().at3(c, y / 2, xx / 2);
    NodeRef xn = x.handle();
    return make_op(std::move(out), {&x}, [xn, C, H, W](Node& self) {
        xn->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < 2 * H; ++y)
                for (int xx = 0; xx < 2 * W; ++xx)
                    xn->grad.at3(c, y / 2, xx / 2) += self.grad.at3(c, y, xx);
    });
}

Var shift2d(const Var& x, int dy, int dx) {
    if (x.val().rank() != 3) throw std::invalid_argument("shift2d: expected [C,H,W]");
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    Tensor out({C, H, W});
    for (int c = 0; c < C; ++c)
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                const int sy = y - dy, sx = xx - dx;
                out.at3(c, y, xx) =
                    (sy >= 0 && sy < H && sx >= 0 && sx < W) ? x.val().at3(c, sy, sx) : 0.0;
            }
    NodeRef xn = x.handle();
    return make_op(std::move(out), {&x}, [xn, C, H, W, dy, dx](Node& self) {
        xn->ensure_grad();
        for (int c = 0; c < C; ++c)
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx < W; ++xx) {
                    const int sy = y - dy, sx = xx - dx;
                    if (sy >= 0 && sy < H && sx >= 0 && sx < W)
                        xn->grad.at3(c, sy, sx) += self.grad.at3(c, y, xx);
                }
    });
}

Var channel_mean_spatial(const Var& x) {
    if (x.val().rank() != 3) throw std::invalid_argument("channel_mean_spatial: expected [C,H,W]");
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    Tensor out({C, H, W});
    for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
            double m = 0.0;
            for (int c = 0; c < C; ++c) m += x.val().at3(c, y, xx);
            m /= C;
            for (int c = 0; c < C; ++c) out.at3(c, y, xx) = m;
        }
    NodeRef xn = x.handle();
    return make_op(std::move(out), {&x}, [xn, C, H, W](Node& self) {
        xn->ensure_grad();
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                double g = 0.0;
                for (int c = 0; c < C; ++c) g += self.grad.at3(c, y, xx);
                g /= C;
                for (int c = 0; c < C; ++c) xn->grad.at3(c, y, xx) += g;
            }
    });
}

Var spatial_mean(const Var& x) {
    if (x.val().rank() != 3) throw std::invalid_argument("spatial_mean: expected [C,H,W]");
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    Tensor out({C});
    for (int c = 0; c < C; ++c) {
        double m = 0.0;
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) m += x.val().at3(c, y, xx);
        out[c] = m / (H * W);
    }
    NodeRef xn = x.handle();
    return make_op(std::move(out), {&x}, [xn, C, H, W](Node& self) {
        xn->ensure_grad();
        for (int c = 0; c < C; ++c) {
            const double g = self.grad[c] / (H * W);
            for (int y = 0; y < H; ++y)
                for (int xx = 0; xx < W; ++xx) xn->grad.at3(c, y, xx) += g;
        }
    });
}

Var spatial_max(const Var& x) {
    if (x.val().rank() != 3) throw std::invalid_argument("spatial_max: expected [C,H,W]");
    const int C = x.val().dim(0), H = x.val().dim(1), W = x.val().dim(2);
    Tensor out({C});
    std::vector<int> arg(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
        double best = x.val().at3(c, 0, 0);
        int where = 0;
        for (int y = 0; y < H; ++y)
            for (int xx = 0; xx < W; ++xx) {
                const double v = x.val().at3(c, y, xx);
                if (v > best) {
                    best = v;
                    where = y * W + xx;
                }
            }
        out[c] = best;
        arg[static_cast<std::size_t>(c)] = where;
    }
    NodeRef xn = x.handle();
    return make_op(std::move(out), {&x}, [xn, C, W, arg = std::move(arg)](Node& self) {
        xn->ensure_grad();
        for (int c = 0; c < C; ++c) {
            const int where = arg[static_cast<std::size_t>(c)];
            xn->grad.at3(c, where / W, where % W) += self.grad[c];
        }
    });
}

// ---------------------------------------------------------------- weight modulation

Var modulate_cin(const Var& w, const Var& s) {
    if (w.val().rank() != 4 || s.val().rank() != 1 || s.val().dim(0) != w.val().dim(1))
        throw std::invalid_argument("modulate_cin: expected w [O,C,kh,kw], s [C]");
    const int O = w.val().dim(0), C = w.val().dim(1);
    const int kk = w.val().dim(2) * w.val().dim(3);
    Tensor out(w.val().shape);
    for (int o = 0; o < O; ++o)
        for (int c = 0; c < C; ++c)
            for (int k = 0; k < kk; ++k) {
                const std::int64_t i = (static_cast<std::int64_t>(o) * C + c) * kk + k;
                out[i] = w.val()[i] * s.val()[c];
            }
    NodeRef wn = w.handle(), sn = s.handle();
    return make_op(std::move(out), {&w, &s}, [wn, sn, O, C, kk](Node& self) {
        if (wn->requires_grad) {
            wn->ensure_grad();
            for (int o = 0; o < O; ++o)
                for (int c = 0; c < C; ++c)
                    for (int k = 0; k < kk; ++k) {
                        const std::int64_t i = (static_cast<std::int64_t>(o) * C + c) * kk + k;
                        wn->grad[i] += self.grad[i] * sn->val[c];
                    }
        }
        if (sn->requires_grad) {
            sn->ensure_grad();
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int o = 0; o < O; ++o)
                    for (int k = 0; k < kk; ++k) {
                        const std::int64_t i = (static_cast<std::int64_t>(o) * C + c) * kk + k;
                        acc += self.grad[i] * wn->val[i];
                    }
                sn->grad[c] += acc;
            }
        }
    });
}

Var rows_sumsq(const Var& w) {
    if (w.val().rank() != 4) throw std::invalid_argument("rows_sumsq: expected [O,C,kh,kw]");
    const int O = w.val().dim(0);
    const std::int64_t row = w.val().size() / O;
    Tensor out({O});
    for (int o = 0; o < O; ++o) {
        double acc = 0.0;
        for (std::int64_t i = 0; i < row; ++i) {
            double x = w.val()[o * row + i];
            acc += x * x;
        }
        out[o] = acc;
    }
    NodeRef wn = w.handle();
    return make_op(std::move(out), {&w}, [wn, O, row](Node& self) {
        wn->ensure_grad();
        for (int o = 0; o < O; ++o)
            for (std::int64_t i = 0; i < row; ++i)
                wn->grad[o * row + i] += self.grad[o] * 2.0 * wn->val[o * row + i];
    });
}

Var scale_rows(const Var& w, const Var& d) {
    if (w.val().rank() != 4 || d.val().rank() != 1 || d.val().dim(0) != w.val().dim(0))
        throw std::invalid_argument("scale_rows: expected w [O,C,kh,kw], d [O]");
    const int O = w.val().dim(0);
    const std::int64_t row = w.val().size() / O;
    Tensor out(w.val().shape);
    for (int o = 0; o < O; ++o)
        for (std::int64_t i = 0; i < row; ++i) out[o * row + i] = w.val()[o * row + i] * d.val()[o];
    NodeRef wn = w.handle(), dn = d.handle();
    return make_op(std::move(out), {&w, &d}, [wn, dn, O, row](Node& self) {
        if (wn->requires_grad) {
            wn->ensure_grad();
            for (int o = 0; o < O; ++o)
                for (std::int64_t i = 0; i < row; ++i)
                    wn->grad[o * row + i] += self.grad[o * row + i] * dn->val[o];
        }
        if (dn->requires_grad) {
            dn->ensure_grad();
            for (int o = 0; o < O; ++o) {
                double acc = 0.0;
                for (std::int64_t i = 0; i < row; ++i)
                    acc += self.grad[o * row + i] * wn->val[o * row + i];
                dn->grad[o] += acc;
            }
        }
    });
}

// ---------------------------------------------------------------- losses

Var softmax_cross_entropy(const Var& logits, const std::vector<int>& labels) {
    if (logits.val().rank() != 2) throw std::invalid_argument("softmax_cross_entropy: rank 2 expected");
    const int n = logits.val().dim(0), c = logits.val().dim(1);
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    Tensor probs({n, c});
    double loss = 0.0;
    for (int r = 0; r < n; ++r) {
        double mx = logits.val().at2(r, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.val().at2(r, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(logits.val().at2(r, j) - mx);
        for (int j = 0; j < c; ++j) probs.at2(r, j) = std::exp(logits.val().at2(r, j) - mx) / z;
        loss -= std::log(std::max(probs.at2(r, labels[static_cast<std::size_t>(r)]), 1e-300));
    }
    loss /= n;
    NodeRef ln = logits.handle();
    std::vector<int> labels_copy = labels;
    Tensor saved = probs;
    return make_op(Tensor::scalar(loss), {&logits}, [ln, labels_copy, saved, n, c](Node& self) {
        ln->ensure_grad();
        const double g = self.grad[0] / n;
        for (int r = 0; r < n; ++r)
            for (int j = 0; j < c; ++j)
                ln->grad.at2(r, j) +=
                    g * (saved.at2(r, j) - (j == labels_copy[static_cast<std::size_t>(r)] ? 1.0 : 0.0));
    });
}

Var normalize_vec(const Var& x, double eps) {
    Var n2 = sum(square(x));
    Var n = sqrt_v(add_scalar(n2, eps * eps));
    return bcast_mul(x, inv_v(n));
}

}  // namespace stylemod
