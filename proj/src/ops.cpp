#include "stgn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "stgn/kernels.hpp"

namespace stgn::ops {

namespace {

using detail::Node;
using detail::NodePtr;

bool any_requires(const std::vector<NodePtr>& parents) {
    if (!grad_enabled()) return false;
    for (const auto& p : parents) {
        if (p->requires_grad) return true;
    }
    return false;
}

// The closure receives the output node as a raw pointer so it never holds a
// shared_ptr to its own node (that would leak the whole graph).
void record(const Tensor& out, std::vector<NodePtr> parents, std::function<void(Node*)> bw) {
    if (!any_requires(parents)) return;
    NodePtr n = out.node();
    n->requires_grad = true;
    n->parents = std::move(parents);
    Node* self = n.get();
    n->backward_fn = [bw = std::move(bw), self] { bw(self); };
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

void check_rank2(const Tensor& a, const char* op) {
    if (a.rank() != 2) throw ShapeError(std::string(op) + ": expected rank 2, got " + shape_str(a.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    kern::add(out.raw().data(), a.data().data(), b.data().data(), n);
    auto an = a.node(), bn = b.node();
    record(out, {an, bn}, [an, bn, n](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (an->requires_grad) kern::axpy(an->grad_buf().data(), 1.0, g, n);
        if (bn->requires_grad) kern::axpy(bn->grad_buf().data(), 1.0, g, n);
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < n; ++i) out.raw()[i] = a.data()[i] - b.data()[i];
    auto an = a.node(), bn = b.node();
    record(out, {an, bn}, [an, bn, n](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (an->requires_grad) kern::axpy(an->grad_buf().data(), 1.0, g, n);
        if (bn->requires_grad) kern::axpy(bn->grad_buf().data(), -1.0, g, n);
    });
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    kern::mul(out.raw().data(), a.data().data(), b.data().data(), n);
    auto an = a.node(), bn = b.node();
    record(out, {an, bn}, [an, bn, n](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (an->requires_grad) {
            double* ga = an->grad_buf().data();
            const double* bd = bn->data.data();
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bd[i];
        }
        if (bn->requires_grad) {
            double* gb = bn->grad_buf().data();
            const double* ad = an->data.data();
            for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * ad[i];
        }
    });
    return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double s) {
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    kern::scale(out.raw().data(), a.data().data(), s, n);
    auto an = a.node();
    record(out, {an}, [an, s, n](detail::Node* on) {
        if (an->requires_grad) kern::axpy(an->grad_buf().data(), s, on->grad_buf().data(), n);
    });
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < n; ++i) out.raw()[i] = a.data()[i] + s;
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (an->requires_grad) kern::axpy(an->grad_buf().data(), 1.0, on->grad_buf().data(), n);
    });
    return out;
}

Tensor relu(const Tensor& a) {
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < n; ++i) out.raw()[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* ga = an->grad_buf().data();
        const double* ad = an->data.data();
        for (std::size_t i = 0; i < n; ++i) {
            if (ad[i] > 0.0) ga[i] += g[i];
        }
    });
    return out;
}

Tensor gelu(const Tensor& a) {
    // tanh approximation, with matching analytic derivative.
    static constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double kA = 0.044715;
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a.data()[i];
        out.raw()[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* ga = an->grad_buf().data();
        const double* ad = an->data.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double x = ad[i];
            const double th = std::tanh(kC * (x + kA * x * x * x));
            const double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kC * (1.0 + 3.0 * kA * x * x);
            ga[i] += g[i] * d;
        }
    });
    return out;
}

Tensor recip(const Tensor& a) {
    const std::size_t n = a.size();
    Tensor out = Tensor::zeros(a.shape());
    for (std::size_t i = 0; i < n; ++i) out.raw()[i] = 1.0 / a.data()[i];
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* ga = an->grad_buf().data();
        const double* od = on->data.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] -= g[i] * od[i] * od[i];
    });
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul: inner dims " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tensor out = Tensor::zeros({m, n});
    {
        double* c = out.raw().data();
        const double* ad = a.data().data();
        const double* bd = b.data().data();
        for (int i = 0; i < m; ++i) {
            double* crow = c + static_cast<std::size_t>(i) * n;
            const double* arow = ad + static_cast<std::size_t>(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                kern::axpy(crow, arow[kk], bd + static_cast<std::size_t>(kk) * n, n);
            }
        }
    }
    auto an = a.node(), bn = b.node();
    record(out, {an, bn}, [an, bn, m, k, n](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (an->requires_grad) {
            double* ga = an->grad_buf().data();
            const double* bd = bn->data.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + static_cast<std::size_t>(i) * n;
                double* garow = ga + static_cast<std::size_t>(i) * k;
                for (int kk = 0; kk < k; ++kk) {
                    garow[kk] += kern::dot(grow, bd + static_cast<std::size_t>(kk) * n, n);
                }
            }
        }
        if (bn->requires_grad) {
            double* gb = bn->grad_buf().data();
            const double* ad = an->data.data();
            for (int i = 0; i < m; ++i) {
                const double* grow = g + static_cast<std::size_t>(i) * n;
                const double* arow = ad + static_cast<std::size_t>(i) * k;
                for (int kk = 0; kk < k; ++kk) {
                    kern::axpy(gb + static_cast<std::size_t>(kk) * n, arow[kk], grow, n);
                }
            }
        }
    });
    return out;
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.raw()[static_cast<std::size_t>(j) * m + i] = a.data()[static_cast<std::size_t>(i) * n + j];
    }
    auto an = a.node();
    record(out, {an}, [an, m, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* ga = an->grad_buf().data();
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < m; ++i) ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(j) * m + i];
        }
    });
    return out;
}

Tensor softmax_rows(const Tensor& a) {
    check_rank2(a, "softmax_rows");
    const int n = a.dim(0), c = a.dim(1);
    Tensor out = Tensor::zeros(a.shape());
    for (int i = 0; i < n; ++i) {
        const double* row = a.data().data() + static_cast<std::size_t>(i) * c;
        double* orow = out.raw().data() + static_cast<std::size_t>(i) * c;
        const double mx = kern::max(row, c);
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        kern::scale(orow, orow, 1.0 / denom, c);
    }
    auto an = a.node();
    record(out, {an}, [an, n, c](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        const double* y = on->data.data();
        double* ga = an->grad_buf().data();
        for (int i = 0; i < n; ++i) {
            const std::size_t off = static_cast<std::size_t>(i) * c;
            const double dot = kern::dot(g + off, y + off, c);
            for (int j = 0; j < c; ++j) ga[off + j] += y[off + j] * (g[off + j] - dot);
        }
    });

    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    check_rank2(x, "layer_norm");
    const int n = x.dim(0), c = x.dim(1);
    if (gamma.size() != static_cast<std::size_t>(c) || beta.size() != static_cast<std::size_t>(c))
        throw ShapeError("layer_norm: scale/shift length vs " + shape_str(x.shape()));
    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> xhat(static_cast<std::size_t>(n) * c);
    std::vector<double> inv_std(n);
    for (int i = 0; i < n; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * c;
        const double* row = x.data().data() + off;
        const double mu = kern::sum(row, c) / c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = row[j] - mu;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[i] = is;
        for (int j = 0; j < c; ++j) {
            xhat[off + j] = (row[j] - mu) * is;
            out.raw()[off + j] = gamma.data()[j] * xhat[off + j] + beta.data()[j];
        }
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    record(out, {xn, gn, bn},
           [xn, gn, bn, n, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node* on) {
               const double* g = on->grad_buf().data();
               for (int i = 0; i < n; ++i) {
                   const std::size_t off = static_cast<std::size_t>(i) * c;
                   if (gn->requires_grad) {
                       double* gg = gn->grad_buf().data();
                       for (int j = 0; j < c; ++j) gg[j] += g[off + j] * xhat[off + j];
                   }
                   if (bn->requires_grad) {
                       double* gb = bn->grad_buf().data();
                       for (int j = 0; j < c; ++j) gb[j] += g[off + j];
                   }
                   if (xn->requires_grad) {
                       double* gx = xn->grad_buf().data();
                       const double* gam = gn->data.data();
                       double mean_gy = 0.0, mean_gyx = 0.0;
                       for (int j = 0; j < c; ++j) {
                           const double gy = g[off + j] * gam[j];
                           mean_gy += gy;
                           mean_gyx += gy * xhat[off + j];
                       }
                       mean_gy /= c;
                       mean_gyx /= c;
                       for (int j = 0; j < c; ++j) {
                           const double gy = g[off + j] * gam[j];
                           gx[off + j] += (gy - mean_gy - xhat[off + j] * mean_gyx) * inv_std[i];
                       }
                   }
               }
           });
    return out;
}

Tensor sum(const Tensor& a) {
    const std::size_t n = a.size();
    Tensor out = Tensor::scalar(kern::sum(a.data().data(), n));
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double g = on->grad_buf()[0];
        double* ga = an->grad_buf().data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
    return out;
}

Tensor mean(const Tensor& a) {
    const std::size_t n = a.size();
    Tensor out = Tensor::scalar(kern::sum(a.data().data(), n) / static_cast<double>(n));
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double g = on->grad_buf()[0] / static_cast<double>(n);
        double* ga = an->grad_buf().data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g;
    });
    return out;
}

Tensor mean_sq(const Tensor& a) {
    const std::size_t n = a.size();
    Tensor out = Tensor::scalar(kern::sum_sq(a.data().data(), n) / static_cast<double>(n));
    auto an = a.node();
    record(out, {an}, [an, n](detail::Node* on) {
        if (!an->requires_grad) return;
        const double g = 2.0 * on->grad_buf()[0] / static_cast<double>(n);
        double* ga = an->grad_buf().data();
        const double* ad = an->data.data();
        for (std::size_t i = 0; i < n; ++i) ga[i] += g * ad[i];
    });
    return out;
}

Tensor reshape(const Tensor& a, const Shape& shape) {
    if (shape_numel(shape) != a.size())
        throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
    Tensor out = Tensor::from(shape, std::vector<double>(a.data().begin(), a.data().end()));
    auto an = a.node();
    const std::size_t n = a.size();
    record(out, {an}, [an, n](detail::Node* on) {
        if (an->requires_grad) kern::axpy(an->grad_buf().data(), 1.0, on->grad_buf().data(), n);
    });
    return out;
}

Tensor slice_axis0(const Tensor& a, int r0, int r1) {
    if (a.rank() < 1 || r0 < 0 || r1 > a.dim(0) || r0 >= r1)
        throw ShapeError("slice_axis0: [" + std::to_string(r0) + "," + std::to_string(r1) + ") of " +
                         shape_str(a.shape()));
    Shape os = a.shape();
    os[0] = r1 - r0;
    const std::size_t inner = a.size() / a.dim(0);
    const std::size_t off = static_cast<std::size_t>(r0) * inner;
    const std::size_t len = static_cast<std::size_t>(r1 - r0) * inner;
    Tensor out = Tensor::from(os, std::vector<double>(a.data().begin() + off, a.data().begin() + off + len));
    auto an = a.node();
    record(out, {an}, [an, off, len](detail::Node* on) {
        if (an->requires_grad) kern::axpy(an->grad_buf().data() + off, 1.0, on->grad_buf().data(), len);
    });
    return out;
}

Tensor concat_axis0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_axis0: empty");
    Shape os = parts[0].shape();
    const std::size_t inner = parts[0].size() / parts[0].dim(0);
    int rows = 0;
    for (const auto& p : parts) {
        Shape ps = p.shape();
        ps[0] = os[0];
        if (ps != os) throw ShapeError("concat_axis0: mismatched trailing dims");
        rows += p.dim(0);
    }
    os[0] = rows;
    Tensor out = Tensor::zeros(os);
    std::vector<NodePtr> parents;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::memcpy(out.raw().data() + off, p.data().data(), p.size() * sizeof(double));
        parents.push_back(p.node());
        offsets.push_back(off);
        off += p.size();
    }
    
    record(out, parents, [parents, offsets](detail::Node* on) {
        const double* g = on->grad_buf().data();
        for (std::size_t i = 0; i < parents.size(); ++i) {
            if (parents[i]->requires_grad)
                kern::axpy(parents[i]->grad_buf().data(), 1.0, g + offsets[i], parents[i]->size());
        }
    });
    return out;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    check_rank2(a, "slice_cols");
    const int n = a.dim(0), c = a.dim(1);
    if (c0 < 0 || c1 > c || c0 >= c1)
        throw ShapeError("slice_cols: [" + std::to_string(c0) + "," + std::to_string(c1) + ") of " +
                         shape_str(a.shape()));
    const int w = c1 - c0;
    Tensor out = Tensor::zeros({n, w});
    for (int i = 0; i < n; ++i) {
        std::memcpy(out.raw().data() + static_cast<std::size_t>(i) * w,
                    a.data().data() + static_cast<std::size_t>(i) * c + c0, static_cast<std::size_t>(w) * sizeof(double));
    }
    auto an = a.node();
    record(out, {an}, [an, n, c, c0, w](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* ga = an->grad_buf().data();
        for (int i = 0; i < n; ++i) {
            kern::axpy(ga + static_cast<std::size_t>(i) * c + c0, 1.0, g + static_cast<std::size_t>(i) * w, w);
        }
    });
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty");
    const int n = parts[0].dim(0);
    int c = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_cols");
        if (p.dim(0) != n) throw ShapeError("concat_cols: mismatched rows");
        c += p.dim(1);
    }
    Tensor out = Tensor::zeros({n, c});
    std::vector<NodePtr> parents;
    std::vector<int> col0;
    int cur = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < n; ++i) {
            std::memcpy(out.raw().data() + static_cast<std::size_t>(i) * c + cur,
                        p.data().data() + static_cast<std::size_t>(i) * p.dim(1),
                        static_cast<std::size_t>(p.dim(1)) * sizeof(double));
        }
        parents.push_back(p.node());
        col0.push_back(cur);
        cur += p.dim(1);
    }
    
    record(out, parents, [parents, col0, n, c](detail::Node* on) {
        const double* g = on->grad_buf().data();
        for (std::size_t pi = 0; pi < parents.size(); ++pi) {
            if (!parents[pi]->requires_grad) continue;
            const int w = parents[pi]->shape[1];
            double* gp = parents[pi]->grad_buf().data();
            for (int i = 0; i < n; ++i) {
                kern::axpy(gp + static_cast<std::size_t>(i) * w, 1.0,
                           g + static_cast<std::size_t>(i) * c + col0[pi], w);
            }
        }
    });
    return out;
}

Tensor mul_rowvec(const Tensor& x, const Tensor& v) {
    check_rank2(x, "mul_rowvec");
    const int n = x.dim(0), c = x.dim(1);
    if (v.size() != static_cast<std::size_t>(c)) throw ShapeError("mul_rowvec: vector length vs " + shape_str(x.shape()));
    Tensor out = Tensor::zeros(x.shape());
    for (int i = 0; i < n; ++i) {
        kern::mul(out.raw().data() + static_cast<std::size_t>(i) * c, x.data().data() + static_cast<std::size_t>(i) * c,
                  v.data().data(), c);
    }
    auto xn = x.node(), vn = v.node();
    record(out, {xn, vn}, [xn, vn, n, c](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (xn->requires_grad) {
            double* gx = xn->grad_buf().data();
            const double* vd = vn->data.data();
            for (int i = 0; i < n; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                for (int j = 0; j < c; ++j) gx[off + j] += g[off + j] * vd[j];
            }
        }
        if (vn->requires_grad) {
            double* gv = vn->grad_buf().data();
            const double* xd = xn->data.data();
            for (int i = 0; i < n; ++i) {
                const std::size_t off = static_cast<std::size_t>(i) * c;
                for (int j = 0; j < c; ++j) gv[j] += g[off + j] * xd[off + j];
            }
        }
    });
    return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
    check_rank2(x, "add_rowvec");
    const int n = x.dim(0), c = x.dim(1);
    if (v.size() != static_cast<std::size_t>(c)) throw ShapeError("add_rowvec: vector length vs " + shape_str(x.shape()));
    Tensor out = Tensor::zeros(x.shape());
    for (int i = 0; i < n; ++i) {
        kern::add(out.raw().data() + static_cast<std::size_t>(i) * c, x.data().data() + static_cast<std::size_t>(i) * c,
                  v.data().data(), c);
    }
    auto xn = x.node(), vn = v.node();
    record(out, {xn, vn}, [xn, vn, n, c](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (xn->requires_grad) kern::axpy(xn->grad_buf().data(), 1.0, g, static_cast<std::size_t>(n) * c);
        if (vn->requires_grad) {
            double* gv = vn->grad_buf().data();
            for (int i = 0; i < n; ++i) kern::axpy(gv, 1.0, g + static_cast<std::size_t>(i) * c, c);
        }
    });
    return out;
}

Tensor mul_colvec(const Tensor& x, const Tensor& u) {
    check_rank2(x, "mul_colvec");
    const int n = x.dim(0), c = x.dim(1);
    if (u.size() != static_cast<std::size_t>(n)) throw ShapeError("mul_colvec: vector length vs " + shape_str(x.shape()));
    Tensor out = Tensor::zeros(x.shape());
    for (int i = 0; i < n; ++i) {
        kern::scale(out.raw().data() + static_cast<std::size_t>(i) * c,
                    x.data().data() + static_cast<std::size_t>(i) * c, u.data()[i], c);
    }
    auto xn = x.node(), un = u.node();
    record(out, {xn, un}, [xn, un, n, c](detail::Node* on) {
        const double* g = on->grad_buf().data();
        if (xn->requires_grad) {
            double* gx = xn->grad_buf().data();
            const double* ud = un->data.data();
            for (int i = 0; i < n; ++i) kern::axpy(gx + static_cast<std::size_t>(i) * c, ud[i], g + static_cast<std::size_t>(i) * c, c);
        }
        if (un->requires_grad) {
            double* gu = un->grad_buf().data();
            const double* xd = xn->data.data();
            for (int i = 0; i < n; ++i)
                gu[i] += kern::dot(g + static_cast<std::size_t>(i) * c, xd + static_cast<std::size_t>(i) * c, c);
        }
    });
    return out;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    if (x.rank() != 3) throw ShapeError("conv2d: input " + shape_str(x.shape()));
    if (w.rank() != 4) throw ShapeError("conv2d: weight " + shape_str(w.shape()));
    const int h = x.dim(0), wd = x.dim(1), ci = x.dim(2);
    const int co = w.dim(0), kh = w.dim(1), kw = w.dim(2);
    if (w.dim(3) != ci) throw ShapeError("conv2d: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(w.shape()));
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: input too small for kernel/stride");
    const bool has_bias = b.defined();
    if (has_bias && b.size() != static_cast<std::size_t>(co)) throw ShapeError("conv2d: bias length");

    Tensor out = Tensor::zeros({ho, wo, co});
    const double* xd = x.data().data();
    const double* wdp = w.data().data();
    double* od = out.raw().data();
    for (int oh = 0; oh < ho; ++oh) {
        for (int ow = 0; ow < wo; ++ow) {
            double* opix = od + (static_cast<std::size_t>(oh) * wo + ow) * co;
            for (int c = 0; c < co; ++c) {
                double acc = has_bias ? b.data()[c] : 0.0;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oh * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ow * stride + kx - pad;
                        if (ix < 0 || ix >= wd) continue;
                        acc += kern::dot(xd + (static_cast<std::size_t>(iy) * wd + ix) * ci,
                                         wdp + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * ci, ci);
                    }
                }
                opix[c] = acc;
            }
        }
    }
    auto xn = x.node(), wn = w.node();
    std::vector<NodePtr> parents = {xn, wn};
    NodePtr bnode = has_bias ? b.node() : nullptr;
    if (bnode) parents.push_back(bnode);
    record(out, parents, [xn, wn, bnode, h, wd, ci, co, kh, kw, ho, wo, stride, pad](detail::Node* on) {
        const double* g = on->grad_buf().data();
        const double* xd = xn->data.data();
        const double* wdp = wn->data.data();
        double* gx = xn->requires_grad ? xn->grad_buf().data() : nullptr;
        double* gw = wn->requires_grad ? wn->grad_buf().data() : nullptr;
        double* gb = (bnode && bnode->requires_grad) ? bnode->grad_buf().data() : nullptr;
        for (int oh = 0; oh < ho; ++oh) {
            for (int ow = 0; ow < wo; ++ow) {
                const double* gpix = g + (static_cast<std::size_t>(oh) * wo + ow) * co;
                for (int c = 0; c < co; ++c) {
                    const double gv = gpix[c];
                    if (gv == 0.0) continue;
                    if (gb) gb[c] += gv;
                    for (int ky = 0; ky < kh; ++ky) {
                        const int iy = oh * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (int kx = 0; kx < kw; ++kx) {
                            const int ix = ow * stride + kx - pad;
                            if (ix < 0 || ix >= wd) continue;
                            const std::size_t xoff = (static_cast<std::size_t>(iy) * wd + ix) * ci;
                            const std::size_t woff = ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * ci;
                            if (gx) kern::axpy(gx + xoff, gv, wdp + woff, ci);
                            if (gw) kern::axpy(gw + woff, gv, xd + xoff, ci);
                        }
                    }
                }
            }
        }
    });
    return out;
}

namespace {

// Shared gather machinery: out[i] = in[idx[i]]; backward scatter-adds.
Tensor gather(const Tensor& a, Shape out_shape, std::vector<std::size_t> idx) {
    Tensor out = Tensor::zeros(out_shape);
    for (std::size_t i = 0; i < idx.size(); ++i) out.raw()[i] = a.data()[idx[i]];
    auto an = a.node();
    record(out, {an}, [an, idx = std::move(idx)](detail::Node* on) {
        if (!an->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* ga = an->grad_buf().data();
        for (std::size_t i = 0; i < idx.size(); ++i) ga[idx[i]] += g[i];
    });
    return out;
}

}  // namespace

Tensor patchify(const Tensor& x, int p) {
    if (x.rank() != 3) throw ShapeError("patchify: " + shape_str(x.shape()));
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    if (h % p != 0 || w % p != 0) throw ShapeError("patchify: dims not divisible by patch");
    const int th = h / p, tw = w / p;
    std::vector<std::size_t> idx;
    idx.reserve(x.size());
    for (int ph = 0; ph < th; ++ph) {
        for (int pw = 0; pw < tw; ++pw) {
            for (int dy = 0; dy < p; ++dy) {
                for (int dx = 0; dx < p; ++dx) {
                    for (int ch = 0; ch < c; ++ch) {
                        idx.push_back((static_cast<std::size_t>(ph * p + dy) * w + (pw * p + dx)) * c + ch);
                    }
                }
            }
        }
    }
    return gather(x, {th * tw, p * p * c}, std::move(idx));
}

Tensor unpatchify(const Tensor& tokens, int h, int w, int c, int p) {
    check_rank2(tokens, "unpatchify");
    const int th = h / p, tw = w / p;
    if (tokens.dim(0) != th * tw || tokens.dim(1) != p * p * c)
        throw ShapeError("unpatchify: " + shape_str(tokens.shape()));
    // Inverse permutation of patchify.
    std::vector<std::size_t> idx(tokens.size());
    std::size_t src = 0;
    for (int ph = 0; ph < th; ++ph) {
        for (int pw = 0; pw < tw; ++pw) {
            for (int dy = 0; dy < p; ++dy) {
                for (int dx = 0; dx < p; ++dx) {
                    for (int ch = 0; ch < c; ++ch) {
                        idx[(static_cast<std::size_t>(ph * p + dy) * w + (pw * p + dx)) * c + ch] = src++;
                    }
                }
            }
        }
    }
    return gather(tokens, {h, w, c}, std::move(idx));
}

Tensor area_downsample(const Tensor& m, int p) {
    check_rank2(m, "area_downsample");
    const int h = m.dim(0), w = m.dim(1);
    if (h % p != 0 || w % p != 0) throw ShapeError("area_downsample: dims not divisible by patch");
    const int th = h / p, tw = w / p;
    Tensor out = Tensor::zeros({th * tw});
    const double inv = 1.0 / (p * p);
    for (int ph = 0; ph < th; ++ph) {
        for (int pw = 0; pw < tw; ++pw) {
            double acc = 0.0;
            for (int dy = 0; dy < p; ++dy) {
                for (int dx = 0; dx < p; ++dx) acc += m.data()[static_cast<std::size_t>(ph * p + dy) * w + (pw * p + dx)];
            }
            out.raw()[static_cast<std::size_t>(ph) * tw + pw] = acc * inv;
        }
    }
    auto mn = m.node();
    record(out, {mn}, [mn, h, w, p, th, tw, inv](detail::Node* on) {
        if (!mn->requires_grad) return;
        const double* g = on->grad_buf().data();
        double* gm = mn->grad_buf().data();
        for (int ph = 0; ph < th; ++ph) {
            for (int pw = 0; pw < tw; ++pw) {
                const double gv = g[static_cast<std::size_t>(ph) * tw + pw] * inv;
                for (int dy = 0; dy < p; ++dy) {
                    for (int dx = 0; dx < p; ++dx) gm[static_cast<std::size_t>(ph * p + dy) * w + (pw * p + dx)] += gv;
                }
            }
        }
    });
    return out;
}

Tensor nearest_resize(const Tensor& x, int h2, int w2) {
    if (x.rank() != 3) throw ShapeError("nearest_resize: " + shape_str(x.shape()));
    const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
    std::vector<std::size_t> idx;
    idx.reserve(static_cast<std::size_t>(h2) * w2 * c);
    for (int i = 0; i < h2; ++i) {
        const int sy = std::min(h - 1, i * h / h2);
        for (int j = 0; j < w2; ++j) {
            const int sx = std::min(w - 1, j * w / w2);
            for (int ch = 0; ch < c; ++ch) idx.push_back((static_cast<std::size_t>(sy) * w + sx) * c + ch);
        }
    }
    return gather(x, {h2, w2, c}, std::move(idx));
}

std::pair<Tensor, Tensor> masked_moments(const Tensor& x, const Tensor& mask) {
    check_rank2(x, "masked_moments");
    const int n = x.dim(0), c = x.dim(1);
    if (mask.size() != static_cast<std::size_t>(n))
        throw ShapeError("masked_moments: mask length vs " + shape_str(x.shape()));
    std::vector<int> rows;
    for (int i = 0; i < n; ++i) {
        if (mask.data()[i] >= 0.5) rows.push_back(i);
    }
    if (rows.empty()) throw EmptyRegionError("masked_moments: no mask entry >= 0.5");
    static constexpr double kStdFloor = 1e-5;
    const double inv_m = 1.0 / static_cast<double>(rows.size());

    Tensor mean_t = Tensor::zeros({c});
    Tensor std_t = Tensor::zeros({c});
    std::vector<double> raw_std(c);
    for (int j = 0; j < c; ++j) {
        double mu = 0.0;
        for (int i : rows) mu += x.data()[static_cast<std::size_t>(i) * c + j];
        mu *= inv_m;
        double var = 0.0;
        for (int i : rows) {
            const double d = x.data()[static_cast<std::size_t>(i) * c + j] - mu;
            var += d * d;
        }
        var *= inv_m;
        mean_t.raw()[j] = mu;
        raw_std[j] = std::sqrt(var);
        std_t.raw()[j] = std::max(raw_std[j], kStdFloor);
    }
    auto xn = x.node();
    auto mnode = mean_t.node(), snode = std_t.node();
    if (grad_enabled() && xn->requires_grad) {
        mnode->requires_grad = true;
        mnode->parents = {xn};
        mnode->backward_fn = [xn, mp = mnode.get(), rows, c, inv_m] {
            const double* g = mp->grad_buf().data();
            double* gx = xn->grad_buf().data();
            for (int j = 0; j < c; ++j) {
                const double gv = g[j] * inv_m;
                for (int i : rows) gx[static_cast<std::size_t>(i) * c + j] += gv;
            }
        };
        snode->requires_grad = true;
        snode->parents = {xn};
        snode->backward_fn = [xn, sp = snode.get(), mnode, rows, c, inv_m, raw_std] {
            const double* g = sp->grad_buf().data();
            const double* mu = mnode->data.data();
            double* gx = xn->grad_buf().data();
            for (int j = 0; j < c; ++j) {
                if (raw_std[j] <= kStdFloor) continue;  // clamped: flat
                const double gv = g[j] * inv_m / raw_std[j];
                for (int i : rows) {
                    gx[static_cast<std::size_t>(i) * c + j] += gv * (xn->data[static_cast<std::size_t>(i) * c + j] - mu[j]);
                }
            }
        };
    }
    return {mean_t, std_t};
}

Tensor adain(const Tensor& x, const Tensor& ref, const Tensor& ref_mask) {
    check_rank2(x, "adain");
    check_rank2(ref, "adain");
    if (x.dim(1) != ref.dim(1))
        throw ShapeError("adain: channel mismatch " + shape_str(x.shape()) + " vs " + shape_str(ref.shape()));
    Tensor ones = Tensor::full({x.dim(0)}, 1.0);
    auto [mu_x, std_x] = masked_moments(x, ones);
    auto [mu_r, std_r] = masked_moments(ref, ref_mask);
    Tensor centered = add_rowvec(x, neg(mu_x));
    Tensor normed = mul_rowvec(centered, recip(std_x));
    return add_rowvec(mul_rowvec(normed, std_r), mu_r);
}

Tensor gram_matrix(const Tensor& f) {
    check_rank2(f, "gram_matrix");
    return scale(matmul(f, transpose(f)), 1.0 / f.dim(1));
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    check_rank2(q, "attention");
    check_rank2(k, "attention");
    check_rank2(v, "attention");
    if (q.dim(1) != k.dim(1))
        throw ShapeError("attention: query/key feature dims " + shape_str(q.shape()) + " vs " + shape_str(k.shape()));
    if (k.dim(0) != v.dim(0))
        throw ShapeError("attention: key/value counts " + shape_str(k.shape()) + " vs " + shape_str(v.shape()));
    const double s = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
    Tensor logits = scale(matmul(q, transpose(k)), s);
    return matmul(softmax_rows(logits), v);
}

Tensor mha(const Tensor& q, const Tensor& k, const Tensor& v, int heads) {
    if (heads <= 0 || q.dim(1) % heads != 0)
        throw ShapeError("mha: feature dim " + shape_str(q.shape()) + " not divisible by " + std::to_string(heads));
    if (heads == 1) return attention(q, k, v);
    const int hd = q.dim(1) / heads;
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h) {
        outs.push_back(attention(slice_cols(q, h * hd, (h + 1) * hd), slice_cols(k, h * hd, (h + 1) * hd),
                                 slice_cols(v, h * hd, (h + 1) * hd)));
    }
    return concat_cols(outs);
}

}  // namespace stgn::ops
