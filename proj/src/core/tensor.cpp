#include "core/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "core/errors.hpp"

namespace stnav {
namespace ad {

struct Node;

struct TensorImpl {
    std::vector<long> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until needed
    bool requires_grad = false;
    std::shared_ptr<Node> node;  // backward record, null for leaves

    long numel() const { return static_cast<long>(data.size()); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// One recorded operation. seq preserves recording order so the backward
// pass can run in exact reverse.
struct Node {
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    std::function<void(TensorImpl&)> backward_fn;
};

namespace {

thread_local std::uint64_t g_seq = 0;
thread_local int g_no_grad_depth = 0;

long product(const std::vector<long>& shape) {
    long n = 1;
    for (long d : shape) n *= d;
    return n;
}

std::shared_ptr<TensorImpl> make_impl(std::vector<long> shape, double fill) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<std::size_t>(product(impl->shape)), fill);
    return impl;
}

bool tracked(const Tensor& t) {
    return t.impl() && (t.impl()->requires_grad || t.impl()->node != nullptr);
}

// Attaches a backward record when any input participates in the tape.
void record(Tensor& out, std::vector<Tensor> inputs,
            std::function<void(TensorImpl&)> backward_fn) {
    if (g_no_grad_depth > 0) return;
    bool any = false;
    for (const auto& in : inputs) any = any || tracked(in);
    if (!any) return;
    auto node = std::make_shared<Node>();
    node->seq = ++g_seq;
    for (auto& in : inputs) node->parents.push_back(in.impl());
    node->backward_fn = std::move(backward_fn);
    out.impl()->node = std::move(node);
}

void check(bool cond, const std::string& msg) {
    if (!cond) throw UsageError(msg);
}

}  // namespace

std::string shape_string(const std::vector<long>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<long> shape, bool requires_grad) {
    Tensor t(make_impl(std::move(shape), 0.0));
    t.impl()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<long> shape, double value, bool requires_grad) {
    Tensor t(make_impl(std::move(shape), value));
    t.impl()->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::from_data(std::vector<long> shape, std::vector<double> data,
                         bool requires_grad) {
    check(product(shape) == static_cast<long>(data.size()),
          "from_data: shape/data size mismatch");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::uniform(std::vector<long> shape, double lo, double hi, Rng& rng,
                       bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    double* p = t.data();
    for (long i = 0; i < t.numel(); ++i) p[i] = rng.uniform(lo, hi);
    return t;
}

const std::vector<long>& Tensor::shape() const { return impl_->shape; }
long Tensor::numel() const { return impl_->numel(); }
long Tensor::dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }

double* Tensor::data() { return impl_->data.data(); }
const double* Tensor::data() const { return impl_->data.data(); }

double Tensor::value(long flat_index) const {
    return impl_->data.at(static_cast<std::size_t>(flat_index));
}

double Tensor::scalar() const {
    check(numel() == 1, "scalar: tensor has more than one element");
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

double* Tensor::grad_data() {
    impl_->ensure_grad();
    return impl_->grad.data();
}

const double* Tensor::grad_data() const {
    return impl_->grad.empty() ? nullptr : impl_->grad.data();
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    return Tensor(std::move(impl));
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = impl_->requires_grad;
    return Tensor(std::move(impl));
}

// --- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.defined() && b.defined(), "matmul: undefined input");
    const int ra = a.rank(), rb = b.rank();
    check((ra == 2 && rb == 2) || (ra == 3 && rb == 3),
          "matmul: expects 2D x 2D or 3D x 3D, got " + shape_string(a.shape()) +
              " x " + shape_string(b.shape()));
    const long batch = (ra == 3) ? a.dim(0) : 1;
    const long m = a.dim(ra - 2), k = a.dim(ra - 1);
    const long k2 = b.dim(rb - 2), n = b.dim(rb - 1);
    check(k == k2, "matmul: inner dimensions disagree: " +
                       shape_string(a.shape()) + " x " + shape_string(b.shape()));
    check(ra == 2 || a.dim(0) == b.dim(0), "matmul: batch dimensions disagree");

    std::vector<long> out_shape = (ra == 3) ? std::vector<long>{batch, m, n}
                                            : std::vector<long>{m, n};
    Tensor out = Tensor::zeros(out_shape);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = out.data();
    for (long t = 0; t < batch; ++t) {
        const double* A = pa + t * m * k;
        const double* B = pb + t * k * n;
        double* C = pc + t * m * n;
        for (long i = 0; i < m; ++i) {
            for (long p = 0; p < k; ++p) {
                const double av = A[i * k + p];
                if (av == 0.0) continue;
                const double* brow = B + p * n;
                double* crow = C + i * n;
                for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    }

    record(out, {a, b}, [a, b, batch, m, k, n](TensorImpl& o) {
        const double* gout = o.grad.data();
        auto ai = a.impl();
        auto bi = b.impl();
        if (ai->requires_grad || ai->node) {
            ai->ensure_grad();
            for (long t = 0; t < batch; ++t) {
                const double* G = gout + t * m * n;
                const double* B = bi->data.data() + t * k * n;
                double* GA = ai->grad.data() + t * m * k;
                // dA = dC * B^T
                for (long i = 0; i < m; ++i)
                    for (long p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (long j = 0; j < n; ++j) s += G[i * n + j] * B[p * n + j];
                        GA[i * k + p] += s;
                    }
            }
        }
        if (bi->requires_grad || bi->node) {
            bi->ensure_grad();
            for (long t = 0; t < batch; ++t) {
                const double* G = gout + t * m * n;
                const double* A = ai->data.data() + t * m * k;
                double* GB = bi->grad.data() + t * k * n;
                // dB = A^T * dC
                for (long p = 0; p < k; ++p)
                    for (long i = 0; i < m; ++i) {
                        const double av = A[i * k + p];
                        if (av == 0.0) continue;
                        for (long j = 0; j < n; ++j)
                            GB[p * n + j] += av * G[i * n + j];
                    }
            }
        }
    });
    return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, long stride) {
    check(x.rank() == 2 && w.rank() == 3, "conv1d: expects x [C,L], w [Co,C,K]");
    check(stride >= 1, "conv1d: stride must be >= 1");
    const long c_in = x.dim(0), len = x.dim(1);
    const long c_out = w.dim(0), kc = w.dim(1), ksize = w.dim(2);
    check(kc == c_in, "conv1d: channel mismatch");
    check(ksize <= len, "conv1d: kernel longer than input");
    const long l_out = (len - ksize) / stride + 1;

    Tensor out = Tensor::zeros({c_out, l_out});
    const double* px = x.data();
    const double* pw = w.data();
    double* po = out.data();
    for (long o = 0; o < c_out; ++o)
        for (long j = 0; j < l_out; ++j) {
            double s = 0.0;
            for (long c = 0; c < c_in; ++c) {
                const double* xr = px + c * len + j * stride;
                const double* wr = pw + (o * c_in + c) * ksize;
                for (long t = 0; t < ksize; ++t) s += wr[t] * xr[t];
            }
            po[o * l_out + j] = s;
        }

    record(out, {x, w}, [x, w, stride, c_in, len, c_out, ksize, l_out](TensorImpl& o) {
        const double* g = o.grad.data();
        auto xi = x.impl();
        auto wi = w.impl();
        if (xi->requires_grad || xi->node) {
            xi->ensure_grad();
            for (long oc = 0; oc < c_out; ++oc)
                for (long j = 0; j < l_out; ++j) {
                    const double gv = g[oc * l_out + j];
                    if (gv == 0.0) continue;
                    for (long c = 0; c < c_in; ++c) {
                        double* xg = xi->grad.data() + c * len + j * stride;
                        const double* wr = wi->data.data() + (oc * c_in + c) * ksize;
                        for (long t = 0; t < ksize; ++t) xg[t] += gv * wr[t];
                    }
                }
        }
        if (wi->requires_grad || wi->node) {
            wi->ensure_grad();
            for (long oc = 0; oc < c_out; ++oc)
                for (long j = 0; j < l_out; ++j) {
                    const double gv = g[oc * l_out + j];
                    if (gv == 0.0) continue;
                    for (long c = 0; c < c_in; ++c) {
                        const double* xr = xi->data.data() + c * len + j * stride;
                        double* wg = wi->grad.data() + (oc * c_in + c) * ksize;
                        for (long t = 0; t < ksize; ++t) wg[t] += gv * xr[t];
                    }
                }
        }
    });
    return out;
}

Tensor softmax(const Tensor& x) {
    check(x.rank() >= 1, "softmax: rank must be >= 1");
    const long n = x.dim(x.rank() - 1);
    const long rows = x.numel() / n;
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (long r = 0; r < rows; ++r) {
        const double* xr = px + r * n;
        double* orow = po + r * n;
        double mx = xr[0];
        for (long i = 1; i < n; ++i) mx = std::max(mx, xr[i]);
        double s = 0.0;
        for (long i = 0; i < n; ++i) {
            orow[i] = std::exp(xr[i] - mx);
            s += orow[i];
        }
        for (long i = 0; i < n; ++i) orow[i] /= s;
    }

    Tensor y = out;  // captured copy shares storage
    record(out, {x}, [x, y, rows, n](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        const double* g = o.grad.data();
        const double* yv = y.data();
        for (long r = 0; r < rows; ++r) {
            const double* gr = g + r * n;
            const double* yr = yv + r * n;
            double dot = 0.0;
            for (long i = 0; i < n; ++i) dot += gr[i] * yr[i];
            double* xg = xi->grad.data() + r * n;
            for (long i = 0; i < n; ++i) xg[i] += yr[i] * (gr[i] - dot);
        }
    });
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  double eps) {
    check(x.rank() >= 1, "layer_norm: rank must be >= 1");
    const long n = x.dim(x.rank() - 1);
    check(gain.numel() == n && offset.numel() == n,
          "layer_norm: gain/offset length mismatch");
    const long rows = x.numel() / n;
    Tensor out = Tensor::zeros(x.shape());
    std::vector<double> mean(rows), inv_std(rows);
    const double* px = x.data();
    const double* pg = gain.data();
    const double* pb = offset.data();
    double* po = out.data();
    for (long r = 0; r < rows; ++r) {
        const double* xr = px + r * n;
        double mu = 0.0;
        for (long i = 0; i < n; ++i) mu += xr[i];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (long i = 0; i < n; ++i) var += (xr[i] - mu) * (xr[i] - mu);
        var /= static_cast<double>(n);
        const double is = 1.0 / std::sqrt(var + eps);
        mean[r] = mu;
        inv_std[r] = is;
        double* orow = po + r * n;
        for (long i = 0; i < n; ++i) orow[i] = (xr[i] - mu) * is * pg[i] + pb[i];
    }

    record(out, {x, gain, offset},
           [x, gain, offset, rows, n, mean, inv_std](TensorImpl& o) {
               const double* g = o.grad.data();
               auto xi = x.impl();
               auto gi = gain.impl();
               auto bi = offset.impl();
               const double* px2 = xi->data.data();
               const double* pg2 = gi->data.data();
               const bool need_x = xi->requires_grad || xi->node;
               const bool need_g = gi->requires_grad || gi->node;
               const bool need_b = bi->requires_grad || bi->node;
               if (need_x) xi->ensure_grad();
               if (need_g) gi->ensure_grad();
               if (need_b) bi->ensure_grad();
               for (long r = 0; r < rows; ++r) {
                   const double* xr = px2 + r * n;
                   const double* gr = g + r * n;
                   const double mu = mean[r], is = inv_std[r];
                   if (need_g || need_b) {
                       for (long i = 0; i < n; ++i) {
                           const double xhat = (xr[i] - mu) * is;
                           if (need_g) gi->grad[static_cast<std::size_t>(i)] += gr[i] * xhat;
                           if (need_b) bi->grad[static_cast<std::size_t>(i)] += gr[i];
                       }
                   }
                   if (need_x) {
                       // d/dx of (xhat * gain): fold the row statistics back.
                       double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                       for (long i = 0; i < n; ++i) {
                           const double dxhat = gr[i] * pg2[i];
                           const double xhat = (xr[i] - mu) * is;
                           sum_dxhat += dxhat;
                           sum_dxhat_xhat += dxhat * xhat;
                       }
                       const double inv_n = 1.0 / static_cast<double>(n);
                       double* xg = xi->grad.data() + r * n;
                       for (long i = 0; i < n; ++i) {
                           const double dxhat = gr[i] * pg2[i];
                           const double xhat = (xr[i] - mu) * is;
                           xg[i] += is * (dxhat - inv_n * sum_dxhat -
                                          xhat * inv_n * sum_dxhat_xhat);
                       }
                   }
               }
           });
    return out;
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
    check(p >= 0.0 && p < 1.0, "dropout: p must lie in [0, 1)");
    if (!training || p == 0.0) {
        // Identity pass-through, still differentiable.
        Tensor out = Tensor::from_data(x.shape(), std::vector<double>(
                                                      x.data(), x.data() + x.numel()));
        record(out, {x}, [x](TensorImpl& o) {
            auto xi = x.impl();
            if (!(xi->requires_grad || xi->node)) return;
            xi->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i];
        });
        return out;
    }
    const double keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<double>>(static_cast<std::size_t>(x.numel()));
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (long i = 0; i < x.numel(); ++i) {
        const double m = (rng.uniform() < p) ? 0.0 : 1.0 / keep;
        (*mask)[static_cast<std::size_t>(i)] = m;
        po[i] = px[i] * m;
    }
    record(out, {x}, [x, mask](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i)
            xi->grad[i] += o.grad[i] * (*mask)[i];
    });
    return out;
}

namespace {

Tensor unary_elementwise(const Tensor& x, double (*f)(double),
                         double (*df_from_y)(double, double)) {
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (long i = 0; i < x.numel(); ++i) po[i] = f(px[i]);
    Tensor y = out;
    record(out, {x}, [x, y, df_from_y](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        const double* yv = y.data();
        const double* xv = xi->data.data();
        for (std::size_t i = 0; i < o.grad.size(); ++i)
            xi->grad[i] += o.grad[i] * df_from_y(xv[i], yv[i]);
    });
    return out;
}

}  // namespace

Tensor tanh_op(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
    return unary_elementwise(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (long i = 0; i < a.numel(); ++i) po[i] = pa[i] + pb[i];
    record(out, {a, b}, [a, b](TensorImpl& o) {
        for (const auto& in : {a.impl(), b.impl()}) {
            if (!(in->requires_grad || in->node)) continue;
            in->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) in->grad[i] += o.grad[i];
        }
    });
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "sub: shape mismatch");
    Tensor out = Tensor::zeros(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (long i = 0; i < a.numel(); ++i) po[i] = pa[i] - pb[i];
    record(out, {a, b}, [a, b](TensorImpl& o) {
        auto ai = a.impl();
        auto bi = b.impl();
        if (ai->requires_grad || ai->node) {
            ai->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) ai->grad[i] += o.grad[i];
        }
        if (bi->requires_grad || bi->node) {
            bi->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) bi->grad[i] -= o.grad[i];
        }
    });
    return out;
}

Tensor add_rowvec(const Tensor& x, const Tensor& bias) {
    check(x.rank() >= 1, "add_rowvec: rank must be >= 1");
    const long n = x.dim(x.rank() - 1);
    check(bias.numel() == n, "add_rowvec: bias length mismatch");
    const long rows = x.numel() / n;
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    const double* pb = bias.data();
    double* po = out.data();
    for (long r = 0; r < rows; ++r)
        for (long i = 0; i < n; ++i) po[r * n + i] = px[r * n + i] + pb[i];
    record(out, {x, bias}, [x, bias, rows, n](TensorImpl& o) {
        auto xi = x.impl();
        auto bi = bias.impl();
        if (xi->requires_grad || xi->node) {
            xi->ensure_grad();
            for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i];
        }
        if (bi->requires_grad || bi->node) {
            bi->ensure_grad();
            for (long r = 0; r < rows; ++r)
                for (long i = 0; i < n; ++i)
                    bi->grad[static_cast<std::size_t>(i)] += o.grad[static_cast<std::size_t>(r * n + i)];
        }
    });
    return out;
}

Tensor scale(const Tensor& x, double c) {
    Tensor out = Tensor::zeros(x.shape());
    const double* px = x.data();
    double* po = out.data();
    for (long i = 0; i < x.numel(); ++i) po[i] = px[i] * c;
    record(out, {x}, [x, c](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i] * c;
    });
    return out;
}

Tensor concat0(const std::vector<Tensor>& parts) {
    check(!parts.empty(), "concat0: empty input list");
    std::vector<long> shape = parts[0].shape();
    long total0 = 0;
    for (const auto& p : parts) {
        check(p.rank() == static_cast<int>(shape.size()), "concat0: rank mismatch");
        for (int i = 1; i < p.rank(); ++i)
            check(p.dim(i) == shape[static_cast<std::size_t>(i)], "concat0: trailing dims mismatch");
        total0 += p.dim(0);
    }
    shape[0] = total0;
    Tensor out = Tensor::zeros(shape);
    double* po = out.data();
    long offset = 0;
    for (const auto& p : parts) {
        std::copy(p.data(), p.data() + p.numel(), po + offset);
        offset += p.numel();
    }
    record(out, parts, [parts](TensorImpl& o) {
        long off = 0;
        for (const auto& p : parts) {
            auto pi = p.impl();
            if (pi->requires_grad || pi->node) {
                pi->ensure_grad();
                for (long i = 0; i < p.numel(); ++i)
                    pi->grad[static_cast<std::size_t>(i)] += o.grad[static_cast<std::size_t>(off + i)];
            }
            off += p.numel();
        }
    });
    return out;
}

Tensor reshape(const Tensor& x, std::vector<long> shape) {
    check(product(shape) == x.numel(), "reshape: element count mismatch");
    Tensor out = Tensor::from_data(shape, std::vector<double>(x.data(), x.data() + x.numel()));
    record(out, {x}, [x](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (std::size_t i = 0; i < o.grad.size(); ++i) xi->grad[i] += o.grad[i];
    });
    return out;
}

Tensor transpose2d(const Tensor& x) {
    check(x.rank() == 2, "transpose2d: expects a 2D tensor");
    const long r = x.dim(0), c = x.dim(1);
    Tensor out = Tensor::zeros({c, r});
    const double* px = x.data();
    double* po = out.data();
    for (long i = 0; i < r; ++i)
        for (long j = 0; j < c; ++j) po[j * r + i] = px[i * c + j];
    record(out, {x}, [x, r, c](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (long i = 0; i < r; ++i)
            for (long j = 0; j < c; ++j)
                xi->grad[static_cast<std::size_t>(i * c + j)] += o.grad[static_cast<std::size_t>(j * r + i)];
    });
    return out;
}

Tensor transpose_last2(const Tensor& x) {
    if (x.rank() == 2) return transpose2d(x);
    check(x.rank() == 3, "transpose_last2: expects 2D or 3D");
    const long b = x.dim(0), r = x.dim(1), c = x.dim(2);
    Tensor out = Tensor::zeros({b, c, r});
    const double* px = x.data();
    double* po = out.data();
    for (long t = 0; t < b; ++t)
        for (long i = 0; i < r; ++i)
            for (long j = 0; j < c; ++j)
                po[t * c * r + j * r + i] = px[t * r * c + i * c + j];
    record(out, {x}, [x, b, r, c](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (long t = 0; t < b; ++t)
            for (long i = 0; i < r; ++i)
                for (long j = 0; j < c; ++j)
                    xi->grad[static_cast<std::size_t>(t * r * c + i * c + j)] +=
                        o.grad[static_cast<std::size_t>(t * c * r + j * r + i)];
    });
    return out;
}

Tensor split_heads(const Tensor& x, long heads) {
    check(x.rank() == 2, "split_heads: expects [P, D]");
    const long p = x.dim(0), d = x.dim(1);
    check(d % heads == 0, "split_heads: D not divisible by head count");
    const long dk = d / heads;
    Tensor out = Tensor::zeros({heads, p, dk});
    const double* px = x.data();
    double* po = out.data();
    for (long h = 0; h < heads; ++h)
        for (long i = 0; i < p; ++i)
            for (long j = 0; j < dk; ++j)
                po[h * p * dk + i * dk + j] = px[i * d + h * dk + j];
    record(out, {x}, [x, heads, p, dk, d](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (long h = 0; h < heads; ++h)
            for (long i = 0; i < p; ++i)
                for (long j = 0; j < dk; ++j)
                    xi->grad[static_cast<std::size_t>(i * d + h * dk + j)] +=
                        o.grad[static_cast<std::size_t>(h * p * dk + i * dk + j)];
    });
    return out;
}

Tensor merge_heads(const Tensor& x) {
    check(x.rank() == 3, "merge_heads: expects [h, P, dk]");
    const long heads = x.dim(0), p = x.dim(1), dk = x.dim(2);
    const long d = heads * dk;
    Tensor out = Tensor::zeros({p, d});
    const double* px = x.data();
    double* po = out.data();
    for (long h = 0; h < heads; ++h)
        for (long i = 0; i < p; ++i)
            for (long j = 0; j < dk; ++j)
                po[i * d + h * dk + j] = px[h * p * dk + i * dk + j];
    record(out, {x}, [x, heads, p, dk, d](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (long h = 0; h < heads; ++h)
            for (long i = 0; i < p; ++i)
                for (long j = 0; j < dk; ++j)
                    xi->grad[static_cast<std::size_t>(h * p * dk + i * dk + j)] +=
                        o.grad[static_cast<std::size_t>(i * d + h * dk + j)];
    });
    return out;
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mse_loss: shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
    const long n = a.numel();
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (long i = 0; i < n; ++i) {
        const double d = pa[i] - pb[i];
        s += d * d;
    }
    Tensor out = Tensor::from_data({1}, {s / static_cast<double>(n)});
    record(out, {a, b}, [a, b, n](TensorImpl& o) {
        const double g = o.grad[0] * 2.0 / static_cast<double>(n);
        auto ai = a.impl();
        auto bi = b.impl();
        const double* pa2 = ai->data.data();
        const double* pb2 = bi->data.data();
        if (ai->requires_grad || ai->node) {
            ai->ensure_grad();
            for (long i = 0; i < n; ++i)
                ai->grad[static_cast<std::size_t>(i)] += g * (pa2[i] - pb2[i]);
        }
        if (bi->requires_grad || bi->node) {
            bi->ensure_grad();
            for (long i = 0; i < n; ++i)
                bi->grad[static_cast<std::size_t>(i)] -= g * (pa2[i] - pb2[i]);
        }
    });
    return out;
}

Tensor sum(const Tensor& x) {
    double s = 0.0;
    const double* px = x.data();
    for (long i = 0; i < x.numel(); ++i) s += px[i];
    Tensor out = Tensor::from_data({1}, {s});
    record(out, {x}, [x](TensorImpl& o) {
        auto xi = x.impl();
        if (!(xi->requires_grad || xi->node)) return;
        xi->ensure_grad();
        for (std::size_t i = 0; i < xi->grad.size(); ++i) xi->grad[i] += o.grad[0];
    });
    return out;
}

void backward(const Tensor& loss) {
    check(loss.defined(), "backward: undefined loss");
    check(loss.numel() == 1, "backward: loss must be a scalar");
    if (!loss.impl()->node && !loss.impl()->requires_grad) {
        throw UsageError("backward: loss is not attached to a tape");
    }

    // Collect reachable recorded impls.
    std::vector<std::shared_ptr<TensorImpl>> stack{loss.impl()};
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::shared_ptr<TensorImpl>> recorded;
    while (!stack.empty()) {
        auto cur = stack.back();
        stack.pop_back();
        if (!cur || seen.count(cur.get())) continue;
        seen.insert(cur.get());
        if (cur->node) {
            recorded.push_back(cur);
            for (auto& p : cur->node->parents) stack.push_back(p);
        }
    }
    // Reverse recording order.
    std::sort(recorded.begin(), recorded.end(),
              [](const auto& l, const auto& r) { return l->node->seq > r->node->seq; });

    loss.impl()->ensure_grad();
    loss.impl()->grad[0] = 1.0;
    for (auto& impl : recorded) {
        if (impl->grad.empty()) continue;  // no gradient flowed here
        impl->node->backward_fn(*impl);
    }
    // Free the tape.
    for (auto& impl : recorded) impl->node.reset();
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

}  // namespace ad
}  // namespace stnav

