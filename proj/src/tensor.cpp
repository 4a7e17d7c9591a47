#include "hyperfc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "hyperfc/error.hpp"

namespace hyperfc {

namespace {

thread_local bool t_grad_enabled = true;

void check_positive_extents(const Shape& shape) {
    for (int e : shape)
        if (e <= 0)
            throw ArgumentError("tensor extents must be positive, got " + shape_str(shape));
}

std::shared_ptr<TensorImpl> make_impl(const Shape& shape, std::vector<double> data) {
    check_positive_extents(shape);
    if (shape_numel(shape) != data.size())
        throw DimensionError("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data = std::move(data);
    return impl;
}

// Accumulation target for one parent during backward. Non-leaf parents
// accumulate in place; leaf parents go through a scratch buffer handed
// to the sink, so concurrent backwards never write shared leaf state.
class GradAccum {
public:
    GradAccum(TensorImpl* parent, GradSink& sink) : parent_(parent), sink_(sink) {
        if (!parent_->requires_grad) return;
        if (parent_->is_leaf()) {
            scratch_.assign(parent_->numel(), 0.0);
            buf_ = scratch_.data();
        } else {
            parent_->ensure_grad();
            buf_ = parent_->grad.data();
        }
    }
    ~GradAccum() {
        if (buf_ != nullptr && parent_->is_leaf()) sink_.accumulate(parent_, scratch_);
    }
    bool active() const { return buf_ != nullptr; }
    double* data() { return buf_; }

private:
    TensorImpl* parent_;
    GradSink& sink_;
    std::vector<double> scratch_;
    double* buf_ = nullptr;
};

// Builds the op output; records the graph node when grad mode is on and
// some input needs gradients.
Tensor make_node(const Shape& shape, std::vector<double> data, const char* op,
                 std::vector<Tensor> inputs,
                 std::function<void(GradSink&)> (*make_backward)(TensorImpl*,
                                                                 const std::vector<Tensor>&)) {
    auto impl = make_impl(shape, std::move(data));
    impl->op = op;
    bool needs = false;
    if (t_grad_enabled)
        for (const auto& in : inputs)
            if (in.requires_grad()) needs = true;
    if (needs) {
        impl->requires_grad = true;
        impl->parents.reserve(inputs.size());
        for (const auto& in : inputs) impl->parents.push_back(in.impl_ptr());
        impl->backward_fn = make_backward(impl.get(), inputs);
    }
    return Tensor(impl);
}

} // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

size_t shape_numel(const Shape& shape) {
    size_t n = 1;
    for (int e : shape) n *= static_cast<size_t>(e);
    return n;
}

void MapGradSink::accumulate(TensorImpl* leaf, const std::vector<double>& g) {
    auto& buf = grads_[leaf];
    if (buf.empty()) {
        buf = g;
        return;
    }
    for (size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void MapGradSink::flush() {
    // Callers that need deterministic order flush sinks themselves in a
    // fixed lane order; per-sink flush touches each leaf exactly once.
    for (auto& [leaf, g] : grads_) {
        leaf->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) leaf->grad[i] += g[i];
    }
    grads_.clear();
}

namespace {

// Default sink: leaf gradients accumulate in the leaves themselves.
class DirectSink : public GradSink {
public:
    void accumulate(TensorImpl* leaf, const std::vector<double>& g) override {
        leaf->ensure_grad();
        for (size_t i = 0; i < g.size(); ++i) leaf->grad[i] += g[i];
    }
};

} // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    auto impl = make_impl(shape, std::vector<double>(shape_numel(shape), 0.0));
    impl->requires_grad = requires_grad;
    return Tensor(impl);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
    auto impl = make_impl(shape, std::vector<double>(shape_numel(shape), value));
    impl->requires_grad = requires_grad;
    return Tensor(impl);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full({1}, value, requires_grad);
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data, bool requires_grad) {
    auto impl = make_impl(shape, std::move(data));
    impl->requires_grad = requires_grad;
    return Tensor(impl);
}

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev, bool requires_grad) {
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = rng.normal() * stddev;
    return from_data(shape, std::move(data), requires_grad);
}

Tensor Tensor::eye(int n) {
    Tensor t = zeros({n, n});
    for (int i = 0; i < n; ++i) t.impl()->data[static_cast<size_t>(i) * n + i] = 1.0;
    return t;
}

double Tensor::at(std::initializer_list<int> idx) const {
    const Shape& s = impl_->shape;
    if (idx.size() != s.size())
        throw ArgumentError("index rank does not match tensor rank");
    size_t flat = 0;
    size_t axis = 0;
    for (int i : idx) {
        if (i < 0 || i >= s[axis]) throw IndexError("index out of range");
        flat = flat * static_cast<size_t>(s[axis]) + static_cast<size_t>(i);
        ++axis;
    }
    return impl_->data[flat];
}

double Tensor::value() const {
    if (numel() != 1) throw ArgumentError("value() requires a scalar tensor, shape is " +
                                          shape_str(impl_->shape));
    return impl_->data[0];
}

void Tensor::set_requires_grad(bool rg) {
    if (!impl_->is_leaf())
        throw StateError("requires_grad can only be toggled on leaf tensors");
    impl_->requires_grad = rg;
    if (!rg) impl_->grad.clear();
}

const std::vector<double>& Tensor::grad() const {
    if (!has_grad()) throw StateError("tensor has no gradient buffer");
    return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

Tensor Tensor::clone() const {
    auto impl = make_impl(impl_->shape, impl_->data);
    return Tensor(impl);
}

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

bool grad_enabled() { return t_grad_enabled; }

// ---- Ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw DimensionError("matmul shape mismatch: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const double* A = a.data().data();
    const double* B = b.data().data();
    for (int i = 0; i < m; ++i) {
        double* C = out.data() + static_cast<size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = A[static_cast<size_t>(i) * k + kk];
            const double* Br = B + static_cast<size_t>(kk) * n;
            for (int j = 0; j < n; ++j) C[j] += av * Br[j];
        }
    }
    return make_node({m, n}, std::move(out), "matmul", {a, b},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto pa = in[0].impl_ptr();
                         auto pb = in[1].impl_ptr();
                         return std::function<void(GradSink&)>([self, pa, pb](GradSink& sink) {
                             const int m = pa->shape[0], k = pa->shape[1], n = pb->shape[1];
                             const double* G = self->grad.data();
                             const double* A = pa->data.data();
                             const double* B = pb->data.data();
                             {
                                 GradAccum da(pa.get(), sink);
                                 if (da.active()) {
                                     double* D = da.data();
                                     for (int i = 0; i < m; ++i)
                                         for (int kk = 0; kk < k; ++kk) {
                                             const double* Gr = G + static_cast<size_t>(i) * n;
                                             const double* Br = B + static_cast<size_t>(kk) * n;
                                             double acc = 0.0;
                                             for (int j = 0; j < n; ++j) acc += Gr[j] * Br[j];
                                             D[static_cast<size_t>(i) * k + kk] += acc;
                                         }
                                 }
                             }
                             {
                                 GradAccum db(pb.get(), sink);
                                 if (db.active()) {
                                     double* D = db.data();
                                     for (int i = 0; i < m; ++i)
                                         for (int kk = 0; kk < k; ++kk) {
                                             const double av = A[static_cast<size_t>(i) * k + kk];
                                             const double* Gr = G + static_cast<size_t>(i) * n;
                                             double* Dr = D + static_cast<size_t>(kk) * n;
                                             for (int j = 0; j < n; ++j) Dr[j] += av * Gr[j];
                                         }
                                 }
                             }
                         });
                     });
}

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    if (x.rank() != 3)
        throw DimensionError("conv2d input must be [C x H x W], got " + shape_str(x.shape()));
    if (kernel.rank() != 4 || kernel.dim(2) != 3 || kernel.dim(3) != 3)
        throw DimensionError("conv2d kernel must be [C_out x C_in x 3 x 3], got " +
                             shape_str(kernel.shape()));
    if (kernel.dim(1) != x.dim(0))
        throw DimensionError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                             " vs kernel " + shape_str(kernel.shape()));
    if (bias.rank() != 1 || bias.dim(0) != kernel.dim(0))
        throw DimensionError("conv2d bias must be [C_out], got " + shape_str(bias.shape()));
    const int ci_n = x.dim(0), h = x.dim(1), w = x.dim(2), co_n = kernel.dim(0);
    std::vector<double> out(static_cast<size_t>(co_n) * h * w);
    const double* X = x.data().data();
    const double* K = kernel.data().data();
    const double* Bv = bias.data().data();
    for (int co = 0; co < co_n; ++co) {
        double* Y = out.data() + static_cast<size_t>(co) * h * w;
        std::fill(Y, Y + static_cast<size_t>(h) * w, Bv[co]);
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* Xc = X + static_cast<size_t>(ci) * h * w;
            const double* Kc = K + (static_cast<size_t>(co) * ci_n + ci) * 9;
            for (int ky = 0; ky < 3; ++ky) {
                const int oy0 = std::max(0, 1 - ky), oy1 = std::min(h, h + 1 - ky);
                const double k0 = Kc[ky * 3 + 0], k1 = Kc[ky * 3 + 1], k2 = Kc[ky * 3 + 2];
                for (int oy = oy0; oy < oy1; ++oy) {
                    double* __restrict__ Yr = Y + static_cast<size_t>(oy) * w;
                    const double* __restrict__ Xr =
                        Xc + static_cast<size_t>(oy + ky - 1) * w;
                    // All three taps of the kernel row in one pass.
                    Yr[0] += k1 * Xr[0] + k2 * (w > 1 ? Xr[1] : 0.0);
                    for (int ox = 1; ox < w - 1; ++ox)
                        Yr[ox] += k0 * Xr[ox - 1] + k1 * Xr[ox] + k2 * Xr[ox + 1];
                    if (w > 1) Yr[w - 1] += k0 * Xr[w - 2] + k1 * Xr[w - 1];
                }
            }
        }
    }
    return make_node(
        {co_n, h, w}, std::move(out), "conv2d", {x, kernel, bias},
        [](TensorImpl* self, const std::vector<Tensor>& in) {
            auto px = in[0].impl_ptr();
            auto pk = in[1].impl_ptr();
            auto pb = in[2].impl_ptr();
            return std::function<void(GradSink&)>([self, px, pk, pb](GradSink& sink) {
                const int ci_n = px->shape[0], h = px->shape[1], w = px->shape[2];
                const int co_n = pk->shape[0];
                const double* G = self->grad.data();
                const double* X = px->data.data();
                const double* K = pk->data.data();
                {
                    GradAccum db(pb.get(), sink);
                    if (db.active()) {
                        double* D = db.data();
                        for (int co = 0; co < co_n; ++co) {
                            const double* Gc = G + static_cast<size_t>(co) * h * w;
                            double acc = 0.0;
                            for (size_t i = 0; i < static_cast<size_t>(h) * w; ++i) acc += Gc[i];
                            D[co] += acc;
                        }
                    }
                }
                {
                    GradAccum dx(px.get(), sink);
                    if (dx.active()) {
                        double* D = dx.data();
                        // dx[ci, iy, ix] += sum_{ky,kx} K[ky,kx] * dy[iy-ky+1, ix-kx+1]
                        for (int co = 0; co < co_n; ++co) {
                            const double* Gc = G + static_cast<size_t>(co) * h * w;
                            for (int ci = 0; ci < ci_n; ++ci) {
                                double* Dc = D + static_cast<size_t>(ci) * h * w;
                                const double* Kc = K + (static_cast<size_t>(co) * ci_n + ci) * 9;
                                for (int ky = 0; ky < 3; ++ky) {
                                    const int iy0 = std::max(0, ky - 1);
                                    const int iy1 = std::min(h, h + ky - 1);
                                    const double k0 = Kc[ky * 3 + 0], k1 = Kc[ky * 3 + 1],
                                                 k2 = Kc[ky * 3 + 2];
                                    for (int iy = iy0; iy < iy1; ++iy) {
                                        double* __restrict__ Dr =
                                            Dc + static_cast<size_t>(iy) * w;
                                        const double* __restrict__ Gr =
                                            Gc + static_cast<size_t>(iy - ky + 1) * w;
                                        Dr[0] += k1 * Gr[0] + (w > 1 ? k0 * Gr[1] : 0.0);
                                        for (int ix = 1; ix < w - 1; ++ix)
                                            Dr[ix] += k2 * Gr[ix - 1] + k1 * Gr[ix] +
                                                      k0 * Gr[ix + 1];
                                        if (w > 1) Dr[w - 1] += k2 * Gr[w - 2] + k1 * Gr[w - 1];
                                    }
                                }
                            }
                        }
                    }
                }
                {
                    GradAccum dk(pk.get(), sink);
                    if (dk.active()) {
                        double* D = dk.data();
                        for (int co = 0; co < co_n; ++co) {
                            const double* Gc = G + static_cast<size_t>(co) * h * w;
                            for (int ci = 0; ci < ci_n; ++ci) {
                                const double* Xc = X + static_cast<size_t>(ci) * h * w;
                                double* Dc = D + (static_cast<size_t>(co) * ci_n + ci) * 9;
                                for (int ky = 0; ky < 3; ++ky) {
                                    const int oy0 = std::max(0, 1 - ky);
                                    const int oy1 = std::min(h, h + 1 - ky);
                                    // Three taps of the kernel row per pass.
                                    double a0 = 0.0, a1 = 0.0, a2 = 0.0;
                                    for (int oy = oy0; oy < oy1; ++oy) {
                                        const double* __restrict__ Gr =
                                            Gc + static_cast<size_t>(oy) * w;
                                        const double* __restrict__ Xr =
                                            Xc + static_cast<size_t>(oy + ky - 1) * w;
                                        double s0 = 0.0, s1 = 0.0, s2 = 0.0;
                                        s1 += Xr[0] * Gr[0];
                                        if (w > 1) s2 += Xr[1] * Gr[0];
                                        for (int ox = 1; ox < w - 1; ++ox) {
                                            s0 += Xr[ox - 1] * Gr[ox];
                                            s1 += Xr[ox] * Gr[ox];
                                            s2 += Xr[ox + 1] * Gr[ox];
                                        }
                                        if (w > 1) {
                                            s0 += Xr[w - 2] * Gr[w - 1];
                                            s1 += Xr[w - 1] * Gr[w - 1];
                                        }
                                        a0 += s0;
                                        a1 += s1;
                                        a2 += s2;
                                    }
                                    Dc[ky * 3 + 0] += a0;
                                    Dc[ky * 3 + 1] += a1;
                                    Dc[ky * 3 + 2] += a2;
                                }
                            }
                        }
                    }
                }
            });
        });
}

Tensor upsample_nearest(const Tensor& x, int factor) {
    if (factor < 1) throw ArgumentError("upsample factor must be >= 1, got " +
                                        std::to_string(factor));
    if (x.rank() != 3)
        throw DimensionError("upsample input must be [C x H x W], got " + shape_str(x.shape()));
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2), f = factor;
    const int oh = h * f, ow = w * f;
    std::vector<double> out(static_cast<size_t>(c) * oh * ow);
    const double* X = x.data().data();
    for (int cc = 0; cc < c; ++cc)
        for (int oy = 0; oy < oh; ++oy) {
            const double* Xr = X + (static_cast<size_t>(cc) * h + oy / f) * w;
            double* Yr = out.data() + (static_cast<size_t>(cc) * oh + oy) * ow;
            for (int ox = 0; ox < ow; ++ox) Yr[ox] = Xr[ox / f];
        }
    return make_node({c, oh, ow}, std::move(out), "upsample_nearest", {x},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto px = in[0].impl_ptr();
                         return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                             const int c = px->shape[0], h = px->shape[1], w = px->shape[2];
                             const int oh = self->shape[1], ow = self->shape[2];
                             const int f = oh / h;
                             GradAccum dx(px.get(), sink);
                             if (!dx.active()) return;
                             double* D = dx.data();
                             const double* G = self->grad.data();
                             for (int cc = 0; cc < c; ++cc)
                                 for (int oy = 0; oy < oh; ++oy) {
                                     double* Dr = D + (static_cast<size_t>(cc) * h + oy / f) * w;
                                     const double* Gr =
                                         G + (static_cast<size_t>(cc) * oh + oy) * ow;
                                     for (int ox = 0; ox < ow; ++ox) Dr[ox / f] += Gr[ox];
                                 }
                         });
                     });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    const double* X = x.data().data();
    for (size_t i = 0; i < out.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
    return make_node(x.shape(), std::move(out), "relu", {x},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto px = in[0].impl_ptr();
                         return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                             GradAccum dx(px.get(), sink);
                             if (!dx.active()) return;
                             double* D = dx.data();
                             const double* G = self->grad.data();
                             const double* X = px->data.data();
                             // subgradient 0 at exactly 0
                             for (size_t i = 0; i < px->numel(); ++i)
                                 if (X[i] > 0.0) D[i] += G[i];
                         });
                     });
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_node(a.shape(), std::move(out), "add", {a, b},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto pa = in[0].impl_ptr();
                         auto pb = in[1].impl_ptr();
                         return std::function<void(GradSink&)>([self, pa, pb](GradSink& sink) {
                             const double* G = self->grad.data();
                             for (auto* p : {pa.get(), pb.get()}) {
                                 GradAccum d(p, sink);
                                 if (!d.active()) continue;
                                 double* D = d.data();
                                 for (size_t i = 0; i < p->numel(); ++i) D[i] += G[i];
                             }
                         });
                     });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return make_node(a.shape(), std::move(out), "sub", {a, b},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto pa = in[0].impl_ptr();
                         auto pb = in[1].impl_ptr();
                         return std::function<void(GradSink&)>([self, pa, pb](GradSink& sink) {
                             const double* G = self->grad.data();
                             {
                                 GradAccum d(pa.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     for (size_t i = 0; i < pa->numel(); ++i) D[i] += G[i];
                                 }
                             }
                             {
                                 GradAccum d(pb.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     for (size_t i = 0; i < pb->numel(); ++i) D[i] -= G[i];
                                 }
                             }
                         });
                     });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return make_node(a.shape(), std::move(out), "mul", {a, b},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto pa = in[0].impl_ptr();
                         auto pb = in[1].impl_ptr();
                         return std::function<void(GradSink&)>([self, pa, pb](GradSink& sink) {
                             const double* G = self->grad.data();
                             {
                                 GradAccum d(pa.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     const double* B = pb->data.data();
                                     for (size_t i = 0; i < pa->numel(); ++i) D[i] += G[i] * B[i];
                                 }
                             }
                             {
                                 GradAccum d(pb.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     const double* A = pa->data.data();
                                     for (size_t i = 0; i < pb->numel(); ++i) D[i] += G[i] * A[i];
                                 }
                             }
                         });
                     });
}

Tensor mul_scalar(const Tensor& x, double s) {
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] * s;
    auto node = make_node(x.shape(), std::move(out), "mul_scalar", {x},
                          [](TensorImpl* self, const std::vector<Tensor>& in) {
                              auto px = in[0].impl_ptr();
                              return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                                  GradAccum d(px.get(), sink);
                                  if (!d.active()) return;
                                  double* D = d.data();
                                  const double* G = self->grad.data();
                                  const double s = self->saved_scalar;
                                  for (size_t i = 0; i < px->numel(); ++i) D[i] += G[i] * s;
                              });
                          });
    node.impl()->saved_scalar = s;
    return node;
}

Tensor add_scalar(const Tensor& x, double s) {
    std::vector<double> out(x.numel());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.data()[i] + s;
    return make_node(x.shape(), std::move(out), "add_scalar", {x},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto px = in[0].impl_ptr();
                         return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                             GradAccum d(px.get(), sink);
                             if (!d.active()) return;
                             double* D = d.data();
                             const double* G = self->grad.data();
                             for (size_t i = 0; i < px->numel(); ++i) D[i] += G[i];
                         });
                     });
}

Tensor reshape(const Tensor& x, const Shape& shape) {
    check_positive_extents(shape);
    if (shape_numel(shape) != x.numel())
        throw DimensionError("reshape from " + shape_str(x.shape()) + " to " +
                             shape_str(shape) + " changes element count");
    return make_node(shape, x.data(), "reshape", {x},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto px = in[0].impl_ptr();
                         return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                             GradAccum d(px.get(), sink);
                             if (!d.active()) return;
                             double* D = d.data();
                             const double* G = self->grad.data();
                             for (size_t i = 0; i < px->numel(); ++i) D[i] += G[i];
                         });
                     });
}

Tensor concat0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat0 needs at least one tensor");
    const Shape& first = parts[0].shape();
    int dim0 = 0;
    size_t inner = 1;
    for (size_t a = 1; a < first.size(); ++a) inner *= static_cast<size_t>(first[a]);
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size())
            throw DimensionError("concat0 rank mismatch: " + shape_str(first) + " vs " +
                                 shape_str(s));
        for (size_t a = 1; a < s.size(); ++a)
            if (s[a] != first[a])
                throw DimensionError("concat0 trailing extent mismatch: " + shape_str(first) +
                                     " vs " + shape_str(s));
        dim0 += s[0];
    }
    Shape out_shape = first;
    out_shape[0] = dim0;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(dim0) * inner);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return make_node(out_shape, std::move(out), "concat0", parts,
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         std::vector<std::shared_ptr<TensorImpl>> ps;
                         ps.reserve(in.size());
                         for (const auto& t : in) ps.push_back(t.impl_ptr());
                         return std::function<void(GradSink&)>([self, ps](GradSink& sink) {
                             const double* G = self->grad.data();
                             size_t offset = 0;
                             for (const auto& p : ps) {
                                 GradAccum d(p.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     for (size_t i = 0; i < p->numel(); ++i)
                                         D[i] += G[offset + i];
                                 }
                                 offset += p->numel();
                             }
                         });
                     });
}

Tensor stack_channels(const std::vector<Tensor>& channels) {
    if (channels.empty()) throw ArgumentError("stack_channels needs at least one tensor");
    for (const auto& c : channels)
        if (c.rank() != 2 || c.shape() != channels[0].shape())
            throw DimensionError("stack_channels expects equal [H x W] tensors, got " +
                                 shape_str(c.shape()));
    const int h = channels[0].dim(0), w = channels[0].dim(1);
    std::vector<double> out;
    out.reserve(channels.size() * static_cast<size_t>(h) * w);
    for (const auto& c : channels) out.insert(out.end(), c.data().begin(), c.data().end());
    return make_node({static_cast<int>(channels.size()), h, w}, std::move(out),
                     "stack_channels", channels,
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         std::vector<std::shared_ptr<TensorImpl>> ps;
                         ps.reserve(in.size());
                         for (const auto& t : in) ps.push_back(t.impl_ptr());
                         return std::function<void(GradSink&)>([self, ps](GradSink& sink) {
                             const double* G = self->grad.data();
                             size_t offset = 0;
                             for (const auto& p : ps) {
                                 GradAccum d(p.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     for (size_t i = 0; i < p->numel(); ++i)
                                         D[i] += G[offset + i];
                                 }
                                 offset += p->numel();
                             }
                         });
                     });
}

Tensor slice(const Tensor& x, int start, int len) {
    if (x.rank() < 1) throw DimensionError("slice needs rank >= 1");
    if (len < 1 || start < 0 || start + len > x.dim(0))
        throw IndexError("slice [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of range for axis extent " +
                         std::to_string(x.dim(0)));
    size_t inner = 1;
    for (size_t a = 1; a < x.rank(); ++a) inner *= static_cast<size_t>(x.dim(a));
    Shape out_shape = x.shape();
    out_shape[0] = len;
    std::vector<double> out(x.data().begin() + static_cast<size_t>(start) * inner,
                            x.data().begin() + static_cast<size_t>(start + len) * inner);
    auto node = make_node(out_shape, std::move(out), "slice", {x},
                          [](TensorImpl* self, const std::vector<Tensor>& in) {
                              auto px = in[0].impl_ptr();
                              return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                                  GradAccum d(px.get(), sink);
                                  if (!d.active()) return;
                                  double* D = d.data();
                                  const double* G = self->grad.data();
                                  const size_t off = self->saved_offset;
                                  for (size_t i = 0; i < self->numel(); ++i) D[off + i] += G[i];
                              });
                          });
    node.impl()->saved_offset = static_cast<size_t>(start) * inner;
    return node;
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return make_node({1}, {acc}, "sum", {x},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto px = in[0].impl_ptr();
                         return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                             GradAccum d(px.get(), sink);
                             if (!d.active()) return;
                             double* D = d.data();
                             const double g = self->grad[0];
                             for (size_t i = 0; i < px->numel(); ++i) D[i] += g;
                         });
                     });
}

Tensor mean_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    return make_node({1}, {acc / static_cast<double>(x.numel())}, "mean", {x},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto px = in[0].impl_ptr();
                         return std::function<void(GradSink&)>([self, px](GradSink& sink) {
                             GradAccum d(px.get(), sink);
                             if (!d.active()) return;
                             double* D = d.data();
                             const double g = self->grad[0] / static_cast<double>(px->numel());
                             for (size_t i = 0; i < px->numel(); ++i) D[i] += g;
                         });
                     });
}

Tensor add_n(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("add_n needs at least one tensor");
    for (const auto& p : parts) check_same_shape(parts[0], p, "add_n");
    std::vector<double> out(parts[0].numel(), 0.0);
    for (const auto& p : parts)
        for (size_t i = 0; i < out.size(); ++i) out[i] += p.data()[i];
    return make_node(parts[0].shape(), std::move(out), "add_n", parts,
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         std::vector<std::shared_ptr<TensorImpl>> ps;
                         ps.reserve(in.size());
                         for (const auto& t : in) ps.push_back(t.impl_ptr());
                         return std::function<void(GradSink&)>([self, ps](GradSink& sink) {
                             const double* G = self->grad.data();
                             for (const auto& p : ps) {
                                 GradAccum d(p.get(), sink);
                                 if (!d.active()) continue;
                                 double* D = d.data();
                                 for (size_t i = 0; i < p->numel(); ++i) D[i] += G[i];
                             }
                         });
                     });
}

Tensor mse(const Tensor& pred, const Tensor& target) {
    check_same_shape(pred, target, "mse");
    double acc = 0.0;
    for (size_t i = 0; i < pred.numel(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    return make_node({1}, {acc / static_cast<double>(pred.numel())}, "mse", {pred, target},
                     [](TensorImpl* self, const std::vector<Tensor>& in) {
                         auto pp = in[0].impl_ptr();
                         auto pt = in[1].impl_ptr();
                         return std::function<void(GradSink&)>([self, pp, pt](GradSink& sink) {
                             const double g =
                                 2.0 * self->grad[0] / static_cast<double>(pp->numel());
                             {
                                 GradAccum d(pp.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     for (size_t i = 0; i < pp->numel(); ++i)
                                         D[i] += g * (pp->data[i] - pt->data[i]);
                                 }
                             }
                             {
                                 GradAccum d(pt.get(), sink);
                                 if (d.active()) {
                                     double* D = d.data();
                                     for (size_t i = 0; i < pt->numel(); ++i)
                                         D[i] -= g * (pp->data[i] - pt->data[i]);
                                 }
                             }
                         });
                     });
}

// ---- Backward ---------------------------------------------------------------

void backward(const Tensor& loss, GradSink& sink, double seed) {
    if (loss.numel() != 1)
        throw ArgumentError("backward requires a scalar loss, shape is " +
                            shape_str(loss.shape()));
    TensorImpl* root = loss.impl();
    if (root->is_leaf()) {
        if (root->requires_grad) sink.accumulate(root, {seed});
        return;
    }

    // Post-order DFS; each node visited exactly once.
    std::vector<TensorImpl*> topo;
    std::unordered_set<TensorImpl*> visited;
    struct Frame {
        TensorImpl* node;
        size_t next_child;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_child < f.node->parents.size()) {
            TensorImpl* child = f.node->parents[f.next_child++].get();
            if (!child->is_leaf() && child->requires_grad && visited.insert(child).second)
                stack.push_back({child, 0});
        } else {
            topo.push_back(f.node);
            stack.pop_back();
        }
    }

    // Graph-node gradients are transient per backward call; leaves keep
    // accumulating across calls.
    for (TensorImpl* n : topo) n->grad.assign(n->numel(), 0.0);
    root->grad[0] = seed;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) (*it)->backward_fn(sink);
}

void backward(const Tensor& loss, double seed) {
    DirectSink sink;
    backward(loss, sink, seed);
}

void backward(const Tensor& loss) { backward(loss, 1.0); }

} // namespace hyperfc
