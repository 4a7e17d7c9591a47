#ifndef HYPERFC_TENSOR_HPP
#define HYPERFC_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyperfc/rng.hpp"

namespace hyperfc {

using Shape = std::vector<int>;

std::string shape_str(const Shape& shape);
size_t shape_numel(const Shape& shape);

struct TensorImpl;
class Tensor;

// Receives leaf gradients during backward(). The default sink adds into
// each leaf's own grad buffer; training uses lane-local map sinks so
// batch items can run backward concurrently and be reduced in a fixed
// order afterwards.
class GradSink {
public:
    virtual ~GradSink() = default;
    // Adds `g` (length = leaf numel) into the gradient account of `leaf`.
    virtual void accumulate(TensorImpl* leaf, const std::vector<double>& g) = 0;
};

// Accumulates leaf gradients into a private map; flush() adds them into
// the tensors' grad buffers. Flushing iterates the caller's parameter
// list, never the map, so reduction order is deterministic.
class MapGradSink : public GradSink {
public:
    void accumulate(TensorImpl* leaf, const std::vector<double>& g) override;
    void flush();

private:
    std::unordered_map<TensorImpl*, std::vector<double>> grads_;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // persistent for leaves, transient for graph nodes
    bool requires_grad = false;

    // Reverse-mode graph record: null for leaves. Reads this node's grad
    // and accumulates into the parents (through the sink for leaves).
    std::function<void(GradSink&)> backward_fn;
    std::vector<std::shared_ptr<TensorImpl>> parents;
    const char* op = "";
    // Small saved context for ops that need it (scale factor, slice offset).
    double saved_scalar = 0.0;
    size_t saved_offset = 0;

    size_t numel() const { return data.size(); }
    bool is_leaf() const { return !backward_fn; }
    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
// Value-semantics handle over shared storage: copies alias the same
// buffer. Data is treated as immutable once the tensor participates in a
// graph; gradients live in a separate buffer.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor from_data(const Shape& shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor randn(const Shape& shape, Rng& rng, double stddev,
                        bool requires_grad = false);
    // Identity matrix n x n.
    static Tensor eye(int n);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int dim(size_t axis) const { return impl_->shape[axis]; }
    size_t rank() const { return impl_->shape.size(); }
    size_t numel() const { return impl_->numel(); }

    const std::vector<double>& data() const { return impl_->data; }
    std::vector<double>& mutable_data() { return impl_->data; }
    double operator[](size_t i) const { return impl_->data[i]; }
    double at(std::initializer_list<int> idx) const;

    // Scalar tensors only.
    double value() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool rg);
    bool is_leaf() const { return impl_->is_leaf(); }

    bool has_grad() const { return impl_->grad.size() == impl_->data.size(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Detached deep copy (fresh buffer, no graph).
    Tensor clone() const;

    TensorImpl* impl() const { return impl_.get(); }
    const std::shared_ptr<TensorImpl>& impl_ptr() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// While alive on a thread, ops on that thread do not record graph nodes.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

bool grad_enabled();

// ---- Differentiable operations -------------------------------------------

// Standard matrix product [m x k] * [k x n] -> [m x n].
Tensor matmul(const Tensor& a, const Tensor& b);

// 3x3 cross-correlation with zero padding 1 (same-size output).
// x: [C_in x H x W], kernel: [C_out x C_in x 3 x 3], bias: [C_out].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// Replicates each pixel into a factor x factor block.
Tensor upsample_nearest(const Tensor& x, int factor);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor mul_scalar(const Tensor& x, double s);
Tensor add_scalar(const Tensor& x, double s);
Tensor reshape(const Tensor& x, const Shape& shape);

// Concatenates along axis 0; trailing extents must agree.
Tensor concat0(const std::vector<Tensor>& parts);

// Stacks 2-d tensors [H x W] into [C x H x W].
Tensor stack_channels(const std::vector<Tensor>& channels);

// Slice along axis 0: rows [start, start+len).
Tensor slice(const Tensor& x, int start, int len);

Tensor sum_all(const Tensor& x);   // -> scalar
Tensor mean_all(const Tensor& x);  // -> scalar

// Sum of equal-shaped tensors as a single graph node.
Tensor add_n(const std::vector<Tensor>& parts);

// Mean squared error between equal-shaped tensors -> scalar.
Tensor mse(const Tensor& pred, const Tensor& target);

// ---- Backward -------------------------------------------------------------

// Seeds d(loss)/d(loss) = seed and propagates through the graph in
// reverse topological order, visiting each node exactly once. Graph-node
// gradients are transient per call; leaf gradients accumulate (into the
// sink, or the leaves' own grad buffers by default).
void backward(const Tensor& loss, GradSink& sink, double seed = 1.0);
void backward(const Tensor& loss, double seed);
void backward(const Tensor& loss);

} // namespace hyperfc

#endif
