#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace uwno {

// Tensor shape, outermost dimension first. Image tensors are [B, C, H, W].
using Shape = std::vector<int>;

int numel(const Shape& s);
std::string shape_str(const Shape& s);

// Sets the FPU to flush denormal floats to zero (per thread). Saturated
// sigmoids produce denormal activations whose arithmetic is ~100x slower;
// call this once at entry in long-running executables.
void flush_denormals_to_zero();

namespace detail {

// One node of the recorded computation graph. Ops append nodes in execution
// order; the parent links always point backwards, so a reverse walk of the
// reachable nodes is a valid backward schedule.
struct TensorNode {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad;      // empty until the backward pass reaches it
    bool requires_grad = false;   // leaf whose grad must be retained
    bool needs_grad = false;      // this node or an ancestor requires grad
    bool backward_done = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void accumulate(std::span<const float> g);
    std::vector<float>& grad_buffer();   // allocate zeros on first touch
};

bool grad_enabled();
void set_grad_enabled(bool on);

} // namespace detail

// Disables graph recording for evaluation-only forwards (RAII, per thread).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

// Dense float32 tensor. Copies share storage (cheap handles); clone() makes
// an independent detached copy. A tensor created by an op keeps references
// to its inputs, which is the autodiff record consumed by backward().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);                       // zero-filled
    Tensor(Shape shape, std::vector<float> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, float v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
    int numel() const { return static_cast<int>(node_->value.size()); }

    std::span<const float> data() const { return node_->value; }
    std::span<float> data() { return node_->value; }
    float item() const;                                 // scalar tensors only

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool v = true);
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const float> grad() const;
    void zero_grad();                                   // drops the grad array

    Tensor clone() const;                               // deep copy, no graph

    std::shared_ptr<detail::TensorNode>& node() { return node_; }
    const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<detail::TensorNode> node_;
};

namespace detail {

// Factory every op goes through. Skips recording when no input needs grads
// or recording is disabled, so evaluation forwards build no graph. Ops that
// merely rearrange or select finite inputs pass check_finite = false; every
// value-creating op keeps the scan so NaN/Inf surfaces as an error at the
// op that produced it.
Tensor make_op(Shape shape, std::vector<float> value,
               std::vector<Tensor> inputs,
               std::function<void(TensorNode&)> backward_fn,
               const char* op_name, bool check_finite = true);

} // namespace detail

// ---- differentiable operations -------------------------------------------

// 2D cross-correlation with zero padding. x [B,Cin,H,W], w [Cout,Cin,k,k],
// b [Cout]; output [B,Cout,H+2p-k+1,W+2p-k+1].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int padding);

// 2x2 max pooling, stride 2. Gradient goes to the first max in row-major
// order on ties.
Tensor max_pool2d(const Tensor& x);

// Nearest-neighbour 2x upsampling.
Tensor upsample_nearest2d(const Tensor& x);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);          // same shape
Tensor mul(const Tensor& a, const Tensor& b);          // elementwise
Tensor scale(const Tensor& x, float c);
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape shape);
Tensor sum(const Tensor& x);                           // scalar

// Reverse-mode sweep from a scalar loss. Populates grad of every
// requires_grad ancestor exactly once; calling it again on the same loss
// is a state error.
void backward(const Tensor& loss);

// Max relative error between analytic gradients of f at theta and central
// finite differences, over n_coords sampled coordinates (at least 5).
float finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                        const Tensor& theta, float step,
                        int n_coords = 8, uint64_t seed = 12345);

} // namespace uwno
