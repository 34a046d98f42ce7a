#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/rng.hpp"

namespace stnav {
namespace ad {

struct TensorImpl;

// Dense row-major 64-bit-float tensor participating in a define-by-run
// reverse-mode tape. Value-semantic handle; copies share storage.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<long> shape, bool requires_grad = false);
    static Tensor full(std::vector<long> shape, double value,
                       bool requires_grad = false);
    static Tensor from_data(std::vector<long> shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor uniform(std::vector<long> shape, double lo, double hi,
                          Rng& rng, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<long>& shape() const;
    long numel() const;
    long dim(int i) const;
    int rank() const;

    double* data();
    const double* data() const;
    double value(long flat_index = 0) const;
    double scalar() const;  // requires numel() == 1

    bool requires_grad() const;
    void set_requires_grad(bool v);
    bool has_grad() const;
    double* grad_data();
    const double* grad_data() const;
    void zero_grad();

    Tensor detach() const;  // shares data, drops tape linkage and grad
    Tensor clone() const;   // deep copy of data (no tape linkage)

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

private:
    std::shared_ptr<TensorImpl> impl_;
};

// --- differentiable operations -------------------------------------------

// 2D x 2D or batched 3D x 3D (equal batch) matrix product.
Tensor matmul(const Tensor& a, const Tensor& b);
// Cross-correlation over the last axis: x [C_in, L], w [C_out, C_in, K].
Tensor conv1d(const Tensor& x, const Tensor& w, long stride);
// Softmax over the last axis with max subtraction.
Tensor softmax(const Tensor& x);
// Normalization over the last axis, then elementwise affine by gain/offset.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& offset,
                  double eps = 1e-5);
// Inverted dropout; identity when !training or p == 0.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
// x [R, C] plus a length-C row vector broadcast over rows.
Tensor add_rowvec(const Tensor& x, const Tensor& bias);
Tensor scale(const Tensor& x, double c);
Tensor concat0(const std::vector<Tensor>& parts);  // along axis 0
Tensor reshape(const Tensor& x, std::vector<long> shape);
Tensor transpose2d(const Tensor& x);
// Swap the last two axes of a 2D or 3D tensor.
Tensor transpose_last2(const Tensor& x);
// [P, D] -> [h, P, D/h] head split and its inverse.
Tensor split_heads(const Tensor& x, long heads);
Tensor merge_heads(const Tensor& x);
Tensor mse_loss(const Tensor& a, const Tensor& b);  // scalar mean((a-b)^2)
Tensor sum(const Tensor& x);                        // scalar

// Reverse traversal from a scalar loss; accumulates gradients into every
// tensor with requires_grad on the tape, then frees the tape.
void backward(const Tensor& loss);

// Suspends tape recording on this thread for its lifetime (inference,
// validation passes).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

std::string shape_string(const std::vector<long>& shape);

}  // namespace ad
}  // namespace stnav
