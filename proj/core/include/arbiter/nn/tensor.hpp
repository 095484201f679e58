#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace arbiter::nn {

/// Dense row-major matrix of doubles. Vectors are 1 x n or n x 1.
struct TensorData {
    long rows = 0;
    long cols = 0;
    std::vector<double> v;

    TensorData() = default;
    TensorData(long r, long c) : rows(r), cols(c), v(static_cast<std::size_t>(r * c), 0.0) {}

    static TensorData zeros(long r, long c) { return TensorData(r, c); }
    static TensorData full(long r, long c, double value) {
        TensorData t(r, c);
        std::fill(t.v.begin(), t.v.end(), value);
        return t;
    }

    long size() const { return rows * cols; }
    double& at(long r, long c) { return v[static_cast<std::size_t>(r * cols + c)]; }
    double at(long r, long c) const { return v[static_cast<std::size_t>(r * cols + c)]; }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
    bool same_shape(const TensorData& o) const { return rows == o.rows && cols == o.cols; }
};

struct Param;

/**
 * One node of the backward tape. Holds the forward value, the gradient of
 * the final scalar w.r.t. this value, edges to the inputs, and a closure
 * that pushes this node's gradient into its parents.
 */
struct Node {
    TensorData val;
    TensorData grad; // sized on first accumulation
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;
    Param* bound = nullptr; // set on leaves created from trainable parameters
    bool requires_grad = false;

    void ensure_grad() {
        if (grad.rows != val.rows || grad.cols != val.cols) {
            grad = TensorData::zeros(val.rows, val.cols);
        }
    }
};

/// Value-semantics handle to a tape node.
class Variable {
public:
    Variable() = default;
    explicit Variable(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    bool defined() const { return node_ != nullptr; }
    const TensorData& value() const { return node_->val; }
    const TensorData& grad() const { return node_->grad; }
    long rows() const { return node_->val.rows; }
    long cols() const { return node_->val.cols; }
    double scalar() const { return node_->val.v.at(0); }
    bool requires_grad() const { return node_->requires_grad; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// Thread-local gradient recording switch (on by default).
bool grad_enabled();

/// RAII scope that disables tape recording, e.g. for inference/validation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Variable constant(TensorData data);
Variable make_leaf(TensorData data, bool requires_grad, Param* bound = nullptr);

// Elementwise and broadcast arithmetic.
Variable add(const Variable& a, const Variable& b);
Variable sub(const Variable& a, const Variable& b);
Variable mul(const Variable& a, const Variable& b);
Variable scale(const Variable& a, double s);
Variable add_scalar(const Variable& a, double s);
Variable add_row(const Variable& a, const Variable& row); // (T x D) + (1 x D)

// Linear algebra.
Variable matmul(const Variable& a, const Variable& b);
Variable transpose(const Variable& a);

// Nonlinearities and reductions.
Variable relu(const Variable& a);
Variable abs_val(const Variable& a); // subgradient 0 at 0
Variable log_clamped(const Variable& a, double floor);
Variable softmax_rows(const Variable& a);
Variable sum_all(const Variable& a);
Variable mean_all(const Variable& a);

// Shape surgery.
Variable concat_rows(const std::vector<Variable>& parts);
Variable concat_cols(const std::vector<Variable>& parts);
Variable slice_rows(const Variable& a, long r0, long r1);
Variable slice_cols(const Variable& a, long c0, long c1);
Variable pick(const Variable& a, long r, long c); // 1 x 1

// Row-wise L2 normalization with norm floor 1e-12.
Variable normalize_rows(const Variable& a);

// Normalization layers.
Variable layer_norm(const Variable& x, const Variable& gamma, const Variable& beta, double eps);

/// Batch norm over the time axis of a (T x C) input. Statistics come from
/// the current sequence in both modes (one sequence per forward makes this
/// normalization over time); training mode additionally updates the running
/// buffers, which are checkpointed as diagnostics.
Variable batch_norm_time(const Variable& x, const Variable& gamma, const Variable& beta,
                         double eps, bool training, TensorData* running_mean,
                         TensorData* running_var, double momentum);

/// 1-D convolution along rows with "same" padding: input (T x Cin),
/// weight ((k*Cin) x Cout) with column index j*Cin + c, bias (1 x Cout).
/// Output is (ceil(T / stride) x Cout).
Variable conv1d_same(const Variable& x, const Variable& w, const Variable& b,
                     int kernel, int stride);

/// Reverse-mode sweep from a scalar root. Accumulates leaf gradients into
/// their bound Params and clears the leaf grads, so repeated backward calls
/// within one optimizer step add up in the Param storage.
void backward(const Variable& root);

/// Fixed sinusoidal positional encodings, (length x dim).
TensorData sinusoidal_positions(long length, long dim);

} // namespace arbiter::nn
