#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "hud/tensor.hpp"

namespace hud::ad {

/// One node of the reverse-mode tape. Nodes own their forward value; the
/// gradient buffer is allocated lazily when backward() first touches it.
struct Node {
    Tensor2D value;
    Tensor2D grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // accumulates into parents' grads

    Tensor2D& grad_buffer() {
        if (grad.rows != value.rows || grad.cols != value.cols)
            grad = Tensor2D::zeros(value.rows, value.cols);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

/// Lightweight handle over a tape node. Copies share the node.
class Var {
  public:
    Var() = default;
    explicit Var(NodePtr n) : n_(std::move(n)) {}

    const Tensor2D& value() const { return n_->value; }
    const Tensor2D& grad() const { return n_->grad; }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    int rows() const { return n_->value.rows; }
    int cols() const { return n_->value.cols; }
    double scalar() const {
        if (rows() != 1 || cols() != 1) throw std::runtime_error("Var::scalar: not 1x1");
        return n_->value.data[0];
    }
    NodePtr node() const { return n_; }
    bool defined() const { return static_cast<bool>(n_); }

  private:
    NodePtr n_;
};

/// Non-trainable input.
Var constant(Tensor2D v);
/// Trainable leaf; gradients accumulate here during backward.
Var leaf(Tensor2D v);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double c);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
/// X (RxC) + b (1xC) broadcast over rows.
Var add_row(const Var& x, const Var& b);
Var sigmoid(const Var& a);
Var tanh_op(const Var& a);
Var exp_op(const Var& a);
Var log_op(const Var& a);  // errors on non-positive entries
Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
/// Per-row layer norm with learnable gain/bias (both 1xC).
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, double eps);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(const Var& a, int begin, int end);
Var slice_rows(const Var& a, int begin, int end);
Var repeat_rows(const Var& row, int n);
Var mean_over_rows(const Var& a);  // RxC -> 1xC
Var l2_normalize_rows(const Var& a);
/// KxM -> 1xK, entry i = max_j a(i,j). Gradient routes to the first argmax.
Var rowwise_max(const Var& a);
Var diag(const Var& a);  // KxK -> 1xK
Var sum_all(const Var& a);
Var mean_all(const Var& a);
/// Gather rows of `table` by index (embedding lookup).
Var gather_rows(const Var& table, const std::vector<int>& indices);
/// Assemble an RxC matrix from 1x1 cells, row-major order.
Var from_scalars(int rows, int cols, const std::vector<Var>& cells);

/// Reverse pass from a 1x1 root. Seeds the root gradient with 1 and
/// propagates through the tape in reverse topological order.
void backward(const Var& root);

}  // namespace hud::ad
