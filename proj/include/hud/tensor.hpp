#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hud {

/// Dense row-major matrix of doubles. The one value type everything else
/// builds on; vectors are 1xN or Nx1 tensors.
struct Tensor2D {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Tensor2D() = default;
    Tensor2D(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("tensor: negative dimension");
    }
    Tensor2D(int r, int c, std::vector<double> v) : rows(r), cols(c), data(std::move(v)) {
        if (r < 0 || c < 0) throw std::invalid_argument("tensor: negative dimension");
        if (data.size() != static_cast<size_t>(r) * c)
            throw std::invalid_argument("tensor: data size does not match shape");
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor2D& o) const { return rows == o.rows && cols == o.cols; }

    static Tensor2D zeros(int r, int c) { return Tensor2D(r, c); }
    static Tensor2D full(int r, int c, double v) {
        Tensor2D t(r, c);
        for (auto& x : t.data) x = v;
        return t;
    }
    static Tensor2D row(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Tensor2D(1, n, std::move(v));
    }
};

inline void check_same_shape(const Tensor2D& a, const Tensor2D& b, const char* op) {
    if (!a.same_shape(b))
        throw std::runtime_error(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) +
                                 "x" + std::to_string(a.cols) + " vs " + std::to_string(b.rows) +
                                 "x" + std::to_string(b.cols) + ")");
}

bool all_finite(const Tensor2D& t);

/// Plain (non-differentiable) matrix helpers shared by oracles-facing code
/// and the evaluation fast path.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
Tensor2D transpose(const Tensor2D& a);
Tensor2D softmax_rows(const Tensor2D& x);
Tensor2D log_softmax_rows(const Tensor2D& x);
Tensor2D l2_normalize_rows(const Tensor2D& x);

/// KL(p || q) for two categorical distributions given as 1xN rows.
/// Preconditions: both sum to 1 within 1e-9, q_i > 0 wherever p_i > 0.
double kl_categorical(const Tensor2D& p, const Tensor2D& q);

}  // namespace hud
