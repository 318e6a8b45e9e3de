#include "hud/tensor.hpp"

#include <cmath>

namespace hud {

bool all_finite(const Tensor2D& t) {
    for (double v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols != b.rows)
        throw std::runtime_error("matmul: inner dimensions disagree (" + std::to_string(a.cols) +
                                 " vs " + std::to_string(b.rows) + ")");
    Tensor2D out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            double av = a.at(i, k);
            if (av == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) out.at(i, j) += av * b.at(k, j);
        }
    }
    return out;
}

Tensor2D transpose(const Tensor2D& a) {
    Tensor2D out(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor2D softmax_rows(const Tensor2D& x) {
    if (!all_finite(x)) throw std::runtime_error("softmax_rows: non-finite input");
    Tensor2D out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double m = x.at(i, 0);
        for (int j = 1; j < x.cols; ++j) m = std::max(m, x.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < x.cols; ++j) {
            double e = std::exp(x.at(i, j) - m);
            out.at(i, j) = e;
            sum += e;
        }
        for (int j = 0; j < x.cols; ++j) out.at(i, j) /= sum;
    }
    return out;
}

Tensor2D log_softmax_rows(const Tensor2D& x) {
    if (!all_finite(x)) throw std::runtime_error("log_softmax_rows: non-finite input");
    Tensor2D out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double m = x.at(i, 0);
        for (int j = 1; j < x.cols; ++j) m = std::max(m, x.at(i, j));
        double sum = 0.0;
        for (int j = 0; j < x.cols; ++j) sum += std::exp(x.at(i, j) - m);
        double lse = m + std::log(sum);
        for (int j = 0; j < x.cols; ++j) out.at(i, j) = x.at(i, j) - lse;
    }
    return out;
}

Tensor2D l2_normalize_rows(const Tensor2D& x) {
    Tensor2D out(x.rows, x.cols);
    for (int i = 0; i < x.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < x.cols; ++j) s += x.at(i, j) * x.at(i, j);
        double n = std::sqrt(s);
        if (n < 1e-300) throw std::runtime_error("l2_normalize_rows: zero row");
        for (int j = 0; j < x.cols; ++j) out.at(i, j) = x.at(i, j) / n;
    }
    return out;
}

double kl_categorical(const Tensor2D& p, const Tensor2D& q) {
    check_same_shape(p, q, "kl_categorical");
    if (p.rows != 1) throw std::runtime_error("kl_categorical: expects 1xN rows");
    double sp = 0.0, sq = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p.data[i] < 0.0 || q.data[i] < 0.0)
            throw std::runtime_error("kl_categorical: negative probability");
        sp += p.data[i];
        sq += q.data[i];
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw std::runtime_error("kl_categorical: inputs must sum to 1 within 1e-9");
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        if (p.data[i] == 0.0) continue;  // 0 * log(0/q) = 0
        if (q.data[i] == 0.0)
            throw std::runtime_error("kl_categorical: q has zero mass where p does not");
        kl += p.data[i] * (std::log(p.data[i]) - std::log(q.data[i]));
    }
    return kl;
}

}  // namespace hud
