#include "hud/alignment.hpp"

#include <cmath>
#include <limits>

namespace hud {

SimilarityMode similarity_mode_from(const std::string& name) {
    if (name == "max") return SimilarityMode::kMaxOverTarget;
    if (name == "matched") return SimilarityMode::kMatchedIndex;
    throw std::runtime_error("alignment: unknown similarity_mode '" + name + "'");
}

Tensor2D token_scores(const Tensor2D& c, const Tensor2D& t, SimilarityMode mode) {
    check_same_shape(c, t, "token_scores");
    int k = c.rows;
    Tensor2D s(1, k);
    for (int i = 0; i < k; ++i) {
        if (mode == SimilarityMode::kMatchedIndex) {
            double dot = 0.0;
            for (int d = 0; d < c.cols; ++d) dot += c.at(i, d) * t.at(i, d);
            s.at(0, i) = dot;
        } else {
            double best = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < k; ++j) {
                double dot = 0.0;
                for (int d = 0; d < c.cols; ++d) dot += c.at(i, d) * t.at(j, d);
                if (dot > best) best = dot;
            }
            s.at(0, i) = best;
        }
    }
    return s;
}

Tensor2D similarity_bias(const Tensor2D& scores, const Tensor2D& bias, bool use_bias) {
    if (scores.rows != 1) throw std::runtime_error("similarity_bias: scores must be 1 x K");
    Tensor2D w = softmax_rows(scores);
    if (use_bias) {
        check_same_shape(w, bias, "similarity_bias");
        for (size_t i = 0; i < w.size(); ++i) w.data[i] += bias.data[i];
    }
    return w;
}

double hierarchical_similarity(const Tensor2D& c, const Tensor2D& t, const Tensor2D& bias,
                               SimilarityMode mode, bool use_bias) {
    Tensor2D s = token_scores(c, t, mode);
    Tensor2D w = similarity_bias(s, bias, use_bias);
    double out = 0.0;
    for (size_t i = 0; i < s.size(); ++i) out += w.data[i] * s.data[i];
    return out;
}

namespace {

const Tensor2D& combined_logits(const BatchSims& sims, Tensor2D& scratch) {
    if (sims.has_holistic() && sims.has_atomistic()) {
        check_same_shape(sims.holistic, sims.atomistic, "rank_loss");
        scratch = sims.holistic;
        for (size_t i = 0; i < scratch.size(); ++i)
            scratch.data[i] += sims.atomistic.data[i];
        return scratch;
    }
    if (sims.has_holistic()) return sims.holistic;
    if (sims.has_atomistic()) return sims.atomistic;
    throw std::runtime_error("rank_loss: no similarity level present");
}

}  // namespace

double rank_loss(const BatchSims& sims, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("rank_loss: tau must be positive");
    Tensor2D scratch;
    const Tensor2D& m = combined_logits(sims, scratch);
    if (m.rows != m.cols) throw std::runtime_error("rank_loss: matrix must be square");
    Tensor2D scaled = m;
    for (auto& v : scaled.data) v /= tau;
    Tensor2D ls = log_softmax_rows(scaled);
    double acc = 0.0;
    for (int i = 0; i < ls.rows; ++i) acc += ls.at(i, i);
    return -acc / ls.rows;
}

Tensor2D similarity_degree_distribution(const Tensor2D& sims, int i, double tau,
                                        bool target_side) {
    if (tau <= 0.0)
        throw std::invalid_argument("similarity_degree_distribution: tau must be positive");
    if (i < 0 || i >= (target_side ? sims.cols : sims.rows))
        throw std::runtime_error("similarity_degree_distribution: index out of range");
    int n = target_side ? sims.rows : sims.cols;
    Tensor2D row(1, n);
    for (int j = 0; j < n; ++j)
        row.at(0, j) = (target_side ? sims.at(j, i) : sims.at(i, j)) / tau;
    return softmax_rows(row);
}

double distribution_regularization(const BatchSims& sims, double tau) {
    if (!sims.has_holistic() || !sims.has_atomistic())
        throw std::runtime_error("distribution_regularization: needs both levels");
    check_same_shape(sims.holistic, sims.atomistic, "distribution_regularization");
    if (sims.holistic.rows != sims.holistic.cols)
        throw std::runtime_error("distribution_regularization: matrices must be square");
    int b = sims.holistic.rows;
    double acc = 0.0;
    for (int i = 0; i < b; ++i) {
        Tensor2D s_a_t = similarity_degree_distribution(sims.atomistic, i, tau, true);
        Tensor2D s_h_c = similarity_degree_distribution(sims.holistic, i, tau, false);
        Tensor2D s_h_t = similarity_degree_distribution(sims.holistic, i, tau, true);
        Tensor2D s_a_c = similarity_degree_distribution(sims.atomistic, i, tau, false);
        acc += kl_categorical(s_a_t, s_h_c) + kl_categorical(s_h_t, s_a_c);
    }
    return acc / (2.0 * b);
}

double total_loss(const BatchSims& sims, double tau, double kappa) {
    double loss = rank_loss(sims, tau);
    if (kappa != 0.0 && sims.has_holistic() && sims.has_atomistic())
        loss += kappa * distribution_regularization(sims, tau);
    return loss;
}

ad::Var token_scores_ad(const ad::Var& c_norm, const ad::Var& t_norm_t, SimilarityMode mode) {
    ad::Var m = ad::matmul(c_norm, t_norm_t);
    if (mode == SimilarityMode::kMatchedIndex) return ad::diag(m);
    return ad::rowwise_max(m);
}

ad::Var hierarchical_similarity_ad(const ad::Var& c_norm, const ad::Var& t_norm_t,
                                   const ad::Var& bias, SimilarityMode mode, bool use_bias) {
    ad::Var s = token_scores_ad(c_norm, t_norm_t, mode);
    ad::Var w = ad::softmax_rows(s);
    if (use_bias) w = ad::add(w, bias);
    return ad::sum_all(ad::mul(w, s));
}

ad::Var rank_loss_ad(const ad::Var& h, const ad::Var& a, double tau) {
    ad::Var combined;
    if (h.defined() && a.defined())
        combined = ad::add(h, a);
    else if (h.defined())
        combined = h;
    else if (a.defined())
        combined = a;
    else
        throw std::runtime_error("rank_loss_ad: no similarity level present");
    ad::Var ls = ad::log_softmax_rows(ad::scale(combined, 1.0 / tau));
    return ad::scale(ad::mean_all(ad::diag(ls)), -1.0);
}

ad::Var distribution_regularization_ad(const ad::Var& h, const ad::Var& a, double tau) {
    if (!h.defined() || !a.defined())
        throw std::runtime_error("distribution_regularization_ad: needs both levels");
    int b = h.rows();
    ad::Var lc_h = ad::log_softmax_rows(ad::scale(h, 1.0 / tau));
    ad::Var lt_h = ad::log_softmax_rows(ad::scale(ad::transpose(h), 1.0 / tau));
    ad::Var lc_a = ad::log_softmax_rows(ad::scale(a, 1.0 / tau));
    ad::Var lt_a = ad::log_softmax_rows(ad::scale(ad::transpose(a), 1.0 / tau));
    ad::Var term1 = ad::sum_all(ad::mul(ad::exp_op(lt_a), ad::sub(lt_a, lc_h)));
    ad::Var term2 = ad::sum_all(ad::mul(ad::exp_op(lt_h), ad::sub(lt_h, lc_a)));
    return ad::scale(ad::add(term1, term2), 1.0 / (2.0 * b));
}

}  // namespace hud
