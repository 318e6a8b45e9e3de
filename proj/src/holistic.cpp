#include "hud/holistic.hpp"

namespace hud {

TextGaussian modification_distribution(GraphParams& params, const ad::Var& f_m_h,
                                       const ad::Var& f_r_h, const RunConfig& cfg) {
    if (f_m_h.rows() != 1 || f_r_h.rows() != 1)
        throw std::runtime_error("modification_distribution: expects 1 x d_h vectors");
    ad::Var att_mu = cross_attention(params, "hol.att_mu", f_m_h, f_r_h, f_r_h);
    ad::Var att_sigma = cross_attention(params, "hol.att_sigma", f_m_h, f_r_h, f_r_h);

    ad::Var mu_in = ad::add(att_mu, f_m_h);
    ad::Var mu_lin = ad::add_row(ad::matmul(mu_in, params.get("hol.head_mu.w")),
                                 params.get("hol.head_mu.b"));
    TextGaussian g;
    g.mu = ad::layer_norm_rows(ad::sigmoid(mu_lin), params.get("hol.head_mu.ln.gain"),
                               params.get("hol.head_mu.ln.bias"), cfg.ln_eps);

    ad::Var sigma_in = ad::add(att_sigma, f_m_h);
    g.sigma = ad::add_row(ad::matmul(sigma_in, params.get("hol.head_sigma.w")),
                          params.get("hol.head_sigma.b"));
    return g;
}

ad::Var sample_modification(const TextGaussian& g, const Tensor2D& noise) {
    if (noise.cols != g.mu.cols())
        throw std::runtime_error("sample_modification: noise width mismatch");
    if (noise.rows < 1) throw std::runtime_error("sample_modification: no draws requested");
    int u = noise.rows;
    ad::Var eta = ad::constant(noise);
    ad::Var mu_rows = ad::repeat_rows(g.mu, u);
    ad::Var sigma_rows = ad::repeat_rows(g.sigma, u);
    return ad::add(ad::mul(sigma_rows, eta), mu_rows);
}

ad::Var composition_weights(GraphParams& params, const ad::Var& f_r_h,
                            const ad::Var& text_vec) {
    ad::Var joint = ad::concat_cols({f_r_h, text_vec});  // 1 x 2*d_h, [ref, text]
    ad::Var h = ad::add_row(ad::matmul(joint, params.get("hol.mix.w1")),
                            params.get("hol.mix.b1"));
    ad::Var out = ad::add_row(ad::matmul(h, params.get("hol.mix.w2")),
                              params.get("hol.mix.b2"));
    return ad::sigmoid(out);
}

ad::Var compose_pair(const ad::Var& weights, const ad::Var& text_vec, const ad::Var& f_r_h) {
    int d = text_vec.cols();
    if (weights.cols() != 2 * d)
        throw std::runtime_error("compose_pair: weight row must be 1 x 2*d_h");
    ad::Var w_alpha = ad::slice_cols(weights, 0, d);
    ad::Var w_beta = ad::slice_cols(weights, d, 2 * d);
    return ad::add(ad::mul(w_alpha, text_vec), ad::mul(w_beta, f_r_h));
}

ad::Var build_holistic_composed(GraphParams& params, const ad::Var& f_r_h,
                                const ad::Var& f_m_h, const ad::Var& samples,
                                bool additive) {
    std::vector<ad::Var> rows;
    auto compose_one = [&](const ad::Var& text_vec) {
        if (additive) return ad::add(text_vec, f_r_h);
        return compose_pair(composition_weights(params, f_r_h, text_vec), text_vec, f_r_h);
    };
    rows.push_back(compose_one(f_m_h));
    if (samples.defined()) {
        for (int u = 0; u < samples.rows(); ++u)
            rows.push_back(compose_one(ad::slice_rows(samples, u, u + 1)));
    }
    return rows.size() == 1 ? rows[0] : ad::concat_rows(rows);
}

}  // namespace hud
