#include "hud/atomistic.hpp"

namespace hud {

namespace {

const char* composer_prefix(const RunConfig& cfg) {
    return cfg.separate_composer_qformer ? "composer" : "qformer";
}

ad::Var additive_compose(const ad::Var& queries, const ad::Var& context) {
    return ad::add(queries, ad::repeat_rows(ad::mean_over_rows(context), queries.rows()));
}

}  // namespace

TokenGaussian reference_distribution(GraphParams& params, const ad::Var& f_r_a,
                                     const ad::Var& f_m_a, const RunConfig& cfg) {
    if (f_r_a.cols() != cfg.d_a || f_m_a.cols() != cfg.d_a)
        throw std::runtime_error("reference_distribution: token width must be d_a");
    ad::Var att_mu = cross_attention(params, "atom.att_mu", f_r_a, f_m_a, f_m_a);
    ad::Var att_sigma = cross_attention(params, "atom.att_sigma", f_r_a, f_m_a, f_m_a);

    ad::Var mu_in = ad::add(att_mu, f_r_a);
    ad::Var mu_lin = ad::add_row(ad::matmul(mu_in, params.get("atom.head_mu.w")),
                                 params.get("atom.head_mu.b"));
    TokenGaussian g;
    g.mu = ad::layer_norm_rows(ad::sigmoid(mu_lin), params.get("atom.head_mu.ln.gain"),
                               params.get("atom.head_mu.ln.bias"), cfg.ln_eps);

    ad::Var sigma_in = ad::add(att_sigma, f_r_a);
    g.sigma = ad::add_row(ad::matmul(sigma_in, params.get("atom.head_sigma.w")),
                          params.get("atom.head_sigma.b"));
    return g;
}

ad::Var sample_detail_tokens(const TokenGaussian& g, const Tensor2D& noise) {
    if (noise.rows != g.mu.rows() || noise.cols != g.mu.cols())
        throw std::runtime_error("sample_detail_tokens: noise shape mismatch");
    ad::Var eta = ad::constant(noise);
    return ad::add(ad::mul(g.sigma, eta), g.mu);
}

ad::Var compose_atomistic_uncertain(GraphParams& params, const ad::Var& detail,
                                    const ad::Var& text_embeds, const RunConfig& cfg,
                                    bool additive) {
    if (additive) return additive_compose(detail, text_embeds);
    return qformer_block(params, composer_prefix(cfg), detail, text_embeds, cfg.ln_eps);
}

ad::Var build_atomistic_composed(GraphParams& params, const ad::Var& f_r_a,
                                 const ad::Var& detail_composed, const ad::Var& text_embeds,
                                 const RunConfig& cfg, bool additive) {
    ad::Var original =
        additive ? additive_compose(f_r_a, text_embeds)
                 : qformer_block(params, composer_prefix(cfg), f_r_a, text_embeds, cfg.ln_eps);
    // original block first, sampled block second
    ad::Var joint = ad::concat_rows({original, detail_composed});
    return project_tokens(params, joint);
}

ad::Var project_tokens(GraphParams& params, const ad::Var& tokens) {
    return ad::matmul(tokens, params.get("atom.proj"));
}

}  // namespace hud
