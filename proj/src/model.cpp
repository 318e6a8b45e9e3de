#include "hud/model.hpp"

#include <cmath>

namespace hud {

BatchNoise draw_batch_noise(RngStream rng, const RunConfig& cfg, int batch) {
    BatchNoise noise;
    int u = cfg.effective_u();
    int tokens = cfg.n_f * cfg.l_queries;
    for (int b = 0; b < batch; ++b) {
        Tensor2D nh(cfg.ablate_d3 ? 0 : u, cfg.d_h);
        for (auto& v : nh.data) v = rng.normal();
        noise.holistic.push_back(std::move(nh));
        bool needs_atom = !cfg.ablate_d6 && !cfg.ablate_d4;
        Tensor2D na(needs_atom ? tokens : 0, cfg.d_a);
        for (auto& v : na.data) v = rng.normal();
        noise.atomistic.push_back(std::move(na));
    }
    return noise;
}

Model::Model(const RunConfig& cfg, uint64_t seed)
    : cfg_(cfg), store_(init_params(cfg, seed)), mode_(similarity_mode_from(cfg.similarity_mode)) {}

Model::Model(const RunConfig& cfg, ParameterStore store)
    : cfg_(cfg), store_(std::move(store)), mode_(similarity_mode_from(cfg.similarity_mode)) {
    validate_config(cfg_);
}

Model::ComposedVars Model::compose_vars(GraphParams& p, const Triplet& t,
                                        const Tensor2D& noise_h,
                                        const Tensor2D& noise_a) const {
    EncoderOutput enc_r = encode_video(p, t.reference_tokens.frames, cfg_);
    EncoderOutput enc_m = encode_text(p, t.text_tokens, cfg_);

    ComposedVars out;
    if (!cfg_.ablate_d3) {
        ad::Var samples;
        if (cfg_.effective_u() > 0) {
            TextGaussian g = modification_distribution(p, enc_m.holistic, enc_r.holistic, cfg_);
            samples = sample_modification(g, noise_h);
        }
        out.h = build_holistic_composed(p, enc_r.holistic, enc_m.holistic, samples,
                                        cfg_.ablate_d2);
    }
    if (!cfg_.ablate_d6) {
        std::vector<int> padded = t.text_tokens;
        padded.resize(static_cast<size_t>(cfg_.l_text), kPadId);
        ad::Var text_embeds = embed_tokens(p, padded);
        ad::Var detail;
        if (cfg_.ablate_d4) {
            detail = enc_r.atomistic;
        } else {
            TokenGaussian g = reference_distribution(p, enc_r.atomistic, enc_m.atomistic, cfg_);
            detail = sample_detail_tokens(g, noise_a);
        }
        ad::Var detail_composed =
            compose_atomistic_uncertain(p, detail, text_embeds, cfg_, cfg_.ablate_d5);
        out.a = build_atomistic_composed(p, enc_r.atomistic, detail_composed, text_embeds,
                                         cfg_, cfg_.ablate_d5);
    }
    return out;
}

Model::ComposedVars Model::extend_vars(GraphParams& p, const VideoTokens& target) const {
    EncoderOutput enc_t = encode_video(p, target.frames, cfg_);
    ComposedVars out;
    if (!cfg_.ablate_d3)
        out.h = ad::repeat_rows(enc_t.holistic, 1 + cfg_.effective_u());
    if (!cfg_.ablate_d6) {
        ad::Var projected = project_tokens(p, enc_t.atomistic);
        out.a = ad::concat_rows({projected, projected});  // tiled twice along tokens
    }
    return out;
}

LossBreakdown Model::batch_loss(const std::vector<const Triplet*>& batch,
                                const BatchNoise& noise, bool with_grad) {
    int b = static_cast<int>(batch.size());
    if (b < 2) throw std::runtime_error("batch_loss: need at least two triplets");
    if (static_cast<int>(noise.holistic.size()) != b ||
        static_cast<int>(noise.atomistic.size()) != b)
        throw std::runtime_error("batch_loss: noise batch size mismatch");

    if (with_grad) store_.zero_grad();
    GraphParams p(store_, with_grad);
    bool use_bias = !cfg_.ablate_d7;

    std::vector<ad::Var> c_h(b), c_a(b), t_h_t(b), t_a_t(b);
    for (int i = 0; i < b; ++i) {
        ComposedVars c = compose_vars(p, *batch[i], noise.holistic[i], noise.atomistic[i]);
        ComposedVars t = extend_vars(p, batch[i]->target_tokens);
        if (c.h.defined()) {
            c_h[i] = ad::l2_normalize_rows(c.h);
            t_h_t[i] = ad::transpose(ad::l2_normalize_rows(t.h));
        }
        if (c.a.defined()) {
            c_a[i] = ad::l2_normalize_rows(c.a);
            t_a_t[i] = ad::transpose(ad::l2_normalize_rows(t.a));
        }
    }

    ad::Var h_mat, a_mat;
    if (!cfg_.ablate_d3) {
        ad::Var bias_h = p.get("align.bias_h");
        std::vector<ad::Var> cells;
        cells.reserve(static_cast<size_t>(b) * b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < b; ++j)
                cells.push_back(
                    hierarchical_similarity_ad(c_h[i], t_h_t[j], bias_h, mode_, use_bias));
        h_mat = ad::from_scalars(b, b, cells);
    }
    if (!cfg_.ablate_d6) {
        ad::Var bias_a = p.get("align.bias_a");
        std::vector<ad::Var> cells;
        cells.reserve(static_cast<size_t>(b) * b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < b; ++j)
                cells.push_back(
                    hierarchical_similarity_ad(c_a[i], t_a_t[j], bias_a, mode_, use_bias));
        a_mat = ad::from_scalars(b, b, cells);
    }

    double kappa = effective_kappa();
    bool both = h_mat.defined() && a_mat.defined();
    ad::Var objective;
    if (cfg_.ablate_d9) {
        if (!both) throw std::runtime_error("batch_loss: d9 requires both levels");
        objective = ad::scale(distribution_regularization_ad(h_mat, a_mat, cfg_.tau), kappa);
    } else {
        objective = rank_loss_ad(h_mat, a_mat, cfg_.tau);
        if (kappa != 0.0 && both) {
            objective = ad::add(
                objective,
                ad::scale(distribution_regularization_ad(h_mat, a_mat, cfg_.tau), kappa));
        }
    }

    if (with_grad) {
        ad::backward(objective);
        p.flush();
    }

    LossBreakdown out;
    out.total = objective.scalar();
    if (h_mat.defined()) out.sims.holistic = h_mat.value();
    if (a_mat.defined()) out.sims.atomistic = a_mat.value();
    out.rank = rank_loss(out.sims, cfg_.tau);
    out.kl = both ? distribution_regularization(out.sims, cfg_.tau) : 0.0;
    return out;
}

Model::Composed Model::compose_query(const Triplet& t, int query_index) const {
    RngStream rng = RngStream(cfg_.seed).derive(fnv1a64("eval", 4),
                                                static_cast<uint64_t>(query_index));
    BatchNoise noise = draw_batch_noise(rng, cfg_, 1);
    // parameters enter the graph as constants here; nothing is written back
    GraphParams p(const_cast<ParameterStore&>(store_), false);
    ComposedVars v = compose_vars(p, t, noise.holistic[0], noise.atomistic[0]);
    Composed out;
    if (v.h.defined()) out.holistic = hud::l2_normalize_rows(v.h.value());
    if (v.a.defined()) out.atomistic = hud::l2_normalize_rows(v.a.value());
    return out;
}

Model::Composed Model::extend_target(const VideoTokens& target) const {
    GraphParams p(const_cast<ParameterStore&>(store_), false);
    ComposedVars v = extend_vars(p, target);
    Composed out;
    if (v.h.defined()) out.holistic = hud::l2_normalize_rows(v.h.value());
    if (v.a.defined()) out.atomistic = hud::l2_normalize_rows(v.a.value());
    return out;
}

double Model::pair_score(const Composed& query, const Composed& target) const {
    bool use_bias = !cfg_.ablate_d7;
    double score = 0.0;
    if (query.holistic.rows > 0)
        score += hierarchical_similarity(query.holistic, target.holistic,
                                         store_.entry("align.bias_h").value, mode_, use_bias);
    if (query.atomistic.rows > 0)
        score += hierarchical_similarity(query.atomistic, target.atomistic,
                                         store_.entry("align.bias_a").value, mode_, use_bias);
    return score;
}

}  // namespace hud
