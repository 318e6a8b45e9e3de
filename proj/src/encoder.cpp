#include "hud/encoder.hpp"

#include <cmath>

namespace hud {

namespace {

void init_matrix(Tensor2D& t, RngStream s, double scale) {
    for (auto& v : t.data) v = scale * s.normal();
}

ad::Var mlp(GraphParams& p, const std::string& prefix, const ad::Var& x) {
    ad::Var h = ad::tanh_op(ad::add_row(ad::matmul(x, p.get(prefix + ".w1")),
                                        p.get(prefix + ".b1")));
    return ad::add_row(ad::matmul(h, p.get(prefix + ".w2")), p.get(prefix + ".b2"));
}

ad::Var layer_norm(GraphParams& p, const std::string& prefix, const ad::Var& x,
                   double ln_eps) {
    return ad::layer_norm_rows(x, p.get(prefix + ".gain"), p.get(prefix + ".bias"), ln_eps);
}

void create_attention(ParameterStore& store, const std::string& prefix, int dim,
                      uint64_t seed, double scale) {
    for (const char* w : {".wq", ".wk", ".wv"}) {
        Tensor2D& t = store.create(prefix + w, dim, dim);
        init_matrix(t, RngStream(seed).derive(fnv1a64(prefix.data(), prefix.size()),
                                              fnv1a64(w, 3)),
                    scale);
    }
}

void create_block(ParameterStore& store, const std::string& prefix, int dim, uint64_t seed) {
    double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    create_attention(store, prefix + ".self", dim, seed, scale);
    create_attention(store, prefix + ".cross", dim, seed, scale);
    int hidden = 2 * dim;
    auto name_seed = [&](const std::string& n) {
        return RngStream(seed).derive(fnv1a64(n.data(), n.size()), 17);
    };
    Tensor2D& w1 = store.create(prefix + ".mlp.w1", dim, hidden);
    init_matrix(w1, name_seed(prefix + ".mlp.w1"), scale);
    store.create(prefix + ".mlp.b1", 1, hidden);
    Tensor2D& w2 = store.create(prefix + ".mlp.w2", hidden, dim);
    init_matrix(w2, name_seed(prefix + ".mlp.w2"), 1.0 / std::sqrt(static_cast<double>(hidden)));
    store.create(prefix + ".mlp.b2", 1, dim);
    for (const char* ln : {".ln1", ".ln2", ".ln3"}) {
        Tensor2D& gain = store.create(prefix + ln + ".gain", 1, dim);
        std::fill(gain.data.begin(), gain.data.end(), 1.0);
        store.create(prefix + ln + ".bias", 1, dim);
    }
}

}  // namespace

ad::Var cross_attention(GraphParams& params, const std::string& prefix, const ad::Var& q,
                        const ad::Var& k, const ad::Var& v) {
    if (k.rows() != v.rows())
        throw std::runtime_error("cross_attention: key/value row counts differ");
    ad::Var qp = ad::matmul(q, params.get(prefix + ".wq"));
    ad::Var kp = ad::matmul(k, params.get(prefix + ".wk"));
    ad::Var vp = ad::matmul(v, params.get(prefix + ".wv"));
    double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qp.cols()));
    ad::Var scores = ad::scale(ad::matmul(qp, ad::transpose(kp)), inv_sqrt_d);
    return ad::matmul(ad::softmax_rows(scores), vp);
}

ad::Var qformer_block(GraphParams& params, const std::string& prefix, const ad::Var& queries,
                      const ad::Var& context, double ln_eps, bool self_attention) {
    ad::Var x = queries;
    if (self_attention) {
        ad::Var sa = cross_attention(params, prefix + ".self", x, x, x);
        x = layer_norm(params, prefix + ".ln1", ad::add(x, sa), ln_eps);
    }
    ad::Var ca = cross_attention(params, prefix + ".cross", x, context, context);
    x = layer_norm(params, prefix + ".ln2", ad::add(x, ca), ln_eps);
    ad::Var m = mlp(params, prefix + ".mlp", x);
    return layer_norm(params, prefix + ".ln3", ad::add(x, m), ln_eps);
}

ad::Var pool_project(GraphParams& params, const ad::Var& tokens) {
    return ad::matmul(ad::mean_over_rows(tokens), params.get("pool.proj"));
}

ad::Var embed_tokens(GraphParams& params, const std::vector<int>& ids) {
    if (ids.empty()) throw std::runtime_error("embed_tokens: empty sequence");
    return ad::gather_rows(params.get("embed.table"), ids);
}

EncoderOutput encode_video(GraphParams& params, const std::vector<std::vector<int>>& frames,
                           const RunConfig& cfg) {
    if (static_cast<int>(frames.size()) != cfg.n_f)
        throw std::runtime_error("encode_video: expected " + std::to_string(cfg.n_f) +
                                 " frames, got " + std::to_string(frames.size()));
    std::vector<ad::Var> per_frame;
    per_frame.reserve(frames.size());
    for (const auto& frame : frames) {
        ad::Var ctx = embed_tokens(params, frame);
        per_frame.push_back(
            qformer_block(params, "qformer", params.get("qformer.queries"), ctx, cfg.ln_eps));
    }
    EncoderOutput out;
    out.atomistic = per_frame.size() == 1 ? per_frame[0] : ad::concat_rows(per_frame);
    out.holistic = pool_project(params, out.atomistic);
    return out;
}

EncoderOutput encode_text(GraphParams& params, const std::vector<int>& ids,
                          const RunConfig& cfg) {
    if (static_cast<int>(ids.size()) > cfg.l_text)
        throw std::runtime_error("encode_text: sequence longer than l_text");
    std::vector<int> padded = ids;
    padded.resize(cfg.l_text, 0);  // 0 is the padding symbol
    ad::Var seq = embed_tokens(params, padded);
    EncoderOutput out;
    out.atomistic = qformer_block(params, "qformer", seq, seq, cfg.ln_eps);
    out.holistic = pool_project(params, out.atomistic);
    return out;
}

ParameterStore init_params(const RunConfig& cfg, uint64_t seed) {
    validate_config(cfg);
    ParameterStore store;
    store.rng = RngStream(seed);

    auto stream_for = [seed](const std::string& name) {
        return RngStream(seed).derive(fnv1a64(name.data(), name.size()), 0x5eed);
    };

    Tensor2D& table = store.create("embed.table", cfg.vocab_size, cfg.d_a);
    init_matrix(table, stream_for("embed.table"), 1.0);

    create_block(store, "qformer", cfg.d_a, seed);
    Tensor2D& queries = store.create("qformer.queries", cfg.l_queries, cfg.d_a);
    init_matrix(queries, stream_for("qformer.queries"), 1.0);
    if (cfg.separate_composer_qformer) create_block(store, "composer", cfg.d_a, seed ^ 0x9e37);

    Tensor2D& pool = store.create("pool.proj", cfg.d_a, cfg.d_h);
    init_matrix(pool, stream_for("pool.proj"), 1.0 / std::sqrt(static_cast<double>(cfg.d_a)));

    double sh = 1.0 / std::sqrt(static_cast<double>(cfg.d_h));
    create_attention(store, "hol.att_mu", cfg.d_h, seed, sh);
    create_attention(store, "hol.att_sigma", cfg.d_h, seed ^ 1, sh);
    Tensor2D& hmw = store.create("hol.head_mu.w", cfg.d_h, cfg.d_h);
    init_matrix(hmw, stream_for("hol.head_mu.w"), sh);
    store.create("hol.head_mu.b", 1, cfg.d_h);
    Tensor2D& hmg = store.create("hol.head_mu.ln.gain", 1, cfg.d_h);
    std::fill(hmg.data.begin(), hmg.data.end(), 1.0);
    store.create("hol.head_mu.ln.bias", 1, cfg.d_h);
    store.create("hol.head_sigma.w", cfg.d_h, cfg.d_h);  // zero: start deterministic
    store.create("hol.head_sigma.b", 1, cfg.d_h);
    int dh2 = 2 * cfg.d_h;
    Tensor2D& mw1 = store.create("hol.mix.w1", dh2, dh2);
    init_matrix(mw1, stream_for("hol.mix.w1"), 1.0 / std::sqrt(static_cast<double>(dh2)));
    store.create("hol.mix.b1", 1, dh2);
    Tensor2D& mw2 = store.create("hol.mix.w2", dh2, dh2);
    init_matrix(mw2, stream_for("hol.mix.w2"), 1.0 / std::sqrt(static_cast<double>(dh2)));
    store.create("hol.mix.b2", 1, dh2);

    double sa = 1.0 / std::sqrt(static_cast<double>(cfg.d_a));
    create_attention(store, "atom.att_mu", cfg.d_a, seed ^ 2, sa);
    create_attention(store, "atom.att_sigma", cfg.d_a, seed ^ 3, sa);
    Tensor2D& amw = store.create("atom.head_mu.w", cfg.d_a, cfg.d_a);
    init_matrix(amw, stream_for("atom.head_mu.w"), sa);
    store.create("atom.head_mu.b", 1, cfg.d_a);
    Tensor2D& amg = store.create("atom.head_mu.ln.gain", 1, cfg.d_a);
    std::fill(amg.data.begin(), amg.data.end(), 1.0);
    store.create("atom.head_mu.ln.bias", 1, cfg.d_a);
    store.create("atom.head_sigma.w", cfg.d_a, cfg.d_a);  // zero: start deterministic
    store.create("atom.head_sigma.b", 1, cfg.d_a);
    Tensor2D& aproj = store.create("atom.proj", cfg.d_a, cfg.d_h);
    init_matrix(aproj, stream_for("atom.proj"), sa);

    store.create("align.bias_h", 1, 1 + cfg.effective_u());
    store.create("align.bias_a", 1, cfg.n_f * 2 * cfg.l_queries);
    return store;
}

std::vector<std::string> frozen_params(const RunConfig& cfg) {
    std::vector<std::string> out;
    if (cfg.freeze_embeddings) out.push_back("embed.table");
    return out;
}

}  // namespace hud
