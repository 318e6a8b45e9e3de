#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hud/alignment.hpp"
#include "hud/rng.hpp"
#include "test_util.hpp"

using namespace hud;

// Everything in this namespace is a deliberately naive re-implementation of
// the scoring pipeline: plain loops, no shared helpers, no shift tricks.
// The production code has to agree with these on random instances.
namespace oracle {

double dot_rows(const Tensor2D& a, int i, const Tensor2D& b, int j) {
    double s = 0.0;
    for (int d = 0; d < a.cols; ++d) s += a.at(i, d) * b.at(j, d);
    return s;
}

std::vector<double> token_scores(const Tensor2D& c, const Tensor2D& t, bool matched) {
    std::vector<double> out(c.rows);
    for (int i = 0; i < c.rows; ++i) {
        if (matched) {
            out[i] = dot_rows(c, i, t, i);
        } else {
            double best = dot_rows(c, i, t, 0);
            for (int j = 1; j < t.rows; ++j) best = std::max(best, dot_rows(c, i, t, j));
            out[i] = best;
        }
    }
    return out;
}

std::vector<double> softmax(const std::vector<double>& x) {
    double z = 0.0;
    for (double v : x) z += std::exp(v);
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]) / z;
    return out;
}

std::vector<double> weights(const std::vector<double>& scores, const Tensor2D& bias,
                            bool use_bias) {
    std::vector<double> w = softmax(scores);
    if (use_bias)
        for (size_t i = 0; i < w.size(); ++i) w[i] += bias.at(0, static_cast<int>(i));
    return w;
}

double similarity(const Tensor2D& c, const Tensor2D& t, const Tensor2D& bias, bool matched,
                  bool use_bias) {
    std::vector<double> s = token_scores(c, t, matched);
    std::vector<double> w = weights(s, bias, use_bias);
    double out = 0.0;
    for (size_t i = 0; i < s.size(); ++i) out += w[i] * s[i];
    return out;
}

double rank_loss(const Tensor2D& m, double tau) {
    double acc = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        double z = 0.0;
        for (int j = 0; j < m.cols; ++j) z += std::exp(m.at(i, j) / tau);
        acc += -std::log(std::exp(m.at(i, i) / tau) / z);
    }
    return acc / m.rows;
}

std::vector<double> degree(const Tensor2D& m, int i, double tau, bool target_side) {
    int n = target_side ? m.rows : m.cols;
    std::vector<double> logits(n);
    for (int j = 0; j < n; ++j) logits[j] = (target_side ? m.at(j, i) : m.at(i, j)) / tau;
    return softmax(logits);
}

double kl(const std::vector<double>& p, const std::vector<double>& q) {
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) acc += p[i] * std::log(p[i] / q[i]);
    return acc;
}

double regularization(const Tensor2D& h, const Tensor2D& a, double tau) {
    double acc = 0.0;
    for (int i = 0; i < h.rows; ++i) {
        acc += kl(degree(a, i, tau, true), degree(h, i, tau, false));
        acc += kl(degree(h, i, tau, true), degree(a, i, tau, false));
    }
    return acc / (2.0 * h.rows);
}

}  // namespace oracle

namespace {

struct Instance {
    Tensor2D c;
    Tensor2D t;
    Tensor2D bias;
    double tau;
};

Instance random_instance(RngStream& rng) {
    int k = static_cast<int>(rng.uniform_int(8)) + 1;
    int d = static_cast<int>(rng.uniform_int(8)) + 1;
    Instance inst;
    inst.c = testutil::random_tensor(rng, k, d);
    inst.t = testutil::random_tensor(rng, k, d);
    inst.bias = testutil::random_tensor(rng, 1, k, 0.3);
    inst.tau = 0.2 + 0.8 * rng.uniform();
    return inst;
}

Tensor2D random_square(RngStream& rng, int b) { return testutil::random_tensor(rng, b, b); }

}  // namespace

TEST_CASE("token scores match the loop oracle in both modes") {
    RngStream rng(41);
    for (int it = 0; it < 1000; ++it) {
        Instance inst = random_instance(rng);
        for (bool matched : {false, true}) {
            SimilarityMode mode =
                matched ? SimilarityMode::kMatchedIndex : SimilarityMode::kMaxOverTarget;
            Tensor2D got = token_scores(inst.c, inst.t, mode);
            std::vector<double> want = oracle::token_scores(inst.c, inst.t, matched);
            REQUIRE(got.cols == static_cast<int>(want.size()));
            for (int i = 0; i < got.cols; ++i)
                CHECK(std::abs(got.at(0, i) - want[i]) <= 1e-12);
        }
    }
}

TEST_CASE("post-softmax bias weights match the loop oracle") {
    RngStream rng(42);
    for (int it = 0; it < 1000; ++it) {
        Instance inst = random_instance(rng);
        Tensor2D scores = token_scores(inst.c, inst.t, SimilarityMode::kMaxOverTarget);
        for (bool use_bias : {true, false}) {
            Tensor2D got = similarity_bias(scores, inst.bias, use_bias);
            std::vector<double> row(scores.data);
            std::vector<double> want = oracle::weights(row, inst.bias, use_bias);
            for (int i = 0; i < got.cols; ++i)
                CHECK(std::abs(got.at(0, i) - want[i]) <= 1e-12);
        }
    }
}

TEST_CASE("biased weights sum to one plus the bias mass") {
    RngStream rng(43);
    for (int it = 0; it < 200; ++it) {
        Instance inst = random_instance(rng);
        Tensor2D scores = token_scores(inst.c, inst.t, SimilarityMode::kMaxOverTarget);
        Tensor2D w = similarity_bias(scores, inst.bias, true);
        double w_sum = 0.0, b_sum = 0.0;
        for (double v : w.data) w_sum += v;
        for (double v : inst.bias.data) b_sum += v;
        CHECK(w_sum == doctest::Approx(1.0 + b_sum).epsilon(1e-12));
    }
    CHECK_THROWS_WITH_AS(similarity_bias(Tensor2D(2, 3), Tensor2D(2, 3), false),
                         doctest::Contains("1 x K"), std::runtime_error);
}

TEST_CASE("hierarchical similarity matches the loop oracle") {
    RngStream rng(44);
    for (int it = 0; it < 1000; ++it) {
        Instance inst = random_instance(rng);
        for (bool matched : {false, true})
            for (bool use_bias : {false, true}) {
                SimilarityMode mode =
                    matched ? SimilarityMode::kMatchedIndex : SimilarityMode::kMaxOverTarget;
                double got = hierarchical_similarity(inst.c, inst.t, inst.bias, mode, use_bias);
                double want = oracle::similarity(inst.c, inst.t, inst.bias, matched, use_bias);
                CHECK(std::abs(got - want) <= 1e-12);
            }
    }
}

TEST_CASE("rank loss matches the loop oracle") {
    RngStream rng(45);
    for (int it = 0; it < 1000; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        BatchSims sims;
        sims.holistic = random_square(rng, b);
        sims.atomistic = random_square(rng, b);

        Tensor2D combined = sims.holistic;
        for (size_t i = 0; i < combined.size(); ++i) combined.data[i] += sims.atomistic.data[i];
        CHECK(std::abs(rank_loss(sims, tau) - oracle::rank_loss(combined, tau)) <= 1e-12);

        BatchSims only_h;
        only_h.holistic = sims.holistic;
        CHECK(std::abs(rank_loss(only_h, tau) - oracle::rank_loss(sims.holistic, tau)) <= 1e-12);

        BatchSims only_a;
        only_a.atomistic = sims.atomistic;
        CHECK(std::abs(rank_loss(only_a, tau) - oracle::rank_loss(sims.atomistic, tau)) <= 1e-12);
    }
}

TEST_CASE("similarity degree distributions match the loop oracle") {
    RngStream rng(46);
    for (int it = 0; it < 1000; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        Tensor2D m = random_square(rng, b);
        for (int i = 0; i < b; ++i)
            for (bool target_side : {false, true}) {
                Tensor2D got = similarity_degree_distribution(m, i, tau, target_side);
                std::vector<double> want = oracle::degree(m, i, tau, target_side);
                for (int j = 0; j < b; ++j)
                    CHECK(std::abs(got.at(0, j) - want[j]) <= 1e-12);
            }
    }
}

TEST_CASE("distribution regularization matches the loop oracle") {
    RngStream rng(47);
    for (int it = 0; it < 1000; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        BatchSims sims;
        sims.holistic = random_square(rng, b);
        sims.atomistic = random_square(rng, b);
        double got = distribution_regularization(sims, tau);
        double want = oracle::regularization(sims.holistic, sims.atomistic, tau);
        CHECK(std::abs(got - want) <= 1e-12);
    }
}

TEST_CASE("constant similarities give a rank loss of ln B") {
    RngStream rng(48);
    for (int b = 1; b <= 6; ++b) {
        double c = rng.normal();
        BatchSims sims;
        sims.holistic = Tensor2D::full(b, b, c);
        sims.atomistic = Tensor2D::full(b, b, rng.normal());
        CHECK(std::abs(rank_loss(sims, 0.1) - std::log(double(b))) <= 1e-9);

        BatchSims single;
        single.holistic = Tensor2D::full(b, b, c);
        CHECK(std::abs(rank_loss(single, 0.37) - std::log(double(b))) <= 1e-9);
    }
}

TEST_CASE("frozen rank loss instance") {
    BatchSims sims;
    sims.holistic = Tensor2D(2, 2, {1.0, -1.0, -1.0, 1.0});
    CHECK(rank_loss(sims, 0.1) == doctest::Approx(2.061153026033935e-09).epsilon(1e-6));
}

TEST_CASE("symmetric equal levels have zero regularization") {
    RngStream rng(49);
    for (int it = 0; it < 50; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        Tensor2D m = random_square(rng, b);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < i; ++j) m.at(i, j) = m.at(j, i);
        BatchSims sims;
        sims.holistic = m;
        sims.atomistic = m;
        CHECK(std::abs(distribution_regularization(sims, 0.5)) <= 1e-12);
    }
}

TEST_CASE("total loss composes rank and regularization exactly") {
    RngStream rng(50);
    for (int it = 0; it < 100; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        BatchSims sims;
        sims.holistic = random_square(rng, b);
        sims.atomistic = random_square(rng, b);
        double rank = rank_loss(sims, tau);
        double reg = distribution_regularization(sims, tau);
        for (double kappa : {0.0, 0.25, 0.5, 1.0, 2.0})
            CHECK(total_loss(sims, tau, kappa) == rank + kappa * reg);
    }
}

TEST_CASE("replicated target rows make max and matched scoring coincide") {
    RngStream rng(51);
    for (int it = 0; it < 1000; ++it) {
        int k = static_cast<int>(rng.uniform_int(8)) + 1;
        int d = static_cast<int>(rng.uniform_int(8)) + 1;
        Tensor2D c = l2_normalize_rows(testutil::random_tensor(rng, k, d));
        Tensor2D target_row = testutil::random_tensor(rng, 1, d);
        Tensor2D t(k, d);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < d; ++j) t.at(i, j) = target_row.at(0, j);
        Tensor2D by_max = token_scores(c, t, SimilarityMode::kMaxOverTarget);
        Tensor2D by_match = token_scores(c, t, SimilarityMode::kMatchedIndex);
        CHECK(testutil::bit_equal(by_max, by_match));
    }
}

TEST_CASE("max-mode scores ignore target row order") {
    RngStream rng(52);
    Tensor2D c = testutil::random_tensor(rng, 5, 4);
    Tensor2D t = testutil::random_tensor(rng, 5, 4);
    Tensor2D t_perm(5, 4);
    int perm[5] = {4, 2, 0, 1, 3};
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j) t_perm.at(i, j) = t.at(perm[i], j);
    Tensor2D a = token_scores(c, t, SimilarityMode::kMaxOverTarget);
    Tensor2D b = token_scores(c, t_perm, SimilarityMode::kMaxOverTarget);
    CHECK(testutil::bit_equal(a, b));
}

TEST_CASE("graph losses agree with the plain implementations") {
    RngStream rng(53);
    for (int it = 0; it < 200; ++it) {
        int b = static_cast<int>(rng.uniform_int(4)) + 1;
        double tau = 0.2 + 0.8 * rng.uniform();
        BatchSims sims;
        sims.holistic = random_square(rng, b);
        sims.atomistic = random_square(rng, b);
        ad::Var h = ad::constant(sims.holistic);
        ad::Var a = ad::constant(sims.atomistic);

        CHECK(std::abs(rank_loss_ad(h, a, tau).scalar() - rank_loss(sims, tau)) <= 1e-12);
        CHECK(std::abs(distribution_regularization_ad(h, a, tau).scalar() -
                       distribution_regularization(sims, tau)) <= 1e-12);

        BatchSims only_h;
        only_h.holistic = sims.holistic;
        CHECK(std::abs(rank_loss_ad(h, ad::Var(), tau).scalar() - rank_loss(only_h, tau)) <=
              1e-12);
        BatchSims only_a;
        only_a.atomistic = sims.atomistic;
        CHECK(std::abs(rank_loss_ad(ad::Var(), a, tau).scalar() - rank_loss(only_a, tau)) <=
              1e-12);
    }
}

TEST_CASE("graph similarity agrees with the plain scorer") {
    RngStream rng(54);
    for (int it = 0; it < 200; ++it) {
        int k = static_cast<int>(rng.uniform_int(8)) + 1;
        int d = static_cast<int>(rng.uniform_int(8)) + 1;
        Tensor2D c = l2_normalize_rows(testutil::random_tensor(rng, k, d));
        Tensor2D t = l2_normalize_rows(testutil::random_tensor(rng, k, d));
        Tensor2D bias = testutil::random_tensor(rng, 1, k, 0.3);
        for (bool matched : {false, true})
            for (bool use_bias : {false, true}) {
                SimilarityMode mode =
                    matched ? SimilarityMode::kMatchedIndex : SimilarityMode::kMaxOverTarget;
                double plain = hierarchical_similarity(c, t, bias, mode, use_bias);
                double graph = hierarchical_similarity_ad(ad::constant(c),
                                                          ad::constant(transpose(t)),
                                                          ad::constant(bias), mode, use_bias)
                                   .scalar();
                CHECK(std::abs(plain - graph) <= 1e-12);
            }
    }
}

TEST_CASE("alignment input validation") {
    BatchSims sims;
    sims.holistic = Tensor2D(2, 2);
    CHECK_THROWS_WITH_AS(rank_loss(sims, 0.0), doctest::Contains("tau must be positive"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(rank_loss(BatchSims{}, 0.1), doctest::Contains("no similarity level"),
                         std::runtime_error);

    BatchSims rect;
    rect.holistic = Tensor2D(2, 3);
    CHECK_THROWS_WITH_AS(rank_loss(rect, 0.1), doctest::Contains("square"), std::runtime_error);

    CHECK_THROWS_WITH_AS(distribution_regularization(sims, 0.1),
                         doctest::Contains("needs both levels"), std::runtime_error);
    CHECK_THROWS_WITH_AS(similarity_degree_distribution(Tensor2D(2, 2), 2, 0.1, false),
                         doctest::Contains("out of range"), std::runtime_error);
    CHECK_THROWS(similarity_mode_from("other"));
}
