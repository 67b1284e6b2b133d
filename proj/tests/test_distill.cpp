#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sckd/distill.hpp"

using namespace sckd;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Matrix m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng);
    return m;
}

double rel_err(double analytic, double fd) {
    return std::abs(analytic - fd) / std::max(1e-6, std::abs(fd));
}

}  // namespace

TEST_CASE("cosine_scores agrees with the pairwise definition") {
    const Matrix a = random_matrix(4, 3, 1);
    const Matrix b = random_matrix(5, 3, 2);
    const Matrix s = cosine_scores(a, b);
    REQUIRE(s.rows() == 4);
    REQUIRE(s.cols() == 5);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            REQUIRE(std::abs(s(i, j) - cosine_similarity(a.row_copy(i), b.row_copy(j))) < 1e-15);
            REQUIRE(std::abs(s(i, j)) <= 1.0 + 1e-12);
        }
    }
    REQUIRE_THROWS_AS(cosine_scores(Matrix(2, 3), Matrix(2, 4)), ContractError);
}

TEST_CASE("normalize_scores absolute-max default") {
    Matrix raw = Matrix::from_rows({{0.2, -0.8}, {0.4, 0.1}});
    const ScoreMatrix s = normalize_scores(raw);
    REQUIRE_FALSE(s.degenerate);
    REQUIRE(s.norm == 0.8);
    REQUIRE(s.argmax_row == 0);
    REQUIRE(s.argmax_col == 1);
    REQUIRE(std::abs(s.values(0, 1) + 1.0) < 1e-15);
    REQUIRE(std::abs(s.values(1, 0) - 0.5) < 1e-15);
    REQUIRE(max_abs(s.values) == 1.0);

    const ScoreMatrix zero = normalize_scores(Matrix(3, 2, 0.0));
    REQUIRE(zero.degenerate);
    REQUIRE(zero.values == Matrix(3, 2, 0.0));
}

TEST_CASE("normalize_scores signed variant") {
    Matrix raw = Matrix::from_rows({{0.2, -0.8}, {0.4, 0.1}});
    const ScoreMatrix s = normalize_scores(raw, true);
    REQUIRE_FALSE(s.degenerate);
    REQUIRE(s.norm == 0.4);
    // entries may now exceed 1 in magnitude on the negative side
    REQUIRE(std::abs(s.values(0, 1) + 2.0) < 1e-15);

    // no positive entry means no usable signed max
    const ScoreMatrix neg = normalize_scores(Matrix::from_rows({{-0.5, -0.1}}), true);
    REQUIRE(neg.degenerate);
}

TEST_CASE("normalize_scores backward matches finite differences") {
    const Matrix raw0 = random_matrix(3, 4, 7);
    const Matrix upstream = random_matrix(3, 4, 8);
    for (bool signed_max : {false, true}) {
        auto loss_at = [&](const Matrix& raw) {
            const ScoreMatrix s = normalize_scores(raw, signed_max);
            double total = 0.0;
            for (std::size_t i = 0; i < s.values.size(); ++i) total += upstream[i] * s.values[i];
            return total;
        };
        const ScoreMatrix s0 = normalize_scores(raw0, signed_max);
        const Matrix analytic = normalize_scores_backward(s0, upstream);
        const Matrix fd = finite_difference_gradient(loss_at, raw0, 1e-6);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            REQUIRE(rel_err(analytic[i], fd[i]) < 1e-4);
        }
    }
}

TEST_CASE("cosine_scores backward matches finite differences") {
    const Matrix a0 = random_matrix(3, 4, 11);
    const Matrix b0 = random_matrix(2, 4, 12);
    const Matrix upstream = random_matrix(3, 2, 13);

    auto loss_at_a = [&](const Matrix& a) {
        const Matrix s = cosine_scores(a, b0);
        double total = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) total += upstream[i] * s[i];
        return total;
    };
    auto loss_at_b = [&](const Matrix& b) {
        const Matrix s = cosine_scores(a0, b);
        double total = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) total += upstream[i] * s[i];
        return total;
    };

    const Matrix raw = cosine_scores(a0, b0);
    Matrix d_a(3, 4, 0.0), d_b(2, 4, 0.0);
    cosine_scores_backward(a0, b0, raw, upstream, &d_a, &d_b);

    const Matrix fd_a = finite_difference_gradient(loss_at_a, a0, 1e-6);
    const Matrix fd_b = finite_difference_gradient(loss_at_b, b0, 1e-6);
    for (std::size_t i = 0; i < fd_a.size(); ++i) REQUIRE(rel_err(d_a[i], fd_a[i]) < 1e-4);
    for (std::size_t i = 0; i < fd_b.size(); ++i) REQUIRE(rel_err(d_b[i], fd_b[i]) < 1e-4);
}

TEST_CASE("pseudo logit synthesis") {
    ScoreMatrix s;
    s.values = Matrix::from_rows({{1.0, 0.5}, {0.0, -0.5}});  // N=2 labeled, M=2 unlabeled
    const Matrix labeled_novel = Matrix::from_rows({{2.0, 4.0}, {6.0, 8.0}});
    const Matrix unlabeled_known = Matrix::from_rows({{1.0, 3.0}, {5.0, 7.0}});

    // alpha S^T L: row j mixes labeled logits by column j of S
    const Matrix pn = synthesize_novel_pseudo(s, labeled_novel, 0.1);
    REQUIRE(std::abs(pn(0, 0) - 0.1 * (1.0 * 2.0 + 0.0 * 6.0)) < 1e-15);
    REQUIRE(std::abs(pn(1, 1) - 0.1 * (0.5 * 4.0 + -0.5 * 8.0)) < 1e-15);

    // alpha S K: row i mixes unlabeled logits by row i of S
    const Matrix pk = synthesize_known_pseudo(s, unlabeled_known, 0.1);
    REQUIRE(std::abs(pk(0, 0) - 0.1 * (1.0 * 1.0 + 0.5 * 5.0)) < 1e-15);
    REQUIRE(std::abs(pk(1, 1) - 0.1 * (0.0 * 3.0 + -0.5 * 7.0)) < 1e-15);

    REQUIRE_THROWS_AS(synthesize_novel_pseudo(s, Matrix(3, 2), 0.1), ContractError);
    REQUIRE_THROWS_AS(synthesize_known_pseudo(s, Matrix(3, 2), 0.1), ContractError);
}

TEST_CASE("mean distill KL values and gradients") {
    const Matrix target = random_matrix(3, 4, 21, -2.0, 2.0);
    const Matrix pred = random_matrix(3, 4, 22, -2.0, 2.0);

    REQUIRE(mean_distill_kl(target, target, 1.0) < 1e-14);
    REQUIRE(mean_distill_kl(target, pred, 1.0) > 0.0);

    // agrees with the row-by-row definition
    for (double temp : {1.0, 2.0}) {
        double expect = 0.0;
        for (std::size_t i = 0; i < 3; ++i) {
            expect += kl_divergence(softmax(target.row_copy(i), temp),
                                    softmax(pred.row_copy(i), temp));
        }
        expect /= 3.0;
        REQUIRE(std::abs(mean_distill_kl(target, pred, temp) - expect) < 1e-14);
    }

    for (double temp : {1.0, 2.0}) {
        auto loss_in_pred = [&](const Matrix& p) { return mean_distill_kl(target, p, temp); };
        auto loss_in_target = [&](const Matrix& t) { return mean_distill_kl(t, pred, temp); };
        const Matrix fd_pred = finite_difference_gradient(loss_in_pred, pred, 1e-6);
        const Matrix fd_target = finite_difference_gradient(loss_in_target, target, 1e-6);
        const Matrix an_pred = distill_kl_pred_grad(target, pred, temp);
        const Matrix an_target = distill_kl_target_grad(target, pred, temp);
        for (std::size_t i = 0; i < fd_pred.size(); ++i) {
            REQUIRE(rel_err(an_pred[i], fd_pred[i]) < 1e-4);
            REQUIRE(rel_err(an_target[i], fd_target[i]) < 1e-4);
        }
    }
}

TEST_CASE("sckd_losses combination identities") {
    SckdConfig cfg;  // lambda = 0.5
    ScoreMatrix s = normalize_scores(random_matrix(3, 2, 31));
    const Matrix lab_known = random_matrix(3, 2, 32);
    const Matrix lab_novel = random_matrix(3, 2, 33);
    const Matrix unlab_known = random_matrix(2, 2, 34);
    const Matrix unlab_novel = random_matrix(2, 2, 35);

    const SckdLosses both = sckd_losses(cfg, s, lab_known, lab_novel, unlab_known, unlab_novel);
    // lambda = 1/2 makes the weighted form an exact plain sum
    REQUIRE(both.combined == both.k_to_n + both.n_to_k);

    SckdConfig only_kn = cfg;
    only_kn.use_n_to_k = false;
    const SckdLosses kn = sckd_losses(only_kn, s, lab_known, lab_novel, unlab_known, unlab_novel);
    REQUIRE(kn.n_to_k == 0.0);
    REQUIRE(std::abs(kn.combined - both.k_to_n) < 1e-15);

    SckdConfig weighted = cfg;
    weighted.lambda = 0.3;
    const SckdLosses w = sckd_losses(weighted, s, lab_known, lab_novel, unlab_known, unlab_novel);
    REQUIRE(std::abs(w.combined - 2.0 * (0.3 * w.k_to_n + 0.7 * w.n_to_k)) < 1e-15);

    SckdConfig bad = cfg;
    bad.lambda = 1.5;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.distill_temperature = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);
    REQUIRE_THROWS_AS(score_mode_from_name("dot"), ConfigError);
}
