#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "sckd/objective.hpp"

using namespace sckd;

namespace {

// Independent Sinkhorn oracle: same alternation written from the definition,
// long enough to be effectively converged.
Matrix sinkhorn_oracle(const Matrix& logits, double epsilon, int iters) {
    double max_logit = logits[0];
    for (std::size_t i = 0; i < logits.size(); ++i) max_logit = std::max(max_logit, logits[i]);
    Matrix p(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp((logits[i] - max_logit) / epsilon);
    const double col_target = static_cast<double>(p.rows()) / static_cast<double>(p.cols());
    for (int it = 0; it < iters; ++it) {
        for (std::size_t j = 0; j < p.cols(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < p.rows(); ++i) s += p(i, j);
            for (std::size_t i = 0; i < p.rows(); ++i) p(i, j) *= col_target / s;
        }
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) s += p(i, j);
            for (std::size_t j = 0; j < p.cols(); ++j) p(i, j) /= s;
        }
    }
    return p;
}

double column_deviation(const Matrix& p) {
    const double target = static_cast<double>(p.rows()) / static_cast<double>(p.cols());
    double dev = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < p.rows(); ++i) s += p(i, j);
        dev += std::abs(s - target);
    }
    return dev;
}

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

// Tiny discovery problem: d=3, k=2, C^l=C^u=2, N=M=2.
struct TinyProblem {
    ModelState model;
    ReplicaEncoder replica;
    Batch batch;
};

TinyProblem make_tiny(Activation act = Activation::Tanh) {
    ModelConfig cfg;
    cfg.input_dim = 3;
    cfg.hidden_dim = 4;
    cfg.feature_dim = 2;
    cfg.novel_hidden_dim = 2;
    cfg.num_known = 2;
    cfg.num_novel = 2;
    cfg.temperature = 0.1;
    cfg.activation = act;
    Rng rng(99);
    TinyProblem p{init_model(cfg, rng), ReplicaEncoder{}, Batch{}};
    // replica from a slightly different model so both S sides are nontrivial
    Rng rng2(101);
    p.replica = snapshot_replica(init_model(cfg, rng2));
    p.batch.labeled_features = random_matrix(2, 3, 7);
    p.batch.labeled_labels = {0, 1};
    p.batch.unlabeled_features = random_matrix(2, 3, 8);
    return p;
}

// Finite differences of objective_with_frozen over every parameter block.
double max_gradient_rel_err(const TinyProblem& p, const TrainConfig& cfg) {
    Rng step_rng(55);
    const StepCache cache = compute_step(p.model, &p.replica, p.batch, cfg, step_rng);
    const FrozenTargets frozen = freeze_targets(cache, cfg);
    GradientSet g = objective_gradient(p.model, p.batch, cfg, frozen, cache);

    double worst = 0.0;
    auto analytic = g.blocks();
    ModelState scratch = p.model;
    auto blocks = scratch.parameter_blocks();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        auto loss_at = [&](const Matrix& block) {
            ModelState probe = p.model;
            *probe.parameter_blocks()[bi].values = block;
            return objective_with_frozen(probe, p.batch, cfg, frozen);
        };
        const Matrix fd = finite_difference_gradient(loss_at, *blocks[bi].values, 1e-5);
        for (std::size_t i = 0; i < fd.size(); ++i) {
            worst = std::max(worst, rel_err((*analytic[bi].values)[i], fd[i]));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("sinkhorn symmetry fixed point and row sums") {
    const Matrix flat(6, 3, 0.7);
    const Matrix p = sinkhorn_targets(flat, 0.05, 3);
    for (std::size_t i = 0; i < p.size(); ++i) REQUIRE(std::abs(p[i] - 1.0 / 3.0) < 1e-14);

    const Matrix z = random_matrix(32, 8, 3, -2.0, 2.0);
    const Matrix targets = sinkhorn_targets(z, 0.05, 3);
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < targets.cols(); ++j) s += targets(i, j);
        REQUIRE(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("sinkhorn approaches identity on strongly diagonal logits") {
    Matrix diag(4, 4, 0.0);
    for (std::size_t i = 0; i < 4; ++i) diag(i, i) = 10.0;
    const Matrix converged = sinkhorn_oracle(diag, 0.05, 200);
    const Matrix three = sinkhorn_targets(diag, 0.05, 3);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = 0; j < 4; ++j) {
            const double expect = i == j ? 1.0 : 0.0;
            REQUIRE(std::abs(converged(i, j) - expect) < 1e-9);
            REQUIRE(std::abs(three(i, j) - expect) < 1e-3);
        }
    }
    // the implementation and the oracle are the same map
    REQUIRE(max_abs_diff(sinkhorn_targets(diag, 0.05, 200), converged) < 1e-12);
}

TEST_CASE("sinkhorn column deviation decreases with iterations") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const Matrix z = random_matrix(32, 8, seed, -2.0, 2.0);
        const double dev1 = column_deviation(sinkhorn_targets(z, 0.05, 1));
        const double dev3 = column_deviation(sinkhorn_targets(z, 0.05, 3));
        const double dev5 = column_deviation(sinkhorn_targets(z, 0.05, 5));
        REQUIRE(dev3 <= dev1 + 1e-12);
        REQUIRE(dev5 <= dev3 + 1e-12);
    }
}

TEST_CASE("sinkhorn input validation") {
    REQUIRE_THROWS_AS(sinkhorn_targets(Matrix(2, 2, 1.0), 0.0, 3), ConfigError);
    REQUIRE_THROWS_AS(sinkhorn_targets(Matrix(2, 2, 1.0), 0.05, 0), ConfigError);
    Matrix bad(2, 2, 1.0);
    bad(0, 0) = std::nan("");
    REQUIRE_THROWS_AS(sinkhorn_targets(bad, 0.05, 3), NumericError);
}

TEST_CASE("ce_loss closed forms") {
    // prediction already one-hot on the target slot
    const Matrix hot = Matrix::from_rows({{1.0, 0.0, 0.0}});
    REQUIRE(ce_loss(hot, hot) == 0.0);

    const Matrix uniform5(3, 5, 0.2);
    REQUIRE(std::abs(ce_loss(uniform5, uniform5) - std::log(5.0)) < 1e-14);

    const Matrix uniform4(1, 4, 0.25);
    const Matrix one_hot4 = Matrix::from_rows({{0.0, 0.0, 1.0, 0.0}});
    REQUIRE(std::abs(ce_loss(uniform4, one_hot4) - std::log(4.0)) < 1e-14);

    REQUIRE_THROWS_AS(ce_loss(uniform4, Matrix(1, 3, 1.0 / 3.0)), ContractError);
    REQUIRE_THROWS_AS(ce_loss(uniform4, Matrix(1, 4, 0.3)), ContractError);
}

TEST_CASE("total_loss composition") {
    REQUIRE(total_loss(1.25, 7.0, 0.0) == 1.25);
    REQUIRE(total_loss(1.25, 0.0, 0.5) == 1.25);
    REQUIRE(total_loss(1.0, 2.0, 0.5) == 2.0);
}

TEST_CASE("target assembly") {
    const Matrix t = one_hot_targets({2, 0}, 4);
    REQUIRE(t(0, 2) == 1.0);
    REQUIRE(t(1, 0) == 1.0);
    REQUIRE(t(0, 0) == 0.0);
    REQUIRE_THROWS_AS(one_hot_targets({4}, 4), ContractError);
    REQUIRE_THROWS_AS(one_hot_targets({-1}, 4), ContractError);

    const Matrix assign = Matrix::from_rows({{0.25, 0.75}});
    const Matrix u = unlabeled_concat_targets(assign, 3);
    REQUIRE(u.cols() == 5);
    REQUIRE(u(0, 0) == 0.0);
    REQUIRE(u(0, 3) == 0.25);
    REQUIRE(u(0, 4) == 0.75);
}

TEST_CASE("compute_step value equals the frozen objective at the same point") {
    const TinyProblem p = make_tiny();
    TrainConfig cfg;
    cfg.warmup_epochs = 1;
    cfg.stage1_epochs = 2;
    cfg.stage2_epochs = 2;

    for (bool grad_through : {false, true}) {
        cfg.sckd.grad_through_score = grad_through;
        Rng rng(5);
        const StepCache cache = compute_step(p.model, &p.replica, p.batch, cfg, rng);
        const FrozenTargets frozen = freeze_targets(cache, cfg);
        const double direct = objective_with_frozen(p.model, p.batch, cfg, frozen);
        REQUIRE(std::abs(direct - cache.losses.total) < 1e-12);

        // breakdown identity
        const double recombined =
            cache.losses.ce + cfg.sckd.beta * 2.0 *
                                  (cfg.sckd.lambda * cache.losses.l_k_to_n +
                                   (1.0 - cfg.sckd.lambda) * cache.losses.l_n_to_k);
        REQUIRE(std::abs(cache.losses.total - recombined) < 1e-9);
    }
}

TEST_CASE("missing replica is rejected when the config needs it") {
    const TinyProblem p = make_tiny();
    TrainConfig cfg;
    cfg.warmup_epochs = 1;
    cfg.stage1_epochs = 2;
    cfg.stage2_epochs = 2;
    Rng rng(5);
    REQUIRE_THROWS_AS(compute_step(p.model, nullptr, p.batch, cfg, rng), ContractError);

    cfg.sckd.use_replica = false;
    REQUIRE_NOTHROW(compute_step(p.model, nullptr, p.batch, cfg, rng));
}

TEST_CASE("objective gradient passes finite differences across config variants") {
    TrainConfig base;
    base.warmup_epochs = 1;
    base.stage1_epochs = 2;
    base.stage2_epochs = 2;

    SECTION("default stop-gradient pipeline") {
        REQUIRE(max_gradient_rel_err(make_tiny(), base) < 1e-4);
    }
    SECTION("beta zero baseline") {
        TrainConfig cfg = base;
        cfg.sckd.beta = 0.0;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("gradient through the score matrix") {
        TrainConfig cfg = base;
        cfg.sckd.grad_through_score = true;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("gradient through score without replica") {
        TrainConfig cfg = base;
        cfg.sckd.grad_through_score = true;
        cfg.sckd.use_replica = false;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("signed max normalization") {
        TrainConfig cfg = base;
        cfg.sckd.signed_max_norm = true;
        cfg.sckd.grad_through_score = true;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("average and random score modes") {
        TrainConfig cfg = base;
        cfg.sckd.score_mode = ScoreMode::Average;
        cfg.sckd.grad_through_score = true;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
        cfg.sckd.score_mode = ScoreMode::Random;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("asymmetric lambda and distill temperature") {
        TrainConfig cfg = base;
        cfg.sckd.lambda = 0.3;
        cfg.sckd.distill_temperature = 2.0;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("single direction ablations") {
        TrainConfig cfg = base;
        cfg.sckd.use_n_to_k = false;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
        cfg.sckd.use_n_to_k = true;
        cfg.sckd.use_k_to_n = false;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("full concat unlabeled targets") {
        TrainConfig cfg = base;
        cfg.unlabeled_targets_full_concat = true;
        REQUIRE(max_gradient_rel_err(make_tiny(), cfg) < 1e-4);
    }
    SECTION("relu activation") {
        REQUIRE(max_gradient_rel_err(make_tiny(Activation::Relu), base) < 1e-4);
    }
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.stage1_epochs = 0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.warmup_epochs = cfg.stage1_epochs;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.momentum = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.lr_floor = 0.5;
    cfg.lr_peak = 0.4;
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    REQUIRE_NOTHROW(TrainConfig{}.validate());
}
