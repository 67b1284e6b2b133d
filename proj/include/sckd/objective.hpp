#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sckd/data.hpp"
#include "sckd/distill.hpp"
#include "sckd/error.hpp"
#include "sckd/matrix.hpp"
#include "sckd/model.hpp"
#include "sckd/numerics.hpp"

namespace sckd {

struct TrainConfig {
    std::size_t stage1_epochs = 50;
    std::size_t stage2_epochs = 200;
    std::size_t warmup_epochs = 10;
    double lr_floor = 0.001;
    double lr_peak = 0.4;
    double momentum = 0.9;
    double weight_decay = 1.5e-4;
    std::size_t batch_size = 64;
    double sinkhorn_epsilon = 0.05;
    int sinkhorn_iters = 3;
    // When set, unlabeled CE targets come from Sinkhorn over the full concat
    // logits and may put mass on known slots. Default keeps known slots zero.
    bool unlabeled_targets_full_concat = false;
    std::uint64_t seed = 1;
    SckdConfig sckd;

    void validate() const {
        if (stage1_epochs < 1 || stage2_epochs < 1) throw ConfigError("epochs must be >= 1");
        if (!(lr_floor > 0.0) || lr_floor > lr_peak) {
            throw ConfigError("need 0 < lr_floor <= lr_peak");
        }
        if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
        if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
        if (sinkhorn_epsilon <= 0.0) throw ConfigError("sinkhorn_epsilon must be > 0");
        if (sinkhorn_iters < 1) throw ConfigError("sinkhorn_iters must be >= 1");
        if (warmup_epochs >= stage1_epochs || warmup_epochs >= stage2_epochs) {
            throw ConfigError("warmup_epochs must be smaller than each stage's epochs");
        }
        sckd.validate();
    }
};

struct LossBreakdown {
    double ce = 0.0;
    double l_k_to_n = 0.0;
    double l_n_to_k = 0.0;
    double total = 0.0;
};

// Row-stochastic balanced assignment. Conceptually starts from
// P = exp((logits - max)/eps) and alternates column normalization (each
// column sums to rows/cols) with row normalization (each row sums to 1),
// n_iter full alternations ending on the row step. The iterations run in log
// domain so extreme logit spreads cannot underflow a whole row or column.
inline Matrix sinkhorn_targets(const Matrix& novel_logits, double epsilon, int n_iter) {
    if (epsilon <= 0.0) throw ConfigError("sinkhorn epsilon must be > 0");
    if (n_iter < 1) throw ConfigError("sinkhorn n_iter must be >= 1");
    if (!novel_logits.all_finite()) throw NumericError("non-finite logits in sinkhorn_targets");
    const std::size_t m = novel_logits.rows();
    const std::size_t c = novel_logits.cols();
    const double global_max = *std::max_element(novel_logits.data(),
                                                novel_logits.data() + novel_logits.size());
    Matrix lp(m, c);
    for (std::size_t i = 0; i < lp.size(); ++i) {
        lp[i] = (novel_logits[i] - global_max) / epsilon;
    }
    const double log_col_target = std::log(static_cast<double>(m) / static_cast<double>(c));
    for (int it = 0; it < n_iter; ++it) {
        for (std::size_t j = 0; j < c; ++j) {
            double hi = lp(0, j);
            for (std::size_t i = 1; i < m; ++i) hi = std::max(hi, lp(i, j));
            double sum = 0.0;
            for (std::size_t i = 0; i < m; ++i) sum += std::exp(lp(i, j) - hi);
            const double lse = hi + std::log(sum);
            for (std::size_t i = 0; i < m; ++i) lp(i, j) += log_col_target - lse;
        }
        for (std::size_t i = 0; i < m; ++i) {
            double* row = lp.row_ptr(i);
            double hi = row[0];
            for (std::size_t j = 1; j < c; ++j) hi = std::max(hi, row[j]);
            double sum = 0.0;
            for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - hi);
            const double lse = hi + std::log(sum);
            for (std::size_t j = 0; j < c; ++j) row[j] -= lse;
        }
    }
    Matrix p(m, c);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(lp[i]);
    p.require_finite("sinkhorn assignment");
    return p;
}

inline double ce_loss(const Matrix& concat_probs, const Matrix& targets) {
    require_same_shape(concat_probs, targets, "ce_loss");
    concat_probs.require_finite("ce_loss probabilities");
    for (std::size_t i = 0; i < targets.rows(); ++i) {
        require_distribution(targets.row_copy(i), "ce_loss targets");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] == 0.0) continue;
        total -= targets[i] * std::log(std::max(concat_probs[i], kProbFloor));
    }
    return total / static_cast<double>(targets.rows());
}

inline double total_loss(double ce, double sckd, double beta) {
    if (beta < 0.0) throw ConfigError("beta must be >= 0");
    return ce + beta * sckd;
}

inline Matrix one_hot_targets(const std::vector<int>& labels, std::size_t num_classes) {
    Matrix t(labels.size(), num_classes, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
            throw ContractError("label " + std::to_string(labels[i]) + " outside [0, " +
                                std::to_string(num_classes) + ")");
        }
        t(i, static_cast<std::size_t>(labels[i])) = 1.0;
    }
    return t;
}

// [zeros over known slots | novel-slot assignment]
inline Matrix unlabeled_concat_targets(const Matrix& novel_assignment, std::size_t num_known) {
    Matrix t(novel_assignment.rows(), num_known + novel_assignment.cols(), 0.0);
    for (std::size_t i = 0; i < novel_assignment.rows(); ++i) {
        for (std::size_t j = 0; j < novel_assignment.cols(); ++j) {
            t(i, num_known + j) = novel_assignment(i, j);
        }
    }
    return t;
}

// Everything computed in one stage-2 step at the current parameters.
struct StepCache {
    ForwardTrace lab;
    ForwardTrace unlab;
    Matrix score_labeled_features;  // labeled side of S (replica output by default)
    ScoreMatrix score;
    Matrix pseudo_novel;            // alpha S^T l^l_uh, M x C^u
    Matrix pseudo_known;            // alpha S l^u_kh, N x C^l
    Matrix ce_targets_labeled;      // N x (C^l + C^u)
    Matrix ce_targets_unlabeled;    // M x (C^l + C^u)
    SckdLosses sckd;
    LossBreakdown losses;
};

inline bool sckd_active(const SckdConfig& cfg) {
    return cfg.beta > 0.0 && (cfg.use_k_to_n || cfg.use_n_to_k);
}

// Forward pass of the full discovery objective. `replica` may be null only
// when the config does not route the labeled score side through it. `rng` is
// consumed only by the random score mode.
inline StepCache compute_step(const ModelState& model, const ReplicaEncoder* replica,
                              const Batch& batch, const TrainConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::size_t num_known = model.config.num_known;
    const std::size_t num_novel = model.config.num_novel;
    const std::size_t n = batch.labeled_features.rows();
    const std::size_t m = batch.unlabeled_features.rows();

    StepCache s;
    s.lab = forward(model, batch.labeled_features);
    s.unlab = forward(model, batch.unlabeled_features);

    s.ce_targets_labeled = one_hot_targets(batch.labeled_labels, num_known + num_novel);
    if (cfg.unlabeled_targets_full_concat) {
        const Matrix concat = hconcat(s.unlab.known_logits, s.unlab.novel_logits);
        s.ce_targets_unlabeled = sinkhorn_targets(concat, cfg.sinkhorn_epsilon, cfg.sinkhorn_iters);
    } else {
        const Matrix assign =
            sinkhorn_targets(s.unlab.novel_logits, cfg.sinkhorn_epsilon, cfg.sinkhorn_iters);
        s.ce_targets_unlabeled = unlabeled_concat_targets(assign, num_known);
    }

    const double ce_l = ce_loss(s.lab.concat_probs, s.ce_targets_labeled);
    const double ce_u = ce_loss(s.unlab.concat_probs, s.ce_targets_unlabeled);
    s.losses.ce = (static_cast<double>(n) * ce_l + static_cast<double>(m) * ce_u) /
                  static_cast<double>(n + m);

    if (sckd_active(cfg.sckd)) {
        if (cfg.sckd.use_replica) {
            if (replica == nullptr) throw ContractError("replica encoder required but missing");
            s.score_labeled_features = forward_replica(*replica, batch.labeled_features);
        } else {
            s.score_labeled_features = s.lab.encoder.features;
        }
        Matrix raw;
        switch (cfg.sckd.score_mode) {
            case ScoreMode::Cosine:
                raw = cosine_scores(s.score_labeled_features, s.unlab.encoder.features);
                break;
            case ScoreMode::Average:
                raw = average_scores(n, m);
                break;
            case ScoreMode::Random:
                raw = random_scores(n, m, rng);
                break;
        }
        s.score = normalize_scores(std::move(raw), cfg.sckd.signed_max_norm);
        s.pseudo_novel = synthesize_novel_pseudo(s.score, s.lab.novel_logits, cfg.sckd.alpha);
        s.pseudo_known = synthesize_known_pseudo(s.score, s.unlab.known_logits, cfg.sckd.alpha);
        s.sckd = sckd_losses(cfg.sckd, s.score, s.lab.known_logits, s.lab.novel_logits,
                             s.unlab.known_logits, s.unlab.novel_logits);
        s.losses.l_k_to_n = s.sckd.k_to_n;
        s.losses.l_n_to_k = s.sckd.n_to_k;
    }
    s.losses.total = total_loss(s.losses.ce, s.sckd.combined, cfg.sckd.beta);
    return s;
}

// The pieces of one step that are constants with respect to the parameters.
// Sinkhorn targets always freeze. The pseudo logits freeze under the default
// stop-gradient; with grad_through_score only structurally constant pieces
// freeze (the replica features, and S itself for non-cosine modes).
struct FrozenTargets {
    Matrix ce_targets_unlabeled;      // M x (C^l + C^u)
    bool pseudo_frozen = true;
    Matrix pseudo_novel;              // used when pseudo_frozen
    Matrix pseudo_known;
    bool score_frozen = false;        // S constant while logits stay live
    ScoreMatrix score;                // used when !pseudo_frozen
    bool labeled_side_frozen = true;  // replica supplies the labeled score side
    Matrix labeled_side_features;     // used when labeled_side_frozen
};

inline FrozenTargets freeze_targets(const StepCache& cache, const TrainConfig& cfg) {
    FrozenTargets f;
    f.ce_targets_unlabeled = cache.ce_targets_unlabeled;
    f.pseudo_frozen = !cfg.sckd.grad_through_score;
    if (!sckd_active(cfg.sckd)) return f;
    if (f.pseudo_frozen) {
        f.pseudo_novel = cache.pseudo_novel;
        f.pseudo_known = cache.pseudo_known;
    } else {
        f.score = cache.score;
        f.score_frozen = cfg.sckd.score_mode != ScoreMode::Cosine;
        f.labeled_side_frozen = cfg.sckd.use_replica;
        if (f.labeled_side_frozen) f.labeled_side_features = cache.score_labeled_features;
    }
    return f;
}

// Objective value with the frozen pieces held fixed. This is the function the
// analytic gradient differentiates, so finite differences of it are the
// ground truth for gradient checks.
inline double objective_with_frozen(const ModelState& model, const Batch& batch,
                                    const TrainConfig& cfg, const FrozenTargets& frozen) {
    const std::size_t n = batch.labeled_features.rows();
    const std::size_t m = batch.unlabeled_features.rows();
    const ForwardTrace lab = forward(model, batch.labeled_features);
    const ForwardTrace unlab = forward(model, batch.unlabeled_features);

    const Matrix lab_targets =
        one_hot_targets(batch.labeled_labels, model.config.num_known + model.config.num_novel);
    const double ce_l = ce_loss(lab.concat_probs, lab_targets);
    const double ce_u = ce_loss(unlab.concat_probs, frozen.ce_targets_unlabeled);
    const double ce = (static_cast<double>(n) * ce_l + static_cast<double>(m) * ce_u) /
                      static_cast<double>(n + m);

    if (!sckd_active(cfg.sckd)) return total_loss(ce, 0.0, cfg.sckd.beta);

    Matrix pseudo_novel, pseudo_known;
    if (frozen.pseudo_frozen) {
        pseudo_novel = frozen.pseudo_novel;
        pseudo_known = frozen.pseudo_known;
    } else {
        ScoreMatrix score;
        if (frozen.score_frozen) {
            score = frozen.score;
        } else {
            const Matrix& a =
                frozen.labeled_side_frozen ? frozen.labeled_side_features : lab.encoder.features;
            score = normalize_scores(cosine_scores(a, unlab.encoder.features),
                                     cfg.sckd.signed_max_norm);
        }
        pseudo_novel = synthesize_novel_pseudo(score, lab.novel_logits, cfg.sckd.alpha);
        pseudo_known = synthesize_known_pseudo(score, unlab.known_logits, cfg.sckd.alpha);
    }
    SckdLosses sl;
    if (cfg.sckd.use_k_to_n) {
        sl.k_to_n = mean_distill_kl(pseudo_novel, unlab.novel_logits, cfg.sckd.distill_temperature);
    }
    if (cfg.sckd.use_n_to_k) {
        sl.n_to_k = mean_distill_kl(pseudo_known, lab.known_logits, cfg.sckd.distill_temperature);
    }
    const double combined = 2.0 * (cfg.sckd.lambda * sl.k_to_n +
                                   (1.0 - cfg.sckd.lambda) * sl.n_to_k);
    return total_loss(ce, combined, cfg.sckd.beta);
}

// Analytic gradient of objective_with_frozen at the parameters that produced
// `cache`. CE flows through both heads of both traces; the distillation terms
// add prediction-side gradients always, and target-side plus score-matrix
// gradients only when the pseudo logits are live.
inline GradientSet objective_gradient(const ModelState& model, const Batch& batch,
                                      const TrainConfig& cfg, const FrozenTargets& frozen,
                                      const StepCache& cache) {
    const std::size_t num_known = model.config.num_known;
    const std::size_t n = batch.labeled_features.rows();
    const std::size_t m = batch.unlabeled_features.rows();
    const double tau = model.config.temperature;
    const double inv_rows = 1.0 / static_cast<double>(n + m);
    const std::size_t cols = num_known + model.config.num_novel;

    // CE through the concat softmax: (p - t) / (tau * (n + m)) per row.
    Matrix d_lab_concat(n, cols);
    for (std::size_t i = 0; i < d_lab_concat.size(); ++i) {
        d_lab_concat[i] =
            (cache.lab.concat_probs[i] - cache.ce_targets_labeled[i]) * inv_rows / tau;
    }
    Matrix d_unlab_concat(m, cols);
    for (std::size_t i = 0; i < d_unlab_concat.size(); ++i) {
        d_unlab_concat[i] =
            (cache.unlab.concat_probs[i] - frozen.ce_targets_unlabeled[i]) * inv_rows / tau;
    }
    Matrix d_lab_known = columns(d_lab_concat, 0, num_known);
    Matrix d_lab_novel = columns(d_lab_concat, num_known, cols);
    Matrix d_unlab_known = columns(d_unlab_concat, 0, num_known);
    Matrix d_unlab_novel = columns(d_unlab_concat, num_known, cols);

    Matrix d_lab_features_extra;
    Matrix d_unlab_features_extra;
    const Matrix* d_lab_extra_ptr = nullptr;
    const Matrix* d_unlab_extra_ptr = nullptr;

    if (sckd_active(cfg.sckd)) {
        const double w_kn = cfg.sckd.beta * 2.0 * cfg.sckd.lambda;
        const double w_nk = cfg.sckd.beta * 2.0 * (1.0 - cfg.sckd.lambda);
        const double temp = cfg.sckd.distill_temperature;
        const Matrix& pseudo_novel = frozen.pseudo_frozen ? frozen.pseudo_novel : cache.pseudo_novel;
        const Matrix& pseudo_known = frozen.pseudo_frozen ? frozen.pseudo_known : cache.pseudo_known;

        if (cfg.sckd.use_k_to_n && w_kn > 0.0) {
            add_inplace(d_unlab_novel,
                        distill_kl_pred_grad(pseudo_novel, cache.unlab.novel_logits, temp), w_kn);
        }
        if (cfg.sckd.use_n_to_k && w_nk > 0.0) {
            add_inplace(d_lab_known,
                        distill_kl_pred_grad(pseudo_known, cache.lab.known_logits, temp), w_nk);
        }

        if (!frozen.pseudo_frozen) {
            Matrix d_score(n, m, 0.0);
            bool score_grad = false;
            if (cfg.sckd.use_k_to_n && w_kn > 0.0) {
                Matrix g = distill_kl_target_grad(pseudo_novel, cache.unlab.novel_logits, temp);
                scale_inplace(g, w_kn);
                // pseudo_novel = alpha S^T L0 with L0 the labeled novel logits
                add_inplace(d_lab_novel, matmul(cache.score.values, g), cfg.sckd.alpha);
                add_inplace(d_score, matmul_nt(cache.lab.novel_logits, g), cfg.sckd.alpha);
                score_grad = true;
            }
            if (cfg.sckd.use_n_to_k && w_nk > 0.0) {
                Matrix g = distill_kl_target_grad(pseudo_known, cache.lab.known_logits, temp);
                scale_inplace(g, w_nk);
                // pseudo_known = alpha S K0 with K0 the unlabeled known logits
                add_inplace(d_unlab_known, matmul_tn(cache.score.values, g), cfg.sckd.alpha);
                add_inplace(d_score, matmul_nt(g, cache.unlab.known_logits), cfg.sckd.alpha);
                score_grad = true;
            }
            if (score_grad && !frozen.score_frozen) {
                const Matrix d_raw = normalize_scores_backward(cache.score, d_score);
                const Matrix& a = cache.score_labeled_features;
                const Matrix& b = cache.unlab.encoder.features;
                d_unlab_features_extra = Matrix(m, model.config.feature_dim, 0.0);
                Matrix* d_a = nullptr;
                if (!frozen.labeled_side_frozen) {
                    d_lab_features_extra = Matrix(n, model.config.feature_dim, 0.0);
                    d_a = &d_lab_features_extra;
                    d_lab_extra_ptr = &d_lab_features_extra;
                }
                cosine_scores_backward(a, b, cache.score.raw, d_raw, d_a, &d_unlab_features_extra);
                d_unlab_extra_ptr = &d_unlab_features_extra;
            }
        }
    }

    GradientSet g = GradientSet::zeros_like(model);
    backward(model, batch.labeled_features, cache.lab, &d_lab_known, &d_lab_novel,
             d_lab_extra_ptr, g);
    backward(model, batch.unlabeled_features, cache.unlab, &d_unlab_known, &d_unlab_novel,
             d_unlab_extra_ptr, g);
    return g;
}

}  // namespace sckd
