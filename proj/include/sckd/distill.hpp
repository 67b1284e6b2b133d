#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sckd/data.hpp"
#include "sckd/error.hpp"
#include "sckd/matrix.hpp"
#include "sckd/numerics.hpp"

namespace sckd {

enum class ScoreMode { Cosine, Average, Random };

inline const char* score_mode_name(ScoreMode m) {
    switch (m) {
        case ScoreMode::Cosine: return "cosine";
        case ScoreMode::Average: return "average";
        default: return "random";
    }
}

inline ScoreMode score_mode_from_name(const std::string& name) {
    if (name == "cosine") return ScoreMode::Cosine;
    if (name == "average") return ScoreMode::Average;
    if (name == "random") return ScoreMode::Random;
    throw ConfigError("unknown score_mode '" + name + "' (expected cosine, average or random)");
}

struct SckdConfig {
    double alpha = 0.1;              // pseudo-logit scale
    double beta = 0.5;               // weight of L_SCKD in the total objective
    double lambda = 0.5;             // balance between the two distillation directions
    double distill_temperature = 1.0;
    ScoreMode score_mode = ScoreMode::Cosine;
    bool signed_max_norm = false;    // normalize by max entry instead of max |entry|
    bool grad_through_score = false; // let gradient flow through pseudo-label synthesis
    bool use_replica = true;         // labeled side of S from the frozen replica encoder
    bool use_k_to_n = true;
    bool use_n_to_k = true;

    void validate() const {
        if (alpha < 0.0) throw ConfigError("alpha must be >= 0");
        if (beta < 0.0) throw ConfigError("beta must be >= 0");
        if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0, 1]");
        if (distill_temperature <= 0.0) throw ConfigError("distill_temperature must be > 0");
    }
};

// S_ij = cos(labeled feature i, unlabeled feature j), N x M.
inline Matrix cosine_scores(const Matrix& labeled_feats, const Matrix& unlabeled_feats) {
    if (labeled_feats.cols() != unlabeled_feats.cols()) {
        throw ContractError("feature dims disagree in cosine_scores");
    }
    const std::size_t n = labeled_feats.rows();
    const std::size_t m = unlabeled_feats.rows();
    const std::size_t k = labeled_feats.cols();
    Matrix s(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* a = labeled_feats.row_ptr(i);
        for (std::size_t j = 0; j < m; ++j) {
            s(i, j) = cosine_similarity(a, unlabeled_feats.row_ptr(j), k);
        }
    }
    return s;
}

inline Matrix average_scores(std::size_t n, std::size_t m) { return Matrix(n, m, 1.0); }

inline Matrix random_scores(std::size_t n, std::size_t m, Rng& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix s(n, m);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = u(rng);
    return s;
}

// Normalized similarity matrix plus enough state to invert the normalization
// in the backward pass.
struct ScoreMatrix {
    Matrix values;  // raw / norm (or the raw values when degenerate)
    Matrix raw;
    double norm = 1.0;
    std::size_t argmax_row = 0;
    std::size_t argmax_col = 0;
    bool degenerate = false;  // no usable maximum, normalization skipped
};

// Default: divide by the largest |entry|. Signed variant divides by the
// largest entry and is degenerate when that entry is not positive.
inline ScoreMatrix normalize_scores(Matrix raw, bool signed_max = false) {
    raw.require_finite("score matrix");
    ScoreMatrix s;
    s.raw = raw;
    double best = signed_max ? -std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t i = 0; i < raw.rows(); ++i) {
        for (std::size_t j = 0; j < raw.cols(); ++j) {
            const double v = signed_max ? raw(i, j) : std::abs(raw(i, j));
            if (v > best) {
                best = v;
                s.argmax_row = i;
                s.argmax_col = j;
            }
        }
    }
    if (best <= 0.0) {
        s.degenerate = true;
        s.norm = 1.0;
        s.values = std::move(raw);
        return s;
    }
    s.norm = best;
    s.values = std::move(raw);
    scale_inplace(s.values, 1.0 / best);
    return s;
}

// d(loss)/d(raw scores) given d(loss)/d(normalized scores). The divisor
// depends on the raw entry at the argmax, which adds one rank-one term there.
inline Matrix normalize_scores_backward(const ScoreMatrix& s, const Matrix& d_values) {
    require_same_shape(s.raw, d_values, "normalize_scores_backward");
    if (s.degenerate) return d_values;
    Matrix d_raw = scaled(d_values, 1.0 / s.norm);
    double inner = 0.0;
    for (std::size_t i = 0; i < d_values.size(); ++i) inner += d_values[i] * s.raw[i];
    const double pivot = s.raw(s.argmax_row, s.argmax_col);
    const double sign = pivot >= 0.0 ? 1.0 : -1.0;
    d_raw(s.argmax_row, s.argmax_col) -= sign * inner / (s.norm * s.norm);
    return d_raw;
}

// d(loss)/d(features) for S_raw_ij = cos(a_i, b_j). Either output may be null
// when that side is frozen. Rows with zero norm get zero gradient.
inline void cosine_scores_backward(const Matrix& a, const Matrix& b, const Matrix& raw,
                                   const Matrix& d_raw, Matrix* d_a, Matrix* d_b) {
    const std::size_t n = a.rows();
    const std::size_t m = b.rows();
    const std::size_t k = a.cols();
    std::vector<double> a_norm(n), b_norm(m);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = a.row_ptr(i);
        a_norm[i] = std::sqrt(std::inner_product(r, r + k, r, 0.0));
    }
    for (std::size_t j = 0; j < m; ++j) {
        const double* r = b.row_ptr(j);
        b_norm[j] = std::sqrt(std::inner_product(r, r + k, r, 0.0));
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double g = d_raw(i, j);
            if (g == 0.0 || a_norm[i] <= 0.0 || b_norm[j] <= 0.0) continue;
            const double inv = 1.0 / (a_norm[i] * b_norm[j]);
            const double sij = raw(i, j);
            const double* ai = a.row_ptr(i);
            const double* bj = b.row_ptr(j);
            if (d_b != nullptr) {
                double* out = d_b->row_ptr(j);
                const double self = sij / (b_norm[j] * b_norm[j]);
                for (std::size_t t = 0; t < k; ++t) out[t] += g * (ai[t] * inv - self * bj[t]);
            }
            if (d_a != nullptr) {
                double* out = d_a->row_ptr(i);
                const double self = sij / (a_norm[i] * a_norm[i]);
                for (std::size_t t = 0; t < k; ++t) out[t] += g * (bj[t] * inv - self * ai[t]);
            }
        }
    }
}

// Pseudo logits for the novel head on unlabeled data, alpha * S^T * l^l_uh.
inline Matrix synthesize_novel_pseudo(const ScoreMatrix& s, const Matrix& labeled_novel_logits,
                                      double alpha) {
    if (s.values.rows() != labeled_novel_logits.rows()) {
        throw ContractError("score rows disagree with labeled logits in synthesize_novel_pseudo");
    }
    return scaled(matmul_tn(s.values, labeled_novel_logits), alpha);
}

// Pseudo logits for the known head on labeled data, alpha * S * l^u_kh.
inline Matrix synthesize_known_pseudo(const ScoreMatrix& s, const Matrix& unlabeled_known_logits,
                                      double alpha) {
    if (s.values.cols() != unlabeled_known_logits.rows()) {
        throw ContractError("score cols disagree with unlabeled logits in synthesize_known_pseudo");
    }
    return scaled(matmul(s.values, unlabeled_known_logits), alpha);
}

// Mean over rows of KL(softmax(target/T) || softmax(pred/T)).
inline double mean_distill_kl(const Matrix& target_logits, const Matrix& pred_logits, double temp) {
    require_same_shape(target_logits, pred_logits, "mean_distill_kl");
    const Matrix t = row_softmax(target_logits, temp);
    const Matrix q = row_softmax(pred_logits, temp);
    double total = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        total += kl_divergence(t.row_copy(i), q.row_copy(i));
    }
    return total / static_cast<double>(t.rows());
}

// d(mean KL)/d(pred logits) = (q - t) / (T * rows).
inline Matrix distill_kl_pred_grad(const Matrix& target_logits, const Matrix& pred_logits,
                                   double temp) {
    require_same_shape(target_logits, pred_logits, "distill_kl_pred_grad");
    const Matrix t = row_softmax(target_logits, temp);
    const Matrix q = row_softmax(pred_logits, temp);
    Matrix g(t.rows(), t.cols());
    const double scale = 1.0 / (temp * static_cast<double>(t.rows()));
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (q[i] - t[i]) * scale;
    return g;
}

// d(mean KL)/d(target logits) = t .* ((ln t - ln q) - row KL) / (T * rows).
// Needed only when gradient flows through the synthesized pseudo logits.
inline Matrix distill_kl_target_grad(const Matrix& target_logits, const Matrix& pred_logits,
                                     double temp) {
    require_same_shape(target_logits, pred_logits, "distill_kl_target_grad");
    const Matrix t = row_softmax(target_logits, temp);
    const Matrix q = row_softmax(pred_logits, temp);
    Matrix g(t.rows(), t.cols());
    const double scale = 1.0 / (temp * static_cast<double>(t.rows()));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        double row_kl = 0.0;
        std::vector<double> diff(t.cols());
        for (std::size_t c = 0; c < t.cols(); ++c) {
            const double tc = std::max(t(i, c), kProbFloor);
            const double qc = std::max(q(i, c), kProbFloor);
            diff[c] = std::log(tc) - std::log(qc);
            row_kl += t(i, c) > 0.0 ? t(i, c) * diff[c] : 0.0;
        }
        for (std::size_t c = 0; c < t.cols(); ++c) {
            g(i, c) = t(i, c) * (diff[c] - row_kl) * scale;
        }
    }
    return g;
}

struct SckdLosses {
    double k_to_n = 0.0;   // mean KL over unlabeled rows
    double n_to_k = 0.0;   // mean KL over labeled rows
    double combined = 0.0; // 2 (lambda k_to_n + (1 - lambda) n_to_k), disabled terms drop out
};

// Forward value of the self-cooperation losses given the four logit blocks.
inline SckdLosses sckd_losses(const SckdConfig& cfg, const ScoreMatrix& s,
                              const Matrix& labeled_known_logits,
                              const Matrix& labeled_novel_logits,
                              const Matrix& unlabeled_known_logits,
                              const Matrix& unlabeled_novel_logits) {
    cfg.validate();
    SckdLosses out;
    if (cfg.use_k_to_n) {
        const Matrix pseudo = synthesize_novel_pseudo(s, labeled_novel_logits, cfg.alpha);
        out.k_to_n = mean_distill_kl(pseudo, unlabeled_novel_logits, cfg.distill_temperature);
    }
    if (cfg.use_n_to_k) {
        const Matrix pseudo = synthesize_known_pseudo(s, unlabeled_known_logits, cfg.alpha);
        out.n_to_k = mean_distill_kl(pseudo, labeled_known_logits, cfg.distill_temperature);
    }
    out.combined = 2.0 * (cfg.lambda * (cfg.use_k_to_n ? out.k_to_n : 0.0) +
                          (1.0 - cfg.lambda) * (cfg.use_n_to_k ? out.n_to_k : 0.0));
    return out;
}

}  // namespace sckd
