#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sckd/data.hpp"
#include "sckd/error.hpp"
#include "sckd/matrix.hpp"
#include "sckd/metrics.hpp"
#include "sckd/model.hpp"

namespace sckd {

// Metrics are absent (not zero) when the subset that defines them is empty.
// `permutation` maps novel cluster slot -> novel class offset; it is empty
// when no novel mapping was computed.
struct EvalReport {
    std::string protocol;
    std::optional<double> known_acc;
    std::optional<double> novel_cluster_acc;
    std::optional<double> all_acc;
    std::optional<double> nmi;
    std::optional<double> ari;
    std::vector<std::size_t> permutation;
};

struct EvalOptions {
    // Restrict the task-agnostic novel Hungarian mapping to novel slots;
    // known-slot predictions on novel samples are then unconditional errors.
    bool novel_map_novel_slots_only = true;
};

inline std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row_ptr(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < m.cols(); ++j) {
            if (row[j] > row[best]) best = j;
        }
        out[i] = static_cast<int>(best);
    }
    return out;
}

namespace detail {

struct NovelMatch {
    double matched = 0.0;                 // samples agreeing under the best mapping
    std::vector<std::size_t> mapping;     // slot -> class offset, bijection over [0, C^u)
};

// Hungarian over the full C^u x C^u contingency of (predicted offset, true
// offset). Ids outside [0, C^u) are a caller bug.
inline NovelMatch match_novel_ids(const std::vector<int>& true_offsets,
                                  const std::vector<int>& pred_offsets, std::size_t num_novel) {
    if (true_offsets.size() != pred_offsets.size()) {
        throw ContractError("novel id vectors differ in length");
    }
    Matrix counts(num_novel, num_novel, 0.0);
    for (std::size_t i = 0; i < true_offsets.size(); ++i) {
        const int p = pred_offsets[i];
        const int t = true_offsets[i];
        if (p < 0 || t < 0 || static_cast<std::size_t>(p) >= num_novel ||
            static_cast<std::size_t>(t) >= num_novel) {
            throw ContractError("novel id outside [0, C^u)");
        }
        counts(static_cast<std::size_t>(p), static_cast<std::size_t>(t)) += 1.0;
    }
    NovelMatch out;
    out.mapping = hungarian(scaled(counts, -1.0));
    for (std::size_t j = 0; j < num_novel; ++j) out.matched += counts(j, out.mapping[j]);
    return out;
}

inline void fill_novel_metrics(EvalReport& r, const std::vector<int>& true_ids,
                               const std::vector<int>& pred_ids) {
    r.nmi = nmi(true_ids, pred_ids);
    if (true_ids.size() >= 2) r.ari = ari(true_ids, pred_ids);
}

}  // namespace detail

// Known samples scored by the known head alone, novel samples clustered by
// the novel head alone.
inline EvalReport task_aware_from_logits(const Matrix& known_logits,
                                         const std::vector<int>& known_true,
                                         const Matrix& novel_logits,
                                         const std::vector<int>& novel_true_offsets,
                                         std::size_t num_novel) {
    EvalReport r;
    r.protocol = "task_aware";
    const std::size_t nk = known_true.size();
    const std::size_t nn = novel_true_offsets.size();
    double known_correct = 0.0;
    if (nk > 0) {
        const std::vector<int> pred = argmax_rows(known_logits);
        for (std::size_t i = 0; i < nk; ++i) {
            if (pred[i] == known_true[i]) known_correct += 1.0;
        }
        r.known_acc = known_correct / static_cast<double>(nk);
    }
    double novel_matched = 0.0;
    if (nn > 0) {
        const std::vector<int> pred = argmax_rows(novel_logits);
        detail::NovelMatch match = detail::match_novel_ids(novel_true_offsets, pred, num_novel);
        novel_matched = match.matched;
        r.novel_cluster_acc = novel_matched / static_cast<double>(nn);
        r.permutation = std::move(match.mapping);
        detail::fill_novel_metrics(r, novel_true_offsets, pred);
    }
    if (nk + nn > 0) {
        r.all_acc = (known_correct + novel_matched) / static_cast<double>(nk + nn);
    }
    return r;
}

// Both subsets predicted by argmax over the full concat logits. Novel samples
// landing in known slots are errors under the default restricted mapping.
inline EvalReport task_agnostic_from_logits(const Matrix& concat_logits_known,
                                            const std::vector<int>& known_true,
                                            const Matrix& concat_logits_novel,
                                            const std::vector<int>& novel_true_global,
                                            std::size_t num_known, std::size_t num_novel,
                                            const EvalOptions& opts = {}) {
    EvalReport r;
    r.protocol = "task_agnostic";
    const std::size_t nk = known_true.size();
    const std::size_t nn = novel_true_global.size();
    const int cl = static_cast<int>(num_known);
    double known_correct = 0.0;
    if (nk > 0) {
        const std::vector<int> pred = argmax_rows(concat_logits_known);
        for (std::size_t i = 0; i < nk; ++i) {
            if (pred[i] == known_true[i]) known_correct += 1.0;
        }
        r.known_acc = known_correct / static_cast<double>(nk);
    }
    double novel_matched = 0.0;
    if (nn > 0) {
        const std::vector<int> pred = argmax_rows(concat_logits_novel);
        if (opts.novel_map_novel_slots_only) {
            std::vector<int> sub_true, sub_pred;
            for (std::size_t i = 0; i < nn; ++i) {
                if (pred[i] >= cl) {
                    sub_true.push_back(novel_true_global[i] - cl);
                    sub_pred.push_back(pred[i] - cl);
                }
            }
            if (!sub_true.empty()) {
                detail::NovelMatch match =
                    detail::match_novel_ids(sub_true, sub_pred, num_novel);
                novel_matched = match.matched;
                r.permutation = std::move(match.mapping);
            }
            r.novel_cluster_acc = novel_matched / static_cast<double>(nn);
        } else {
            // union-alphabet mapping; no novel-slot bijection to report
            novel_matched =
                cluster_accuracy(novel_true_global, pred) * static_cast<double>(nn);
            r.novel_cluster_acc = novel_matched / static_cast<double>(nn);
        }
        detail::fill_novel_metrics(r, novel_true_global, pred);
    }
    if (nk + nn > 0) {
        r.all_acc = (known_correct + novel_matched) / static_cast<double>(nk + nn);
    }
    return r;
}

namespace detail {

inline void require_matching_classes(const ModelState& model, const DiscoveryDataset& test) {
    if (test.num_known() != model.config.num_known ||
        test.num_novel() != model.config.num_novel) {
        throw ContractError("test set class counts disagree with the model heads");
    }
    if (test.feature_dim() != model.config.input_dim) {
        throw ContractError("test set feature_dim disagrees with the model input");
    }
}

inline std::vector<int> known_labels(const DiscoveryDataset& test) {
    std::vector<int> y(test.labeled_size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = test.labeled_label(i);
    return y;
}

inline std::vector<int> novel_hidden_labels(const DiscoveryDataset& test) {
    std::vector<int> y(test.unlabeled_size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = test.hidden_label_for_eval(i);
    return y;
}

}  // namespace detail

inline EvalReport evaluate_task_aware(const ModelState& model, const DiscoveryDataset& test) {
    detail::require_matching_classes(model, test);
    std::vector<int> known_true = detail::known_labels(test);
    std::vector<int> novel_true = detail::novel_hidden_labels(test);
    const int cl = static_cast<int>(model.config.num_known);
    for (int& y : novel_true) y -= cl;
    Matrix known_logits(1, 1), novel_logits(1, 1);
    if (!known_true.empty()) {
        known_logits = forward(model, test.labeled_matrix()).known_logits;
    }
    if (!novel_true.empty()) {
        novel_logits = forward(model, test.unlabeled_matrix()).novel_logits;
    }
    return task_aware_from_logits(known_logits, known_true, novel_logits, novel_true,
                                  model.config.num_novel);
}

inline EvalReport evaluate_task_agnostic(const ModelState& model, const DiscoveryDataset& test,
                                         const EvalOptions& opts = {}) {
    detail::require_matching_classes(model, test);
    std::vector<int> known_true = detail::known_labels(test);
    std::vector<int> novel_true = detail::novel_hidden_labels(test);
    Matrix concat_known(1, 1), concat_novel(1, 1);
    if (!known_true.empty()) {
        const ForwardTrace t = forward(model, test.labeled_matrix());
        concat_known = hconcat(t.known_logits, t.novel_logits);
    }
    if (!novel_true.empty()) {
        const ForwardTrace t = forward(model, test.unlabeled_matrix());
        concat_novel = hconcat(t.known_logits, t.novel_logits);
    }
    return task_agnostic_from_logits(concat_known, known_true, concat_novel, novel_true,
                                     model.config.num_known, model.config.num_novel, opts);
}

}  // namespace sckd
