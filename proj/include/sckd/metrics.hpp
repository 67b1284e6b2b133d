#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

#include "sckd/error.hpp"
#include "sckd/matrix.hpp"

namespace sckd {

namespace detail {

// Jonker-Volgenant style shortest augmenting path assignment, O(n^3).
// Returns row -> column. Ties resolved by scan order, not lexicographically.
inline std::vector<std::size_t> jv_assignment(const Matrix& cost) {
    const std::size_t n = cost.rows();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0);  // match[j] = row occupying column j, 1-based
    std::vector<std::size_t> way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = match[j0];
            std::size_t j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assign(n);
    for (std::size_t j = 1; j <= n; ++j) assign[match[j] - 1] = j - 1;
    return assign;
}

inline double assignment_cost(const Matrix& cost, const std::vector<std::size_t>& assign) {
    double total = 0.0;
    for (std::size_t i = 0; i < assign.size(); ++i) total += cost(i, assign[i]);
    return total;
}

inline double optimal_assignment_cost(const Matrix& cost) {
    if (cost.rows() == 0) return 0.0;
    return assignment_cost(cost, jv_assignment(cost));
}

}  // namespace detail

// Minimum-cost bijection rows -> columns. Among all optimal assignments the
// lexicographically smallest one is returned: each row in turn takes the
// smallest column that still admits an optimal completion (checked by solving
// the remaining subproblem).
inline std::vector<std::size_t> hungarian(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw ContractError("hungarian needs a square matrix, got " + std::to_string(cost.rows()) +
                            "x" + std::to_string(cost.cols()));
    }
    cost.require_finite("hungarian cost");
    const std::size_t n = cost.rows();
    if (n == 0) return {};
    const double best = detail::optimal_assignment_cost(cost);
    const double tol = 1e-9 * std::max(1.0, std::abs(best));

    std::vector<std::size_t> assign(n);
    std::vector<std::size_t> free_cols(n);
    for (std::size_t j = 0; j < n; ++j) free_cols[j] = j;
    double fixed_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        bool placed = false;
        for (std::size_t c = 0; c < free_cols.size() && !placed; ++c) {
            const std::size_t col = free_cols[c];  // free_cols stays sorted
            double rest = 0.0;
            if (i + 1 < n) {
                std::vector<std::size_t> rest_cols;
                for (std::size_t j = 0; j < free_cols.size(); ++j) {
                    if (j != c) rest_cols.push_back(free_cols[j]);
                }
                Matrix sub(n - i - 1, n - i - 1);
                for (std::size_t r = 0; r < sub.rows(); ++r) {
                    for (std::size_t s = 0; s < rest_cols.size(); ++s) {
                        sub(r, s) = cost(i + 1 + r, rest_cols[s]);
                    }
                }
                rest = detail::optimal_assignment_cost(sub);
            }
            if (fixed_cost + cost(i, col) + rest <= best + tol) {
                assign[i] = col;
                fixed_cost += cost(i, col);
                free_cols.erase(free_cols.begin() + static_cast<std::ptrdiff_t>(c));
                placed = true;
            }
        }
        if (!placed) throw NumericError("hungarian refinement found no consistent column");
    }
    return assign;
}

namespace detail {

// Contingency counts with rows indexed by y_pred ids and columns by y_true
// ids, both over the sorted union alphabet (square by construction).
struct Contingency {
    std::vector<int> alphabet;
    Matrix counts;  // counts(pred_idx, true_idx)
};

inline Contingency union_contingency(const std::vector<int>& y_true,
                                     const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) {
        throw ContractError("label vectors differ in length");
    }
    if (y_true.empty()) throw ContractError("empty label vectors");
    Contingency c;
    c.alphabet = y_true;
    c.alphabet.insert(c.alphabet.end(), y_pred.begin(), y_pred.end());
    std::sort(c.alphabet.begin(), c.alphabet.end());
    c.alphabet.erase(std::unique(c.alphabet.begin(), c.alphabet.end()), c.alphabet.end());
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < c.alphabet.size(); ++i) index[c.alphabet[i]] = i;
    c.counts = Matrix(c.alphabet.size(), c.alphabet.size(), 0.0);
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        c.counts(index[y_pred[i]], index[y_true[i]]) += 1.0;
    }
    return c;
}

}  // namespace detail

struct ClusterMatch {
    double accuracy = 0.0;
    std::vector<int> alphabet;            // sorted union of the two id sets
    std::vector<std::size_t> assignment;  // alphabet index of pred -> alphabet index of true
};

// Best-permutation agreement, Hungarian over the negated contingency.
inline ClusterMatch cluster_match(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    detail::Contingency c = detail::union_contingency(y_true, y_pred);
    ClusterMatch out;
    out.alphabet = c.alphabet;
    out.assignment = hungarian(scaled(c.counts, -1.0));
    double agree = 0.0;
    for (std::size_t i = 0; i < out.assignment.size(); ++i) {
        agree += c.counts(i, out.assignment[i]);
    }
    out.accuracy = agree / static_cast<double>(y_true.size());
    return out;
}

inline double cluster_accuracy(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    return cluster_match(y_true, y_pred).accuracy;
}

// I(U;V) / sqrt(H(U) H(V)) with natural logs. Both partitions single-cluster
// gives 1, exactly one single-cluster gives 0.
inline double nmi(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    detail::Contingency c = detail::union_contingency(y_true, y_pred);
    const double n = static_cast<double>(y_true.size());
    const std::size_t k = c.alphabet.size();
    std::vector<double> pred_sum(k, 0.0), true_sum(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            pred_sum[i] += c.counts(i, j);
            true_sum[j] += c.counts(i, j);
        }
    }
    double h_pred = 0.0, h_true = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (pred_sum[i] > 0.0) h_pred -= pred_sum[i] / n * std::log(pred_sum[i] / n);
        if (true_sum[i] > 0.0) h_true -= true_sum[i] / n * std::log(true_sum[i] / n);
    }
    if (h_pred == 0.0 && h_true == 0.0) return 1.0;
    if (h_pred == 0.0 || h_true == 0.0) return 0.0;
    double info = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double nij = c.counts(i, j);
            if (nij <= 0.0) continue;
            info += nij / n * std::log(nij * n / (pred_sum[i] * true_sum[j]));
        }
    }
    return std::clamp(info / std::sqrt(h_pred * h_true), 0.0, 1.0);
}

// Pair-counting adjusted Rand index. On a zero denominator: 1 when the two
// partitions coincide, 0 otherwise.
inline double ari(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size()) throw ContractError("label vectors differ in length");
    if (y_true.size() < 2) throw ContractError("ari needs at least two samples");
    detail::Contingency c = detail::union_contingency(y_true, y_pred);
    const std::size_t k = c.alphabet.size();
    auto comb2 = [](double x) { return x * (x - 1.0) / 2.0; };
    std::vector<double> pred_sum(k, 0.0), true_sum(k, 0.0);
    double index = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double nij = c.counts(i, j);
            pred_sum[i] += nij;
            true_sum[j] += nij;
            index += comb2(nij);
        }
    }
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        a += comb2(pred_sum[i]);
        b += comb2(true_sum[i]);
    }
    const double total_pairs = comb2(static_cast<double>(y_true.size()));
    const double expected = a * b / total_pairs;
    const double max_index = 0.5 * (a + b);
    const double denom = max_index - expected;
    if (denom == 0.0) {
        // equal partitions show up as a bijective contingency
        bool bijective = true;
        for (std::size_t i = 0; i < k && bijective; ++i) {
            std::size_t row_nz = 0, col_nz = 0;
            for (std::size_t j = 0; j < k; ++j) {
                if (c.counts(i, j) > 0.0) ++row_nz;
                if (c.counts(j, i) > 0.0) ++col_nz;
            }
            const bool row_used = pred_sum[i] > 0.0;
            const bool col_used = true_sum[i] > 0.0;
            if ((row_used && row_nz != 1) || (col_used && col_nz != 1)) bijective = false;
        }
        return bijective ? 1.0 : 0.0;
    }
    return (index - expected) / denom;
}

}  // namespace sckd
