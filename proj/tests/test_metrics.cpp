#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "sckd/metrics.hpp"

using namespace sckd;

namespace {

// Exhaustive oracle. Permutations are visited in lexicographic order and only
// strict improvements are kept, so ties resolve to the lex-smallest optimum.
std::vector<std::size_t> brute_force_assignment(const Matrix& cost) {
    const std::size_t n = cost.rows();
    std::vector<std::size_t> perm(n), best(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    best = perm;
    double best_total = std::numeric_limits<double>::infinity();
    do {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
        if (total < best_total - 1e-12) {
            best_total = total;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

double brute_force_cluster_accuracy(const std::vector<int>& y_true,
                                    const std::vector<int>& y_pred) {
    std::vector<int> alphabet = y_true;
    alphabet.insert(alphabet.end(), y_pred.begin(), y_pred.end());
    std::sort(alphabet.begin(), alphabet.end());
    alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
    std::vector<std::size_t> perm(alphabet.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::map<int, std::size_t> index;
    for (std::size_t i = 0; i < alphabet.size(); ++i) index[alphabet[i]] = i;
    double best = 0.0;
    do {
        double agree = 0.0;
        for (std::size_t i = 0; i < y_true.size(); ++i) {
            if (perm[index[y_pred[i]]] == index[y_true[i]]) agree += 1.0;
        }
        best = std::max(best, agree);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best / static_cast<double>(y_true.size());
}

// Pair-enumeration ARI, straight from the definition.
double pair_count_ari(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
    const std::size_t n = y_true.size();
    double same_true = 0.0, same_pred = 0.0, same_both = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool t = y_true[i] == y_true[j];
            const bool p = y_pred[i] == y_pred[j];
            same_true += t;
            same_pred += p;
            same_both += t && p;
            pairs += 1.0;
        }
    }
    const double expected = same_pred * same_true / pairs;
    const double max_index = 0.5 * (same_pred + same_true);
    if (max_index == expected) {
        std::map<int, int> forward_map, reverse_map;
        for (std::size_t i = 0; i < n; ++i) {
            const auto f = forward_map.emplace(y_pred[i], y_true[i]);
            const auto r = reverse_map.emplace(y_true[i], y_pred[i]);
            if (f.first->second != y_true[i] || r.first->second != y_pred[i]) return 0.0;
        }
        return 1.0;
    }
    return (same_both - expected) / (max_index - expected);
}

std::vector<int> random_labels(std::size_t n, int alphabet, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, alphabet - 1);
    std::vector<int> y(n);
    for (auto& v : y) v = pick(rng);
    return y;
}

}  // namespace

TEST_CASE("hungarian hand examples") {
    Matrix diag_friendly(3, 3, 1.0);
    for (std::size_t i = 0; i < 3; ++i) diag_friendly(i, i) = 0.0;
    REQUIRE(hungarian(diag_friendly) == std::vector<std::size_t>{0, 1, 2});

    const Matrix swap = Matrix::from_rows({{4.0, 1.0}, {2.0, 3.0}});
    REQUIRE(hungarian(swap) == std::vector<std::size_t>{1, 0});
    REQUIRE(detail::assignment_cost(swap, {1, 0}) == 3.0);

    // every assignment optimal: lexicographically smallest is the identity
    REQUIRE(hungarian(Matrix(4, 4, 1.0)) == std::vector<std::size_t>{0, 1, 2, 3});
    REQUIRE(hungarian(Matrix::from_rows({{7.0}})) == std::vector<std::size_t>{0});

    REQUIRE_THROWS_AS(hungarian(Matrix(2, 3, 0.0)), ContractError);
    Matrix bad(2, 2, 0.0);
    bad(0, 1) = std::nan("");
    REQUIRE_THROWS_AS(hungarian(bad), NumericError);
}

TEST_CASE("hungarian matches the exhaustive oracle") {
    std::mt19937_64 rng(404);
    // small integer costs force plenty of exact ties
    std::uniform_int_distribution<int> coin(0, 9);
    for (std::size_t n = 1; n <= 7; ++n) {
        for (int rep = 0; rep < 120; ++rep) {
            Matrix cost(n, n);
            for (std::size_t i = 0; i < cost.size(); ++i) cost[i] = coin(rng);
            REQUIRE(hungarian(cost) == brute_force_assignment(cost));
        }
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t n = 2; n <= 7; ++n) {
        for (int rep = 0; rep < 40; ++rep) {
            Matrix cost(n, n);
            for (std::size_t i = 0; i < cost.size(); ++i) cost[i] = u(rng);
            const auto got = hungarian(cost);
            const auto want = brute_force_assignment(cost);
            REQUIRE(got == want);
        }
    }
}

TEST_CASE("cluster accuracy hand examples") {
    REQUIRE(cluster_accuracy({0, 0, 1, 1}, {1, 1, 1, 1}) == 0.5);

    const std::vector<int> y_true{0, 0, 1, 1, 2, 2};
    const std::vector<int> y_pred{1, 1, 0, 0, 0, 2};
    const double expect = brute_force_cluster_accuracy(y_true, y_pred);
    REQUIRE(expect == Catch::Approx(5.0 / 6.0).margin(1e-12));
    REQUIRE(cluster_accuracy(y_true, y_pred) == Catch::Approx(expect).margin(1e-12));

    // identity already optimal: equals plain accuracy
    REQUIRE(cluster_accuracy({0, 0, 0, 1, 1, 1}, {0, 0, 0, 1, 1, 0}) ==
            Catch::Approx(5.0 / 6.0).margin(1e-12));

    REQUIRE_THROWS_AS(cluster_accuracy({}, {}), ContractError);
    REQUIRE_THROWS_AS(cluster_accuracy({0, 1}, {0}), ContractError);
}

TEST_CASE("cluster accuracy properties") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 60; ++rep) {
        const std::vector<int> y_true = random_labels(12, 4, rng);
        const std::vector<int> y_pred = random_labels(12, 4, rng);
        const double acc = cluster_accuracy(y_true, y_pred);
        REQUIRE(acc == Catch::Approx(brute_force_cluster_accuracy(y_true, y_pred)).margin(1e-12));

        // bijective relabeling of the predictions changes nothing
        std::vector<int> relabeled = y_pred;
        for (auto& v : relabeled) v = (v + 5) * 3;
        REQUIRE(cluster_accuracy(y_true, relabeled) == Catch::Approx(acc).margin(1e-12));

        // permutation of the truth alphabet scores 1.0
        std::vector<int> perfect = y_true;
        for (auto& v : perfect) v = 3 - v;
        REQUIRE(cluster_accuracy(y_true, perfect) == 1.0);
    }

    // balanced ground truth bounds the best permutation agreement below by 1/C
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<int> y_true;
        for (int c = 0; c < 4; ++c) y_true.insert(y_true.end(), 5, c);
        const std::vector<int> y_pred = random_labels(y_true.size(), 4, rng);
        const double acc = cluster_accuracy(y_true, y_pred);
        REQUIRE(acc >= 0.25 - 1e-12);
        REQUIRE(acc <= 1.0 + 1e-12);
    }
}

TEST_CASE("nmi examples and conventions") {
    REQUIRE(nmi({0, 0, 1, 1}, {0, 0, 1, 1}) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(nmi({0, 0, 1, 1}, {1, 1, 0, 0}) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(nmi({0, 0, 1, 1}, {0, 1, 0, 1}) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(nmi({0, 0, 0}, {0, 0, 0}) == 1.0);
    REQUIRE(nmi({0, 0, 0}, {0, 1, 2}) == 0.0);
    REQUIRE(nmi({0, 1, 2}, {0, 0, 0}) == 0.0);
    REQUIRE_THROWS_AS(nmi({}, {}), ContractError);
}

TEST_CASE("nmi agrees with a from-scratch oracle and is symmetric") {
    auto oracle = [](const std::vector<int>& a, const std::vector<int>& b) {
        const double n = static_cast<double>(a.size());
        std::map<int, double> pa, pb;
        std::map<std::pair<int, int>, double> joint;
        for (std::size_t i = 0; i < a.size(); ++i) {
            pa[a[i]] += 1.0 / n;
            pb[b[i]] += 1.0 / n;
            joint[{a[i], b[i]}] += 1.0 / n;
        }
        double ha = 0.0, hb = 0.0, info = 0.0;
        for (const auto& [k, p] : pa) ha -= p * std::log(p);
        for (const auto& [k, p] : pb) hb -= p * std::log(p);
        for (const auto& [k, p] : joint) info += p * std::log(p / (pa[k.first] * pb[k.second]));
        if (ha == 0.0 && hb == 0.0) return 1.0;
        if (ha == 0.0 || hb == 0.0) return 0.0;
        return info / std::sqrt(ha * hb);
    };
    std::mt19937_64 rng(55);
    for (int rep = 0; rep < 80; ++rep) {
        const std::vector<int> a = random_labels(20, 3, rng);
        const std::vector<int> b = random_labels(20, 4, rng);
        const double got = nmi(a, b);
        REQUIRE(got == Catch::Approx(oracle(a, b)).margin(1e-10));
        REQUIRE(got == Catch::Approx(nmi(b, a)).margin(1e-12));
        REQUIRE(got >= 0.0);
        REQUIRE(got <= 1.0);
    }
}

TEST_CASE("ari examples and conventions") {
    REQUIRE(ari({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    REQUIRE(ari({0, 0, 1, 1}, {1, 1, 0, 0}) == 1.0);
    REQUIRE(ari({0, 0, 1, 1}, {0, 1, 0, 1}) == Catch::Approx(-0.5).margin(1e-12));
    // equal partitions with a vanishing denominator
    REQUIRE(ari({0, 0}, {1, 1}) == 1.0);
    REQUIRE(ari({0, 1}, {1, 0}) == 1.0);
    REQUIRE_THROWS_AS(ari({0}, {0}), ContractError);
    REQUIRE_THROWS_AS(ari({0, 1}, {0}), ContractError);
}

TEST_CASE("ari agrees with the pair enumeration oracle") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 80; ++rep) {
        const std::vector<int> a = random_labels(24, 3, rng);
        const std::vector<int> b = random_labels(24, 4, rng);
        const double got = ari(a, b);
        REQUIRE(got == Catch::Approx(pair_count_ari(a, b)).margin(1e-10));
        REQUIRE(got == Catch::Approx(ari(b, a)).margin(1e-12));
        REQUIRE(got >= -1.0 - 1e-12);
        REQUIRE(got <= 1.0 + 1e-12);

        std::vector<int> relabeled = b;
        for (auto& v : relabeled) v = 7 - v;
        REQUIRE(ari(a, relabeled) == Catch::Approx(got).margin(1e-12));
    }
}
