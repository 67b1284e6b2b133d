#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sckd/error.hpp"
#include "sckd/matrix.hpp"

namespace sckd {

// Probabilities are clamped to this floor before any logarithm so that KL and
// cross-entropy stay defined when an entry underflows.
inline constexpr double kProbFloor = 1e-12;

// Temperature softmax, numerically stabilised by max-subtraction
// (temperatures as low as 0.1 amplify logits tenfold).
inline std::vector<double> softmax(const std::vector<double>& logits, double temperature) {
    if (temperature <= 0.0) {
        throw ConfigError("softmax temperature must be > 0, got " + std::to_string(temperature));
    }
    if (logits.empty()) throw ContractError("softmax: empty logits");
    double max_logit = logits[0];
    for (double v : logits) {
        if (!std::isfinite(v)) throw NumericError("softmax: non-finite logit");
        max_logit = std::max(max_logit, v);
    }
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - max_logit) / temperature);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

// Row-wise temperature softmax.
inline Matrix row_softmax(const Matrix& logits, double temperature) {
    if (temperature <= 0.0) {
        throw ConfigError("softmax temperature must be > 0, got " + std::to_string(temperature));
    }
    Matrix out(logits.rows(), logits.cols());
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        const double* z = logits.row_ptr(i);
        double max_logit = z[0];
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            if (!std::isfinite(z[j])) throw NumericError("row_softmax: non-finite logit");
            max_logit = std::max(max_logit, z[j]);
        }
        double sum = 0.0;
        double* o = out.row_ptr(i);
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            o[j] = std::exp((z[j] - max_logit) / temperature);
            sum += o[j];
        }
        for (std::size_t j = 0; j < logits.cols(); ++j) o[j] /= sum;
    }
    return out;
}

inline void require_distribution(const std::vector<double>& p, const char* who) {
    double sum = 0.0;
    for (double v : p) sum += v;
    if (std::abs(sum - 1.0) > 1e-6) {
        throw ContractError(std::string(who) + ": distribution sums to " + std::to_string(sum));
    }
}

// KL(target || prediction) = sum_c t_c * ln(t_c / p_c), entries clamped to
// kProbFloor before the logarithms.
inline double kl_divergence(const std::vector<double>& target,
                            const std::vector<double>& prediction) {
    if (target.size() != prediction.size()) {
        throw ContractError("kl_divergence: size mismatch " + std::to_string(target.size()) +
                            " vs " + std::to_string(prediction.size()));
    }
    require_distribution(target, "kl_divergence target");
    require_distribution(prediction, "kl_divergence prediction");
    double kl = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double t = target[i];
        if (t <= 0.0) continue;  // 0 * ln 0 = 0
        const double tc = std::max(t, kProbFloor);
        const double pc = std::max(prediction[i], kProbFloor);
        kl += t * (std::log(tc) - std::log(pc));
    }
    return kl;
}

// Cosine similarity of two equal-length vectors. An all-zero vector carries no
// similarity information; cos(0, v) is defined as 0 so degenerate features
// cannot inject NaN into a score matrix.
inline double cosine_similarity(const double* u, const double* v, std::size_t n) {
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

inline double cosine_similarity(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) {
        throw ContractError("cosine_similarity: dimension mismatch " +
                            std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
    if (u.empty()) throw ContractError("cosine_similarity: empty vectors");
    return cosine_similarity(u.data(), v.data(), u.size());
}

// Central finite differences of a scalar function over one parameter block.
// Test oracle for every analytic gradient in the trainer.
inline Matrix finite_difference_gradient(const std::function<double(const Matrix&)>& loss_fn,
                                         const Matrix& params, double h) {
    if (h <= 0.0) throw ConfigError("finite_difference_gradient: h must be > 0");
    Matrix grad(params.rows(), params.cols(), 0.0);
    Matrix work = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = work[i];
        work[i] = saved + h;
        const double up = loss_fn(work);
        work[i] = saved - h;
        const double down = loss_fn(work);
        work[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace sckd
