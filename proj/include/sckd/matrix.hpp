#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "sckd/error.hpp"

namespace sckd {

// Dense row-major matrix of doubles. The universal carrier for features,
// logits, probabilities, similarity scores and parameter blocks.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) {
            throw ContractError("Matrix dimensions must be >= 1, got " +
                                std::to_string(rows) + "x" + std::to_string(cols));
        }
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        if (rows.size() == 0 || rows.begin()->size() == 0) {
            throw ContractError("Matrix::from_rows needs at least one row and column");
        }
        Matrix m(rows.size(), rows.begin()->size());
        std::size_t i = 0;
        for (const auto& r : rows) {
            if (r.size() != m.cols_) {
                throw ContractError("Matrix::from_rows: ragged row " + std::to_string(i));
            }
            std::size_t j = 0;
            for (double v : r) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    const double* row_ptr(std::size_t i) const { return data_.data() + i * cols_; }
    double* row_ptr(std::size_t i) { return data_.data() + i * cols_; }

    std::vector<double> row_copy(std::size_t i) const {
        return std::vector<double>(row_ptr(i), row_ptr(i) + cols_);
    }

    void set_row(std::size_t i, const std::vector<double>& values) {
        if (values.size() != cols_) {
            throw ContractError("set_row: expected " + std::to_string(cols_) +
                                " values, got " + std::to_string(values.size()));
        }
        for (std::size_t j = 0; j < cols_; ++j) (*this)(i, j) = values[j];
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    void require_finite(const std::string& who) const {
        if (!all_finite()) throw NumericError(who + ": non-finite entries");
    }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* who) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(who) + ": shape mismatch " +
                            std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                            std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

// C = A * B
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw ContractError("matmul: inner dimensions " + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.rows()));
    }
    Matrix c(a.rows(), b.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

// C = A^T * B
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ContractError("matmul_tn: row counts " + std::to_string(a.rows()) +
                            " vs " + std::to_string(b.rows()));
    }
    Matrix c(a.cols(), b.cols(), 0.0);
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

// C = A * B^T
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ContractError("matmul_nt: column counts " + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.cols()));
    }
    Matrix c(a.rows(), b.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row_ptr(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += arow[k] * brow[k];
            c(i, j) = acc;
        }
    }
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

inline void add_inplace(Matrix& a, const Matrix& b, double scale = 1.0) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += scale * b[i];
}

inline void scale_inplace(Matrix& a, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= s;
}

inline Matrix scaled(const Matrix& a, double s) {
    Matrix c = a;
    scale_inplace(c, s);
    return c;
}

// Row vector (1 x cols) of column sums.
inline Matrix column_sums(const Matrix& a) {
    Matrix s(1, a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double* arow = a.row_ptr(i);
        for (std::size_t j = 0; j < a.cols(); ++j) s(0, j) += arow[j];
    }
    return s;
}

// Horizontal concatenation [A | B].
inline Matrix hconcat(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw ContractError("hconcat: row counts " + std::to_string(a.rows()) +
                            " vs " + std::to_string(b.rows()));
    }
    Matrix c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
        for (std::size_t j = 0; j < b.cols(); ++j) c(i, a.cols() + j) = b(i, j);
    }
    return c;
}

inline Matrix vconcat(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw ContractError("vconcat: column counts " + std::to_string(a.cols()) +
                            " vs " + std::to_string(b.cols()));
    }
    Matrix c(a.rows() + b.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        std::copy(a.row_ptr(i), a.row_ptr(i) + a.cols(), c.row_ptr(i));
    }
    for (std::size_t i = 0; i < b.rows(); ++i) {
        std::copy(b.row_ptr(i), b.row_ptr(i) + b.cols(), c.row_ptr(a.rows() + i));
    }
    return c;
}

// Columns [begin, end) as a new matrix.
inline Matrix columns(const Matrix& a, std::size_t begin, std::size_t end) {
    if (begin >= end || end > a.cols()) {
        throw ContractError("columns: bad range [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") for " + std::to_string(a.cols()) + " cols");
    }
    Matrix c(a.rows(), end - begin);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = begin; j < end; ++j) c(i, j - begin) = a(i, j);
    return c;
}

inline double max_abs(const Matrix& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace sckd
