#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace snpiv {

class Rng;

using Vector = std::vector<double>;

/// Dense row-major real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Vector column(std::size_t j) const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

class NonFiniteError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SvdResult {
    Matrix left;    // m x k, orthonormal columns
    Vector singular;  // k values, nonincreasing
    Matrix right_t;   // k x n, orthonormal rows
};

struct EigenResult {
    Vector values;  // nonincreasing
    Matrix vectors; // columns are eigenvectors
};

inline constexpr double kDefaultPinvTolerance = 1e-10;

// Basic products. Shapes are checked and std::invalid_argument is thrown on mismatch.
Matrix multiply(const Matrix& a, const Matrix& b);
Matrix multiply_at_b(const Matrix& a, const Matrix& b);  // a^T b
Matrix multiply_a_bt(const Matrix& a, const Matrix& b);  // a b^T
Vector multiply(const Matrix& a, std::span<const double> x);
Vector multiply_t(const Matrix& a, std::span<const double> x);  // a^T x
Matrix transpose(const Matrix& a);
Matrix add(const Matrix& a, const Matrix& b, double scale_b = 1.0);
Matrix scaled(const Matrix& a, double s);

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(std::span<const double> values);

/// Thin SVD by one-sided (Hestenes) Jacobi rotations. Singular values below
/// max(m, n) * eps * sigma_max are returned as exact zeros, with the matching
/// left singular vectors completed to an orthonormal set.
SvdResult svd(const Matrix& m);

/// Moore-Penrose pseudo-inverse; singular values <= tol * sigma_max are dropped.
Matrix pinv(const Matrix& m, double tol = kDefaultPinvTolerance);

/// Haar-distributed orthogonal matrix: Householder QR of a standard Gaussian
/// matrix, with columns flipped so that diag(R) > 0.
Matrix random_orthogonal(std::size_t n, Rng& rng);

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
EigenResult eig_sym(const Matrix& m);

/// (g + lambda I)^{-1} b for lambda > 0, g^+ b for lambda == 0.
/// g must be symmetric positive semi-definite (eigenvalues >= -1e-8).
Vector ridge_solve(const Matrix& g, std::span<const double> b, double lambda,
                   double pinv_tol = kDefaultPinvTolerance);

/// Solves (g + lambda I) X = B column by column, same semantics as ridge_solve.
Matrix ridge_solve(const Matrix& g, const Matrix& b, double lambda,
                   double pinv_tol = kDefaultPinvTolerance);

}  // namespace snpiv
