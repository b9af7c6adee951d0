#include "snpiv/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "snpiv/rng.hpp"

namespace snpiv {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

void require_finite(const Matrix& m) {
    if (!all_finite(m.data())) throw NonFiniteError("matrix has non-finite entries");
}

// Column-major scratch copy for the Jacobi sweeps.
std::vector<Vector> columns_of(const Matrix& m) {
    std::vector<Vector> cols(m.cols(), Vector(m.rows()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) cols[j][i] = m(i, j);
    return cols;
}

void rotate_pair(Vector& a, Vector& b, double c, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double x = a[i];
        const double y = b[i];
        a[i] = c * x - s * y;
        b[i] = s * x + c * y;
    }
}

// Fills zero columns of `cols` so the full set is orthonormal.
void complete_orthonormal(std::vector<Vector>& cols, const std::vector<bool>& valid) {
    const std::size_t m = cols.empty() ? 0 : cols.front().size();
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (valid[j]) kept.push_back(j);
    std::size_t candidate = 0;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (valid[j]) continue;
        while (candidate < m) {
            Vector v(m, 0.0);
            v[candidate++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (std::size_t k : kept) {
                    const double proj = dot(v, cols[k]);
                    for (std::size_t i = 0; i < m; ++i) v[i] -= proj * cols[k][i];
                }
            }
            const double len = norm(v);
            if (len > 0.5) {
                for (double& x : v) x /= len;
                cols[j] = std::move(v);
                kept.push_back(j);
                break;
            }
        }
    }
}

SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    auto w = columns_of(a);
    std::vector<Vector> v(n, Vector(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

    constexpr int kMaxSweeps = 80;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot(w[p], w[p]);
                const double beta = dot(w[q], w[q]);
                const double gamma = dot(w[p], w[q]);
                if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                rotate_pair(w[p], w[q], c, s);
                rotate_pair(v[p], v[q], c, s);
            }
        }
        if (!rotated) break;
    }

    Vector sigma(n);
    for (std::size_t j = 0; j < n; ++j) sigma[j] = norm(w[j]);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });

    const double sigma_max = n == 0 ? 0.0 : sigma[order.front()];
    const double cutoff = static_cast<double>(std::max(m, n)) * kEps * sigma_max;

    SvdResult out{Matrix(m, n), Vector(n), Matrix(n, n)};
    std::vector<Vector> left(n, Vector(m, 0.0));
    std::vector<bool> valid(n, false);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        const double s = sigma[j];
        if (s > cutoff && s > 0.0) {
            out.singular[k] = s;
            for (std::size_t i = 0; i < m; ++i) left[k][i] = w[j][i] / s;
            valid[k] = true;
        } else {
            out.singular[k] = 0.0;
        }
        for (std::size_t i = 0; i < n; ++i) out.right_t(k, i) = v[j][i];
    }
    complete_orthonormal(left, valid);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < m; ++i) out.left(i, k) = left[k][i];
    return out;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows * cols, "Matrix: data length != rows * cols");
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

Vector Matrix::column(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), "multiply: shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix multiply_at_b(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows(), "multiply_at_b: shape mismatch");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto arow = a.row(k);
        auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = arow[i];
            auto crow = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix multiply_a_bt(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.cols(), "multiply_a_bt: shape mismatch");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(arow, b.row(j));
    }
    return c;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), "multiply: vector length mismatch");
    Vector y(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
    return y;
}

Vector multiply_t(const Matrix& a, std::span<const double> x) {
    require(a.rows() == x.size(), "multiply_t: vector length mismatch");
    Vector y(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto arow = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) y[j] += arow[j] * x[i];
    }
    return y;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix add(const Matrix& a, const Matrix& b, double scale_b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] += scale_b * bd[i];
    return c;
}

Matrix scaled(const Matrix& a, double s) {
    Matrix c = a;
    for (double& x : c.data()) x *= s;
    return c;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double frobenius_norm(const Matrix& a) { return norm(a.data()); }

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double x) { return std::isfinite(x); });
}

SvdResult svd(const Matrix& m) {
    require_finite(m);
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(transpose(m));
    return {transpose(t.right_t), std::move(t.singular), transpose(t.left)};
}

Matrix pinv(const Matrix& m, double tol) {
    require(tol >= 0.0, "pinv: negative tolerance");
    const SvdResult s = svd(m);
    const double smax = s.singular.empty() ? 0.0 : s.singular.front();
    // pinv = V diag(1/s) U^T, an n x m matrix.
    Matrix out(m.cols(), m.rows());
    for (std::size_t k = 0; k < s.singular.size(); ++k) {
        const double sk = s.singular[k];
        if (sk <= tol * smax || sk == 0.0) continue;
        const double inv = 1.0 / sk;
        for (std::size_t i = 0; i < m.cols(); ++i) {
            const double vik = s.right_t(k, i) * inv;
            if (vik == 0.0) continue;
            auto orow = out.row(i);
            for (std::size_t j = 0; j < m.rows(); ++j) orow[j] += vik * s.left(j, k);
        }
    }
    return out;
}

Matrix random_orthogonal(std::size_t n, Rng& rng) {
    require(n >= 1, "random_orthogonal: n must be >= 1");
    Matrix r(n, n);
    for (double& x : r.data()) x = rng.normal();
    Matrix q = Matrix::identity(n);
    Vector v(n);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        double len2 = 0.0;
        for (std::size_t i = k; i < n; ++i) len2 += r(i, k) * r(i, k);
        const double len = std::sqrt(len2);
        if (len == 0.0) continue;
        const double alpha = r(k, k) > 0.0 ? -len : len;
        std::fill(v.begin(), v.end(), 0.0);
        for (std::size_t i = k; i < n; ++i) v[i] = r(i, k);
        v[k] -= alpha;
        const double vlen = norm(v);
        if (vlen == 0.0) continue;
        for (double& x : v) x /= vlen;
        // R <- H R, Q <- Q H with H = I - 2 v v^T.
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < n; ++i) s += v[i] * r(i, j);
            for (std::size_t i = k; i < n; ++i) r(i, j) -= 2.0 * s * v[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = k; j < n; ++j) s += q(i, j) * v[j];
            for (std::size_t j = k; j < n; ++j) q(i, j) -= 2.0 * s * v[j];
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (r(j, j) < 0.0)
            for (std::size_t i = 0; i < n; ++i) q(i, j) = -q(i, j);
    }
    return q;
}

EigenResult eig_sym(const Matrix& m) {
    require(m.rows() == m.cols(), "eig_sym: matrix must be square");
    require_finite(m);
    const std::size_t n = m.rows();
    double scale = 1.0;
    for (double x : m.data()) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale)
                throw std::invalid_argument("eig_sym: matrix is not symmetric");

    Matrix a = m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) a(i, j) = a(j, i) = 0.5 * (m(i, j) + m(j, i));
    Matrix v = Matrix::identity(n);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                total += a(i, j) * a(i, j);
                if (i != j) off += a(i, j) * a(i, j);
            }
        }
        if (off <= kEps * kEps * total || off == 0.0) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(1.0, theta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
    EigenResult out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = v(i, order[k]);
    }
    return out;
}

namespace {

// Spectral filter shared by both ridge_solve overloads.
Vector ridge_filter(const EigenResult& e, double lambda, double pinv_tol) {
    Vector f(e.values.size(), 0.0);
    const double wmax = e.values.empty() ? 0.0 : std::max(e.values.front(), 0.0);
    for (std::size_t k = 0; k < f.size(); ++k) {
        const double w = std::max(e.values[k], 0.0);
        if (lambda > 0.0) {
            f[k] = 1.0 / (w + lambda);
        } else if (w > pinv_tol * wmax && w > 0.0) {
            f[k] = 1.0 / w;
        }
    }
    return f;
}

EigenResult checked_psd(const Matrix& g, double lambda) {
    require(lambda >= 0.0, "ridge_solve: lambda must be >= 0");
    EigenResult e = eig_sym(g);
    if (!e.values.empty() && e.values.back() < -1e-8)
        throw std::invalid_argument("ridge_solve: matrix is not positive semi-definite");
    return e;
}

}  // namespace

Vector ridge_solve(const Matrix& g, std::span<const double> b, double lambda, double pinv_tol) {
    require(g.rows() == b.size(), "ridge_solve: dimension mismatch");
    const EigenResult e = checked_psd(g, lambda);
    const Vector f = ridge_filter(e, lambda, pinv_tol);
    Vector coeff = multiply_t(e.vectors, b);
    for (std::size_t k = 0; k < coeff.size(); ++k) coeff[k] *= f[k];
    return multiply(e.vectors, coeff);
}

Matrix ridge_solve(const Matrix& g, const Matrix& b, double lambda, double pinv_tol) {
    require(g.rows() == b.rows(), "ridge_solve: dimension mismatch");
    const EigenResult e = checked_psd(g, lambda);
    const Vector f = ridge_filter(e, lambda, pinv_tol);
    Matrix coeff = multiply_at_b(e.vectors, b);
    for (std::size_t k = 0; k < coeff.rows(); ++k)
        for (double& x : coeff.row(k)) x *= f[k];
    return multiply(e.vectors, coeff);
}

}  // namespace snpiv
