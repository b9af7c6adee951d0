#include "snpiv/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace snpiv {

namespace {

constexpr double kGramFloor = 1e-10;
// K eigenvalues at round-off level mean T annihilates a direction of the span.
constexpr double kNullFloor = 1e-24;

Matrix quadrature_gram(const Matrix& values, double weight) {
    Matrix g = scaled(multiply_at_b(values, values), weight);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = i + 1; j < g.cols(); ++j) g(i, j) = g(j, i) = 0.5 * (g(i, j) + g(j, i));
    return g;
}

// Columns W with W^T G W = I, i.e. G^{-1/2} up to rotation.
Matrix whitening(const Matrix& gram, const char* who) {
    const EigenResult e = eig_sym(gram);
    const double smallest = e.values.back();
    if (!(smallest > kGramFloor))
        throw RankDeficientError(std::string(who) + ": feature Gram matrix is singular (smallest eigenvalue " +
                                     std::to_string(smallest) + ")",
                                 smallest);
    Matrix w(gram.rows(), gram.cols());
    for (std::size_t j = 0; j < gram.cols(); ++j) {
        const double s = 1.0 / std::sqrt(e.values[j]);
        for (std::size_t i = 0; i < gram.rows(); ++i) w(i, j) = e.vectors(i, j) * s;
    }
    return w;
}

double whitened_sup(const FeatureMap& f, std::size_t nodes) {
    const Grid g = Grid::uniform(nodes);
    const Matrix values = f.evaluate_batch(g.nodes);
    const Matrix w = whitening(quadrature_gram(values, g.weight), "zeta");
    const Matrix white = multiply(values, w);
    double best = 0.0;
    for (std::size_t a = 0; a < white.rows(); ++a) best = std::max(best, norm(white.row(a)));
    return best;
}

}  // namespace

double tau_sieve(const FeatureMap& phi, const SpectralOperator& op, const Grid& grid) {
    if (phi.side() != Side::X) throw std::invalid_argument("tau_sieve: span must live on X");
    const Matrix values = phi.evaluate_batch(grid.nodes);
    const Matrix w = whitening(quadrature_gram(values, grid.weight), "tau_sieve");
    // Quadrature coefficients of the orthonormalized span on {1, v_1..v_r}; T scales
    // them by (1, sigma) and kills everything orthogonal to that family.
    const Matrix v = eval_singular_batch(op, Side::X, grid.nodes);
    const Matrix white = multiply(values, w);
    Matrix c(op.rank() + 1, white.cols());
    for (std::size_t j = 0; j < white.cols(); ++j) {
        double s = 0.0;
        for (std::size_t a = 0; a < white.rows(); ++a) s += white(a, j);
        c(0, j) = s * grid.weight;
    }
    const Matrix cv = scaled(multiply_at_b(v, white), grid.weight);
    for (std::size_t i = 0; i < op.rank(); ++i)
        for (std::size_t j = 0; j < white.cols(); ++j) c(i + 1, j) = op.sigma()[i] * cv(i, j);
    const EigenResult e = eig_sym(quadrature_gram(c, 1.0));
    const double smallest = e.values.back();
    if (!(smallest > kNullFloor * std::max(1.0, e.values.front()))) return std::numeric_limits<double>::infinity();
    return 1.0 / std::sqrt(smallest);
}

double span_residual(const FeatureMap& phi, std::span<const double> target, const Grid& grid) {
    if (target.size() != grid.n_points) throw std::invalid_argument("span_residual: target length != grid size");
    const Matrix values = phi.evaluate_batch(grid.nodes);
    Vector rhs = multiply_t(values, target);
    for (double& v : rhs) v *= grid.weight;
    const Vector coef = ridge_solve(quadrature_gram(values, grid.weight), rhs, 0.0);
    const Vector fitted = multiply(values, coef);
    double s = 0.0;
    for (std::size_t a = 0; a < fitted.size(); ++a) s += (target[a] - fitted[a]) * (target[a] - fitted[a]);
    return std::sqrt(s * grid.weight);
}

double tail_norm(std::span<const double> alpha, std::size_t k) {
    if (k > alpha.size()) throw std::invalid_argument("tail_norm: k exceeds the coefficient count");
    double s = 0.0;
    for (std::size_t i = k; i < alpha.size(); ++i) s += alpha[i] * alpha[i];
    return std::sqrt(s);
}

double epsilon_hat(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op, std::size_t k,
                   const Grid& grid) {
    const SpectralOperator cut = truncate(op, k);
    const FeatureMap* xm[] = {&phi};
    const FeatureMap* zm[] = {&psi};
    const ReferenceBasis basis = make_reference_basis(op, grid, xm, zm);
    const Matrix diff = add(grid_operator_matrix(phi, psi, basis), operator_matrix(cut, basis), -1.0);
    const SvdResult s = svd(diff);
    return s.singular.empty() ? 0.0 : s.singular.front();
}

ZetaValue zeta(const FeatureMap& phi, const FeatureMap& psi, std::size_t nodes) {
    if (nodes < 2) throw std::invalid_argument("zeta: need at least 2 nodes");
    return {std::max(whitened_sup(phi, nodes), whitened_sup(psi, nodes)),
            std::max(whitened_sup(phi, 2 * nodes), whitened_sup(psi, 2 * nodes))};
}

const char* sandwich_name(SandwichResult r) {
    switch (r) {
        case SandwichResult::Pass: return "pass";
        case SandwichResult::Fail: return "fail";
        case SandwichResult::Indeterminate: break;
    }
    return "indeterminate";
}

SandwichResult sandwich_check(double tau, double sigma_k, double eps) {
    if (!(sigma_k > 0.0) || !(eps >= 0.0) || !(eps < (1.0 - 1.0 / std::sqrt(2.0)) * sigma_k))
        return SandwichResult::Indeterminate;
    const double lower = (1.0 / sigma_k) * (1.0 - 1e-6);
    const double upper = (1.0 / (sigma_k - 2.0 * eps)) * (1.0 + 1e-6);
    return (tau >= lower && tau <= upper) ? SandwichResult::Pass : SandwichResult::Fail;
}

const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Good: return "good";
        case Regime::Bad: return "bad";
        case Regime::Ugly: break;
    }
    return "ugly";
}

Regime classify_regime(double tail, double sigma_cut, RegimeThresholds t) {
    if (!(t.align > 0.0 && t.align < 1.0 && t.decay > 0.0 && t.decay < 1.0))
        throw std::invalid_argument("classify_regime: thresholds must lie in (0, 1)");
    if (tail > t.align) return Regime::Ugly;
    if (sigma_cut < t.decay) return Regime::Bad;
    return Regime::Good;
}

std::string diagnostics_csv_header() {
    return "tau,tail_norm,epsilon_hat,zeta,sigma_cut,regime,t_align,t_decay";
}

std::string diagnostics_csv_row(const DiagnosticsReport& r) {
    const auto num = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    return num(r.tau) + ',' + num(r.tail_norm) + ',' + num(r.epsilon_hat) + ',' + num(r.zeta) + ',' +
           num(r.sigma_cut) + ',' + regime_name(r.regime) + ',' + format_double(r.thresholds.align) + ',' +
           format_double(r.thresholds.decay);
}

}  // namespace snpiv
