#include "snpiv/twostage.hpp"

#include <cmath>

namespace snpiv {

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void TwoStageConfig::validate() const {
    require(eta >= 0.0, "TwoStageConfig: eta must be >= 0");
    require(lambda >= 0.0, "TwoStageConfig: lambda must be >= 0");
    require(pinv_tol >= 0.0, "TwoStageConfig: pinv tolerance must be >= 0");
}

Moments empirical_moments(const Matrix& phi_x, const Matrix& psi_z, std::span<const double> y) {
    require(phi_x.rows() == psi_z.rows(), "moments: phi and psi have different sample counts");
    require(y.size() == psi_z.rows(), "moments: y length differs from the sample count");
    require(psi_z.rows() >= 1, "moments: need at least one sample");
    const double inv_n = 1.0 / static_cast<double>(psi_z.rows());
    Vector py = multiply_t(psi_z, y);
    for (double& v : py) v *= inv_n;
    return {scaled(multiply_at_b(phi_x, psi_z), inv_n), scaled(multiply_at_b(psi_z, psi_z), inv_n), std::move(py)};
}

Moments population_moments(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op,
                           const StructuralFunction& h0, const Grid& grid) {
    const Matrix fx = phi.evaluate_batch(grid.nodes);
    const Matrix fz = psi.evaluate_batch(grid.nodes);
    const Matrix p = density_matrix(op, grid.nodes, grid.nodes);  // (z, x)
    const double w = grid.weight;
    const Matrix joint = scaled(multiply(p, fx), w * w);          // row b: sum_a w^2 p(x_a, z_b) phi(x_a)
    Moments m;
    m.cross = multiply_at_b(joint, fz);
    m.gram_psi = scaled(multiply_at_b(fz, fz), w);
    // E[psi(Z) Y] = E[psi(Z) h0(X)] since E[U | Z] = 0.
    const Vector h = h0.evaluate(grid.nodes);
    const Vector ph = multiply(p, h);
    m.psi_y = multiply_t(fz, ph);
    for (double& v : m.psi_y) v *= w * w;
    return m;
}

Matrix stage1_from_moments(const Moments& m, double eta, double pinv_tol) {
    require(eta >= 0.0, "stage1: eta must be >= 0");
    require(m.gram_psi.rows() == m.cross.cols(), "stage1: dimension mismatch");
    return transpose(ridge_solve(m.gram_psi, transpose(m.cross), eta, pinv_tol));
}

Matrix stage1(const Matrix& phi_x, const Matrix& psi_z, double eta, double pinv_tol) {
    require(phi_x.rows() == psi_z.rows(), "stage1: phi and psi have different sample counts");
    require(phi_x.rows() >= 1, "stage1: need at least one sample");
    return stage1_from_moments(empirical_moments(phi_x, psi_z, Vector(psi_z.rows(), 0.0)), eta, pinv_tol);
}

Vector stage2_from_moments(const Matrix& a, const Moments& m, double lambda, double pinv_tol) {
    require(lambda >= 0.0, "stage2: lambda must be >= 0");
    require(a.cols() == m.gram_psi.rows() && m.psi_y.size() == a.cols(), "stage2: dimension mismatch");
    Matrix gram = multiply_a_bt(multiply(a, m.gram_psi), a);
    for (std::size_t i = 0; i < gram.rows(); ++i)
        for (std::size_t j = i + 1; j < gram.cols(); ++j) gram(i, j) = gram(j, i) = 0.5 * (gram(i, j) + gram(j, i));
    return ridge_solve(gram, multiply(a, m.psi_y), lambda, pinv_tol);
}

Vector stage2(const Matrix& a, const Matrix& psi_z, std::span<const double> y, double lambda, double pinv_tol) {
    require(a.cols() == psi_z.cols(), "stage2: A and psi dimensions differ");
    require(y.size() == psi_z.rows(), "stage2: y length differs from the sample count");
    Moments m;
    const double inv_n = 1.0 / static_cast<double>(psi_z.rows());
    m.gram_psi = scaled(multiply_at_b(psi_z, psi_z), inv_n);
    m.psi_y = multiply_t(psi_z, y);
    for (double& v : m.psi_y) v *= inv_n;
    return stage2_from_moments(a, m, lambda, pinv_tol);
}

Vector saddle_solve(const Matrix& phi_x, const Matrix& psi_z, std::span<const double> y, double lambda_saddle,
                    double pinv_tol) {
    require(lambda_saddle > 0.0, "saddle_solve: lambda must be > 0");
    const Moments m = empirical_moments(phi_x, psi_z, y);
    const Matrix b = transpose(m.cross);                        // E[psi phi^T]
    const Matrix gp = pinv(m.gram_psi, pinv_tol);
    const Matrix bt_gp = multiply_at_b(b, gp);                  // B^T G^+
    Matrix lhs = multiply(bt_gp, b);
    for (std::size_t i = 0; i < lhs.rows(); ++i)
        for (std::size_t j = i + 1; j < lhs.cols(); ++j) lhs(i, j) = lhs(j, i) = 0.5 * (lhs(i, j) + lhs(j, i));
    return ridge_solve(lhs, multiply(bt_gp, m.psi_y), 2.0 * lambda_saddle, pinv_tol);
}

TwoStageFit fit(std::shared_ptr<const FeatureMap> phi, std::shared_ptr<const FeatureMap> psi,
                std::span<const LabeledSample> data, const TwoStageConfig& config) {
    config.validate();
    require(phi && psi, "fit: null feature map");
    require(!data.empty(), "fit: empty dataset");
    const Matrix fx = phi->evaluate_batch(xs_of(data));
    const Matrix fz = psi->evaluate_batch(zs_of(data));
    const Moments m = empirical_moments(fx, fz, ys_of(data));
    Matrix a = stage1_from_moments(m, config.eta, config.pinv_tol);
    Vector theta = stage2_from_moments(a, m, config.lambda, config.pinv_tol);
    return {std::move(a), std::move(theta), std::move(phi), std::move(psi)};
}

TwoStageFit fit_population(std::shared_ptr<const FeatureMap> phi, std::shared_ptr<const FeatureMap> psi,
                           const SpectralOperator& op, const StructuralFunction& h0, const Grid& grid,
                           const TwoStageConfig& config) {
    config.validate();
    require(phi && psi, "fit_population: null feature map");
    const Moments m = population_moments(*phi, *psi, op, h0, grid);
    Matrix a = stage1_from_moments(m, config.eta, config.pinv_tol);
    Vector theta = stage2_from_moments(a, m, config.lambda, config.pinv_tol);
    return {std::move(a), std::move(theta), std::move(phi), std::move(psi)};
}

double predict(const TwoStageFit& fit, double x) { return dot(fit.theta, (*fit.phi)(x)); }

Vector predict(const TwoStageFit& fit, std::span<const double> xs) {
    return multiply(fit.phi->evaluate_batch(xs), fit.theta);
}

double l2_error(const TwoStageFit& fit, const StructuralFunction& h0, const Grid& grid) {
    require(grid.n_points >= 1024, "l2_error: grid needs at least 1024 nodes");
    const Vector hat = predict(fit, grid.nodes);
    const Vector truth = h0.evaluate(grid.nodes);
    double total = 0.0;
    for (std::size_t a = 0; a < hat.size(); ++a) total += (hat[a] - truth[a]) * (hat[a] - truth[a]);
    return std::sqrt(total * grid.weight);
}

}  // namespace snpiv
