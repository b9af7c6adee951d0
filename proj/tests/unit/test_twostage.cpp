#include <doctest.h>

#include <cmath>

#include "snpiv/features.hpp"
#include "snpiv/twostage.hpp"

using namespace snpiv;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

Vector random_vector(std::size_t n, Rng& rng) {
    Vector v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

double max_diff(std::span<const double> a, std::span<const double> b) {
    REQUIRE(a.size() == b.size());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

StructuralFunction make_h0(const SpectralOperator& op, Vector alpha) {
    return {std::move(alpha), op};
}

Vector unit_alpha(std::size_t r, Rng& rng) {
    Vector a = random_vector(r, rng);
    const double n = norm(a);
    for (double& v : a) v /= n;
    return a;
}

}  // namespace

TEST_CASE("stage 1 recovers the identity under perfect prediction") {
    Rng rng(1);
    const Matrix f = random_matrix(200, 5, rng);
    CHECK(max_abs_diff(stage1(f, f, 0.0), Matrix::identity(5)) <= 1e-8);
}

TEST_CASE("stage 1 is small for independent X and Z") {
    Rng rng(2);
    const std::size_t n = 100000;
    Matrix fx(n, 3), fz(n, 3);
    for (std::size_t a = 0; a < n; ++a) {
        const double x = rng.uniform(0.0, 2.0 * M_PI);
        const double z = rng.uniform(0.0, 2.0 * M_PI);
        for (std::size_t k = 0; k < 3; ++k) {
            fx(a, k) = std::sqrt(2.0) * std::sin((k + 1.0) * x);
            fz(a, k) = std::sqrt(2.0) * std::cos((k + 1.0) * z);
        }
    }
    // Each entry of E_n[phi psi^T] has standard error 1/sqrt(n) and G is close to I.
    const double se_bound = 3.0 / std::sqrt(static_cast<double>(n));
    CHECK(frobenius_norm(stage1(fx, fz, 0.0)) <= 4.0 * se_bound);
}

TEST_CASE("stage 1 ridge shrinkage limit") {
    Rng rng(3);
    const Matrix fx = random_matrix(50, 4, rng);
    const Matrix fz = random_matrix(50, 4, rng);
    const Matrix cross = scaled(multiply_at_b(fx, fz), 1.0 / 50.0);
    CHECK(frobenius_norm(stage1(fx, fz, 1e6)) <= 1e-3 * frobenius_norm(cross));
}

TEST_CASE("stage 1 and 2 reject mismatched dimensions") {
    CHECK_THROWS_AS(stage1(Matrix(4, 2), Matrix(5, 2), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(stage1(Matrix(4, 2), Matrix(4, 2), -1.0), std::invalid_argument);
    CHECK_THROWS_AS(stage2(Matrix(2, 3), Matrix(4, 2), Vector(4, 0.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(stage2(Matrix(2, 2), Matrix(4, 2), Vector(3, 0.0), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(saddle_solve(Matrix(4, 2), Matrix(3, 2), Vector(4, 0.0), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(saddle_solve(Matrix(4, 2), Matrix(4, 2), Vector(4, 0.0), 0.0), std::invalid_argument);
}

TEST_CASE("zero outcomes give zero coefficients") {
    Rng rng(4);
    const Matrix fx = random_matrix(30, 4, rng);
    const Matrix fz = random_matrix(30, 4, rng);
    const Vector y(30, 0.0);
    const Matrix a = stage1(fx, fz, 0.0);
    CHECK(norm(stage2(a, fz, y, 0.0)) == 0.0);
    CHECK(norm(stage2(a, fz, y, 0.5)) == 0.0);
    CHECK(norm(saddle_solve(fx, fz, y, 0.5)) == 0.0);
}

TEST_CASE("population oracle fit is exact") {
    Rng rng(5);
    const std::size_t r = 6;
    const SpectralOperator op = SpectralOperator::from_seed(make_decay(1.0, 0.3, r), 11);
    const StructuralFunction h0 = make_h0(op, unit_alpha(r, rng));
    auto phi = std::make_shared<OracleFeatures>(op, Side::X, r);
    auto psi = std::make_shared<OracleFeatures>(op, Side::Z, r);
    const Grid grid = Grid::uniform(1024);
    const TwoStageFit f = fit_population(phi, psi, op, h0, grid);

    Vector diag{1.0};
    diag.insert(diag.end(), op.sigma().begin(), op.sigma().end());
    CHECK(max_abs_diff(f.a, Matrix::diagonal(diag)) <= 1e-10);
    Vector expected{0.0};
    expected.insert(expected.end(), h0.alpha.begin(), h0.alpha.end());
    CHECK(max_diff(f.theta, expected) <= 1e-10);

    const Vector hat = predict(f, grid.nodes);
    CHECK(max_diff(hat, h0.evaluate(grid.nodes)) <= 1e-8);
    CHECK(l2_error(f, h0, grid) <= 1e-8);
}

TEST_CASE("stage 2 shrinks to zero as lambda grows") {
    Rng rng(6);
    const Matrix fx = random_matrix(40, 3, rng);
    const Matrix fz = random_matrix(40, 3, rng);
    const Vector y = random_vector(40, rng);
    const Matrix a = stage1(fx, fz, 0.0);
    double prev = norm(stage2(a, fz, y, 0.0));
    for (double lambda : {1e-2, 1.0, 1e2, 1e4, 1e8}) {
        const double cur = norm(stage2(a, fz, y, lambda));
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
    CHECK(prev <= 1e-6);
}

TEST_CASE("saddle closed form equals ridge 2SLS with doubled lambda") {
    Rng rng(7);
    double worst = 0.0;
    for (std::size_t n : {5, 50, 500}) {
        for (int inst = 0; inst < 34; ++inst) {
            const std::size_t d = 2 + rng.below(6);
            const Matrix fx = random_matrix(n, d, rng);
            const Matrix fz = random_matrix(n, d, rng);
            const Vector y = random_vector(n, rng);
            const double lambda_s = std::exp(rng.uniform(std::log(1e-3), std::log(10.0)));
            const Vector two_stage = stage2(stage1(fx, fz, 0.0), fz, y, 2.0 * lambda_s);
            const Vector saddle = saddle_solve(fx, fz, y, lambda_s);
            worst = std::max(worst, max_diff(two_stage, saddle));
        }
    }
    CHECK(worst <= 1e-8);
}

TEST_CASE("saddle and 2SLS agree on a single sample") {
    Rng rng(8);
    const Matrix fx = random_matrix(1, 4, rng);
    const Matrix fz = random_matrix(1, 4, rng);
    const Vector y{1.7};
    for (double lambda_s : {1e-3, 0.5, 3.0}) {
        const Vector two_stage = stage2(stage1(fx, fz, 0.0), fz, y, 2.0 * lambda_s);
        const Vector saddle = saddle_solve(fx, fz, y, lambda_s);
        CHECK(max_diff(two_stage, saddle) <= 1e-8);
    }
}

TEST_CASE("coefficients scale linearly with the outcome") {
    Rng rng(9);
    const Matrix fx = random_matrix(60, 4, rng);
    const Matrix fz = random_matrix(60, 4, rng);
    const Vector y = random_vector(60, rng);
    Vector cy = y;
    const double c = 4.0;
    for (double& v : cy) v *= c;
    const Matrix a = stage1(fx, fz, 0.0);
    for (double lambda : {0.0, 0.3}) {
        const Vector t = stage2(a, fz, y, lambda);
        const Vector ct = stage2(a, fz, cy, lambda);
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(ct[i] == doctest::Approx(c * t[i]).epsilon(1e-12));
    }
}

TEST_CASE("predict") {
    const SpectralOperator op = SpectralOperator::from_seed(make_decay(1.0, 0.5, 4), 1);
    auto phi = std::make_shared<OracleFeatures>(op, Side::X, 4);
    TwoStageFit f{Matrix::identity(5), Vector(5, 0.0), phi, phi};
    for (double x : {0.0, 1.0, 4.5}) CHECK(predict(f, x) == 0.0);
    f.theta[0] = 1.0;
    for (double x : {0.0, 1.0, 4.5}) CHECK(predict(f, x) == doctest::Approx(1.0).epsilon(1e-15));
    const Vector xs{0.1, 2.0, 6.0};
    const Vector batch = predict(f, xs);
    for (std::size_t i = 0; i < xs.size(); ++i) CHECK(batch[i] == doctest::Approx(predict(f, xs[i])).epsilon(1e-14));
}

TEST_CASE("l2 error cases") {
    Rng rng(10);
    const std::size_t r = 5;
    const SpectralOperator op = SpectralOperator::from_seed(make_decay(1.0, 0.5, r), 2);
    const StructuralFunction h0 = make_h0(op, unit_alpha(r, rng));
    auto phi = std::make_shared<OracleFeatures>(op, Side::X, r);
    const Grid grid = Grid::uniform(1024);

    Vector theta{0.0};
    theta.insert(theta.end(), h0.alpha.begin(), h0.alpha.end());
    TwoStageFit f{Matrix::identity(r + 1), theta, phi, phi};
    CHECK(l2_error(f, h0, grid) <= 1e-12);

    f.theta[0] = -0.37;
    CHECK(l2_error(f, h0, grid) == doctest::Approx(0.37).epsilon(1e-10));

    const Vector delta = random_vector(r, rng);
    f.theta = theta;
    for (std::size_t i = 0; i < r; ++i) f.theta[i + 1] += delta[i];
    CHECK(std::abs(l2_error(f, h0, grid) - norm(delta)) <= 1e-8);

    CHECK_THROWS_AS(l2_error(f, h0, Grid::uniform(512)), std::invalid_argument);
}

TEST_CASE("empirical fit converges to the population fit") {
    Scenario s;
    s.d = 5;
    s.c_sigma = 0.5;
    s.c_alpha = 0.5;
    s.noise_var = 0.1;
    const ScenarioModel model = build_scenario(s);
    const std::size_t r = s.d - 1;
    auto phi = std::make_shared<OracleFeatures>(model.op, Side::X, r);
    auto psi = std::make_shared<OracleFeatures>(model.op, Side::Z, r);
    Rng rng(12);
    const auto pairs = rejection_sample(model.op, 40000, rng);
    const auto data = sample_outcomes(model.op, model.h0, pairs, s.noise_var, rng);
    const TwoStageFit f = fit(phi, psi, data);
    CHECK(l2_error(f, model.h0, Grid::uniform(1024)) <= 0.1);
    CHECK_THROWS_AS(fit(phi, psi, {}), std::invalid_argument);
    CHECK_THROWS_AS(fit(phi, psi, data, TwoStageConfig{-1.0, 0.0}), std::invalid_argument);
}
