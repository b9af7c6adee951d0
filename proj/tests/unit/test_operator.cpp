#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "snpiv/features.hpp"
#include "snpiv/operator.hpp"

using namespace snpiv;

namespace {

constexpr double kPi = std::numbers::pi;

SpectralOperator identity_rotations(Vector sigma) {
    const std::size_t r = sigma.size();
    return SpectralOperator::create(std::move(sigma), Matrix::identity(r), Matrix::identity(r), 0);
}

Matrix gram(const Matrix& values, double w) { return scaled(multiply_at_b(values, values), w); }

}  // namespace

TEST_CASE("grid nodes and weights") {
    const Grid g = Grid::uniform(8);
    CHECK(g.nodes.size() == 8);
    CHECK(g.nodes[0] == 0.0);
    CHECK(g.nodes[2] == doctest::Approx(kPi / 2));
    CHECK(g.weight * 8 == doctest::Approx(1.0));
}

TEST_CASE("eval_right with identity rotation") {
    const SpectralOperator op = identity_rotations({0.3, 0.2, 0.1});
    CHECK(eval_right(op, kPi / 2)[0] == doctest::Approx(std::sqrt(2.0)));
    for (double v : eval_right(op, 0.0)) CHECK(v == 0.0);
    CHECK_THROWS_AS(eval_right(op, -0.1), std::domain_error);
    CHECK_THROWS_AS(eval_left(op, 7.0), std::domain_error);
}

TEST_CASE("singular functions plus constant are orthonormal under quadrature") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const SpectralOperator op = SpectralOperator::from_seed(Vector(10, 0.0), seed);
        const Grid g = Grid::uniform(4096);
        for (Side side : {Side::X, Side::Z}) {
            const Matrix f = OracleFeatures(op, side, 10).evaluate_batch(g.nodes);
            CHECK(max_abs_diff(gram(f, g.weight), Matrix::identity(11)) <= 1e-6);
        }
    }
}

TEST_CASE("density basics") {
    const SpectralOperator flat = SpectralOperator::from_seed(Vector(4, 0.0), 1);
    CHECK(density(flat, 1.0, 2.0) == 1.0);

    const SpectralOperator op = SpectralOperator::from_seed({1.0, 0.7, 0.4, 0.1}, 5);
    const Grid g = Grid::uniform(512);
    const Matrix p = density_matrix(op, g.nodes, g.nodes);
    double hs = 0.0;
    for (std::size_t b = 0; b < 512; ++b) {
        double row = 0.0;
        double col = 0.0;
        for (std::size_t a = 0; a < 512; ++a) {
            row += p(b, a) * g.weight;
            col += p(a, b) * g.weight;
            hs += p(b, a) * p(b, a) * g.weight * g.weight;
        }
        CHECK(std::abs(row - 1.0) <= 1e-10);
        CHECK(std::abs(col - 1.0) <= 1e-10);
    }
    CHECK(std::abs(hs - hs_norm(op) * hs_norm(op)) <= 1e-6);
    Vector u = eval_left(op, 1.1);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] *= op.sigma()[i];
    CHECK(density(op, 0.4, 1.1) == doctest::Approx(1.0 + dot(eval_right(op, 0.4), u)).epsilon(1e-14));
}

TEST_CASE("construction rescales to keep the density nonnegative") {
    const SpectralOperator op = SpectralOperator::from_seed({1.0, 1.0, 1.0, 1.0, 1.0, 1.0}, 2);
    CHECK(op.scale() > 0.0);
    CHECK(op.scale() < 1.0);
    CHECK(op.grid_min_density() >= -1e-12);
    CHECK(op.sigma()[0] == doctest::Approx(op.scale()));

    const SpectralOperator floored = SpectralOperator::from_seed({1.0, 0.5, 0.2}, 2, 0.3);
    CHECK(floored.grid_min_density() >= 0.3 - 1e-12);

    const SpectralOperator small = identity_rotations({0.1, 0.05});
    CHECK(small.scale() == 1.0);
}

TEST_CASE("construction validates sigma and rotations") {
    CHECK_THROWS_AS(identity_rotations({0.2, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(identity_rotations({1.5}), std::invalid_argument);
    CHECK_THROWS_AS(identity_rotations({-0.1}), std::invalid_argument);
    Matrix bad = Matrix::identity(2);
    bad(0, 1) = 0.5;
    CHECK_THROWS_AS(SpectralOperator::create({0.2, 0.1}, bad, Matrix::identity(2), 0), std::invalid_argument);
}

TEST_CASE("apply") {
    const SpectralOperator op =
        SpectralOperator::restore({0.5, 0.45, 0.4, 0.2}, Matrix::identity(4), Matrix::identity(4), 1.0, 0);
    CoeffVector one{1.0, Vector(4, 0.0)};
    const CoeffVector t1 = apply(op, one);
    CHECK(t1.constant == 1.0);
    for (double c : t1.coeffs) CHECK(c == 0.0);

    const SpectralOperator zero = SpectralOperator::from_seed(Vector(4, 0.0), 3);
    const CoeffVector tz = apply(zero, {0.0, {1.0, 2.0, 3.0, 4.0}});
    for (double c : tz.coeffs) CHECK(c == 0.0);

    const CoeffVector e3 = apply(op, {0.0, {0.0, 0.0, 1.0, 0.0}});
    CHECK(e3.coeffs[2] == doctest::Approx(0.4));
    CHECK_THROWS_AS(apply(op, {0.0, {1.0}}), std::invalid_argument);

    // Quadrature of z -> int h(x) p(x, z) dx against the closed form.
    const SpectralOperator rot = SpectralOperator::from_seed({0.6, 0.5, 0.4, 0.3}, 8);
    const CoeffVector h{0.7, {0.2, -0.4, 1.0, 0.3}};
    const CoeffVector th = apply(rot, h);
    const Grid g = Grid::uniform(512);
    for (double z : {0.3, 2.0, 5.5}) {
        double q = 0.0;
        for (double x : g.nodes) q += (h.constant + dot(h.coeffs, eval_right(rot, x))) * density(rot, x, z) * g.weight;
        CHECK(std::abs(q - (th.constant + dot(th.coeffs, eval_left(rot, z)))) <= 1e-6);
    }
}

TEST_CASE("hs_norm") {
    CHECK(hs_norm(SpectralOperator::from_seed(Vector(3, 0.0), 1)) == 1.0);
    const SpectralOperator unit = SpectralOperator::restore({1.0, 1.0}, Matrix::identity(2), Matrix::identity(2), 1.0, 0);
    CHECK(hs_norm(unit) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("truncate") {
    const SpectralOperator op = SpectralOperator::from_seed({0.9, 0.5, 0.3, 0.1}, 4);
    CHECK(truncate(op, 4) == op);
    const SpectralOperator zero = truncate(op, 0);
    CHECK(density(zero, 1.0, 3.0) == 1.0);
    const SpectralOperator two = truncate(op, 2);
    CHECK(two.sigma()[1] == op.sigma()[1]);
    CHECK(two.sigma()[2] == 0.0);
    CHECK(two.rot_x() == op.rot_x());

    const SpectralOperator tie = identity_rotations({0.09, 0.05, 0.05, 0.01});
    CHECK_THROWS_AS(truncate(tie, 2), TieError);
    CHECK_NOTHROW(truncate(tie, 1));
}

TEST_CASE("grid_operator_matrix") {
    const SpectralOperator op = SpectralOperator::from_seed({0.9, 0.7, 0.5, 0.3, 0.1}, 6);
    const Grid g = Grid::uniform(512);
    const std::size_t k = 3;
    const OracleFeatures phi(op, Side::X, k);
    const OracleFeatures psi(op, Side::Z, k, true);
    const ReferenceBasis basis = make_reference_basis(op, g);
    const Matrix m = grid_operator_matrix(phi, psi, basis);
    Matrix expected(m.rows(), m.cols());
    expected(0, 0) = 1.0;
    for (std::size_t i = 0; i < k; ++i) expected(i + 1, i + 1) = op.sigma()[i];
    CHECK(max_abs_diff(m, expected) <= 1e-6);

    const FunctionFeatures zx(2, Side::X, [](double, std::span<double> o) { o[0] = o[1] = 0.0; });
    const FunctionFeatures zz(2, Side::Z, [](double, std::span<double> o) { o[0] = o[1] = 0.0; });
    CHECK(frobenius_norm(grid_operator_matrix(zx, zz, basis)) == 0.0);

    const double delta = 0.03;
    const FunctionFeatures pert(k + 1, Side::Z, [&](double z, std::span<double> o) {
        psi.evaluate(z, o);
        o[1] += delta * eval_left(op, z)[k];
    });
    const SvdResult s = svd(add(grid_operator_matrix(phi, pert, basis), m, -1.0));
    CHECK(std::abs(s.singular[0] - delta) <= 1e-6);

    CHECK(max_abs_diff(operator_matrix(truncate(op, k), basis), expected) <= 1e-6);
    CHECK_THROWS_AS(make_reference_basis(op, Grid::uniform(256)), std::invalid_argument);
}

TEST_CASE("reference basis absorbs features outside the trigonometric span") {
    const SpectralOperator op = SpectralOperator::from_seed({0.5, 0.3}, 2);
    const FunctionFeatures f(1, Side::X, [](double x, std::span<double> o) { o[0] = std::exp(std::cos(x)); });
    const FeatureMap* xm[] = {&f};
    const Grid g = Grid::uniform(512);
    const ReferenceBasis basis = make_reference_basis(op, g, xm);
    CHECK(max_abs_diff(gram(basis.x_values, g.weight), Matrix::identity(basis.x_values.cols())) <= 1e-10);
    const Matrix fv = f.evaluate_batch(g.nodes);
    const Matrix c = scaled(multiply_at_b(basis.x_values, fv), g.weight);
    CHECK(max_abs_diff(multiply(basis.x_values, c), fv) <= 1e-10);
}

TEST_CASE("operator serialization round-trips bit-exactly") {
    const SpectralOperator op = SpectralOperator::from_seed({1.0, 0.8, 0.6, 0.3}, 77);
    std::stringstream ss;
    write_operator(ss, op);
    const SpectralOperator back = read_operator(ss);
    CHECK(back == op);
    std::stringstream bad("r=2\nsigma=0.1\n");
    CHECK_THROWS(read_operator(bad));
}
