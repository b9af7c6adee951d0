#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "snpiv/features.hpp"

using namespace snpiv;

namespace {

constexpr double kPi = std::numbers::pi;

// Straightforward scalar re-implementation used as an independent oracle.
Vector reference_forward(const MlpParams& p, double t) {
    Vector h{t};
    for (std::size_t l = 0; l < p.layers(); ++l) {
        Vector next(p.widths[l + 1]);
        for (std::size_t o = 0; o < next.size(); ++o) {
            double s = p.bias(l, o);
            for (std::size_t i = 0; i < h.size(); ++i) s += p.weight(l, o, i) * h[i];
            if (l + 1 == p.layers()) next[o] = s;
            else if (l == 0) next[o] = s + std::sin(s) * std::sin(s);
            else next[o] = 0.5 * s * (1.0 + std::erf(s / std::sqrt(2.0)));
        }
        h = std::move(next);
    }
    return h;
}

double weighted_output(const MlpParams& p, std::span<const double> pts, const Matrix& up) {
    const Matrix out = mlp_forward_raw(p, pts);
    return dot(out.data(), up.data());
}

double max_relative_fd_error(const std::vector<std::size_t>& widths, std::uint64_t seed) {
    Rng rng(seed);
    MlpParams p = init_mlp(widths, rng);
    Vector pts(32);
    for (double& t : pts) t = rng.uniform(0.0, 2.0 * kPi);
    Matrix up(pts.size(), widths.back());
    for (double& v : up.data()) v = rng.normal();
    const Vector g = mlp_backward(p, pts, up);
    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double keep = p.values[i];
        p.values[i] = keep + h;
        const double fp = weighted_output(p, pts, up);
        p.values[i] = keep - h;
        const double fm = weighted_output(p, pts, up);
        p.values[i] = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(g[i]), 1.0});
        worst = std::max(worst, std::abs(fd - g[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("activations") {
    CHECK(first_activation(0.0) == 0.0);
    CHECK(first_activation(kPi / 2) == doctest::Approx(kPi / 2 + 1.0).epsilon(1e-15));
    CHECK(first_activation_grad(kPi / 4) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(gelu(0.0) == 0.0);
    CHECK(gelu_grad(0.0) == doctest::Approx(0.5));
    for (double x : {-2.0, -0.3, 0.7, 3.1}) {
        const double h = 1e-6;
        CHECK(gelu_grad(x) == doctest::Approx((gelu(x + h) - gelu(x - h)) / (2 * h)).epsilon(1e-8));
        CHECK(first_activation_grad(x) ==
              doctest::Approx((first_activation(x + h) - first_activation(x - h)) / (2 * h)).epsilon(1e-8));
    }
}

TEST_CASE("zero network gives zero output") {
    const MlpFeatures f(MlpParams::zeros(kDefaultWidths), Side::X, false);
    for (double t : {0.0, 1.0, 6.0})
        for (double v : mlp_forward(f, t)) CHECK(v == 0.0);
}

TEST_CASE("identity first layer applies t + sin^2 t") {
    MlpParams p = MlpParams::zeros({1, 1, 1});
    p.weight(0, 0, 0) = 1.0;
    p.weight(1, 0, 0) = 1.0;
    const MlpFeatures f(p, Side::X, false);
    CHECK(mlp_forward(f, kPi / 2)[0] == doctest::Approx(kPi / 2 + 1.0).epsilon(1e-15));
}

TEST_CASE("forward matches a scalar re-implementation") {
    Rng rng(3);
    const MlpParams p = init_mlp(kDefaultWidths, rng);
    const MlpFeatures f(p, Side::Z, true);
    for (int i = 0; i < 20; ++i) {
        const double t = rng.uniform(0.0, 2.0 * kPi);
        const Vector got = mlp_forward(f, t);
        const Vector ref = reference_forward(p, t);
        REQUIRE(got.size() == ref.size() + 1);
        CHECK(got[0] == 1.0);
        for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(got[k + 1] - ref[k]) <= 1e-12);
    }
    const Vector pts{0.1, 2.0, 4.5};
    const Matrix batch = f.evaluate_batch(pts);
    for (std::size_t a = 0; a < pts.size(); ++a) {
        const Vector one = f(pts[a]);
        for (std::size_t k = 0; k < one.size(); ++k) CHECK(batch(a, k) == one[k]);
    }
}

TEST_CASE("initialization ranges") {
    Rng rng(1);
    const MlpParams p = init_mlp(kDefaultWidths, rng);
    for (std::size_t o = 0; o < 50; ++o) {
        CHECK(std::abs(p.weight(0, o, 0)) <= 2.0);
        CHECK(std::abs(p.bias(0, o)) <= 2.0);
        CHECK(p.bias(1, o) == 0.0);
    }
    CHECK(p.values.size() == 50 * 2 + 50 * 51 + 50 * 51);
    CHECK_THROWS_AS(MlpParams::zeros({1, 5}), std::invalid_argument);
    CHECK_THROWS_AS(MlpParams::zeros({2, 5, 5}), std::invalid_argument);
}

TEST_CASE("backward: zero upstream gives zero gradient") {
    Rng rng(2);
    const MlpParams p = init_mlp(kDefaultWidths, rng);
    const Vector pts{0.5, 1.5};
    for (double g : mlp_backward(p, pts, Matrix(2, 50))) CHECK(g == 0.0);
    CHECK_THROWS_AS(mlp_backward(p, pts, Matrix(2, 49)), std::invalid_argument);
    CHECK_THROWS_AS(mlp_backward(p, pts, Matrix(3, 50)), std::invalid_argument);
}

TEST_CASE("backward: scalar chain against hand derivative") {
    MlpParams p = MlpParams::zeros({1, 1, 1, 1});
    const double w0 = 0.7, b0 = -0.2, w1 = 1.3, b1 = 0.1, w2 = -0.8, b2 = 0.05;
    p.weight(0, 0, 0) = w0;
    p.bias(0, 0) = b0;
    p.weight(1, 0, 0) = w1;
    p.bias(1, 0) = b1;
    p.weight(2, 0, 0) = w2;
    p.bias(2, 0) = b2;
    const double t = 1.1;
    const double s0 = w0 * t + b0;
    const double a0 = s0 + std::sin(s0) * std::sin(s0);
    const double s1 = w1 * a0 + b1;
    const double g1 = gelu_grad(s1);
    const double da0 = 1.0 + std::sin(2.0 * s0);
    const Vector pts{t};
    const Vector g = mlp_backward(p, pts, Matrix(1, 1, 1.0));
    CHECK(g[p.weight_offset(2)] == doctest::Approx(gelu(s1)).epsilon(1e-14));
    CHECK(g[p.bias_offset(2)] == doctest::Approx(1.0));
    CHECK(g[p.weight_offset(1)] == doctest::Approx(w2 * g1 * a0).epsilon(1e-14));
    CHECK(g[p.bias_offset(1)] == doctest::Approx(w2 * g1).epsilon(1e-14));
    CHECK(g[p.weight_offset(0)] == doctest::Approx(w2 * g1 * w1 * da0 * t).epsilon(1e-14));
    CHECK(g[p.bias_offset(0)] == doctest::Approx(w2 * g1 * w1 * da0).epsilon(1e-14));
}

TEST_CASE("backward matches central finite differences") {
    CHECK(max_relative_fd_error(kDefaultWidths, 11) <= 1e-4);
    CHECK(max_relative_fd_error({1, 8, 4}, 12) <= 1e-4);
    CHECK(max_relative_fd_error({1, 20, 20, 20, 5}, 13) <= 1e-4);
    CHECK(max_relative_fd_error({1, 50, 50, 4}, 14) <= 1e-4);
}

TEST_CASE("adam") {
    Vector params{1.0, -2.0, 3.0};
    AdamState s = AdamState::for_size(3);
    adam_step(s, params, Vector(3, 0.0));
    CHECK(params == Vector{1.0, -2.0, 3.0});

    AdamState first = AdamState::for_size(3);
    Vector q{0.0, 0.0, 0.0};
    const Vector g{0.5, -3.0, 1e-3};
    adam_step(first, q, g);
    const AdamHyper h;
    for (std::size_t i = 0; i < 3; ++i) {
        // Bias-corrected moments are g and g^2 after one step, so the update is lr |g| / (|g| + eps).
        const double expect = h.lr * std::abs(g[i]) / (std::abs(g[i]) + h.eps);
        CHECK(std::abs(q[i]) == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(q[i]) == doctest::Approx(h.lr).epsilon(1e-4));
        CHECK(q[i] * g[i] < 0.0);
    }
    CHECK_THROWS_AS(adam_step(first, q, Vector(2, 0.0)), std::invalid_argument);

    Vector a{0.3, 0.4};
    Vector b{0.3, 0.4};
    AdamState sa = AdamState::for_size(2);
    AdamState sb = AdamState::for_size(2);
    for (int i = 0; i < 50; ++i) {
        const Vector ga{std::sin(a[0] * i), a[1] * a[1]};
        const Vector gb{std::sin(b[0] * i), b[1] * b[1]};
        adam_step(sa, a, ga);
        adam_step(sb, b, gb);
    }
    CHECK(a == b);
    CHECK(sa.step == 50);
}

TEST_CASE("centering") {
    MlpParams c = MlpParams::zeros({1, 2, 3});
    for (std::size_t o = 0; o < 3; ++o) c.bias(1, o) = 3.0;
    std::vector<UnlabeledSample> cal{{0.1, 0.2}, {1.0, 2.0}, {3.0, 4.0}};
    const MlpFeatures centered = center_features(MlpFeatures(c, Side::X, false), cal);
    for (double v : centered(1.234)) CHECK(v == 0.0);

    Rng rng(6);
    std::vector<UnlabeledSample> big(10000);
    for (auto& s : big) s = {rng.uniform(0.0, 2 * kPi), rng.uniform(0.0, 2 * kPi)};
    for (Side side : {Side::X, Side::Z}) {
        const MlpFeatures f = center_features(MlpFeatures(init_mlp(kDefaultWidths, rng), side, true), big);
        const Vector pts = side == Side::X ? xs_of(big) : zs_of(big);
        const Matrix out = f.evaluate_batch(pts);
        for (std::size_t k = 1; k < out.cols(); ++k) {
            double m = 0.0;
            for (std::size_t a = 0; a < out.rows(); ++a) m += out(a, k);
            CHECK(std::abs(m / static_cast<double>(out.rows())) <= 1e-10);
        }
        const MlpFeatures again = center_features(f, big);
        for (std::size_t k = 0; k < again.centering().size(); ++k)
            CHECK(std::abs(again.centering()[k] - f.centering()[k]) <= 1e-10 * (1.0 + std::abs(f.centering()[k])));
    }
    CHECK_THROWS_AS(center_features(centered, std::span<const UnlabeledSample>{}), std::invalid_argument);
}

TEST_CASE("oracle features") {
    const SpectralOperator op = SpectralOperator::from_seed({0.8, 0.6, 0.4, 0.2}, 1);
    const OracleFeatures f(op, Side::X, 2);
    CHECK(f.dim() == 3);
    CHECK(f.constant_augmented());
    const Vector v = f(1.0);
    const Vector e = eval_right(op, 1.0);
    CHECK(v[0] == 1.0);
    CHECK(v[2] == e[1]);
    const OracleFeatures s(op, Side::Z, 3, true, false);
    CHECK(s.dim() == 3);
    CHECK(s(2.0)[2] == doctest::Approx(op.sigma()[2] * eval_left(op, 2.0)[2]));
    CHECK_THROWS_AS(OracleFeatures(op, Side::X, 5), std::invalid_argument);
}

TEST_CASE("linear features") {
    const SpectralOperator op = SpectralOperator::from_seed({0.8, 0.6}, 1);
    auto base = std::make_shared<OracleFeatures>(op, Side::X, 2);
    Matrix c(2, 3);
    c(0, 0) = 2.0;
    c(1, 1) = 1.0;
    c(1, 2) = -1.0;
    const LinearFeatures lf(base, c);
    const Vector b = (*base)(0.7);
    const Vector v = lf(0.7);
    CHECK(v[0] == doctest::Approx(2.0));
    CHECK(v[1] == doctest::Approx(b[1] - b[2]));
    CHECK(lf.side() == Side::X);
    CHECK_THROWS_AS(LinearFeatures(base, Matrix(2, 2)), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is bit exact") {
    Rng rng(4);
    const MlpParams p = init_mlp(kDefaultWidths, rng);
    Vector centering(50);
    for (double& c : centering) c = rng.normal();
    std::stringstream ss;
    write_checkpoint(ss, p, centering);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 6) == "SNPIV1");
    CHECK(bytes.size() == 6 + 8 + 4 * 8 + 8 * (p.values.size() + 50));
    const auto [q, c] = read_checkpoint(ss);
    CHECK(q == p);
    CHECK(c == centering);

    std::stringstream bad("SNPIV2xxxxxxxx");
    CHECK_THROWS_AS(read_checkpoint(bad), std::invalid_argument);
    std::stringstream truncated(bytes.substr(0, 40));
    CHECK_THROWS_AS(read_checkpoint(truncated), std::invalid_argument);
}
