#include "snpiv/operator.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

#include "snpiv/rng.hpp"

namespace snpiv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
const double kSqrt2 = std::sqrt(2.0);

void check_rotation(const Matrix& rot, std::size_t r, const char* name) {
    if (rot.rows() != r || rot.cols() != r)
        throw std::invalid_argument(std::string("SpectralOperator: ") + name + " must be r x r");
    const Matrix gram = multiply_at_b(rot, rot);
    if (max_abs_diff(gram, Matrix::identity(r)) > 1e-12)
        throw std::invalid_argument(std::string("SpectralOperator: ") + name + " is not orthogonal");
}

void check_sigma(const Vector& sigma) {
    if (sigma.empty()) throw std::invalid_argument("SpectralOperator: need at least one singular triplet");
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        if (!std::isfinite(sigma[i]) || sigma[i] < 0.0 || sigma[i] > 1.0)
            throw std::invalid_argument("SpectralOperator: sigma entries must lie in [0, 1]");
        if (i > 0 && sigma[i] > sigma[i - 1])
            throw std::invalid_argument("SpectralOperator: sigma must be nonincreasing");
    }
}

// Rows are nodes, columns sqrt(2) sin(j t) for j = 1..r.
Matrix sine_table(std::size_t r, std::span<const double> points) {
    Matrix s(points.size(), r);
    for (std::size_t a = 0; a < points.size(); ++a)
        for (std::size_t j = 0; j < r; ++j) s(a, j) = kSqrt2 * std::sin(static_cast<double>(j + 1) * points[a]);
    return s;
}

// min and max of sum_i sigma_i u_i(z) v_i(x) over the scan grid.
std::pair<double, double> coupling_range(const Vector& sigma, const Matrix& rot_x, const Matrix& rot_z) {
    const Grid grid = Grid::uniform(SpectralOperator::kScanResolution);
    const Matrix sines = sine_table(sigma.size(), grid.nodes);
    Matrix v = multiply_a_bt(sines, rot_x);  // nodes x r
    Matrix u = multiply_a_bt(sines, rot_z);
    for (std::size_t a = 0; a < u.rows(); ++a)
        for (std::size_t i = 0; i < sigma.size(); ++i) u(a, i) *= sigma[i];
    const Matrix g = multiply_a_bt(u, v);
    const auto [lo, hi] = std::minmax_element(g.data().begin(), g.data().end());
    return {*lo, *hi};
}

void check_domain(double t) {
    if (!(t >= 0.0 && t <= kTwoPi)) throw std::domain_error("point outside [0, 2pi]");
}

// Appends the part of each column of `extra` orthogonal to the current basis.
void extend_basis(std::vector<Vector>& basis, const Matrix& extra) {
    const std::size_t n = extra.rows();
    for (std::size_t j = 0; j < extra.cols(); ++j) {
        Vector f = extra.column(j);
        const double original = std::sqrt(dot(f, f) / static_cast<double>(n));
        if (original == 0.0) continue;
        for (int pass = 0; pass < 2; ++pass) {
            for (const Vector& e : basis) {
                const double c = dot(f, e) / static_cast<double>(n);
                for (std::size_t a = 0; a < n; ++a) f[a] -= c * e[a];
            }
        }
        const double residual = std::sqrt(dot(f, f) / static_cast<double>(n));
        if (residual <= 1e-8 * original) continue;
        for (double& x : f) x /= residual;
        basis.push_back(std::move(f));
    }
}

Matrix basis_side(const SpectralOperator& op, const Grid& grid, Side side,
                  std::span<const FeatureMap* const> maps, std::size_t tail) {
    const std::size_t n = grid.n_points;
    const std::size_t r = op.rank();
    std::vector<Vector> basis;
    basis.emplace_back(n, 1.0);
    const Matrix singular = eval_singular_batch(op, side, grid.nodes);
    for (std::size_t i = 0; i < r; ++i) basis.push_back(singular.column(i));
    for (std::size_t j = 1; j <= tail; ++j) {
        Vector f(n);
        for (std::size_t a = 0; a < n; ++a) f[a] = kSqrt2 * std::sin(static_cast<double>(r + j) * grid.nodes[a]);
        basis.push_back(std::move(f));
    }
    for (const FeatureMap* map : maps) extend_basis(basis, map->evaluate_batch(grid.nodes));
    Matrix out(n, basis.size());
    for (std::size_t k = 0; k < basis.size(); ++k)
        for (std::size_t a = 0; a < n; ++a) out(a, k) = basis[k][a];
    return out;
}

// Quadrature coefficients of the columns of `values` on the basis columns.
Matrix project(const Matrix& basis_values, const Matrix& values) {
    return scaled(multiply_at_b(basis_values, values), 1.0 / static_cast<double>(values.rows()));
}

}  // namespace

Grid Grid::uniform(std::size_t n_points) {
    if (n_points == 0) throw std::invalid_argument("Grid: need at least one node");
    Grid g;
    g.n_points = n_points;
    g.weight = 1.0 / static_cast<double>(n_points);
    g.nodes.resize(n_points);
    for (std::size_t j = 0; j < n_points; ++j)
        g.nodes[j] = kTwoPi * static_cast<double>(j) / static_cast<double>(n_points);
    return g;
}

void SpectralOperator::scan_density() {
    const auto [lo, hi] = coupling_range(sigma_, rot_x_, rot_z_);
    grid_min_ = 1.0 + lo;
    grid_max_ = 1.0 + hi;
}

SpectralOperator SpectralOperator::create(Vector sigma, Matrix rot_x, Matrix rot_z, std::uint64_t seed,
                                          double floor) {
    check_sigma(sigma);
    check_rotation(rot_x, sigma.size(), "rot_x");
    check_rotation(rot_z, sigma.size(), "rot_z");
    if (!(floor >= 0.0 && floor < 1.0)) throw std::invalid_argument("SpectralOperator: floor must lie in [0, 1)");

    SpectralOperator op;
    op.sigma_ = std::move(sigma);
    op.rot_x_ = std::move(rot_x);
    op.rot_z_ = std::move(rot_z);
    op.seed_ = seed;
    const auto [lo, hi] = coupling_range(op.sigma_, op.rot_x_, op.rot_z_);
    (void)hi;
    if (1.0 + lo < floor) {
        op.scale_ = (1.0 - floor) / (-lo);
        for (double& s : op.sigma_) s *= op.scale_;
    }
    op.scan_density();
    return op;
}

SpectralOperator SpectralOperator::from_seed(Vector sigma, std::uint64_t seed, double floor) {
    Rng rng(seed);
    const std::size_t r = sigma.size();
    Matrix rot_x = random_orthogonal(r, rng);
    Matrix rot_z = random_orthogonal(r, rng);
    return create(std::move(sigma), std::move(rot_x), std::move(rot_z), seed, floor);
}

SpectralOperator SpectralOperator::restore(Vector sigma, Matrix rot_x, Matrix rot_z, double scale,
                                           std::uint64_t seed) {
    check_sigma(sigma);
    check_rotation(rot_x, sigma.size(), "rot_x");
    check_rotation(rot_z, sigma.size(), "rot_z");
    if (!(scale > 0.0 && scale <= 1.0)) throw std::invalid_argument("SpectralOperator: scale must lie in (0, 1]");
    SpectralOperator op;
    op.sigma_ = std::move(sigma);
    op.rot_x_ = std::move(rot_x);
    op.rot_z_ = std::move(rot_z);
    op.scale_ = scale;
    op.seed_ = seed;
    op.scan_density();
    return op;
}

Vector eval_singular(const SpectralOperator& op, Side side, double t) {
    check_domain(t);
    const std::size_t r = op.rank();
    Vector f(r);
    for (std::size_t j = 0; j < r; ++j) f[j] = kSqrt2 * std::sin(static_cast<double>(j + 1) * t);
    return multiply(side == Side::X ? op.rot_x() : op.rot_z(), f);
}

Vector eval_right(const SpectralOperator& op, double x) { return eval_singular(op, Side::X, x); }
Vector eval_left(const SpectralOperator& op, double z) { return eval_singular(op, Side::Z, z); }

Matrix eval_singular_batch(const SpectralOperator& op, Side side, std::span<const double> points) {
    for (double t : points) check_domain(t);
    return multiply_a_bt(sine_table(op.rank(), points), side == Side::X ? op.rot_x() : op.rot_z());
}

double density(const SpectralOperator& op, double x, double z) {
    const Vector v = eval_right(op, x);
    const Vector u = eval_left(op, z);
    double p = 1.0;
    for (std::size_t i = 0; i < v.size(); ++i) p += op.sigma()[i] * u[i] * v[i];
    return p;
}

Matrix density_matrix(const SpectralOperator& op, std::span<const double> x_nodes,
                      std::span<const double> z_nodes) {
    const Matrix v = eval_singular_batch(op, Side::X, x_nodes);
    Matrix u = eval_singular_batch(op, Side::Z, z_nodes);
    for (std::size_t b = 0; b < u.rows(); ++b)
        for (std::size_t i = 0; i < op.rank(); ++i) u(b, i) *= op.sigma()[i];
    Matrix p = multiply_a_bt(u, v);
    for (double& x : p.data()) x += 1.0;
    return p;
}

CoeffVector apply(const SpectralOperator& op, const CoeffVector& h) {
    if (h.coeffs.size() != op.rank()) throw std::invalid_argument("apply: coefficient length must equal r");
    CoeffVector out{h.constant, Vector(op.rank())};
    for (std::size_t i = 0; i < op.rank(); ++i) out.coeffs[i] = op.sigma()[i] * h.coeffs[i];
    return out;
}

double hs_norm(const SpectralOperator& op) {
    double s = 1.0;
    for (double x : op.sigma()) s += x * x;
    return std::sqrt(s);
}

SpectralOperator truncate(const SpectralOperator& op, std::size_t k) {
    const std::size_t r = op.rank();
    if (k > r) throw std::invalid_argument("truncate: k exceeds the number of triplets");
    if (k < r) {
        const double above = k == 0 ? 1.0 : op.sigma()[k - 1];
        const double below = op.sigma()[k];
        if (!(above > below))
            throw TieError("truncate: no strict gap at the cut (sigma_" + std::to_string(k) +
                           " == sigma_" + std::to_string(k + 1) + ")");
    }
    Vector sigma = op.sigma();
    for (std::size_t i = k; i < r; ++i) sigma[i] = 0.0;
    return SpectralOperator::restore(std::move(sigma), op.rot_x(), op.rot_z(), op.scale(), op.seed());
}

ReferenceBasis make_reference_basis(const SpectralOperator& op, const Grid& grid,
                                    std::span<const FeatureMap* const> x_maps,
                                    std::span<const FeatureMap* const> z_maps, std::size_t tail) {
    if (grid.n_points < 512) throw std::invalid_argument("reference basis needs at least 512 grid nodes");
    if (op.rank() + tail >= grid.n_points / 2)
        throw std::invalid_argument("reference basis exceeds the grid's exact quadrature degree");
    for (const FeatureMap* m : x_maps)
        if (m->side() != Side::X) throw std::invalid_argument("reference basis: x map has the wrong side");
    for (const FeatureMap* m : z_maps)
        if (m->side() != Side::Z) throw std::invalid_argument("reference basis: z map has the wrong side");
    return {grid, basis_side(op, grid, Side::X, x_maps, tail), basis_side(op, grid, Side::Z, z_maps, tail)};
}

Matrix grid_operator_matrix(const FeatureMap& phi, const FeatureMap& psi, const ReferenceBasis& basis) {
    if (basis.grid.n_points < 512) throw std::invalid_argument("grid_operator_matrix: resolution below 512");
    if (phi.dim() != psi.dim()) throw std::invalid_argument("grid_operator_matrix: feature dimensions differ");
    const Matrix cphi = project(basis.x_values, phi.evaluate_batch(basis.grid.nodes));
    const Matrix cpsi = project(basis.z_values, psi.evaluate_batch(basis.grid.nodes));
    return multiply_a_bt(cpsi, cphi);
}

Matrix operator_matrix(const SpectralOperator& op, const ReferenceBasis& basis) {
    const std::size_t n = basis.grid.n_points;
    const std::size_t r = op.rank();
    Matrix fx(n, r + 1);
    Matrix fz(n, r + 1);
    const Matrix v = eval_singular_batch(op, Side::X, basis.grid.nodes);
    const Matrix u = eval_singular_batch(op, Side::Z, basis.grid.nodes);
    for (std::size_t a = 0; a < n; ++a) {
        fx(a, 0) = 1.0;
        fz(a, 0) = 1.0;
        for (std::size_t i = 0; i < r; ++i) {
            fx(a, i + 1) = v(a, i);
            fz(a, i + 1) = op.sigma()[i] * u(a, i);
        }
    }
    return multiply_a_bt(project(basis.z_values, fz), project(basis.x_values, fx));
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && *first == ' ') ++first;
    if (first < last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last) throw std::invalid_argument("not a number: '" + text + "'");
    return value;
}

namespace {

std::string join(std::span<const double> values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

Vector split_doubles(const std::string& text) {
    Vector out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(item));
    return out;
}

}  // namespace

void write_operator(std::ostream& out, const SpectralOperator& op) {
    out << "r=" << op.rank() << '\n';
    out << "sigma=" << join(op.sigma()) << '\n';
    out << "rot_x=" << join(op.rot_x().data()) << '\n';
    out << "rot_z=" << join(op.rot_z().data()) << '\n';
    out << "scale=" << format_double(op.scale()) << '\n';
    out << "seed=" << op.seed() << '\n';
}

SpectralOperator read_operator(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("operator file: malformed line '" + line + "'");
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"r", "sigma", "rot_x", "rot_z", "scale", "seed"})
        if (!kv.count(key)) throw std::invalid_argument(std::string("operator file: missing key ") + key);
    const std::size_t r = std::stoul(kv["r"]);
    Vector sigma = split_doubles(kv["sigma"]);
    Vector rx = split_doubles(kv["rot_x"]);
    Vector rz = split_doubles(kv["rot_z"]);
    if (sigma.size() != r || rx.size() != r * r || rz.size() != r * r)
        throw std::invalid_argument("operator file: field lengths disagree with r");
    return SpectralOperator::restore(std::move(sigma), Matrix(r, r, std::move(rx)), Matrix(r, r, std::move(rz)),
                                     parse_double(kv["scale"]), std::stoull(kv["seed"]));
}

}  // namespace snpiv
