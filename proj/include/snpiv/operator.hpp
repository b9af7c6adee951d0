#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "snpiv/feature_map.hpp"
#include "snpiv/linalg.hpp"

namespace snpiv {

/// Uniform probability quadrature on [0, 2pi]: nodes 2 pi j / n, weights 1 / n.
/// Exact for trigonometric polynomials of degree < n.
struct Grid {
    std::size_t n_points = 0;
    std::vector<double> nodes;
    double weight = 0.0;

    static Grid uniform(std::size_t n_points);
};

/// Coefficients on {1, e_1, ..., e_r} for a singular basis (v_i on X, u_i on Z).
struct CoeffVector {
    double constant = 0.0;
    Vector coeffs;
};

class TieError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Conditional expectation operator on X = Z = [0, 2pi] with uniform marginals
/// and an exactly known SVD:
///
///   T = 1_Z (x) 1_X + sum_i sigma_i u_i (x) v_i,
///   v(x) = rot_x * sqrt(2) (sin x, ..., sin r x),  u(z) = rot_z * sqrt(2) (sin z, ..., sin r z).
///
/// The joint density is p(x, z) = 1 + sum_i sigma_i u_i(z) v_i(x). Immutable.
class SpectralOperator {
public:
    static constexpr std::size_t kScanResolution = 512;

    /// Validates the inputs and rescales sigma by the largest factor in (0, 1]
    /// that keeps the density at least `floor` on a 512 x 512 grid.
    static SpectralOperator create(Vector sigma, Matrix rot_x, Matrix rot_z, std::uint64_t seed,
                                   double floor = 0.0);

    /// Draws Haar rotations from `seed` and calls create().
    static SpectralOperator from_seed(Vector sigma, std::uint64_t seed, double floor = 0.0);

    /// Rebuilds an operator from stored fields without rescaling.
    static SpectralOperator restore(Vector sigma, Matrix rot_x, Matrix rot_z, double scale,
                                    std::uint64_t seed);

    std::size_t rank() const { return sigma_.size(); }
    const Vector& sigma() const { return sigma_; }
    const Matrix& rot_x() const { return rot_x_; }
    const Matrix& rot_z() const { return rot_z_; }
    /// Factor applied to the requested sigma by the nonnegativity rescale.
    double scale() const { return scale_; }
    std::uint64_t seed() const { return seed_; }
    double grid_min_density() const { return grid_min_; }
    double grid_max_density() const { return grid_max_; }

    bool operator==(const SpectralOperator&) const = default;

private:
    SpectralOperator() = default;
    void scan_density();

    Vector sigma_;
    Matrix rot_x_;
    Matrix rot_z_;
    double scale_ = 1.0;
    std::uint64_t seed_ = 0;
    double grid_min_ = 1.0;
    double grid_max_ = 1.0;
};

/// v(x), the nonconstant right singular functions at x. Throws for x outside [0, 2pi].
Vector eval_right(const SpectralOperator& op, double x);
/// u(z), the nonconstant left singular functions at z.
Vector eval_left(const SpectralOperator& op, double z);
Vector eval_singular(const SpectralOperator& op, Side side, double t);
/// Singular functions at every grid node: rows are nodes, columns are i = 1..r.
Matrix eval_singular_batch(const SpectralOperator& op, Side side, std::span<const double> points);

double density(const SpectralOperator& op, double x, double z);
/// Density on a product grid: entry (b, a) is p(x_a, z_b).
Matrix density_matrix(const SpectralOperator& op, std::span<const double> x_nodes,
                      std::span<const double> z_nodes);

/// T acting on coefficients in the v-basis, returning coefficients in the u-basis.
CoeffVector apply(const SpectralOperator& op, const CoeffVector& h);

double hs_norm(const SpectralOperator& op);

/// Rank-(k+1) truncation: the constant triplet and the first k nonconstant ones.
/// Throws TieError when the cut does not fall at a strict gap.
SpectralOperator truncate(const SpectralOperator& op, std::size_t k);

/// Orthonormal (under grid quadrature) function families on X and Z used to
/// represent finite-rank operators as matrices. Columns are basis functions
/// evaluated at the grid nodes.
struct ReferenceBasis {
    Grid grid;
    Matrix x_values;
    Matrix z_values;
};

/// {1, v_1..v_r, sqrt(2) sin((r+1) t) .. sqrt(2) sin((r+tail) t)} on each side, then
/// extended by Gram-Schmidt with whatever part of the given feature maps lies
/// outside that span, so that the maps are represented exactly.
ReferenceBasis make_reference_basis(const SpectralOperator& op, const Grid& grid,
                                    std::span<const FeatureMap* const> x_maps = {},
                                    std::span<const FeatureMap* const> z_maps = {},
                                    std::size_t tail = 20);

/// Matrix of T_d(phi, psi) = sum_i psi_i (x) phi_i in the basis: entry (a, b) is
/// <e^Z_a, T_d e^X_b>. Requires grid resolution >= 512.
Matrix grid_operator_matrix(const FeatureMap& phi, const FeatureMap& psi, const ReferenceBasis& basis);

/// Matrix of op itself in the same basis.
Matrix operator_matrix(const SpectralOperator& op, const ReferenceBasis& basis);

// Plain-text key=value serialization; doubles use shortest round-trip form.
void write_operator(std::ostream& out, const SpectralOperator& op);
SpectralOperator read_operator(std::istream& in);
std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace snpiv
