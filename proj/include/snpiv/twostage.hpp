#pragma once

#include <memory>

#include "snpiv/feature_map.hpp"
#include "snpiv/operator.hpp"
#include "snpiv/synthetic.hpp"

namespace snpiv {

struct TwoStageConfig {
    double eta = 0.0;     // Stage-1 ridge
    double lambda = 0.0;  // Stage-2 ridge
    double pinv_tol = kDefaultPinvTolerance;

    void validate() const;
};

/// Second moments feeding both stages, all normalized by 1/n (or quadrature weights).
struct Moments {
    Matrix cross;      // E[phi psi^T], d_x x d_z
    Matrix gram_psi;   // E[psi psi^T]
    Vector psi_y;      // E[psi Y]
};

Moments empirical_moments(const Matrix& phi_x, const Matrix& psi_z, std::span<const double> y);

/// Exact population moments of the model Y = h0(X) + U, E[U | Z] = 0, by 2-d
/// quadrature against the joint density.
Moments population_moments(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op,
                           const StructuralFunction& h0, const Grid& grid);

/// A = E[phi psi^T] (E[psi psi^T] + eta I)^{-1}, pseudo-inverse at eta = 0.
Matrix stage1(const Matrix& phi_x, const Matrix& psi_z, double eta, double pinv_tol = kDefaultPinvTolerance);
Matrix stage1_from_moments(const Moments& m, double eta, double pinv_tol = kDefaultPinvTolerance);

/// theta = (A G A^T + lambda I)^+ A E[psi Y], G = E[psi psi^T].
Vector stage2(const Matrix& a, const Matrix& psi_z, std::span<const double> y, double lambda,
              double pinv_tol = kDefaultPinvTolerance);
Vector stage2_from_moments(const Matrix& a, const Moments& m, double lambda,
                           double pinv_tol = kDefaultPinvTolerance);

/// Closed form of the min-max estimator: (B^T G^+ B + 2 lambda I)^{-1} B^T G^+ b,
/// with G = E[psi psi^T], B = E[psi phi^T], b = E[psi Y].
Vector saddle_solve(const Matrix& phi_x, const Matrix& psi_z, std::span<const double> y, double lambda_saddle,
                    double pinv_tol = kDefaultPinvTolerance);

struct TwoStageFit {
    Matrix a;
    Vector theta;
    std::shared_ptr<const FeatureMap> phi;
    std::shared_ptr<const FeatureMap> psi;
};

TwoStageFit fit(std::shared_ptr<const FeatureMap> phi, std::shared_ptr<const FeatureMap> psi,
                std::span<const LabeledSample> data, const TwoStageConfig& config = {});

/// Same estimator with every empirical moment replaced by its population value.
TwoStageFit fit_population(std::shared_ptr<const FeatureMap> phi, std::shared_ptr<const FeatureMap> psi,
                           const SpectralOperator& op, const StructuralFunction& h0, const Grid& grid,
                           const TwoStageConfig& config = {});

double predict(const TwoStageFit& fit, double x);
Vector predict(const TwoStageFit& fit, std::span<const double> xs);

/// sqrt of the grid average of (h_hat - h0)^2 under the uniform X marginal.
double l2_error(const TwoStageFit& fit, const StructuralFunction& h0, const Grid& grid);

}  // namespace snpiv
