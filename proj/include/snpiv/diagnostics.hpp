#pragma once

#include <string>

#include "snpiv/feature_map.hpp"
#include "snpiv/operator.hpp"

namespace snpiv {

class RankDeficientError : public std::invalid_argument {
public:
    RankDeficientError(const std::string& what, double eigenvalue)
        : std::invalid_argument(what), eigenvalue_(eigenvalue) {}
    double eigenvalue() const { return eigenvalue_; }

private:
    double eigenvalue_;
};

/// Sieve measure of ill-posedness of span(phi): (inf over unit h in the span of ||T h||)^{-1}.
/// Returns +inf when T annihilates part of the span.
double tau_sieve(const FeatureMap& phi, const SpectralOperator& op, const Grid& grid);

/// L2 distance from target (sampled at the grid nodes) to span(phi), by least squares on the grid.
double span_residual(const FeatureMap& phi, std::span<const double> target, const Grid& grid);

/// sqrt(sum_{i > k} alpha_i^2).
double tail_norm(std::span<const double> alpha, std::size_t k);

/// Operator norm of T_d(phi, psi) - truncate(op, k).
double epsilon_hat(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op, std::size_t k,
                   const Grid& grid);

struct ZetaValue {
    double value = 0.0;       // grid supremum at the requested resolution
    double refined = 0.0;     // the same at twice the resolution
};

/// Largest whitened feature norm sup_t ||E[f f^T]^{-1/2} f(t)|| over both maps.
ZetaValue zeta(const FeatureMap& phi, const FeatureMap& psi, std::size_t nodes = 4096);

enum class SandwichResult { Pass, Fail, Indeterminate };
const char* sandwich_name(SandwichResult r);

/// sigma_k^{-1} <= tau <= (sigma_k - 2 eps)^{-1}, each side with 1e-6 relative slack.
/// Indeterminate unless eps < (1 - 1/sqrt 2) sigma_k.
SandwichResult sandwich_check(double tau, double sigma_k, double eps);

enum class Regime { Good, Bad, Ugly };
const char* regime_name(Regime r);

struct RegimeThresholds {
    double align = 0.3;
    double decay = 0.2;
};

Regime classify_regime(double tail, double sigma_cut, RegimeThresholds thresholds = {});

struct DiagnosticsReport {
    double tau = 0.0;
    double tail_norm = 0.0;
    double epsilon_hat = 0.0;  // NaN when not applicable
    double zeta = 0.0;
    double sigma_cut = 0.0;
    Regime regime = Regime::Good;
    RegimeThresholds thresholds;
};

std::string diagnostics_csv_header();
std::string diagnostics_csv_row(const DiagnosticsReport& r);

}  // namespace snpiv
