#pragma once

#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "snpiv/features.hpp"
#include "snpiv/operator.hpp"
#include "snpiv/synthetic.hpp"

namespace snpiv {

struct ContrastiveConfig {
    std::size_t feature_dim = 50;
    std::vector<std::size_t> hidden{50, 50};
    std::size_t batch_size = 1024;
    std::size_t epochs = 50;
    double reg_weight = 1.0;
    AdamHyper adam;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<std::size_t> widths() const;
};

struct LossReport {
    std::size_t epoch = 0;
    double empirical_loss = 0.0;
    double regularizer = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(std::size_t epoch, const std::string& what)
        : std::runtime_error(what), epoch_(epoch) {}
    std::size_t epoch() const { return epoch_; }

private:
    std::size_t epoch_;
};

/// 1/(m(m-1)) sum_{i != j} (phi_i^T psi_j)^2 - (2/m) sum_i phi_i^T psi_i over a
/// batch. Rows of phi and psi are the feature vectors of paired samples.
double empirical_loss(const Matrix& phi, const Matrix& psi);
double empirical_loss(const FeatureMap& phi, const FeatureMap& psi, std::span<const UnlabeledSample> batch);

/// E_X E_Z[(phi^T psi)^2] - 2 E_XZ[phi^T psi] + ||T||_HS^2, with both expectations
/// computed by product quadrature on the grid.
double population_loss_quadrature(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op,
                                  const Grid& grid);

/// ||T_d(phi, psi) - T||_HS^2 computed from the matrices of both operators in a
/// shared reference basis.
double hs_distance_squared(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op,
                           const Grid& grid);

/// Sample mean of ||phi phi^T - I||^2 + ||psi psi^T - I||^2 + 2||phi||^2 + 2||psi||^2.
double regularizer(const Matrix& phi, const Matrix& psi);
/// Same, on the trainable outputs only: a leading constant component is dropped.
double regularizer(const FeatureMap& phi, const FeatureMap& psi, std::span<const UnlabeledSample> batch);

struct ContrastiveStep {
    double loss = 0.0;
    double reg = 0.0;
    Vector grad_phi;
    Vector grad_psi;
};

/// Batch objective loss + gamma * reg on batch-centered network outputs and its
/// exact gradient with respect to both parameter vectors.
ContrastiveStep contrastive_step(const MlpParams& net_phi, const MlpParams& net_psi, std::span<const double> xs,
                                 std::span<const double> zs, double gamma);

struct TrainedFeatures {
    MlpFeatures phi;
    MlpFeatures psi;
    std::vector<LossReport> history;
};

/// Adam on empirical_loss + reg_weight * regularizer over shuffled minibatches.
/// Inside each batch outputs are centered by the batch mean; after every epoch
/// the stored centering is recomputed on the whole dataset. Returned maps are
/// constant-augmented. Throws TrainingDiverged on a non-finite loss.
TrainedFeatures train(const ContrastiveConfig& config, std::span<const UnlabeledSample> unlabeled);

void write_history_csv(std::ostream& out, std::span<const LossReport> history);

}  // namespace snpiv
