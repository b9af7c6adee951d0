#include "snpiv/contrastive.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace snpiv {

namespace {

Matrix drop_first_column(const Matrix& m) {
    Matrix out(m.rows(), m.cols() - 1);
    for (std::size_t a = 0; a < m.rows(); ++a)
        for (std::size_t j = 1; j < m.cols(); ++j) out(a, j - 1) = m(a, j);
    return out;
}

Matrix trainable(const FeatureMap& f, const Matrix& values) {
    return f.constant_augmented() ? drop_first_column(values) : values;
}

double frobenius_inner(const Matrix& a, const Matrix& b) {
    return dot(a.data(), b.data());
}

Vector column_means(const Matrix& m) {
    Vector mean(m.cols(), 0.0);
    for (std::size_t a = 0; a < m.rows(); ++a)
        for (std::size_t j = 0; j < m.cols(); ++j) mean[j] += m(a, j);
    for (double& v : mean) v /= static_cast<double>(m.rows());
    return mean;
}

void subtract_row(Matrix& m, std::span<const double> v) {
    for (std::size_t a = 0; a < m.rows(); ++a) {
        auto row = m.row(a);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] -= v[j];
    }
}

double per_side_regularizer(const Matrix& f) {
    double total = 0.0;
    for (std::size_t a = 0; a < f.rows(); ++a) {
        const double sq = dot(f.row(a), f.row(a));
        total += sq * sq;
    }
    return total / static_cast<double>(f.rows()) + static_cast<double>(f.cols());
}

}  // namespace

void ContrastiveConfig::validate() const {
    if (feature_dim == 0) throw std::invalid_argument("ContrastiveConfig: feature_dim must be positive");
    if (hidden.empty()) throw std::invalid_argument("ContrastiveConfig: need at least one hidden layer");
    if (batch_size < 2) throw std::invalid_argument("ContrastiveConfig: batch_size must be >= 2");
    if (!(reg_weight >= 0.0)) throw std::invalid_argument("ContrastiveConfig: reg_weight must be >= 0");
    if (!(adam.lr > 0.0)) throw std::invalid_argument("ContrastiveConfig: learning rate must be positive");
}

std::vector<std::size_t> ContrastiveConfig::widths() const {
    std::vector<std::size_t> w{1};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(feature_dim);
    return w;
}

double empirical_loss(const Matrix& phi, const Matrix& psi) {
    if (phi.rows() != psi.rows() || phi.cols() != psi.cols())
        throw std::invalid_argument("empirical_loss: feature matrices differ in shape");
    const std::size_t m = phi.rows();
    if (m < 2) throw std::invalid_argument("empirical_loss: batch size must be >= 2");
    double diag_sq = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double p = dot(phi.row(i), psi.row(i));
        diag += p;
        diag_sq += p * p;
    }
    const double all_pairs = frobenius_inner(multiply_at_b(phi, phi), multiply_at_b(psi, psi));
    const double md = static_cast<double>(m);
    return (all_pairs - diag_sq) / (md * (md - 1.0)) - 2.0 * diag / md;
}

double empirical_loss(const FeatureMap& phi, const FeatureMap& psi, std::span<const UnlabeledSample> batch) {
    return empirical_loss(phi.evaluate_batch(xs_of(batch)), psi.evaluate_batch(zs_of(batch)));
}

double population_loss_quadrature(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op,
                                  const Grid& grid) {
    if (grid.n_points < 512) throw std::invalid_argument("population_loss_quadrature: grid below 512 nodes");
    if (phi.dim() != psi.dim()) throw std::invalid_argument("population_loss_quadrature: feature dimensions differ");
    const Matrix fx = phi.evaluate_batch(grid.nodes);
    const Matrix fz = psi.evaluate_batch(grid.nodes);
    const double w = grid.weight;
    // sum_{a,b} w^2 (phi(x_a)^T psi(z_b))^2 = <w Phi^T Phi, w Psi^T Psi>_F
    const double product = frobenius_inner(scaled(multiply_at_b(fx, fx), w), scaled(multiply_at_b(fz, fz), w));
    // sum_{a,b} w^2 p(x_a, z_b) phi(x_a)^T psi(z_b) = w^2 tr(Psi^T P Phi)
    const Matrix p = density_matrix(op, grid.nodes, grid.nodes);
    const Matrix cross = multiply_at_b(fz, multiply(p, fx));
    double joint = 0.0;
    for (std::size_t i = 0; i < cross.rows(); ++i) joint += cross(i, i);
    joint *= w * w;
    const double hs = hs_norm(op);
    return product - 2.0 * joint + hs * hs;
}

double hs_distance_squared(const FeatureMap& phi, const FeatureMap& psi, const SpectralOperator& op,
                           const Grid& grid) {
    const FeatureMap* xm[] = {&phi};
    const FeatureMap* zm[] = {&psi};
    const ReferenceBasis basis = make_reference_basis(op, grid, xm, zm);
    const double f = frobenius_norm(add(grid_operator_matrix(phi, psi, basis), operator_matrix(op, basis), -1.0));
    return f * f;
}

double regularizer(const Matrix& phi, const Matrix& psi) {
    if (phi.rows() == 0 || psi.rows() == 0) throw std::invalid_argument("regularizer: empty batch");
    return per_side_regularizer(phi) + per_side_regularizer(psi);
}

double regularizer(const FeatureMap& phi, const FeatureMap& psi, std::span<const UnlabeledSample> batch) {
    if (batch.empty()) throw std::invalid_argument("regularizer: empty batch");
    return regularizer(trainable(phi, phi.evaluate_batch(xs_of(batch))),
                       trainable(psi, psi.evaluate_batch(zs_of(batch))));
}

ContrastiveStep contrastive_step(const MlpParams& net_phi, const MlpParams& net_psi, std::span<const double> xs,
                                 std::span<const double> zs, double gamma) {
    if (xs.size() != zs.size() || xs.size() < 2) throw std::invalid_argument("contrastive_step: need >= 2 paired points");
    MlpTape tape_phi;
    MlpTape tape_psi;
    Matrix p = mlp_forward_raw(net_phi, xs, &tape_phi);
    Matrix s = mlp_forward_raw(net_psi, zs, &tape_psi);
    subtract_row(p, column_means(p));
    subtract_row(s, column_means(s));

    const std::size_t b = p.rows();
    const double bd = static_cast<double>(b);
    const Matrix ptp = multiply_at_b(p, p);
    const Matrix sts = multiply_at_b(s, s);
    Vector pair(b);
    double diag = 0.0;
    double diag_sq = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        pair[i] = dot(p.row(i), s.row(i));
        diag += pair[i];
        diag_sq += pair[i] * pair[i];
    }
    const double norm_pairs = 1.0 / (bd * (bd - 1.0));

    ContrastiveStep out;
    out.loss = (frobenius_inner(ptp, sts) - diag_sq) * norm_pairs - 2.0 * diag / bd;
    out.reg = regularizer(p, s);

    Matrix gp = scaled(multiply(p, sts), 2.0 * norm_pairs);
    Matrix gs = scaled(multiply(s, ptp), 2.0 * norm_pairs);
    for (std::size_t i = 0; i < b; ++i) {
        auto gpr = gp.row(i);
        auto gsr = gs.row(i);
        auto pr = p.row(i);
        auto sr = s.row(i);
        const double cross = 2.0 * pair[i] * norm_pairs + 2.0 / bd;
        const double reg_p = 4.0 * gamma * dot(pr, pr) / bd;
        const double reg_s = 4.0 * gamma * dot(sr, sr) / bd;
        for (std::size_t k = 0; k < gpr.size(); ++k) {
            gpr[k] += -cross * sr[k] + reg_p * pr[k];
            gsr[k] += -cross * pr[k] + reg_s * sr[k];
        }
    }
    subtract_row(gp, column_means(gp));
    subtract_row(gs, column_means(gs));
    out.grad_phi = mlp_backward(net_phi, tape_phi, gp);
    out.grad_psi = mlp_backward(net_psi, tape_psi, gs);
    return out;
}

TrainedFeatures train(const ContrastiveConfig& config, std::span<const UnlabeledSample> unlabeled) {
    config.validate();
    if (unlabeled.size() < config.batch_size)
        throw std::invalid_argument("train: dataset smaller than one batch (" + std::to_string(unlabeled.size()) +
                                    " < " + std::to_string(config.batch_size) + ")");
    Rng init_phi(mix_seed({config.seed, 1}));
    Rng init_psi(mix_seed({config.seed, 2}));
    Rng shuffle(mix_seed({config.seed, 3}));
    MlpFeatures phi(init_mlp(config.widths(), init_phi), Side::X, true);
    MlpFeatures psi(init_mlp(config.widths(), init_psi), Side::Z, true);
    phi = center_features(std::move(phi), unlabeled);
    psi = center_features(std::move(psi), unlabeled);

    AdamState adam_phi = AdamState::for_size(phi.net().values.size(), config.adam);
    AdamState adam_psi = AdamState::for_size(psi.net().values.size(), config.adam);
    const Vector all_x = xs_of(unlabeled);
    const Vector all_z = zs_of(unlabeled);
    std::vector<std::size_t> order(unlabeled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batches = unlabeled.size() / config.batch_size;

    TrainedFeatures out{phi, psi, {}};
    Vector xs(config.batch_size);
    Vector zs(config.batch_size);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        double loss_sum = 0.0;
        double reg_sum = 0.0;
        for (std::size_t bi = 0; bi < batches; ++bi) {
            for (std::size_t j = 0; j < config.batch_size; ++j) {
                const std::size_t idx = order[bi * config.batch_size + j];
                xs[j] = all_x[idx];
                zs[j] = all_z[idx];
            }
            const ContrastiveStep step = contrastive_step(phi.net(), psi.net(), xs, zs, config.reg_weight);
            if (!std::isfinite(step.loss) || !std::isfinite(step.reg) || !all_finite(step.grad_phi) ||
                !all_finite(step.grad_psi))
                throw TrainingDiverged(epoch, "train: non-finite loss at epoch " + std::to_string(epoch));
            loss_sum += step.loss;
            reg_sum += step.reg;
            adam_step(adam_phi, phi.net().values, step.grad_phi);
            adam_step(adam_psi, psi.net().values, step.grad_psi);
        }
        phi = center_features(std::move(phi), unlabeled);
        psi = center_features(std::move(psi), unlabeled);
        out.history.push_back({epoch, loss_sum / static_cast<double>(batches), reg_sum / static_cast<double>(batches)});
    }
    out.phi = std::move(phi);
    out.psi = std::move(psi);
    return out;
}

void write_history_csv(std::ostream& out, std::span<const LossReport> history) {
    out << "epoch,empirical_loss,regularizer\n";
    for (const LossReport& r : history)
        out << r.epoch << ',' << format_double(r.empirical_loss) << ',' << format_double(r.regularizer) << '\n';
}

}  // namespace snpiv
