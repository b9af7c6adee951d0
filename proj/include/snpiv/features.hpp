#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include "snpiv/feature_map.hpp"
#include "snpiv/operator.hpp"
#include "snpiv/rng.hpp"
#include "snpiv/synthetic.hpp"

namespace snpiv {

/// {1, e_1, ..., e_k} where e_i are the operator's singular functions on the
/// chosen side. With `scale_by_sigma`, e_i is replaced by sigma_i e_i, which
/// together with unscaled features on the other side factorizes the rank-k
/// truncation as sum_i psi_i (x) phi_i.
class OracleFeatures : public FeatureMap {
public:
    OracleFeatures(SpectralOperator op, Side side, std::size_t k, bool scale_by_sigma = false,
                   bool include_constant = true);

    std::size_t dim() const override { return k_ + (include_constant_ ? 1 : 0); }
    Side side() const override { return side_; }
    bool constant_augmented() const override { return include_constant_; }
    void evaluate(double t, std::span<double> out) const override;
    Matrix evaluate_batch(std::span<const double> points) const override;

private:
    SpectralOperator op_;
    Side side_;
    std::size_t k_;
    bool scale_by_sigma_;
    bool include_constant_;
};

/// coeff * base(t), i.e. each output is a fixed linear combination of base features.
class LinearFeatures : public FeatureMap {
public:
    LinearFeatures(std::shared_ptr<const FeatureMap> base, Matrix coeff);

    std::size_t dim() const override { return coeff_.rows(); }
    Side side() const override { return base_->side(); }
    void evaluate(double t, std::span<double> out) const override;
    Matrix evaluate_batch(std::span<const double> points) const override;

private:
    std::shared_ptr<const FeatureMap> base_;
    Matrix coeff_;
};

/// Wraps an arbitrary callable.
class FunctionFeatures : public FeatureMap {
public:
    using Fn = std::function<void(double, std::span<double>)>;
    FunctionFeatures(std::size_t dim, Side side, Fn fn, bool constant_augmented = false)
        : dim_(dim), side_(side), fn_(std::move(fn)), constant_(constant_augmented) {}

    std::size_t dim() const override { return dim_; }
    Side side() const override { return side_; }
    bool constant_augmented() const override { return constant_; }
    void evaluate(double t, std::span<double> out) const override { fn_(t, out); }

private:
    std::size_t dim_;
    Side side_;
    Fn fn_;
    bool constant_;
};

/// Parameters of a fixed-depth MLP on a scalar input. Layer l maps widths[l]
/// to widths[l+1]; its weights (row-major, out x in) are followed by its biases
/// in one flat buffer. Layer 0 uses t + sin^2(t), middle layers use exact GELU,
/// the last layer is linear.
struct MlpParams {
    std::vector<std::size_t> widths;
    Vector values;

    static MlpParams zeros(std::vector<std::size_t> widths);

    std::size_t layers() const { return widths.size() - 1; }
    std::size_t input_dim() const { return widths.front(); }
    std::size_t output_dim() const { return widths.back(); }
    std::size_t weight_offset(std::size_t layer) const;
    std::size_t bias_offset(std::size_t layer) const { return weight_offset(layer) + widths[layer + 1] * widths[layer]; }
    double& weight(std::size_t layer, std::size_t out, std::size_t in) {
        return values[weight_offset(layer) + out * widths[layer] + in];
    }
    double weight(std::size_t layer, std::size_t out, std::size_t in) const {
        return values[weight_offset(layer) + out * widths[layer] + in];
    }
    double& bias(std::size_t layer, std::size_t out) { return values[bias_offset(layer) + out]; }
    double bias(std::size_t layer, std::size_t out) const { return values[bias_offset(layer) + out]; }

    bool operator==(const MlpParams&) const = default;
};

inline const std::vector<std::size_t> kDefaultWidths{1, 50, 50, 50};

/// First layer (weights and biases) uniform in [-2, 2]; GELU layers He-normal;
/// final linear layer normal with variance 1 / fan_in; other biases zero.
MlpParams init_mlp(std::vector<std::size_t> widths, Rng& rng);

double first_activation(double t);
double first_activation_grad(double t);
double gelu(double x);
double gelu_grad(double x);

/// Intermediate values kept by the batch forward pass for backprop.
struct MlpTape {
    std::vector<Matrix> inputs;  // inputs[l] is the batch input to layer l
    std::vector<Matrix> pre;     // pre[l] is the affine output of layer l
};

/// Raw network outputs (no centering, no constant); rows are points.
Matrix mlp_forward_raw(const MlpParams& net, std::span<const double> points, MlpTape* tape = nullptr);

/// Exact reverse-mode gradient of sum_{b,k} upstream(b,k) * raw(b,k), laid out like net.values.
Vector mlp_backward(const MlpParams& net, const MlpTape& tape, const Matrix& upstream);
Vector mlp_backward(const MlpParams& net, std::span<const double> points, const Matrix& upstream);

/// Learned features: a network, the centering subtracted from its outputs and
/// optionally a hard-coded leading constant.
class MlpFeatures : public FeatureMap {
public:
    MlpFeatures(MlpParams net, Side side, bool constant_augmented = true, Vector centering = {});

    std::size_t dim() const override { return net_.output_dim() + (constant_ ? 1 : 0); }
    Side side() const override { return side_; }
    bool constant_augmented() const override { return constant_; }
    void evaluate(double t, std::span<double> out) const override;
    Matrix evaluate_batch(std::span<const double> points) const override;

    const MlpParams& net() const { return net_; }
    MlpParams& net() { return net_; }
    const Vector& centering() const { return centering_; }
    void set_centering(Vector c);

private:
    MlpParams net_;
    Side side_;
    bool constant_;
    Vector centering_;
};

/// Forward pass of the feature map at t: network, minus centering, constant prepended if flagged.
Vector mlp_forward(const MlpFeatures& features, double t);

/// Recomputes the centering as the mean raw output over the calibration points
/// (x for X-side maps, z for Z-side maps).
MlpFeatures center_features(MlpFeatures features, std::span<const UnlabeledSample> calibration);

struct AdamHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::size_t step = 0;
    Vector first;
    Vector second;
    AdamHyper hyper;

    static AdamState for_size(std::size_t n, AdamHyper hyper = {});
};

/// One bias-corrected Adam update in place.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// Binary checkpoint: "SNPIV1", u64 width count, u64 widths, f64 parameters, f64 centering.
// Little-endian.
void write_checkpoint(std::ostream& out, const MlpParams& net, const Vector& centering);
std::pair<MlpParams, Vector> read_checkpoint(std::istream& in);

}  // namespace snpiv
