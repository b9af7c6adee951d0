#include "snpiv/features.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

namespace snpiv {

const char* side_name(Side side) { return side == Side::X ? "x" : "z"; }

Matrix FeatureMap::evaluate_batch(std::span<const double> points) const {
    Matrix out(points.size(), dim());
    for (std::size_t a = 0; a < points.size(); ++a) evaluate(points[a], out.row(a));
    return out;
}

Vector FeatureMap::operator()(double t) const {
    Vector out(dim());
    evaluate(t, out);
    return out;
}

// ---- OracleFeatures -------------------------------------------------------

OracleFeatures::OracleFeatures(SpectralOperator op, Side side, std::size_t k, bool scale_by_sigma,
                               bool include_constant)
    : op_(std::move(op)), side_(side), k_(k), scale_by_sigma_(scale_by_sigma), include_constant_(include_constant) {
    if (k_ > op_.rank()) throw std::invalid_argument("OracleFeatures: k exceeds the operator rank");
}

void OracleFeatures::evaluate(double t, std::span<double> out) const {
    const Vector e = eval_singular(op_, side_, t);
    std::size_t o = 0;
    if (include_constant_) out[o++] = 1.0;
    for (std::size_t i = 0; i < k_; ++i) out[o++] = scale_by_sigma_ ? op_.sigma()[i] * e[i] : e[i];
}

Matrix OracleFeatures::evaluate_batch(std::span<const double> points) const {
    const Matrix e = eval_singular_batch(op_, side_, points);
    Matrix out(points.size(), dim());
    const std::size_t shift = include_constant_ ? 1 : 0;
    for (std::size_t a = 0; a < points.size(); ++a) {
        if (include_constant_) out(a, 0) = 1.0;
        for (std::size_t i = 0; i < k_; ++i) out(a, i + shift) = scale_by_sigma_ ? op_.sigma()[i] * e(a, i) : e(a, i);
    }
    return out;
}

// ---- LinearFeatures -------------------------------------------------------

LinearFeatures::LinearFeatures(std::shared_ptr<const FeatureMap> base, Matrix coeff)
    : base_(std::move(base)), coeff_(std::move(coeff)) {
    if (!base_) throw std::invalid_argument("LinearFeatures: null base");
    if (coeff_.cols() != base_->dim()) throw std::invalid_argument("LinearFeatures: coefficient columns != base dim");
}

void LinearFeatures::evaluate(double t, std::span<double> out) const {
    const Vector b = (*base_)(t);
    const Vector y = multiply(coeff_, b);
    std::copy(y.begin(), y.end(), out.begin());
}

Matrix LinearFeatures::evaluate_batch(std::span<const double> points) const {
    return multiply_a_bt(base_->evaluate_batch(points), coeff_);
}

// ---- MLP ------------------------------------------------------------------

MlpParams MlpParams::zeros(std::vector<std::size_t> widths) {
    if (widths.size() < 3) throw std::invalid_argument("MlpParams: need at least input, one hidden and output width");
    if (widths.front() != 1) throw std::invalid_argument("MlpParams: input width must be 1");
    for (std::size_t w : widths)
        if (w == 0) throw std::invalid_argument("MlpParams: zero width");
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) total += widths[l + 1] * (widths[l] + 1);
    MlpParams p;
    p.widths = std::move(widths);
    p.values.assign(total, 0.0);
    return p;
}

std::size_t MlpParams::weight_offset(std::size_t layer) const {
    std::size_t off = 0;
    for (std::size_t l = 0; l < layer; ++l) off += widths[l + 1] * (widths[l] + 1);
    return off;
}

MlpParams init_mlp(std::vector<std::size_t> widths, Rng& rng) {
    MlpParams p = MlpParams::zeros(std::move(widths));
    const std::size_t last = p.layers() - 1;
    for (std::size_t l = 0; l < p.layers(); ++l) {
        const std::size_t fan_in = p.widths[l];
        for (std::size_t o = 0; o < p.widths[l + 1]; ++o) {
            for (std::size_t i = 0; i < fan_in; ++i) {
                if (l == 0) {
                    p.weight(l, o, i) = rng.uniform(-2.0, 2.0);
                } else {
                    const double var = (l == last ? 1.0 : 2.0) / static_cast<double>(fan_in);
                    p.weight(l, o, i) = std::sqrt(var) * rng.normal();
                }
            }
            if (l == 0) p.bias(l, o) = rng.uniform(-2.0, 2.0);
        }
    }
    return p;
}

double first_activation(double t) {
    const double s = std::sin(t);
    return t + s * s;
}

double first_activation_grad(double t) { return 1.0 + std::sin(2.0 * t); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    return cdf + x * pdf;
}

namespace {

enum class Activation { First, Gelu, Linear };

Activation activation_of(const MlpParams& net, std::size_t layer) {
    if (layer + 1 == net.layers()) return Activation::Linear;
    return layer == 0 ? Activation::First : Activation::Gelu;
}

double activate(Activation a, double x) {
    switch (a) {
        case Activation::First: return first_activation(x);
        case Activation::Gelu: return gelu(x);
        case Activation::Linear: break;
    }
    return x;
}

double activate_grad(Activation a, double x) {
    switch (a) {
        case Activation::First: return first_activation_grad(x);
        case Activation::Gelu: return gelu_grad(x);
        case Activation::Linear: break;
    }
    return 1.0;
}

Matrix layer_weights(const MlpParams& net, std::size_t l) {
    const std::size_t off = net.weight_offset(l);
    const std::size_t n = net.widths[l + 1] * net.widths[l];
    return Matrix(net.widths[l + 1], net.widths[l], Vector(net.values.begin() + off, net.values.begin() + off + n));
}

}  // namespace

Matrix mlp_forward_raw(const MlpParams& net, std::span<const double> points, MlpTape* tape) {
    Matrix h(points.size(), 1);
    for (std::size_t a = 0; a < points.size(); ++a) h(a, 0) = points[a];
    if (tape) {
        tape->inputs.clear();
        tape->pre.clear();
    }
    for (std::size_t l = 0; l < net.layers(); ++l) {
        Matrix pre = multiply_a_bt(h, layer_weights(net, l));
        const std::size_t boff = net.bias_offset(l);
        for (std::size_t a = 0; a < pre.rows(); ++a) {
            auto row = pre.row(a);
            for (std::size_t o = 0; o < row.size(); ++o) row[o] += net.values[boff + o];
        }
        const Activation act = activation_of(net, l);
        Matrix post = pre;
        if (act != Activation::Linear)
            for (double& x : post.data()) x = activate(act, x);
        if (tape) {
            tape->inputs.push_back(std::move(h));
            tape->pre.push_back(std::move(pre));
        }
        h = std::move(post);
    }
    return h;
}

Vector mlp_backward(const MlpParams& net, const MlpTape& tape, const Matrix& upstream) {
    if (tape.pre.size() != net.layers()) throw std::invalid_argument("mlp_backward: tape does not match network");
    if (upstream.rows() != tape.pre.back().rows() || upstream.cols() != net.output_dim())
        throw std::invalid_argument("mlp_backward: upstream gradient shape mismatch");
    Vector grads(net.values.size(), 0.0);
    Matrix delta = upstream;
    for (std::size_t l = net.layers(); l-- > 0;) {
        const Activation act = activation_of(net, l);
        if (act != Activation::Linear) {
            const Matrix& pre = tape.pre[l];
            for (std::size_t i = 0; i < delta.data().size(); ++i) delta.data()[i] *= activate_grad(act, pre.data()[i]);
        }
        const Matrix gw = multiply_at_b(delta, tape.inputs[l]);
        std::copy(gw.data().begin(), gw.data().end(), grads.begin() + static_cast<std::ptrdiff_t>(net.weight_offset(l)));
        const std::size_t boff = net.bias_offset(l);
        for (std::size_t a = 0; a < delta.rows(); ++a) {
            auto row = delta.row(a);
            for (std::size_t o = 0; o < row.size(); ++o) grads[boff + o] += row[o];
        }
        if (l > 0) delta = multiply(delta, layer_weights(net, l));
    }
    return grads;
}

Vector mlp_backward(const MlpParams& net, std::span<const double> points, const Matrix& upstream) {
    MlpTape tape;
    mlp_forward_raw(net, points, &tape);
    return mlp_backward(net, tape, upstream);
}

// ---- MlpFeatures ----------------------------------------------------------

MlpFeatures::MlpFeatures(MlpParams net, Side side, bool constant_augmented, Vector centering)
    : net_(std::move(net)), side_(side), constant_(constant_augmented) {
    set_centering(std::move(centering));
}

void MlpFeatures::set_centering(Vector c) {
    if (c.empty()) c.assign(net_.output_dim(), 0.0);
    if (c.size() != net_.output_dim()) throw std::invalid_argument("MlpFeatures: centering length != output width");
    centering_ = std::move(c);
}

void MlpFeatures::evaluate(double t, std::span<double> out) const {
    const double point[1] = {t};
    const Matrix raw = mlp_forward_raw(net_, point);
    std::size_t o = 0;
    if (constant_) out[o++] = 1.0;
    for (std::size_t k = 0; k < raw.cols(); ++k) out[o++] = raw(0, k) - centering_[k];
}

Matrix MlpFeatures::evaluate_batch(std::span<const double> points) const {
    const Matrix raw = mlp_forward_raw(net_, points);
    Matrix out(points.size(), dim());
    const std::size_t shift = constant_ ? 1 : 0;
    for (std::size_t a = 0; a < raw.rows(); ++a) {
        if (constant_) out(a, 0) = 1.0;
        for (std::size_t k = 0; k < raw.cols(); ++k) out(a, k + shift) = raw(a, k) - centering_[k];
    }
    return out;
}

Vector mlp_forward(const MlpFeatures& features, double t) { return features(t); }

MlpFeatures center_features(MlpFeatures features, std::span<const UnlabeledSample> calibration) {
    if (calibration.empty()) throw std::invalid_argument("center_features: empty calibration set");
    const Vector points = features.side() == Side::X ? xs_of(calibration) : zs_of(calibration);
    const Matrix raw = mlp_forward_raw(features.net(), points);
    Vector mean(raw.cols(), 0.0);
    for (std::size_t a = 0; a < raw.rows(); ++a)
        for (std::size_t k = 0; k < raw.cols(); ++k) mean[k] += raw(a, k);
    for (double& m : mean) m /= static_cast<double>(raw.rows());
    features.set_centering(std::move(mean));
    return features;
}

// ---- Adam -----------------------------------------------------------------

AdamState AdamState::for_size(std::size_t n, AdamHyper hyper) {
    return AdamState{0, Vector(n, 0.0), Vector(n, 0.0), hyper};
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != state.first.size() || params.size() != state.second.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const AdamHyper& h = state.hyper;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(h.beta1, t);
    const double correction2 = 1.0 - std::pow(h.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.first[i] = h.beta1 * state.first[i] + (1.0 - h.beta1) * grads[i];
        state.second[i] = h.beta2 * state.second[i] + (1.0 - h.beta2) * grads[i] * grads[i];
        const double m_hat = state.first[i] / correction1;
        const double v_hat = state.second[i] / correction2;
        params[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.eps);
    }
}

// ---- checkpoints ----------------------------------------------------------

namespace {

constexpr char kMagic[6] = {'S', 'N', 'P', 'I', 'V', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
    auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    out.write(reinterpret_cast<const char*>(bits.data()), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
    std::array<unsigned char, sizeof(T)> bits{};
    if (!in.read(reinterpret_cast<char*>(bits.data()), sizeof(T))) throw std::invalid_argument("checkpoint: truncated file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
    return std::bit_cast<T>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& out, const MlpParams& net, const Vector& centering) {
    if (centering.size() != net.output_dim()) throw std::invalid_argument("checkpoint: centering length != output width");
    out.write(kMagic, sizeof kMagic);
    put_le<std::uint64_t>(out, net.widths.size());
    for (std::size_t w : net.widths) put_le<std::uint64_t>(out, w);
    for (double v : net.values) put_le<double>(out, v);
    for (double c : centering) put_le<double>(out, c);
}

std::pair<MlpParams, Vector> read_checkpoint(std::istream& in) {
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::invalid_argument("checkpoint: bad magic bytes");
    const auto count = get_le<std::uint64_t>(in);
    if (count < 3 || count > 64) throw std::invalid_argument("checkpoint: implausible layer count");
    std::vector<std::size_t> widths(count);
    for (auto& w : widths) w = get_le<std::uint64_t>(in);
    MlpParams net = MlpParams::zeros(std::move(widths));
    for (double& v : net.values) v = get_le<double>(in);
    Vector centering(net.output_dim());
    for (double& c : centering) c = get_le<double>(in);
    return {std::move(net), std::move(centering)};
}

}  // namespace snpiv
