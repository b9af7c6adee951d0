#include "snpiv/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace snpiv {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kEnvelopeFactor = 1.05;
constexpr double kMinAcceptance = 0.01;
constexpr std::size_t kAcceptanceWarmup = 10000;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<Vector> read_rows(std::istream& in, const std::string& header, std::size_t width) {
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw std::invalid_argument("csv: expected header '" + header + "', got '" + line + "'");
    std::vector<Vector> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Vector row;
        std::stringstream ss(line);
        std::string cell;
        try {
            while (std::getline(ss, cell, ',')) row.push_back(parse_double(cell));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("csv: bad number on line " + std::to_string(line_no));
        }
        if (row.size() != width) throw std::invalid_argument("csv: wrong field count on line " + std::to_string(line_no));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace

void Scenario::validate() const {
    if (d < 2) throw std::invalid_argument("Scenario: d must be >= 2");
    if (!(c_sigma >= 0.0 && c_sigma <= 1.0)) throw std::invalid_argument("Scenario: c_sigma must lie in [0, 1]");
    if (!(c_alpha >= 0.0 && c_alpha <= 1.0)) throw std::invalid_argument("Scenario: c_alpha must lie in [0, 1]");
    if (!(sigma_head > 0.0 && sigma_head <= 1.0)) throw std::invalid_argument("Scenario: sigma_head must lie in (0, 1]");
    if (!(alpha_norm >= 0.0)) throw std::invalid_argument("Scenario: alpha_norm must be >= 0");
    if (!(noise_var >= 0.0)) throw std::invalid_argument("Scenario: noise_var must be >= 0");
}

double StructuralFunction::operator()(double x) const {
    return dot(alpha, eval_right(op, x));
}

Vector StructuralFunction::evaluate(std::span<const double> xs) const {
    return multiply(eval_singular_batch(op, Side::X, xs), alpha);
}

Vector make_decay(double head, double c, std::size_t r) {
    if (r == 0) throw std::invalid_argument("make_decay: r must be >= 1");
    Vector out(r, head);
    if (r == 1) return out;
    for (std::size_t i = 0; i < r; ++i)
        out[i] = head * (1.0 - (1.0 - c) * static_cast<double>(i) / static_cast<double>(r - 1));
    return out;
}

ScenarioModel build_scenario(const Scenario& s) {
    s.validate();
    const std::size_t r = s.d - 1;
    SpectralOperator op = SpectralOperator::from_seed(make_decay(s.sigma_head, s.c_sigma, r), s.seed_op);
    Vector alpha = make_decay(1.0, s.c_alpha, r);
    const double len = norm(alpha);
    for (double& a : alpha) a *= s.alpha_norm / len;
    StructuralFunction h0{std::move(alpha), op};
    return {std::move(op), std::move(h0)};
}

std::vector<UnlabeledSample> rejection_sample(const SpectralOperator& op, std::size_t m, Rng& rng) {
    if (op.grid_min_density() < -1e-9)
        throw SamplingError("rejection_sample: operator density is negative on the scan grid");
    const double envelope = kEnvelopeFactor * op.grid_max_density();
    std::vector<UnlabeledSample> out;
    out.reserve(m);
    std::size_t proposals = 0;
    while (out.size() < m) {
        const double x = rng.uniform(0.0, kTwoPi);
        const double z = rng.uniform(0.0, kTwoPi);
        const double level = rng.uniform(0.0, envelope);
        const double p = density(op, x, z);
        if (p > envelope) throw std::logic_error("rejection_sample: density exceeds the envelope");
        ++proposals;
        if (level < p) out.push_back({z, x});
        if (proposals >= kAcceptanceWarmup &&
            static_cast<double>(out.size()) < kMinAcceptance * static_cast<double>(proposals))
            throw SamplingError("rejection_sample: acceptance rate " +
                                std::to_string(static_cast<double>(out.size()) / static_cast<double>(proposals)) +
                                " below 1% (envelope " + std::to_string(envelope) + ")");
    }
    return out;
}

std::vector<LabeledSample> sample_outcomes(const SpectralOperator& op, const StructuralFunction& h0,
                                           std::span<const UnlabeledSample> pairs, double noise_var, Rng& rng) {
    if (!(noise_var >= 0.0)) throw std::invalid_argument("sample_outcomes: noise_var must be >= 0");
    const CoeffVector th0 = apply(op, CoeffVector{0.0, h0.alpha});
    const double sd = std::sqrt(noise_var);
    std::vector<LabeledSample> out;
    out.reserve(pairs.size());
    for (const UnlabeledSample& s : pairs) {
        const double mean = th0.constant + dot(th0.coeffs, eval_left(op, s.z));
        out.push_back({s.z, s.x, mean + sd * rng.normal()});
    }
    return out;
}

Vector xs_of(std::span<const UnlabeledSample> s) {
    Vector v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].x;
    return v;
}

Vector zs_of(std::span<const UnlabeledSample> s) {
    Vector v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].z;
    return v;
}

Vector xs_of(std::span<const LabeledSample> s) {
    Vector v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].x;
    return v;
}

Vector zs_of(std::span<const LabeledSample> s) {
    Vector v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].z;
    return v;
}

Vector ys_of(std::span<const LabeledSample> s) {
    Vector v(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) v[i] = s[i].y;
    return v;
}

void write_csv(std::ostream& out, std::span<const UnlabeledSample> samples) {
    out << "z,x\n";
    for (const auto& s : samples) out << g17(s.z) << ',' << g17(s.x) << '\n';
}

void write_csv(std::ostream& out, std::span<const LabeledSample> samples) {
    out << "z,x,y\n";
    for (const auto& s : samples) out << g17(s.z) << ',' << g17(s.x) << ',' << g17(s.y) << '\n';
}

std::vector<UnlabeledSample> read_unlabeled_csv(std::istream& in) {
    std::vector<UnlabeledSample> out;
    for (const Vector& row : read_rows(in, "z,x", 2)) out.push_back({row[0], row[1]});
    return out;
}

std::vector<LabeledSample> read_labeled_csv(std::istream& in) {
    std::vector<LabeledSample> out;
    for (const Vector& row : read_rows(in, "z,x,y", 3)) out.push_back({row[0], row[1], row[2]});
    return out;
}

}  // namespace snpiv
