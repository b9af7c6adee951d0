#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "snpiv/operator.hpp"
#include "snpiv/rng.hpp"

namespace snpiv {

/// Full synthetic configuration. r = d - 1 nonconstant singular triplets.
struct Scenario {
    std::size_t d = 11;
    double c_sigma = 1.0;
    double c_alpha = 1.0;
    double sigma_head = 1.0;  // sigma_1 before the nonnegativity rescale
    double alpha_norm = 1.0;  // ||alpha||; 0 makes h0 the zero function
    double noise_var = 0.1;
    std::uint64_t seed_op = 0;
    std::uint64_t seed_data = 0;

    void validate() const;
};

struct UnlabeledSample {
    double z = 0.0;
    double x = 0.0;
};

struct LabeledSample {
    double z = 0.0;
    double x = 0.0;
    double y = 0.0;
};

/// h0 = sum_i alpha_i v_i.
struct StructuralFunction {
    Vector alpha;
    SpectralOperator op;

    double operator()(double x) const;
    Vector evaluate(std::span<const double> xs) const;
};

struct ScenarioModel {
    SpectralOperator op;
    StructuralFunction h0;
};

class SamplingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear decay from head to c * head over r entries, both endpoints included.
Vector make_decay(double head, double c, std::size_t r);

ScenarioModel build_scenario(const Scenario& s);

/// Exact draws from p(x, z) by uniform proposals under the envelope
/// 1.05 * (grid maximum of p). Fails if acceptance drops below 1%.
std::vector<UnlabeledSample> rejection_sample(const SpectralOperator& op, std::size_t m, Rng& rng);

/// y = (T h0)(z) + v with v ~ N(0, noise_var).
std::vector<LabeledSample> sample_outcomes(const SpectralOperator& op, const StructuralFunction& h0,
                                           std::span<const UnlabeledSample> pairs, double noise_var, Rng& rng);

Vector xs_of(std::span<const UnlabeledSample> s);
Vector zs_of(std::span<const UnlabeledSample> s);
Vector xs_of(std::span<const LabeledSample> s);
Vector zs_of(std::span<const LabeledSample> s);
Vector ys_of(std::span<const LabeledSample> s);

// CSV with header `z,x` or `z,x,y` and 17 significant digits.
void write_csv(std::ostream& out, std::span<const UnlabeledSample> samples);
void write_csv(std::ostream& out, std::span<const LabeledSample> samples);
std::vector<UnlabeledSample> read_unlabeled_csv(std::istream& in);
std::vector<LabeledSample> read_labeled_csv(std::istream& in);

}  // namespace snpiv
