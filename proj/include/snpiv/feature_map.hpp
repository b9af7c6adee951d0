#pragma once

#include <cstddef>
#include <span>

#include "snpiv/linalg.hpp"

namespace snpiv {

/// Which variable a function family lives on: the treatment X or the instrument Z.
enum class Side { X, Z };

const char* side_name(Side side);

/// A d-dimensional family of real functions on [0, 2pi].
class FeatureMap {
public:
    virtual ~FeatureMap() = default;

    virtual std::size_t dim() const = 0;
    virtual Side side() const = 0;
    /// Writes the dim() feature values at t into out.
    virtual void evaluate(double t, std::span<double> out) const = 0;
    /// True when component 0 is the hard-coded constant 1.
    virtual bool constant_augmented() const { return false; }

    /// Rows are points, columns are features.
    virtual Matrix evaluate_batch(std::span<const double> points) const;

    Vector operator()(double t) const;
};

}  // namespace snpiv
