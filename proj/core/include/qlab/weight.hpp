#pragma once

namespace qlab {

/// Radial weight for the monotonicity density.
///
/// φ(t) = 60 − 1.5t on [0,8]; on [8,10] the quintic that continues the line
/// with matching value, slope and zero curvature at t = 8 and reaches zero
/// with zero slope and curvature at t = 10; φ ≡ 0 beyond 10.
class WeightPhi {
public:
    static constexpr double kSupport = 10.0;

    double value(double t) const;
    double derivative(double t) const;
    double operator()(double t) const { return value(t); }
};

WeightPhi make_phi();

}  // namespace qlab
