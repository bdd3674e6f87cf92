#include "qlab/weight.hpp"

#include <algorithm>

namespace qlab {

// On [8,10] with u = (t − 8)/2:  p(u) = (1 − u)³ (48 + 141u + 279u²).
// p(0) = 48, p'(0) = −3 (slope −1.5 in t), p''(0) = 0, p = p' = p'' = 0 at u = 1,
// and dp/du = −(1 − u)² (3 + 6u + 1395u²) < 0 on [0,1).

double WeightPhi::value(double t) const {
    if (t <= 8.0) return 60.0 - 1.5 * std::max(t, 0.0);
    if (t >= kSupport) return 0.0;
    const double u = 0.5 * (t - 8.0);
    const double v = 1.0 - u;
    return std::clamp(v * v * v * (48.0 + u * (141.0 + 279.0 * u)), 0.0, 48.0);
}

double WeightPhi::derivative(double t) const {
    if (t <= 8.0) return -1.5;
    if (t >= kSupport) return 0.0;
    const double u = 0.5 * (t - 8.0);
    const double v = 1.0 - u;
    return -0.5 * v * v * (3.0 + u * (6.0 + 1395.0 * u));
}

WeightPhi make_phi() { return WeightPhi{}; }

}  // namespace qlab
