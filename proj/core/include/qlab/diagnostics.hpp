#pragma once

// Diagnostics on a solved field: monotonicity density Θ, stress-energy
// residual, regular scale, bad set, pinching-driven covering and the weak-L³
// quasinorm of the gradient. Everything reads ε and (a, b, c) from the field.

#include <cstdint>
#include <span>
#include <vector>

#include "qlab/field.hpp"
#include "qlab/weight.hpp"

namespace qlab {

/// Read-only view of a field with its nodal energy density and gradient
/// magnitude computed once.
class FieldDiagnostics {
public:
    explicit FieldDiagnostics(const QField& field);
    FieldDiagnostics(QField&&) = delete;  // keeps a reference

    const QField& field() const { return *field_; }
    const Grid& grid() const { return field_->grid; }
    std::span<const double> density() const { return density_; }
    std::span<const double> grad_magnitude() const { return grad_mag_; }

private:
    const QField* field_;
    std::vector<double> density_;
    std::vector<double> grad_mag_;
};

/// Θ_r(x) = (1/r) h³ Σ_y e_ε(y) φ(|y − x|²/r²) over the cube. Throws
/// ResolutionError when r < 2h.
double theta(const FieldDiagnostics& diag, const Vec3& x, double r, const WeightPhi& phi = {});
double theta(const QField& field, const Vec3& x, double r);

/// Θ_r at every node, by FFT convolution. Same sum as theta().
std::vector<double> theta_field(const FieldDiagnostics& diag, double r, const WeightPhi& phi = {});

struct MonotonicityProfile {
    std::vector<double> radii;
    std::vector<double> theta;
    std::vector<double> violation;  ///< max(0, Θ_{r_i} − Θ_{r_{i+1}}), one per consecutive pair

    /// max_i violation_i / (Θ_{r_i} · (5h / r_i)); ≤ 1 means within the slack.
    double worst_slack_ratio(double h) const;
    double max_relative_violation() const;  ///< max_i violation_i / Θ_{r_i}
};

MonotonicityProfile monotonicity_profile(const FieldDiagnostics& diag, const Vec3& x,
                                         std::span<const double> radii);

/// sup over region nodes of |∂_j(e_ε δ_ij − ∂_iQ:∂_jQ)| (central differences)
/// divided by sup e_ε over the region. The region must stay 2h inside the cube.
double stress_energy_residual(const QField& field, const Ball& region);

/// Largest ladder radius ρ ∈ {h, 2h, …, 1} with ρ² max_{B_ρ(x)} e_ε ≤ 1, 0 if
/// ρ = h already fails.
double regular_scale(const FieldDiagnostics& diag, const Vec3& x);

/// Regular scale at every node of the region (other nodes get −1). With
/// `cap` > 0 the ladder stops at the first radius ≥ cap.
std::vector<double> regular_scale_nodes(const FieldDiagnostics& diag, const Ball& region, double cap = 0.0);

struct BadSetMask {
    std::vector<std::uint8_t> mask;  ///< per grid node, false outside the region
    Ball region;
    double r = 0.0;
    double delta = 0.0;

    std::size_t count() const;
    /// max |y − c| over masked nodes, −1 when empty.
    double max_distance_from(const Grid& grid, const Vec3& c) const;
};

/// {regular_scale < r} ∪ {dist_to_vacuum > δ} restricted to the region.
BadSetMask bad_set(const FieldDiagnostics& diag, const Ball& region, double r, double delta);

struct PinchRecord {
    int depth = 0;
    Vec3 center{};
    double radius = 0.0;
    double top_theta = 0.0;     ///< E = max Θ_R over B_2R(center)
    double pinch_theta = 0.0;   ///< Θ_{R/20} at the chosen recenter point
    double drop = 0.0;          ///< E − pinch_theta
    std::size_t pinched = 0;    ///< |F_η|
    double confined_fraction = 1.0;  ///< bad nodes of B_R(center) inside B_{2βR}(new center)
    bool emitted = false;
};

struct CoverOptions {
    double eta = 0.0;   ///< ≤ 0: 0.05 × top-level Θ maximum
    double beta = 0.25;
    std::size_t budget = 200000;  ///< recursion node limit
};

struct CoverResult {
    std::vector<Ball> balls;
    std::vector<PinchRecord> pinch_trace;
    BadSetMask target;
    double eta = 0.0;
    double top_theta = 0.0;
    std::size_t recursion_nodes = 0;
};

/// Recursive pinching cover of bad_set(region, r, δ) by balls of radius ≥ r.
/// Throws BudgetExceeded, ResolutionError (r < 4h), std::invalid_argument.
CoverResult cover_bad_set(const FieldDiagnostics& diag, const Ball& region, double r, double delta,
                          const CoverOptions& opts = {});

/// True iff every masked node lies strictly inside some ball.
bool covers(const Grid& grid, std::span<const Ball> balls, std::span<const std::uint8_t> mask);

/// L³ of the (cube-clipped) r-neighbourhood of the masked nodes, h³ × node count.
double neighborhood_volume(const Grid& grid, std::span<const std::uint8_t> mask, double r);

/// sup_t t · (h³ #{y ∈ region : |∇Q(y)| > t})^{1/3} over 64 log-spaced
/// t ∈ [1e−2, 10 max|∇Q|].
double weak_l3_quasinorm(const FieldDiagnostics& diag, const Ball& region);

}  // namespace qlab
