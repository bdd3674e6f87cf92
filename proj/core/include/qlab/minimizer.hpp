#pragma once

// Discrete Landau-de Gennes energy, its exact gradient, and the descent loop.
//
// The discrete energy is the lattice Dirichlet energy plus the nodal bulk term,
// both with trapezoidal node weights so that integrals over the full cube are
// exact for constant and linear fields:
//
//   elastic = Σ_links  w_link · ½ |Q(v) − Q(u)|² / h²
//   bulk    = Σ_nodes  w_node · f(Q) / ε²
//
// At interior nodes every weight equals h³, and the gradient divided by the
// node weight is −Δ_h Q + bulk_gradient(Q)/ε² with the 7-point Laplacian.

#include <span>
#include <string_view>
#include <vector>

#include "qlab/field.hpp"

namespace qlab {

struct Energy {
    double elastic = 0.0;
    double bulk = 0.0;
    double total = 0.0;
};

Energy discrete_energy(const QField& field);

/// Quadrature weight of a node (h³ in the interior, halved per face touched).
double node_weight(const Grid& grid, std::size_t node);

/// ∂E/∂Q divided by the node weight; 5 values per node, zero on masked nodes.
std::vector<double> energy_gradient(const QField& field);

/// Energy and gradient in one pass. `grad` is resized as needed.
Energy energy_and_gradient(const QField& field, std::vector<double>& grad);

/// E(Q + α·dir) − E(Q), split into elastic and bulk parts, computed without
/// subtracting the two totals.
Energy energy_change(const QField& field, std::span<const double> dir, double alpha);

/// Σ_nodes w_node · u·v, the pairing under which energy_gradient is the
/// derivative of discrete_energy.
double weighted_dot(const QField& field, std::span<const double> u, std::span<const double> v);

enum class StepPolicy { fixed, barzilai_borwein, nonlinear_cg };

std::string_view to_string(StepPolicy policy);
StepPolicy parse_step_policy(std::string_view name);

struct SolveOptions {
    double grad_tol = 0.0;  ///< sup-norm threshold; ≤ 0 selects default_grad_tol(ε)
    int max_iters = 50000;
    StepPolicy step_policy = StepPolicy::barzilai_borwein;
    int record_every = 100;

    static double default_grad_tol(double epsilon) { return 1e-6 * (1.0 + 1.0 / (epsilon * epsilon)); }
    double effective_grad_tol(double epsilon) const {
        return grad_tol > 0.0 ? grad_tol : default_grad_tol(epsilon);
    }
};

struct EnergySample {
    int iteration = 0;
    double elastic = 0.0;
    double bulk = 0.0;
    double total = 0.0;
};

struct SolveStats {
    int iterations = 0;
    bool converged = false;
    std::vector<EnergySample> energy_trace;
    double final_grad_norm = 0.0;
    double wall_time = 0.0;  ///< seconds
};

/// Descends from `field` in place until max |coefficient| of energy_gradient is
/// at most the tolerance or max_iters is reached (stats.converged = false).
/// Masked nodes are never written. Throws NonFiniteEnergy.
SolveStats minimize_in_place(QField& field, const SolveOptions& opts);

struct SolveResult {
    QField field;
    SolveStats stats;
};

SolveResult minimize(QField field, const SolveOptions& opts);

struct ElResidual {
    double residual = 0.0;      ///< sup |−ε²Δ_hQ + bulk_gradient(Q)| / (1 + |Q| + |Q|³)
    double eps_grad_sup = 0.0;  ///< sup ε|∇Q|
};

/// Sup over free nodes strictly inside `interior`.
ElResidual el_residual_check(const QField& field, const Ball& interior);

}  // namespace qlab
