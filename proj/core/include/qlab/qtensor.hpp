#pragma once

// Pointwise Q-tensor algebra.
//
// A Q-tensor is a symmetric traceless 3x3 matrix. It is stored as its five
// coefficients in the orthonormal basis
//
//   E1 = diag(1,-1,0)/√2        E2 = diag(1,1,-2)/√6
//   E3 = (e1⊗e2 + e2⊗e1)/√2     E4 = (e1⊗e3 + e3⊗e1)/√2
//   E5 = (e2⊗e3 + e3⊗e2)/√2
//
// so that the Frobenius product Q:P is the plain dot product of coefficients.

#include <array>
#include <cmath>
#include <string_view>

namespace qlab {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

struct QTensor {
    std::array<double, 5> q{};

    double& operator[](std::size_t i) { return q[i]; }
    double operator[](std::size_t i) const { return q[i]; }

    QTensor& operator+=(const QTensor& o) {
        for (std::size_t i = 0; i < 5; ++i) q[i] += o.q[i];
        return *this;
    }
    QTensor& operator-=(const QTensor& o) {
        for (std::size_t i = 0; i < 5; ++i) q[i] -= o.q[i];
        return *this;
    }
    QTensor& operator*=(double s) {
        for (auto& v : q) v *= s;
        return *this;
    }
    friend QTensor operator+(QTensor a, const QTensor& b) { return a += b; }
    friend QTensor operator-(QTensor a, const QTensor& b) { return a -= b; }
    friend QTensor operator*(QTensor a, double s) { return a *= s; }
    friend QTensor operator*(double s, QTensor a) { return a *= s; }
    friend bool operator==(const QTensor&, const QTensor&) = default;
};

/// Frobenius product Q:P.
inline double dot(const QTensor& a, const QTensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += a.q[i] * b.q[i];
    return s;
}

/// |Q|² = tr Q².
inline double norm_sq(const QTensor& a) { return dot(a, a); }
inline double norm(const QTensor& a) { return std::sqrt(norm_sq(a)); }

Mat3 to_matrix(const QTensor& Q);

/// Coefficients of the symmetric traceless part of M.
QTensor from_matrix(const Mat3& M);

/// s (n⊗n − I/3) for a unit vector n (n is normalized here).
QTensor uniaxial(double s, Vec3 n);

/// tr Q³.
double trace_cube(const QTensor& Q);

/// Bulk constants (a, b, c) and the quantities derived from them.
struct MaterialParams {
    double a = 1.0;
    double b = 1.0;
    double c = 1.0;
    double s_star = 0.0;             ///< scalar order of the vacuum manifold
    double k = 0.0;                  ///< additive constant making inf f = 0
    double lambda_star = 0.0;        ///< minimizer of f on the λ₁ = λ₂ stratum
    double g_at_lambda_star = 0.0;   ///< f there; strictly positive

    /// Throws std::invalid_argument unless a ≥ 0, b > 0, c > 0.
    static MaterialParams make(double a, double b, double c);

    /// Upper threshold on f guaranteeing λ₁ > λ₂ (half of g(λ_*)).
    double vacuum_gap_threshold() const { return 0.5 * g_at_lambda_star; }
};

/// f(Q) = k − (a/2)tr Q² − (b/3)tr Q³ + (c/4)(tr Q²)².
double bulk_potential(const QTensor& Q, const MaterialParams& p);

/// Gradient of f restricted to the traceless symmetric matrices:
/// −aQ − bQ² + (b/3)|Q|² I + c|Q|² Q.
QTensor bulk_gradient(const QTensor& Q, const MaterialParams& p);

/// f(Q + d) − f(Q), evaluated without cancellation against f(Q).
double bulk_potential_change(const QTensor& Q, const QTensor& d, const MaterialParams& p);

struct EigenSystem {
    std::array<double, 3> values{};   ///< descending
    std::array<Vec3, 3> vectors{};     ///< vectors[i] pairs with values[i]
};

/// Closed-form symmetric eigen-solver. Degenerate spectra return some valid
/// orthonormal frame.
EigenSystem eigen_decompose(const QTensor& Q);

/// min over n ∈ S² of |Q − s_*(n⊗n − I/3)|.
double dist_to_vacuum(const QTensor& Q, const MaterialParams& p);

/// Nearest point of the vacuum manifold. Throws DegenerateSpectrum when
/// λ₁ − λ₂ ≤ gap_tol.
QTensor project_to_vacuum(const QTensor& Q, const MaterialParams& p, double gap_tol = 1e-8);

enum class Phase { isotropic, uniaxial, biaxial };

std::string_view to_string(Phase phase);

struct PhaseLabel {
    Phase tag = Phase::isotropic;
    double s = 0.0;  ///< Q = s(n⊗n − I/3) + r(m⊗m − I/3), n,m top/bottom eigenvectors
    double r = 0.0;
};

PhaseLabel classify_phase(const QTensor& Q, double tol);

/// g(λ) = f(diag(λ, λ, −2λ)) = k − 3aλ² + 2bλ³ + 9cλ⁴.
double equal_eigenvalue_curve(double lambda, const MaterialParams& p);

}  // namespace qlab
