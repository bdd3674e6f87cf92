#include "qlab/qtensor.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>

#include "qlab/errors.hpp"

namespace qlab {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt6 = 0.40824829046386301637;

Mat3 matmul(const Mat3& A, const Mat3& B) {
    Mat3 C{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0.0;
            for (int l = 0; l < 3; ++l) s += A[i][l] * B[l][j];
            C[i][j] = s;
        }
    return C;
}

double frobenius(const Mat3& A, const Mat3& B) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += A[i][j] * B[i][j];
    return s;
}

double det3(const Mat3& A) {
    return A[0][0] * (A[1][1] * A[2][2] - A[1][2] * A[2][1]) -
           A[0][1] * (A[1][0] * A[2][2] - A[1][2] * A[2][0]) +
           A[0][2] * (A[1][0] * A[2][1] - A[1][1] * A[2][0]);
}

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 scaled(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }

Vec3 matvec(const Mat3& A, const Vec3& v) {
    return {dot3(A[0], v), dot3(A[1], v), dot3(A[2], v)};
}

// Unit vector orthogonal to the unit vector v.
Vec3 any_orthogonal(const Vec3& v) {
    int axis = 0;
    for (int i = 1; i < 3; ++i)
        if (std::abs(v[i]) < std::abs(v[axis])) axis = i;
    Vec3 e{0.0, 0.0, 0.0};
    e[axis] = 1.0;
    Vec3 u = cross(v, e);
    return scaled(u, 1.0 / std::sqrt(dot3(u, u)));
}

// Kernel direction of A − λI from the best-conditioned cross product of rows.
bool null_vector(const Mat3& A, double lambda, Vec3& out) {
    Mat3 S = A;
    for (int i = 0; i < 3; ++i) S[i][i] -= lambda;
    const std::array<Vec3, 3> candidates{cross(S[0], S[1]), cross(S[0], S[2]), cross(S[1], S[2])};
    int best = 0;
    double best_norm = dot3(candidates[0], candidates[0]);
    for (int i = 1; i < 3; ++i) {
        const double nrm = dot3(candidates[i], candidates[i]);
        if (nrm > best_norm) {
            best = i;
            best_norm = nrm;
        }
    }
    if (!(best_norm > 0.0)) return false;
    out = scaled(candidates[best], 1.0 / std::sqrt(best_norm));
    return true;
}

}  // namespace

Mat3 to_matrix(const QTensor& Q) {
    const double d1 = Q[0] * kInvSqrt2;
    const double d2 = Q[1] * kInvSqrt6;
    Mat3 M{};
    M[0][0] = d1 + d2;
    M[1][1] = -d1 + d2;
    M[2][2] = -2.0 * d2;
    M[0][1] = M[1][0] = Q[2] * kInvSqrt2;
    M[0][2] = M[2][0] = Q[3] * kInvSqrt2;
    M[1][2] = M[2][1] = Q[4] * kInvSqrt2;
    return M;
}

QTensor from_matrix(const Mat3& M) {
    QTensor Q;
    Q[0] = (M[0][0] - M[1][1]) * kInvSqrt2;
    Q[1] = (M[0][0] + M[1][1] - 2.0 * M[2][2]) * kInvSqrt6;
    Q[2] = (M[0][1] + M[1][0]) * kInvSqrt2;
    Q[3] = (M[0][2] + M[2][0]) * kInvSqrt2;
    Q[4] = (M[1][2] + M[2][1]) * kInvSqrt2;
    return Q;
}

QTensor uniaxial(double s, Vec3 n) {
    n = scaled(n, 1.0 / std::sqrt(dot3(n, n)));
    Mat3 M{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) M[i][j] = s * n[i] * n[j];
    return from_matrix(M);
}

double trace_cube(const QTensor& Q) {
    // Cayley-Hamilton for traceless matrices: tr Q³ = 3 det Q.
    return 3.0 * det3(to_matrix(Q));
}

MaterialParams MaterialParams::make(double a, double b, double c) {
    if (!(a >= 0.0) || !(b > 0.0) || !(c > 0.0))
        throw std::invalid_argument("material constants require a >= 0, b > 0, c > 0");
    MaterialParams p;
    p.a = a;
    p.b = b;
    p.c = c;
    const double root = std::sqrt(b * b + 24.0 * a * c);
    p.s_star = (b + root) / (4.0 * c);
    const double s = p.s_star;
    p.k = s * s / 27.0 * (9.0 * a + 2.0 * b * s - 3.0 * c * s * s);
    p.lambda_star = (-b + root) / (12.0 * c);
    p.g_at_lambda_star = equal_eigenvalue_curve(p.lambda_star, p);
    return p;
}

double bulk_potential(const QTensor& Q, const MaterialParams& p) {
    const double tr2 = norm_sq(Q);
    const double tr3 = trace_cube(Q);
    return p.k - 0.5 * p.a * tr2 - p.b / 3.0 * tr3 + 0.25 * p.c * tr2 * tr2;
}

QTensor bulk_gradient(const QTensor& Q, const MaterialParams& p) {
    const Mat3 M = to_matrix(Q);
    // Projection onto the traceless subspace drops the (b/3)|Q|² I term.
    const QTensor Q2 = from_matrix(matmul(M, M));
    const double tr2 = norm_sq(Q);
    const double linear = -p.a + p.c * tr2;
    QTensor G;
    for (std::size_t i = 0; i < 5; ++i) G[i] = linear * Q[i] - p.b * Q2[i];
    return G;
}

double bulk_potential_change(const QTensor& Q, const QTensor& d, const MaterialParams& p) {
    const Mat3 Mq = to_matrix(Q);
    const Mat3 Md = to_matrix(d);
    const Mat3 Mdd = matmul(Md, Md);
    const double qd = dot(Q, d);
    const double dd = norm_sq(d);
    const double qq = norm_sq(Q);
    // tr(Q+d)³ − tr Q³ = 3 tr(Q²d) + 3 tr(Q d²) + tr d³
    const double d3 = 3.0 * frobenius(matmul(Mq, Mq), Md) + 3.0 * frobenius(Mq, Mdd) + 3.0 * det3(Md);
    const double d2 = 2.0 * qd + dd;  // |Q+d|² − |Q|²
    const double d4 = d2 * (2.0 * qq + d2);
    return -0.5 * p.a * d2 - p.b / 3.0 * d3 + 0.25 * p.c * d4;
}

EigenSystem eigen_decompose(const QTensor& Q) {
    EigenSystem es;
    const Mat3 A = to_matrix(Q);
    const double nsq = norm_sq(Q);
    es.vectors = {Vec3{1.0, 0.0, 0.0}, Vec3{0.0, 1.0, 0.0}, Vec3{0.0, 0.0, 1.0}};
    if (!(nsq > 1e-300)) {
        es.values = {0.0, 0.0, 0.0};
        return es;
    }

    // Trigonometric solution for a traceless symmetric matrix.
    const double pp = std::sqrt(nsq / 6.0);
    Mat3 B = A;
    for (auto& row : B)
        for (auto& v : row) v /= pp;
    const double r = std::clamp(0.5 * det3(B), -1.0, 1.0);
    const double phi = std::acos(r) / 3.0;
    const double l1 = 2.0 * pp * std::cos(phi);
    const double l3 = 2.0 * pp * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
    const double l2 = -l1 - l3;

    // The isolated eigenvalue is accurate even when the other two nearly
    // coincide; its eigenvector comes from a cross product, the remaining
    // pair from an exact 2x2 rotation in the orthogonal complement.
    const bool top_isolated = (l1 - l2) >= (l2 - l3);
    const double l_iso = top_isolated ? l1 : l3;
    Vec3 v;
    if (!null_vector(A, l_iso, v)) {
        es.values = {l1, l2, l3};
        return es;
    }
    const Vec3 u = any_orthogonal(v);
    const Vec3 w = cross(v, u);
    const Vec3 Au = matvec(A, u);
    const Vec3 Aw = matvec(A, w);
    const double a11 = dot3(u, Au);
    const double a12 = dot3(u, Aw);
    const double a22 = dot3(w, Aw);
    const double theta = 0.5 * std::atan2(2.0 * a12, a11 - a22);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const Vec3 e1{cs * u[0] + sn * w[0], cs * u[1] + sn * w[1], cs * u[2] + sn * w[2]};
    const Vec3 e2{-sn * u[0] + cs * w[0], -sn * u[1] + cs * w[1], -sn * u[2] + cs * w[2]};

    std::array<std::pair<double, Vec3>, 3> pairs{
        std::pair{dot3(v, matvec(A, v)), v},
        std::pair{dot3(e1, matvec(A, e1)), e1},
        std::pair{dot3(e2, matvec(A, e2)), e2},
    };
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& x, const auto& y) { return x.first > y.first; });
    for (int i = 0; i < 3; ++i) {
        es.values[i] = pairs[i].first;
        es.vectors[i] = pairs[i].second;
    }
    return es;
}

double dist_to_vacuum(const QTensor& Q, const MaterialParams& p) {
    const double l1 = eigen_decompose(Q).values[0];
    const double s = p.s_star;
    return std::sqrt(std::max(0.0, norm_sq(Q) - 2.0 * s * l1 + 2.0 * s * s / 3.0));
}

QTensor project_to_vacuum(const QTensor& Q, const MaterialParams& p, double gap_tol) {
    const EigenSystem es = eigen_decompose(Q);
    if (!(es.values[0] - es.values[1] > gap_tol))
        throw DegenerateSpectrum("projection onto the vacuum manifold needs lambda1 > lambda2");
    return uniaxial(p.s_star, es.vectors[0]);
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::isotropic: return "isotropic";
        case Phase::uniaxial: return "uniaxial";
        case Phase::biaxial: return "biaxial";
    }
    return "unknown";
}

PhaseLabel classify_phase(const QTensor& Q, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("classify_phase: tol must be positive");
    const auto lam = eigen_decompose(Q).values;
    PhaseLabel label;
    label.s = 2.0 * lam[0] + lam[2];
    label.r = lam[0] + 2.0 * lam[2];
    const bool iso = std::abs(lam[0]) <= tol && std::abs(lam[1]) <= tol && std::abs(lam[2]) <= tol;
    if (iso)
        label.tag = Phase::isotropic;
    else if (lam[0] - lam[1] <= tol || lam[1] - lam[2] <= tol)
        label.tag = Phase::uniaxial;
    else
        label.tag = Phase::biaxial;
    return label;
}

double equal_eigenvalue_curve(double lambda, const MaterialParams& p) {
    const double l2 = lambda * lambda;
    return p.k - 3.0 * p.a * l2 + 2.0 * p.b * l2 * lambda + 9.0 * p.c * l2 * l2;
}

}  // namespace qlab
