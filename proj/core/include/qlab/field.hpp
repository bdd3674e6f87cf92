#pragma once

// Q-tensor fields on a uniform grid over the cube [-1,1]³.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qlab/qtensor.hpp"

namespace qlab {

/// Uniform grid with n nodes per axis, spacing h = 2/(n−1), corner (−1,−1,−1).
/// Nodes are stored node-major with k (the z index) fastest.
class Grid {
public:
    explicit Grid(int n);

    int n() const { return n_; }
    double h() const { return h_; }
    std::size_t node_count() const { return static_cast<std::size_t>(n_) * n_ * n_; }

    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }
    double coord(int i) const { return i == n_ - 1 ? 1.0 : -1.0 + i * h_; }
    Vec3 position(int i, int j, int k) const { return {coord(i), coord(j), coord(k)}; }
    Vec3 position(std::size_t node) const;
    std::array<int, 3> ijk(std::size_t node) const;

    bool on_face(int i, int j, int k) const {
        return i == 0 || j == 0 || k == 0 || i == n_ - 1 || j == n_ - 1 || k == n_ - 1;
    }

    /// Index range [lo, hi] of nodes whose coordinate lies in [x − r, x + r].
    std::pair<int, int> axis_range(double x, double r) const;

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int n_;
    double h_;
};

struct Ball {
    Vec3 center{0.0, 0.0, 0.0};
    double radius = 1.0;

    Ball() = default;
    Ball(Vec3 c, double r);

    /// Strict membership |y − center| < radius.
    bool contains(const Vec3& y) const;
};

/// A Q-tensor per grid node, a Dirichlet mask and the (ε, a, b, c) the field
/// belongs to. Masked nodes hold their boundary values and are never changed
/// by the solver.
struct QField {
    Grid grid{8};
    std::vector<double> data;          ///< 5 coefficients per node
    std::vector<std::uint8_t> mask;    ///< 1 = Dirichlet node
    double epsilon = 1.0;
    MaterialParams params = MaterialParams::make(1.0, 1.0, 1.0);

    QField() = default;
    QField(Grid g, double eps, const MaterialParams& p);

    QTensor at(std::size_t node) const {
        QTensor Q;
        for (std::size_t c = 0; c < 5; ++c) Q[c] = data[5 * node + c];
        return Q;
    }
    void set(std::size_t node, const QTensor& Q) {
        for (std::size_t c = 0; c < 5; ++c) data[5 * node + c] = Q[c];
    }
    bool masked(std::size_t node) const { return mask[node] != 0; }
    std::size_t free_count() const;
};

/// Boundary mode that freezes the cube faces at the hedgehog s_*(x̂⊗x̂ − I/3);
/// interior nodes are zero.
QField hedgehog_boundary(const Grid& grid, const MaterialParams& p, double epsilon);

/// Faces frozen at the constant tensor P; interior nodes also set to P.
QField constant_boundary(const Grid& grid, const MaterialParams& p, double epsilon, const QTensor& P);

/// Hedgehog s(|x|)(x̂⊗x̂ − I/3) with s(ρ) = s_* min(1, ρ/core_radius) in the
/// interior (0 at the origin), exact hedgehog data on the faces.
QField hedgehog_reference(const Grid& grid, const MaterialParams& p, double core_radius,
                          double epsilon = 1.0);

/// Forward differences on the three outgoing links, backward on the far faces:
/// Σ_k |Q(node + e_k) − Q(node)|² / h².
double discrete_gradient_sq(const QField& field, std::size_t node);

/// Per-node ½|∇Q|² + f(Q)/ε² with the stencil of discrete_gradient_sq.
std::vector<double> energy_density(const QField& field);

/// Per-node |∇Q| with the stencil of discrete_gradient_sq.
std::vector<double> gradient_magnitude(const QField& field);

/// h³ Σ density over nodes strictly inside the ball. Throws EmptyIntersection
/// when no node qualifies.
double integrate_ball(const QField& field, std::span<const double> density, const Ball& ball);

/// Calls fn(node, position) for every node strictly inside the ball.
template <class Fn>
void for_each_node_in(const Grid& grid, const Ball& ball, Fn&& fn) {
    const auto [i0, i1] = grid.axis_range(ball.center[0], ball.radius);
    const auto [j0, j1] = grid.axis_range(ball.center[1], ball.radius);
    const auto [k0, k1] = grid.axis_range(ball.center[2], ball.radius);
    for (int i = i0; i <= i1; ++i)
        for (int j = j0; j <= j1; ++j)
            for (int k = k0; k <= k1; ++k) {
                const Vec3 y = grid.position(i, j, k);
                if (ball.contains(y)) fn(grid.index(i, j, k), y);
            }
}

// Field files: 64-byte header, mask bytes, then little-endian doubles.
inline constexpr std::uint32_t kFieldFileVersion = 1;

void save_field(const QField& field, const std::filesystem::path& path);
QField load_field(const std::filesystem::path& path);

/// Byte grid with the field header convention (magic "QTNM").
void save_mask(const QField& field, std::span<const std::uint8_t> mask,
               const std::filesystem::path& path);

}  // namespace qlab
