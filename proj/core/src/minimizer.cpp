#include "qlab/minimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qlab/errors.hpp"

namespace qlab {

namespace {

// Trapezoidal weight of index i along one axis.
double axis_weight(const Grid& g, int i) { return (i == 0 || i == g.n() - 1) ? 0.5 * g.h() : g.h(); }

struct Stencil {
    int n;
    double h;
    std::size_t stride[3];
    std::vector<double> w;  // per-index axis weight

    explicit Stencil(const Grid& g)
        : n(g.n()), h(g.h()), stride{static_cast<std::size_t>(g.n()) * g.n(), static_cast<std::size_t>(g.n()), 1},
          w(static_cast<std::size_t>(g.n())) {
        for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = axis_weight(g, i);
    }
};

double inv_eps_sq(const QField& f) { return std::isfinite(f.epsilon) ? 1.0 / (f.epsilon * f.epsilon) : 0.0; }

// Sums per-slab partials in slab order so the result is independent of the
// thread count.
Energy reduce(const std::vector<double>& el, const std::vector<double>& bu) {
    Energy e;
    e.elastic = std::accumulate(el.begin(), el.end(), 0.0);
    e.bulk = std::accumulate(bu.begin(), bu.end(), 0.0);
    e.total = e.elastic + e.bulk;
    return e;
}

template <bool WithGradient>
Energy evaluate(const QField& field, double* grad) {
    const Grid& g = field.grid;
    const Stencil st(g);
    const double inv_h2 = 1.0 / (st.h * st.h);
    const double ie2 = inv_eps_sq(field);
    const double* q = field.data.data();
    std::vector<double> slab_el(static_cast<std::size_t>(st.n), 0.0);
    std::vector<double> slab_bu(static_cast<std::size_t>(st.n), 0.0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < st.n; ++i) {
        double el = 0.0;
        double bu = 0.0;
        for (int j = 0; j < st.n; ++j)
            for (int k = 0; k < st.n; ++k) {
                const int idx[3] = {i, j, k};
                const double wi = st.w[static_cast<std::size_t>(i)];
                const double wj = st.w[static_cast<std::size_t>(j)];
                const double wk = st.w[static_cast<std::size_t>(k)];
                const double wnode = wi * wj * wk;
                const double wlink[3] = {st.h * wj * wk, st.h * wi * wk, st.h * wi * wj};
                const std::size_t node = g.index(i, j, k);
                const double* qn = q + 5 * node;

                for (int axis = 0; axis < 3; ++axis) {
                    if (idx[axis] == st.n - 1) continue;
                    const double* qb = qn + 5 * st.stride[axis];
                    double d2 = 0.0;
                    for (int c = 0; c < 5; ++c) {
                        const double d = qb[c] - qn[c];
                        d2 += d * d;
                    }
                    el += 0.5 * wlink[axis] * d2 * inv_h2;
                }
                QTensor Q;
                for (std::size_t c = 0; c < 5; ++c) Q[c] = qn[c];
                bu += wnode * ie2 * bulk_potential(Q, field.params);

                if constexpr (WithGradient) {
                    double* gn = grad + 5 * node;
                    if (field.mask[node]) {
                        for (int c = 0; c < 5; ++c) gn[c] = 0.0;
                        continue;
                    }
                    double lap[5] = {0.0, 0.0, 0.0, 0.0, 0.0};
                    for (int axis = 0; axis < 3; ++axis) {
                        const double scale = st.h / st.w[static_cast<std::size_t>(idx[axis])] * inv_h2;
                        if (idx[axis] > 0) {
                            const double* qa = qn - 5 * st.stride[axis];
                            for (int c = 0; c < 5; ++c) lap[c] += scale * (qn[c] - qa[c]);
                        }
                        if (idx[axis] < st.n - 1) {
                            const double* qb = qn + 5 * st.stride[axis];
                            for (int c = 0; c < 5; ++c) lap[c] += scale * (qn[c] - qb[c]);
                        }
                    }
                    const QTensor bg = bulk_gradient(Q, field.params);
                    for (std::size_t c = 0; c < 5; ++c) gn[c] = lap[c] + ie2 * bg[c];
                }
            }
        slab_el[static_cast<std::size_t>(i)] = el;
        slab_bu[static_cast<std::size_t>(i)] = bu;
    }
    return reduce(slab_el, slab_bu);
}

double sup_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

void check_finite(const Energy& e, int iteration) {
    if (!std::isfinite(e.total))
        throw NonFiniteEnergy("energy became non-finite at iteration " + std::to_string(iteration));
}

}  // namespace

double node_weight(const Grid& grid, std::size_t node) {
    const auto [i, j, k] = grid.ijk(node);
    return axis_weight(grid, i) * axis_weight(grid, j) * axis_weight(grid, k);
}

Energy discrete_energy(const QField& field) { return evaluate<false>(field, nullptr); }

std::vector<double> energy_gradient(const QField& field) {
    std::vector<double> grad;
    energy_and_gradient(field, grad);
    return grad;
}

Energy energy_and_gradient(const QField& field, std::vector<double>& grad) {
    grad.resize(field.data.size());
    return evaluate<true>(field, grad.data());
}

Energy energy_change(const QField& field, std::span<const double> dir, double alpha) {
    if (dir.size() != field.data.size()) throw std::invalid_argument("energy_change: direction size mismatch");
    const Grid& g = field.grid;
    const Stencil st(g);
    const double inv_h2 = 1.0 / (st.h * st.h);
    const double ie2 = inv_eps_sq(field);
    const double* q = field.data.data();
    const double* d = dir.data();
    std::vector<double> slab_el(static_cast<std::size_t>(st.n), 0.0);
    std::vector<double> slab_bu(static_cast<std::size_t>(st.n), 0.0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < st.n; ++i) {
        double el = 0.0;
        double bu = 0.0;
        for (int j = 0; j < st.n; ++j)
            for (int k = 0; k < st.n; ++k) {
                const int idx[3] = {i, j, k};
                const double wi = st.w[static_cast<std::size_t>(i)];
                const double wj = st.w[static_cast<std::size_t>(j)];
                const double wk = st.w[static_cast<std::size_t>(k)];
                const double wlink[3] = {st.h * wj * wk, st.h * wi * wk, st.h * wi * wj};
                const std::size_t node = g.index(i, j, k);
                const double* qn = q + 5 * node;
                const double* dn = d + 5 * node;
                for (int axis = 0; axis < 3; ++axis) {
                    if (idx[axis] == st.n - 1) continue;
                    const std::size_t off = 5 * st.stride[axis];
                    double cross = 0.0;
                    double dd = 0.0;
                    for (std::size_t c = 0; c < 5; ++c) {
                        const double dq = qn[off + c] - qn[c];
                        const double ddir = dn[off + c] - dn[c];
                        cross += dq * ddir;
                        dd += ddir * ddir;
                    }
                    el += wlink[axis] * inv_h2 * (alpha * cross + 0.5 * alpha * alpha * dd);
                }
                bool moves = false;
                QTensor Q, step;
                for (std::size_t c = 0; c < 5; ++c) {
                    Q[c] = qn[c];
                    step[c] = alpha * dn[c];
                    moves = moves || step[c] != 0.0;
                }
                if (moves) bu += wi * wj * wk * ie2 * bulk_potential_change(Q, step, field.params);
            }
        slab_el[static_cast<std::size_t>(i)] = el;
        slab_bu[static_cast<std::size_t>(i)] = bu;
    }
    return reduce(slab_el, slab_bu);
}

double weighted_dot(const QField& field, std::span<const double> u, std::span<const double> v) {
    const Grid& g = field.grid;
    const Stencil st(g);
    std::vector<double> slab(static_cast<std::size_t>(st.n), 0.0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < st.n; ++i) {
        double s = 0.0;
        for (int j = 0; j < st.n; ++j)
            for (int k = 0; k < st.n; ++k) {
                const std::size_t base = 5 * g.index(i, j, k);
                double local = 0.0;
                for (std::size_t c = 0; c < 5; ++c) local += u[base + c] * v[base + c];
                s += st.w[static_cast<std::size_t>(i)] * st.w[static_cast<std::size_t>(j)] *
                     st.w[static_cast<std::size_t>(k)] * local;
            }
        slab[static_cast<std::size_t>(i)] = s;
    }
    return std::accumulate(slab.begin(), slab.end(), 0.0);
}

std::string_view to_string(StepPolicy policy) {
    switch (policy) {
        case StepPolicy::fixed: return "fixed";
        case StepPolicy::barzilai_borwein: return "barzilai-borwein";
        case StepPolicy::nonlinear_cg: return "nonlinear-cg";
    }
    return "unknown";
}

StepPolicy parse_step_policy(std::string_view name) {
    if (name == "fixed") return StepPolicy::fixed;
    if (name == "barzilai-borwein" || name == "bb") return StepPolicy::barzilai_borwein;
    if (name == "nonlinear-cg" || name == "cg") return StepPolicy::nonlinear_cg;
    throw std::invalid_argument("unknown step policy '" + std::string(name) + "'");
}

SolveStats minimize_in_place(QField& field, const SolveOptions& opts) {
    if (opts.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
    if (field.free_count() == 0) throw std::invalid_argument("field has no free node");

    const auto t0 = std::chrono::steady_clock::now();
    const double tol = opts.effective_grad_tol(field.epsilon);
    const double h = field.grid.h();
    const MaterialParams& p = field.params;
    const double bulk_lip = p.a + 2.0 * p.b * p.s_star + 3.0 * p.c * p.s_star * p.s_star;
    const double fixed_step = h * h / (6.0 + bulk_lip * inv_eps_sq(field) * h * h);
    constexpr double kArmijo = 1e-4;
    constexpr int kMaxHalvings = 60;

    SolveStats stats;
    std::vector<double> grad;
    Energy energy = energy_and_gradient(field, grad);
    check_finite(energy, 0);
    stats.energy_trace.push_back({0, energy.elastic, energy.bulk, energy.total});
    double gnorm = sup_norm(grad);

    const std::size_t size = field.data.size();
    std::vector<double> dir(size), prev_x, prev_grad, prev_dir;
    double step = fixed_step;
    double prev_gg = 0.0;
    bool stalled = false;

    int it = 0;
    while (gnorm > tol && it < opts.max_iters) {
        const double gg = weighted_dot(field, grad, grad);

        // Search direction.
        if (opts.step_policy == StepPolicy::nonlinear_cg && !prev_dir.empty()) {
            std::vector<double> dg(size);
            for (std::size_t i = 0; i < size; ++i) dg[i] = grad[i] - prev_grad[i];
            const double beta = std::max(0.0, weighted_dot(field, grad, dg) / prev_gg);
            for (std::size_t i = 0; i < size; ++i) dir[i] = -grad[i] + beta * prev_dir[i];
            if (weighted_dot(field, grad, dir) >= 0.0)
                for (std::size_t i = 0; i < size; ++i) dir[i] = -grad[i];
        } else {
            for (std::size_t i = 0; i < size; ++i) dir[i] = -grad[i];
        }
        const double slope = weighted_dot(field, grad, dir);

        // Trial step.
        if (opts.step_policy == StepPolicy::fixed) {
            step = fixed_step;
        } else if (opts.step_policy == StepPolicy::barzilai_borwein && !prev_x.empty()) {
            double ss = 0.0, sy = 0.0, yy = 0.0;
            std::vector<double> s(size), y(size);
            for (std::size_t i = 0; i < size; ++i) {
                s[i] = field.data[i] - prev_x[i];
                y[i] = grad[i] - prev_grad[i];
            }
            ss = weighted_dot(field, s, s);
            sy = weighted_dot(field, s, y);
            yy = weighted_dot(field, y, y);
            if (sy > 0.0)
                step = (it % 2 == 0) ? ss / sy : sy / yy;  // alternating BB1/BB2
            else
                step = fixed_step;
            step = std::clamp(step, 1e-3 * fixed_step, 1e4 * fixed_step);
        } else if (opts.step_policy == StepPolicy::nonlinear_cg) {
            // Quadratic model along dir from one probe: E(α) ≈ slope·α + ½κα².
            const double probe = prev_dir.empty() ? fixed_step : step;
            const Energy de = energy_change(field, dir, probe);
            const double kappa = 2.0 * (de.total - slope * probe) / (probe * probe);
            step = kappa > 0.0 ? -slope / kappa : 2.0 * probe;
        }

        Energy de = energy_change(field, dir, step);
        int halvings = 0;
        while (!(de.total < 0.0 && de.total <= kArmijo * step * slope)) {
            if (++halvings > kMaxHalvings) break;
            step *= 0.5;
            de = energy_change(field, dir, step);
        }
        if (halvings > kMaxHalvings) {
            stalled = true;
            break;
        }

        prev_x = field.data;
        prev_grad = grad;
        prev_dir = dir;
        prev_gg = gg;
        for (std::size_t i = 0; i < size; ++i) field.data[i] += step * dir[i];
        ++it;

        energy.elastic += de.elastic;
        energy.bulk += de.bulk;
        energy.total = energy.elastic + energy.bulk;
        check_finite(energy, it);
        energy_and_gradient(field, grad);
        gnorm = sup_norm(grad);
        if (opts.record_every > 0 && it % opts.record_every == 0)
            stats.energy_trace.push_back({it, energy.elastic, energy.bulk, energy.total});
    }

    if (stats.energy_trace.back().iteration != it)
        stats.energy_trace.push_back({it, energy.elastic, energy.bulk, energy.total});
    stats.iterations = it;
    stats.final_grad_norm = gnorm;
    stats.converged = gnorm <= tol && !stalled;
    stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

SolveResult minimize(QField field, const SolveOptions& opts) {
    SolveStats stats = minimize_in_place(field, opts);
    return {std::move(field), std::move(stats)};
}

ElResidual el_residual_check(const QField& field, const Ball& interior) {
    const std::vector<double> grad = energy_gradient(field);
    const bool finite_eps = std::isfinite(field.epsilon);
    const double eps2 = finite_eps ? field.epsilon * field.epsilon : 1.0;
    ElResidual out;
    for_each_node_in(field.grid, interior, [&](std::size_t node, const Vec3&) {
        if (field.masked(node)) return;
        double r2 = 0.0;
        for (std::size_t c = 0; c < 5; ++c) {
            const double v = eps2 * grad[5 * node + c];
            r2 += v * v;
        }
        const double qn = norm(field.at(node));
        out.residual = std::max(out.residual, std::sqrt(r2) / (1.0 + qn + qn * qn * qn));
        out.eps_grad_sup = std::max(out.eps_grad_sup, field.epsilon * std::sqrt(discrete_gradient_sq(field, node)));
    });
    return out;
}

}  // namespace qlab
