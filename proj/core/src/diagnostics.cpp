#include "qlab/diagnostics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qlab/errors.hpp"

namespace qlab {

namespace {

double sq_dist(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    const double dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

// Ball membership used by every radius ladder; the shrink resolves exact
// lattice ties the same way for node-centred and arbitrary centres.
constexpr double kLadderShrink = 1.0 - 1e-12;

std::vector<double> ladder(const Grid& g, double cap) {
    std::vector<double> radii;
    const double h = g.h();
    for (int m = 1; m * h < kLadderShrink; ++m) {
        radii.push_back(m * h);
        if (cap > 0.0 && m * h >= cap) return radii;
    }
    radii.push_back(1.0);
    return radii;
}

void require_resolved(const Grid& g, double r) {
    if (r < 2.0 * g.h())
        throw ResolutionError("radius " + std::to_string(r) + " is below the resolution guard 2h = " +
                              std::to_string(2.0 * g.h()));
}

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
struct PlanDestroy {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};

// Linear (non-periodic) convolution over the grid:
//   out(y) = Σ_z values(z) kernel(|y − z|² in units of h²),
// zero-padded to twice the grid so no wrap-around occurs.
template <class Kernel>
std::vector<double> convolve_radial(const Grid& g, std::span<const double> values, Kernel&& kernel) {
    const int n = g.n();
    const int P = 2 * n;
    const std::size_t real_size = static_cast<std::size_t>(P) * P * P;
    const std::size_t cplx_size = static_cast<std::size_t>(P) * P * (P / 2 + 1);

    std::unique_ptr<double, FftwFree> a(fftw_alloc_real(real_size));
    std::unique_ptr<double, FftwFree> kern(fftw_alloc_real(real_size));
    std::unique_ptr<fftw_complex, FftwFree> fa(fftw_alloc_complex(cplx_size));
    std::unique_ptr<fftw_complex, FftwFree> fk(fftw_alloc_complex(cplx_size));
    std::fill_n(a.get(), real_size, 0.0);
    std::fill_n(kern.get(), real_size, 0.0);

    auto at = [P](int i, int j, int k) {
        return (static_cast<std::size_t>(i) * P + j) * P + k;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) a.get()[at(i, j, k)] = values[g.index(i, j, k)];
    for (int oi = -(n - 1); oi <= n - 1; ++oi)
        for (int oj = -(n - 1); oj <= n - 1; ++oj)
            for (int ok = -(n - 1); ok <= n - 1; ++ok) {
                const double o2 = static_cast<double>(oi * oi + oj * oj + ok * ok);
                kern.get()[at((oi + P) % P, (oj + P) % P, (ok + P) % P)] = kernel(o2);
            }

    std::unique_ptr<fftw_plan_s, PlanDestroy> pa(
        fftw_plan_dft_r2c_3d(P, P, P, a.get(), fa.get(), FFTW_ESTIMATE));
    std::unique_ptr<fftw_plan_s, PlanDestroy> pk(
        fftw_plan_dft_r2c_3d(P, P, P, kern.get(), fk.get(), FFTW_ESTIMATE));
    fftw_execute(pa.get());
    fftw_execute(pk.get());
    for (std::size_t i = 0; i < cplx_size; ++i) {
        const std::complex<double> x(fa.get()[i][0], fa.get()[i][1]);
        const std::complex<double> y(fk.get()[i][0], fk.get()[i][1]);
        const std::complex<double> z = x * y;
        fa.get()[i][0] = z.real();
        fa.get()[i][1] = z.imag();
    }
    std::unique_ptr<fftw_plan_s, PlanDestroy> pb(
        fftw_plan_dft_c2r_3d(P, P, P, fa.get(), a.get(), FFTW_ESTIMATE));
    fftw_execute(pb.get());

    std::vector<double> out(g.node_count());
    const double scale = 1.0 / static_cast<double>(real_size);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) out[g.index(i, j, k)] = a.get()[at(i, j, k)] * scale;
    return out;
}

}  // namespace

FieldDiagnostics::FieldDiagnostics(const QField& field)
    : field_(&field), density_(energy_density(field)), grad_mag_(gradient_magnitude(field)) {}

// ---------------------------------------------------------------------------
// Monotonicity density

double theta(const FieldDiagnostics& diag, const Vec3& x, double r, const WeightPhi& phi) {
    const Grid& g = diag.grid();
    require_resolved(g, r);
    const double support = std::sqrt(WeightPhi::kSupport) * r;
    const double inv_r2 = 1.0 / (r * r);
    const auto e = diag.density();
    double sum = 0.0;
    const Ball ball(x, support);
    for_each_node_in(g, ball, [&](std::size_t node, const Vec3& y) {
        sum += e[node] * phi(sq_dist(x, y) * inv_r2);
    });
    const double h = g.h();
    return h * h * h * sum / r;
}

double theta(const QField& field, const Vec3& x, double r) {
    return theta(FieldDiagnostics(field), x, r);
}

std::vector<double> theta_field(const FieldDiagnostics& diag, double r, const WeightPhi& phi) {
    const Grid& g = diag.grid();
    require_resolved(g, r);
    const double h = g.h();
    const double scale = h * h / (r * r);
    std::vector<double> out = convolve_radial(g, diag.density(), [&](double o2) { return phi(o2 * scale); });
    const double factor = h * h * h / r;
    for (double& v : out) v = std::max(0.0, v * factor);
    return out;
}

double MonotonicityProfile::worst_slack_ratio(double h) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < violation.size(); ++i) {
        if (violation[i] <= 0.0) continue;
        const double allowed = theta[i] * 5.0 * h / radii[i];
        worst = std::max(worst, allowed > 0.0 ? violation[i] / allowed : std::numeric_limits<double>::infinity());
    }
    return worst;
}

double MonotonicityProfile::max_relative_violation() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < violation.size(); ++i)
        if (violation[i] > 0.0) worst = std::max(worst, violation[i] / theta[i]);
    return worst;
}

MonotonicityProfile monotonicity_profile(const FieldDiagnostics& diag, const Vec3& x,
                                         std::span<const double> radii) {
    MonotonicityProfile prof;
    prof.radii.assign(radii.begin(), radii.end());
    for (std::size_t i = 1; i < radii.size(); ++i)
        if (!(radii[i] > radii[i - 1])) throw std::invalid_argument("monotonicity_profile: radii must increase");
    for (double r : radii) prof.theta.push_back(theta(diag, x, r));
    for (std::size_t i = 0; i + 1 < radii.size(); ++i)
        prof.violation.push_back(std::max(0.0, prof.theta[i] - prof.theta[i + 1]));
    return prof;
}

// ---------------------------------------------------------------------------
// Stress-energy residual

double stress_energy_residual(const QField& field, const Ball& region) {
    const Grid& g = field.grid;
    const double h = g.h();
    for (int a = 0; a < 3; ++a)
        if (std::abs(region.center[a]) + region.radius + 2.0 * h > 1.0 + 1e-12)
            throw std::invalid_argument("stress_energy_residual: region must lie 2h inside the cube");

    const double ie2 = std::isfinite(field.epsilon) ? 1.0 / (field.epsilon * field.epsilon) : 0.0;
    const std::size_t stride[3] = {static_cast<std::size_t>(g.n()) * g.n(), static_cast<std::size_t>(g.n()), 1};

    // Central-difference ∂_a Q at a node (needs both neighbours).
    auto partial = [&](std::size_t node, int a) {
        QTensor d;
        for (std::size_t c = 0; c < 5; ++c)
            d[c] = (field.data[5 * (node + stride[a]) + c] - field.data[5 * (node - stride[a]) + c]) / (2.0 * h);
        return d;
    };
    auto stress = [&](std::size_t node, double T[3][3], double& e) {
        QTensor d[3] = {partial(node, 0), partial(node, 1), partial(node, 2)};
        e = 0.5 * (norm_sq(d[0]) + norm_sq(d[1]) + norm_sq(d[2])) + ie2 * bulk_potential(field.at(node), field.params);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) T[i][j] = (i == j ? e : 0.0) - dot(d[i], d[j]);
    };

    double sup_div = 0.0;
    double sup_e = 0.0;
    for_each_node_in(g, region, [&](std::size_t node, const Vec3&) {
        double T[3][3];
        double e;
        stress(node, T, e);
        sup_e = std::max(sup_e, e);
        double div_sq = 0.0;
        double Tp[3][3][3], Tm[3][3][3];
        double ep, em;
        for (int i = 0; i < 3; ++i) {
            stress(node + stride[i], Tp[i], ep);
            stress(node - stride[i], Tm[i], em);
        }
        for (int j = 0; j < 3; ++j) {
            double div = 0.0;
            for (int i = 0; i < 3; ++i) div += (Tp[i][i][j] - Tm[i][i][j]) / (2.0 * h);
            div_sq += div * div;
        }
        sup_div = std::max(sup_div, std::sqrt(div_sq));
    });
    return sup_e > 0.0 ? sup_div / sup_e : 0.0;
}

// ---------------------------------------------------------------------------
// Regular scale and bad set

double regular_scale(const FieldDiagnostics& diag, const Vec3& x) {
    const Grid& g = diag.grid();
    const auto e = diag.density();
    std::vector<std::pair<double, double>> pts;  // (|y − x|², e(y))
    for_each_node_in(g, Ball(x, 1.0), [&](std::size_t node, const Vec3& y) {
        pts.emplace_back(sq_dist(x, y), e[node]);
    });
    std::sort(pts.begin(), pts.end());
    double running = 0.0;
    double passed = 0.0;
    std::size_t next = 0;
    for (double rho : ladder(g, 0.0)) {
        const double lim = rho * rho * kLadderShrink;
        while (next < pts.size() && pts[next].first < lim) running = std::max(running, pts[next++].second);
        if (rho * rho * running > 1.0) return passed;
        passed = rho;
    }
    return passed;
}

std::vector<double> regular_scale_nodes(const FieldDiagnostics& diag, const Ball& region, double cap) {
    const Grid& g = diag.grid();
    const int n = g.n();
    const double h = g.h();
    const auto e = diag.density();
    const std::vector<double> radii = ladder(g, cap);
    const double rmax = radii.back();
    const double global_max = *std::max_element(e.begin(), e.end());

    struct Offset {
        int di, dj, dk;
        double d2;  // in physical units
    };
    std::vector<Offset> offsets;
    const int m = static_cast<int>(std::ceil(rmax / h)) + 1;
    for (int a = -m; a <= m; ++a)
        for (int b = -m; b <= m; ++b)
            for (int c = -m; c <= m; ++c) {
                const double d2 = static_cast<double>(a * a + b * b + c * c) * h * h;
                if (d2 < rmax * rmax) offsets.push_back({a, b, c, d2});
            }
    std::stable_sort(offsets.begin(), offsets.end(), [](const Offset& x, const Offset& y) { return x.d2 < y.d2; });

    std::vector<std::size_t> nodes;
    for_each_node_in(g, region, [&](std::size_t node, const Vec3&) { nodes.push_back(node); });

    std::vector<double> out(g.node_count(), -1.0);
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(nodes.size()); ++t) {
        const std::size_t node = nodes[static_cast<std::size_t>(t)];
        const auto [i, j, k] = g.ijk(node);
        if (rmax * rmax * global_max <= 1.0) {
            out[node] = rmax;
            continue;
        }
        double running = 0.0;
        double passed = 0.0;
        std::size_t next = 0;
        for (double rho : radii) {
            const double lim = rho * rho * kLadderShrink;
            while (next < offsets.size() && offsets[next].d2 < lim) {
                const Offset& o = offsets[next++];
                const int a = i + o.di, b = j + o.dj, c = k + o.dk;
                if (a < 0 || b < 0 || c < 0 || a >= n || b >= n || c >= n) continue;
                running = std::max(running, e[g.index(a, b, c)]);
            }
            if (rho * rho * running > 1.0) break;
            passed = rho;
        }
        out[node] = passed;
    }
    return out;
}

std::size_t BadSetMask::count() const {
    return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

double BadSetMask::max_distance_from(const Grid& grid, const Vec3& c) const {
    double best = -1.0;
    for (std::size_t node = 0; node < mask.size(); ++node)
        if (mask[node]) best = std::max(best, std::sqrt(sq_dist(grid.position(node), c)));
    return best;
}

BadSetMask bad_set(const FieldDiagnostics& diag, const Ball& region, double r, double delta) {
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument("bad_set: r must lie in (0, 1]");
    if (!(delta > 0.0)) throw std::invalid_argument("bad_set: delta must be positive");
    const Grid& g = diag.grid();
    const QField& field = diag.field();
    const std::vector<double> rs = regular_scale_nodes(diag, region, r);
    BadSetMask out;
    out.mask.assign(g.node_count(), 0);
    out.region = region;
    out.r = r;
    out.delta = delta;
    for_each_node_in(g, region, [&](std::size_t node, const Vec3&) {
        const bool bad = rs[node] < r || dist_to_vacuum(field.at(node), field.params) > delta;
        out.mask[node] = bad ? 1 : 0;
    });
    return out;
}

// ---------------------------------------------------------------------------
// Covering

namespace {

class Coverer {
public:
    Coverer(const FieldDiagnostics& diag, const Ball& region, double r, const CoverOptions& opts, CoverResult& out)
        : diag_(diag), g_(diag.grid()), region_(region), r_(r), opts_(opts), out_(out) {}

    // max Θ_R over the sample lattice in B_2R(x0) ∩ region, and the sample list.
    double top_theta(const Vec3& x0, double R, std::vector<std::size_t>& samples) {
        samples.clear();
        const int stride = std::max(1, static_cast<int>(std::lround(R / 10.0 / g_.h())));
        const Ball search(x0, 2.0 * R);
        for_each_node_in(g_, search, [&](std::size_t node, const Vec3& y) {
            const auto idx = g_.ijk(node);
            if (idx[0] % stride || idx[1] % stride || idx[2] % stride) return;
            if (region_.contains(y)) samples.push_back(node);
        });
        // Small balls may fall between lattice points; the centre's nearest node
        // keeps the sample set nonempty.
        if (samples.empty()) samples.push_back(nearest_node(x0));
        const auto& th = theta_at(R);
        double E = 0.0;
        for (std::size_t s : samples) E = std::max(E, th[s]);
        return E;
    }

    void run(double eta) {
        eta_ = eta;
        recurse(region_.center, region_.radius, 0);
    }

    const std::vector<double>& theta_at(double radius) {
        const double rr = std::max(radius, 2.0 * g_.h());
        auto it = cache_.find(rr);
        if (it == cache_.end()) it = cache_.emplace(rr, theta_field(diag_, rr)).first;
        return it->second;
    }

private:
    std::size_t nearest_node(const Vec3& x) const {
        int idx[3];
        for (int a = 0; a < 3; ++a)
            idx[a] = std::clamp(static_cast<int>(std::lround((x[a] + 1.0) / g_.h())), 0, g_.n() - 1);
        return g_.index(idx[0], idx[1], idx[2]);
    }

    bool is_uncovered_bad(std::size_t node) const { return out_.target.mask[node] && !covered_[node]; }

    void emit(const Ball& b) {
        out_.balls.push_back(b);
        for_each_node_in(g_, b, [&](std::size_t node, const Vec3&) { covered_[node] = 1; });
    }

    // Covers every bad node strictly inside B_R(x0).
    void recurse(const Vec3& x0, double R, int depth) {
        if (++out_.recursion_nodes > opts_.budget)
            throw BudgetExceeded("cover_bad_set exceeded its recursion budget of " + std::to_string(opts_.budget));
        if (covered_.empty()) covered_.assign(g_.node_count(), 0);

        const Ball here(x0, R);
        bool any_bad = false;
        for_each_node_in(g_, here, [&](std::size_t node, const Vec3&) { any_bad = any_bad || is_uncovered_bad(node); });
        if (!any_bad) return;

        PinchRecord rec;
        rec.depth = depth;
        rec.center = x0;
        rec.radius = R;

        if (R <= r_ * (1.0 + 1e-12)) {
            rec.emitted = true;
            out_.pinch_trace.push_back(rec);
            emit(here);
            return;
        }

        std::vector<std::size_t> samples;
        const double E = top_theta(x0, R, samples);
        const auto& small = theta_at(R / 20.0);
        std::size_t best = samples.front();
        double best_val = -1.0;
        std::size_t pinched = 0;
        for (std::size_t s : samples) {
            if (small[s] > E - eta_) {
                ++pinched;
                if (small[s] > best_val) {
                    best_val = small[s];
                    best = s;
                }
            }
        }
        rec.top_theta = E;
        rec.pinched = pinched;
        if (pinched == 0) {
            rec.emitted = true;
            out_.pinch_trace.push_back(rec);
            emit(here);
            return;
        }

        const Vec3 x1 = g_.position(best);
        rec.pinch_theta = best_val;
        rec.drop = E - best_val;
        std::size_t bad_here = 0, confined = 0;
        const Ball core(x1, std::max(2.0 * opts_.beta * R, g_.h()));
        for_each_node_in(g_, here, [&](std::size_t node, const Vec3& y) {
            if (!out_.target.mask[node]) return;
            ++bad_here;
            if (core.contains(y)) ++confined;
        });
        rec.confined_fraction = bad_here ? static_cast<double>(confined) / static_cast<double>(bad_here) : 1.0;
        out_.pinch_trace.push_back(rec);

        const double child = std::max(0.5 * R, r_);
        recurse(x1, child, depth + 1);

        // Bad nodes of B_R(x0) the pinched chain missed.
        std::vector<std::size_t> leftover;
        for_each_node_in(g_, here, [&](std::size_t node, const Vec3&) {
            if (is_uncovered_bad(node)) leftover.push_back(node);
        });
        for (std::size_t node : leftover)
            if (is_uncovered_bad(node)) recurse(g_.position(node), child, depth + 1);
    }

    const FieldDiagnostics& diag_;
    const Grid& g_;
    Ball region_;
    double r_;
    CoverOptions opts_;
    CoverResult& out_;
    double eta_ = 0.0;
    std::vector<std::uint8_t> covered_;
    std::map<double, std::vector<double>> cache_;
};

}  // namespace

CoverResult cover_bad_set(const FieldDiagnostics& diag, const Ball& region, double r, double delta,
                          const CoverOptions& opts) {
    const Grid& g = diag.grid();
    if (r < 4.0 * g.h() * (1.0 - 1e-12))
        throw ResolutionError("cover_bad_set needs r >= 4h");
    if (!(opts.beta > 0.0 && opts.beta < 0.5)) throw std::invalid_argument("cover_bad_set: beta must lie in (0, 1/2)");

    CoverResult out;
    out.target = bad_set(diag, region, std::min(r, 1.0), delta);
    Coverer cov(diag, region, r, opts, out);
    std::vector<std::size_t> samples;
    out.top_theta = cov.top_theta(region.center, region.radius, samples);
    out.eta = opts.eta > 0.0 ? opts.eta
                             : (out.top_theta > 0.0 ? 0.05 * out.top_theta : std::numeric_limits<double>::min());
    cov.run(out.eta);
    return out;
}

bool covers(const Grid& grid, std::span<const Ball> balls, std::span<const std::uint8_t> mask) {
    std::vector<std::uint8_t> hit(grid.node_count(), 0);
    for (const Ball& b : balls) for_each_node_in(grid, b, [&](std::size_t node, const Vec3&) { hit[node] = 1; });
    for (std::size_t node = 0; node < mask.size(); ++node)
        if (mask[node] && !hit[node]) return false;
    return true;
}

double neighborhood_volume(const Grid& grid, std::span<const std::uint8_t> mask, double r) {
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return 0.0;
    std::vector<double> ind(mask.begin(), mask.end());
    const double h = grid.h();
    const double lim = r * r / (h * h) * kLadderShrink;
    const std::vector<double> hits = convolve_radial(grid, ind, [&](double o2) { return o2 < lim ? 1.0 : 0.0; });
    std::size_t count = 0;
    for (double v : hits)
        if (v > 0.5) ++count;
    return h * h * h * static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Weak-L³ quasinorm

double weak_l3_quasinorm(const FieldDiagnostics& diag, const Ball& region) {
    const Grid& g = diag.grid();
    const auto gm = diag.grad_magnitude();
    std::vector<double> vals;
    for_each_node_in(g, region, [&](std::size_t node, const Vec3&) { vals.push_back(gm[node]); });
    if (vals.empty()) return 0.0;
    std::sort(vals.begin(), vals.end());
    const double gmax = vals.back();
    if (!(gmax > 0.0)) return 0.0;
    const double h3 = g.h() * g.h() * g.h();
    const double t_lo = 1e-2;
    const double t_hi = 10.0 * gmax;
    constexpr int kPoints = 64;
    double best = 0.0;
    for (int i = 0; i < kPoints; ++i) {
        const double t = t_lo * std::pow(t_hi / t_lo, static_cast<double>(i) / (kPoints - 1));
        const auto above = static_cast<double>(vals.end() - std::upper_bound(vals.begin(), vals.end(), t));
        best = std::max(best, t * std::cbrt(h3 * above));
    }
    return best;
}

}  // namespace qlab
