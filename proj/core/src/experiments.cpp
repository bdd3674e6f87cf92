#include "qlab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "qlab/errors.hpp"

#ifndef QLAB_VERSION
#define QLAB_VERSION "0.0.0"
#endif

namespace qlab {

using nlohmann::json;

std::string_view to_string(BoundaryMode mode) {
    return mode == BoundaryMode::hedgehog ? "hedgehog" : "constant-vacuum";
}

BoundaryMode parse_boundary_mode(std::string_view name) {
    if (name == "hedgehog") return BoundaryMode::hedgehog;
    if (name == "constant-vacuum") return BoundaryMode::constant_vacuum;
    throw std::invalid_argument("unknown boundary mode '" + std::string(name) + "'");
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

namespace {

bool ball_inside_cube(const Ball& b) {
    for (double c : b.center)
        if (std::abs(c) + b.radius > 1.0 + 1e-12) return false;
    return true;
}

// Shortest text that reads back to the same double.
std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void SweepConfig::validate() const {
    if (n < 8) throw ConfigError("grid.n", "must be at least 8");
    const double h = 2.0 / (n - 1);
    if (epsilons.empty()) throw ConfigError("sweep.epsilons", "must list at least one value");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw ConfigError("sweep.epsilons", "values must be positive");
        if (i > 0 && !(epsilons[i] < epsilons[i - 1]))
            throw ConfigError("sweep.epsilons", "values must be strictly decreasing");
        if (epsilons[i] < 2.0 * h * (1.0 - 1e-12))
            throw ConfigError("sweep.epsilons", "value " + fmt(epsilons[i]) + " is below the resolution floor 2h = " +
                                                    fmt(2.0 * h));
    }
    if (!ball_inside_cube(energy_region)) throw ConfigError("sweep.energy_radius", "region leaves the cube");
    if (!ball_inside_cube(inner_region)) throw ConfigError("sweep.inner_radius", "region leaves the cube");
    for (double p : lp_exponents)
        if (!(p > 1.0)) throw ConfigError("sweep.lp_exponents", "exponents must exceed 1");
    if (solve.max_iters < 1) throw ConfigError("solve.max_iters", "must be at least 1");
}

std::string SweepConfig::canonical() const {
    std::ostringstream os;
    os << "n=" << n << ";a=" << fmt(params.a) << ";b=" << fmt(params.b) << ";c=" << fmt(params.c) << ";eps=";
    for (double e : epsilons) os << fmt(e) << ',';
    os << ";grad_tol=" << fmt(solve.grad_tol) << ";max_iters=" << solve.max_iters
       << ";policy=" << to_string(solve.step_policy) << ";boundary=" << to_string(boundary)
       << ";core_cells=" << fmt(init_core_cells) << ";cover=" << fmt(cover_r_over_eps) << ','
       << fmt(cover_delta_fraction) << ";outer=" << fmt(energy_region.radius)
       << ";inner=" << fmt(inner_region.radius) << ";lp=";
    for (double p : lp_exponents) os << fmt(p) << ',';
    return os.str();
}

ScalingFit fit_scaling(std::span<const std::pair<double, double>> pairs) {
    if (pairs.size() < 2) throw DegenerateInput("fit_scaling needs at least two pairs");
    std::vector<double> x, y;
    for (const auto& [eps, v] : pairs) {
        if (!(eps > 0.0) || !(v > 0.0)) throw DegenerateInput("fit_scaling needs positive epsilon and value");
        x.push_back(std::log(eps));
        y.push_back(std::log(v));
    }
    const double m = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (!(sxx > 0.0)) throw DegenerateInput("fit_scaling: all epsilon values are equal");
    ScalingFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.max_residual = std::max(fit.max_residual, std::abs(y[i] - (fit.intercept + fit.slope * x[i])));
    return fit;
}

double lp_distance(const QField& field, const QField& reference, double p, const Ball& region) {
    if (!(field.grid == reference.grid)) throw GridMismatch("lp_distance: fields live on different grids");
    if (!(p > 1.0)) throw std::invalid_argument("lp_distance: p must exceed 1");
    double sum = 0.0;
    for_each_node_in(field.grid, region, [&](std::size_t node, const Vec3& y) {
        if (y[0] == 0.0 && y[1] == 0.0 && y[2] == 0.0) return;
        sum += std::pow(norm(field.at(node) - reference.at(node)), p);
    });
    const double h = field.grid.h();
    return std::pow(h * h * h * sum, 1.0 / p);
}

std::vector<Vec3> monotonicity_centers() {
    return {
        {0.0, 0.0, 0.0},  {0.25, 0.0, 0.0},  {-0.25, 0.0, 0.0}, {0.0, 0.25, 0.0},   {0.0, -0.25, 0.0},
        {0.0, 0.0, 0.25}, {0.0, 0.0, -0.25}, {0.2, 0.2, 0.2},   {-0.2, -0.2, 0.2},
    };
}

std::vector<double> monotonicity_radii(const Grid& grid, const Vec3& x) {
    const double reach = 1.0 - std::max({std::abs(x[0]), std::abs(x[1]), std::abs(x[2])});
    const double r_hi = 0.999 * reach / std::sqrt(WeightPhi::kSupport);
    const double r_lo = std::max(2.0 * grid.h(), 0.08);
    std::vector<double> radii;
    if (r_hi <= r_lo) return radii;
    constexpr int kSteps = 5;
    for (int i = 0; i < kSteps; ++i) radii.push_back(r_lo + (r_hi - r_lo) * i / (kSteps - 1));
    return radii;
}

namespace {

std::vector<double> bulk_density(const QField& field) {
    std::vector<double> f(field.grid.node_count());
    for (std::size_t node = 0; node < f.size(); ++node) f[node] = bulk_potential(field.at(node), field.params);
    return f;
}

MonotonicitySummary monotonicity_summary(const FieldDiagnostics& diag) {
    const double h = diag.grid().h();
    MonotonicitySummary out;
    for (const Vec3& x : monotonicity_centers()) {
        const std::vector<double> radii = monotonicity_radii(diag.grid(), x);
        if (radii.empty()) continue;
        const MonotonicityProfile prof = monotonicity_profile(diag, x, radii);
        out.worst_slack_ratio = std::max(out.worst_slack_ratio, prof.worst_slack_ratio(h));
        out.max_relative_violation = std::max(out.max_relative_violation, prof.max_relative_violation());
        ++out.centers;
    }
    return out;
}

CoverSummary cover_summary(const FieldDiagnostics& diag, const Ball& region, double r, double delta) {
    const Grid& g = diag.grid();
    CoverSummary s;
    s.r = r;
    s.delta = delta;
    try {
        const CoverResult cov = cover_bad_set(diag, region, r, delta);
        s.eta = cov.eta;
        s.bad_count = cov.target.count();
        s.bad_extent = cov.target.max_distance_from(g, region.center);
        s.ball_count = cov.balls.size();
        for (const Ball& b : cov.balls) {
            const double d = std::sqrt(b.center[0] * b.center[0] + b.center[1] * b.center[1] + b.center[2] * b.center[2]);
            s.max_ball_distance = std::max(s.max_ball_distance, d);
        }
        s.contains_mask = covers(g, cov.balls, cov.target.mask);
        s.neighborhood_volume = neighborhood_volume(g, cov.target.mask, r);
        s.minkowski_constant = s.neighborhood_volume / (r * r * r);
        s.recursion_nodes = cov.recursion_nodes;
        double min_drop = std::numeric_limits<double>::infinity();
        for (const PinchRecord& rec : cov.pinch_trace)
            if (!rec.emitted) min_drop = std::min(min_drop, rec.drop);
        s.min_drop = std::isfinite(min_drop) ? min_drop : 0.0;
    } catch (const BudgetExceeded&) {
        s.budget_exceeded = true;
    }
    return s;
}

SweepRow diagnose_row(const QField& field, const QField& reference, const SweepConfig& cfg, const SolveStats& stats) {
    const Grid& g = field.grid;
    const double eps = field.epsilon;
    SweepRow row;
    row.epsilon = eps;
    row.under_resolved = eps < 4.0 * g.h();
    row.energy = discrete_energy(field);
    const std::vector<double> f = bulk_density(field);
    row.bulk_outer = integrate_ball(field, f, cfg.energy_region);
    row.scaled_bulk_inner = integrate_ball(field, f, cfg.inner_region) / (eps * eps);
    for (double p : cfg.lp_exponents) row.lp_distance.push_back(lp_distance(field, reference, p, cfg.inner_region));

    const FieldDiagnostics diag(field);
    row.quasinorm = weak_l3_quasinorm(diag, cfg.inner_region);
    const double cover_r = std::min(1.0, cfg.cover_r_over_eps * eps);
    row.cover = cover_summary(diag, cfg.inner_region, cover_r, cfg.cover_delta_fraction * field.params.s_star);
    row.monotonicity = monotonicity_summary(diag);
    row.el = el_residual_check(field, cfg.inner_region);
    row.stress_residual = stress_energy_residual(field, Ball({0.3, 0.0, 0.0}, 0.4));
    row.regular_scale_origin = regular_scale(diag, {0.0, 0.0, 0.0});
    row.regular_scale_half = regular_scale(diag, {0.5, 0.0, 0.0});
    const std::vector<double> rs = regular_scale_nodes(diag, cfg.inner_region);
    double c0 = std::numeric_limits<double>::infinity();
    for (double v : rs)
        if (v >= 0.0) c0 = std::min(c0, v / eps);
    row.regular_scale_c0 = std::isfinite(c0) ? c0 : 0.0;

    const double tol = 1e-3 * field.params.s_star;
    for_each_node_in(g, Ball({0.0, 0.0, 0.0}, 0.15), [&](std::size_t node, const Vec3&) {
        ++row.phase_histogram[static_cast<std::size_t>(classify_phase(field.at(node), tol).tag)];
    });

    row.iterations = stats.iterations;
    row.converged = stats.converged;
    row.final_grad_norm = stats.final_grad_norm;
    row.wall_time = stats.wall_time;
    return row;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".partial";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << text;
        if (!out) throw IoError("write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

SweepReport run_hedgehog_sweep(const SweepConfig& cfg) {
    cfg.validate();
    const Grid grid(cfg.n);
    const MaterialParams& p = cfg.params;

    SweepReport report;
    report.n = cfg.n;
    report.h = grid.h();
    report.params = p;
    report.lp_exponents = cfg.lp_exponents;
    report.config_hash = fnv1a_hex(cfg.canonical());
    report.code_version = QLAB_VERSION;

    // Reference map: the exact hedgehog, or the constant itself in debug mode.
    const QTensor vacuum = uniaxial(p.s_star, {0.0, 0.0, 1.0});
    const QField reference = cfg.boundary == BoundaryMode::hedgehog
                                 ? hedgehog_reference(grid, p, 0.0)
                                 : constant_boundary(grid, p, 1.0, vacuum);
    {
        double sum = 0.0;
        for_each_node_in(grid, cfg.inner_region, [&](std::size_t node, const Vec3& y) {
            if (y[0] == 0.0 && y[1] == 0.0 && y[2] == 0.0) return;
            sum += norm_sq(reference.at(node));
        });
        report.reference_l2_inner = std::sqrt(grid.h() * grid.h() * grid.h() * sum);
    }

    QField field = cfg.boundary == BoundaryMode::hedgehog
                       ? hedgehog_reference(grid, p, cfg.init_core_cells * grid.h(), cfg.epsilons.front())
                       : constant_boundary(grid, p, cfg.epsilons.front(), vacuum);

    std::ofstream partial_csv;
    const bool persist = !cfg.output_dir.empty();
    if (persist) {
        std::filesystem::create_directories(cfg.output_dir);
        partial_csv.open(cfg.output_dir / "report.csv.partial", std::ios::trunc);
        if (!partial_csv) throw IoError("cannot open report.csv.partial in " + cfg.output_dir.string());
        partial_csv << report_csv_header(report);
    }

    for (std::size_t idx = 0; idx < cfg.epsilons.size(); ++idx) {
        field.epsilon = cfg.epsilons[idx];  // warm start from the previous solution
        const SolveStats stats = minimize_in_place(field, cfg.solve);
        report.rows.push_back(diagnose_row(field, reference, cfg, stats));
        if (persist) {
            char name[64];
            std::snprintf(name, sizeof name, "field_%02zu.qtnf", idx);
            save_field(field, cfg.output_dir / name);
            partial_csv << report_csv_row(report, report.rows.back()) << std::flush;
        }
    }

    std::vector<std::pair<double, double>> pairs;
    for (const SweepRow& row : report.rows)
        if (row.bulk_outer > 0.0) pairs.emplace_back(row.epsilon, row.bulk_outer);
    if (pairs.size() >= 2) {
        try {
            report.bulk_fit = fit_scaling(pairs);
        } catch (const DegenerateInput&) {
        }
    }

    if (persist) {
        partial_csv.close();
        std::filesystem::rename(cfg.output_dir / "report.csv.partial", cfg.output_dir / "report.csv");
        const std::vector<Verdict> verdicts = rate_certificates(report);
        write_report_json(report, verdicts, cfg.output_dir / "report.json", !cfg.deterministic);
        write_plot_data(report, cfg.output_dir / "plot_bulk.dat");
    }
    return report;
}

// ---------------------------------------------------------------------------
// Certificates

namespace {

double ratio_max_min(const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::infinity();
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    if (!(*lo > 0.0)) return std::numeric_limits<double>::infinity();
    return *hi / *lo;
}

std::string describe(const std::string& what, double value, const std::string& bound) {
    std::ostringstream os;
    os << what << " = " << std::setprecision(6) << value << " (" << bound << ")";
    return os.str();
}

}  // namespace

std::vector<Verdict> rate_certificates(const SweepReport& report) {
    std::vector<Verdict> out;
    const auto& rows = report.rows;

    {
        Verdict v{"rows_converged", true, false, 0.0, ""};
        int bad = 0;
        for (const auto& r : rows)
            if (!r.converged) ++bad;
        v.pass = bad == 0 && !rows.empty();
        v.value = bad;
        v.detail = std::to_string(bad) + " of " + std::to_string(rows.size()) + " rows not converged";
        out.push_back(v);
    }
    {
        Verdict v{"bulk_rate_slope", false, false, report.bulk_fit.slope, ""};
        std::size_t positive = 0;
        for (const auto& r : rows)
            if (r.bulk_outer > 0.0) ++positive;
        v.pass = positive >= 4 && report.bulk_fit.slope >= 2.5 && report.bulk_fit.slope <= 3.5;
        v.detail = describe("slope of log int_{B3/4} f vs log eps", report.bulk_fit.slope, "window [2.5, 3.5], >= 4 points");
        out.push_back(v);
    }
    {
        std::vector<double> ratio;
        for (const auto& r : rows) ratio.push_back(r.scaled_bulk_inner / r.epsilon);
        Verdict v{"upper_bound_ratio", false, false, ratio_max_min(ratio), ""};
        v.pass = v.value <= 4.0;
        v.detail = describe("max/min of (1/eps^2) int_{B1/2} f / eps", v.value, "<= 4");
        out.push_back(v);
    }
    {
        std::vector<double> ratio;
        const std::size_t start = rows.size() >= 3 ? rows.size() - 3 : 0;
        for (std::size_t i = start; i < rows.size(); ++i)
            ratio.push_back(rows[i].bulk_outer / std::pow(rows[i].epsilon, 3));
        Verdict v{"lower_bound_ratio", false, false, ratio_max_min(ratio), ""};
        v.pass = rows.size() >= 3 && v.value <= 4.0;
        v.detail = describe("max/min of int_{B3/4} f / eps^3 over the three smallest eps", v.value, "positive, <= 4");
        out.push_back(v);
    }
    for (std::size_t pi = 0; pi < report.lp_exponents.size(); ++pi) {
        Verdict v{"lp_decreasing_p" + fmt(report.lp_exponents[pi]), true, false, 0.0, ""};
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (!(rows[i].lp_distance[pi] < rows[i - 1].lp_distance[pi])) v.pass = false;
        v.value = rows.empty() ? 0.0 : rows.back().lp_distance[pi];
        v.detail = describe("final L^p distance", v.value, "strictly decreasing along the sweep");
        out.push_back(v);
    }
    {
        Verdict v{"l2_final_fraction", false, false, 0.0, ""};
        for (std::size_t pi = 0; pi < report.lp_exponents.size(); ++pi)
            if (report.lp_exponents[pi] == 2.0 && !rows.empty() && report.reference_l2_inner > 0.0) {
                v.value = rows.back().lp_distance[pi] / report.reference_l2_inner;
                v.pass = v.value <= 0.1;
            }
        v.detail = describe("final L2 distance / ||Q0||_L2(B1/2)", v.value, "<= 0.1");
        out.push_back(v);
    }
    {
        std::vector<double> q;
        for (const auto& r : rows) q.push_back(r.quasinorm);
        Verdict v{"quasinorm_uniform", false, false, ratio_max_min(q), ""};
        v.pass = v.value <= 2.0;
        v.detail = describe("max/min weak-L3 quasinorm over B1/2", v.value, "<= 2");
        out.push_back(v);
    }
    {
        Verdict v{"monotonicity", true, false, 0.0, ""};
        for (const auto& r : rows) {
            v.value = std::max(v.value, r.monotonicity.worst_slack_ratio);
            if (r.monotonicity.centers < 9) v.pass = false;
        }
        v.pass = v.pass && v.value <= 1.0;
        v.detail = describe("worst violation / (Theta_r * 5h/r)", v.value, "<= 1 at 9 centers");
        out.push_back(v);
    }
    {
        Verdict v{"bad_set_localization", false, false, 0.0, ""};
        if (!rows.empty()) {
            const CoverSummary& c = rows.back().cover;
            v.value = c.bad_extent;
            v.pass = !c.budget_exceeded && c.bad_count > 0 && c.bad_extent <= 0.15 && c.ball_count <= 16 &&
                     c.contains_mask;
            std::ostringstream os;
            os << "smallest eps: bad nodes " << c.bad_count << ", extent " << std::setprecision(4) << c.bad_extent
               << " (<= 0.15), balls " << c.ball_count << " (<= 16), cover contains mask "
               << (c.contains_mask ? "yes" : "no");
            v.detail = os.str();
        }
        out.push_back(v);
    }
    {
        std::vector<double> cs;
        const std::size_t start = rows.size() >= 3 ? rows.size() - 3 : 0;
        for (std::size_t i = start; i < rows.size(); ++i) cs.push_back(rows[i].cover.minkowski_constant);
        Verdict v{"minkowski_stability", false, false, ratio_max_min(cs), ""};
        v.pass = rows.size() >= 3 && v.value <= 4.0;
        v.detail = describe("max/min of L3(B_r(Bad))/r^3 over the three smallest eps", v.value, "<= 4");
        out.push_back(v);
    }
    {
        Verdict v{"bulk_outer_nonincreasing", true, true, 0.0, ""};
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].bulk_outer > rows[i - 1].bulk_outer) v.pass = false;
        v.detail = "int_{B3/4} f nonincreasing as eps decreases (advisory)";
        out.push_back(v);
    }
    return out;
}

bool all_pass(std::span<const Verdict> verdicts) {
    return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.advisory || v.pass; });
}

// ---------------------------------------------------------------------------
// Report files

std::string report_csv_header(const SweepReport& report) {
    std::ostringstream os;
    os << "epsilon,under_resolved,elastic,bulk,total,bulk_outer,scaled_bulk_inner";
    for (double p : report.lp_exponents) os << ",lp_" << fmt(p);
    os << ",quasinorm,bad_count,bad_extent,cover_balls,cover_contains,cover_r,neighborhood_volume,"
          "minkowski_constant,mono_centers,mono_worst_slack,el_residual,eps_grad_sup,stress_residual,"
          "regular_scale_origin,regular_scale_half,regular_scale_c0,phase_isotropic,phase_uniaxial,"
          "phase_biaxial,iterations,converged,final_grad_norm\n";
    return os.str();
}

std::string report_csv_row(const SweepReport& report, const SweepRow& r) {
    std::ostringstream os;
    os << fmt(r.epsilon) << ',' << (r.under_resolved ? 1 : 0) << ',' << fmt(r.energy.elastic) << ','
       << fmt(r.energy.bulk) << ',' << fmt(r.energy.total) << ',' << fmt(r.bulk_outer) << ','
       << fmt(r.scaled_bulk_inner);
    for (std::size_t i = 0; i < report.lp_exponents.size(); ++i) os << ',' << fmt(r.lp_distance[i]);
    os << ',' << fmt(r.quasinorm) << ',' << r.cover.bad_count << ',' << fmt(r.cover.bad_extent) << ','
       << r.cover.ball_count << ',' << (r.cover.contains_mask ? 1 : 0) << ',' << fmt(r.cover.r) << ','
       << fmt(r.cover.neighborhood_volume) << ',' << fmt(r.cover.minkowski_constant) << ','
       << r.monotonicity.centers << ',' << fmt(r.monotonicity.worst_slack_ratio) << ',' << fmt(r.el.residual)
       << ',' << fmt(r.el.eps_grad_sup) << ',' << fmt(r.stress_residual) << ',' << fmt(r.regular_scale_origin)
       << ',' << fmt(r.regular_scale_half) << ',' << fmt(r.regular_scale_c0) << ',' << r.phase_histogram[0]
       << ',' << r.phase_histogram[1] << ',' << r.phase_histogram[2] << ',' << r.iterations << ','
       << (r.converged ? 1 : 0) << ',' << fmt(r.final_grad_norm) << '\n';
    return os.str();
}

void write_report_csv(const SweepReport& report, const std::filesystem::path& path) {
    std::string text = report_csv_header(report);
    for (const auto& r : report.rows) text += report_csv_row(report, r);
    write_text_atomic(path, text);
}

json report_to_json(const SweepReport& report, bool include_wall_times) {
    json j;
    j["n"] = report.n;
    j["h"] = report.h;
    j["material"] = {{"a", report.params.a}, {"b", report.params.b}, {"c", report.params.c},
                     {"s_star", report.params.s_star}, {"k", report.params.k},
                     {"lambda_star", report.params.lambda_star}, {"g_at_lambda_star", report.params.g_at_lambda_star}};
    j["lp_exponents"] = report.lp_exponents;
    j["reference_l2_inner"] = report.reference_l2_inner;
    j["fit"] = {{"slope", report.bulk_fit.slope},
                {"intercept", report.bulk_fit.intercept},
                {"max_residual", report.bulk_fit.max_residual}};
    j["provenance"] = {{"config_hash", report.config_hash}, {"code_version", report.code_version}};
    json rows = json::array();
    for (const auto& r : report.rows) {
        json row;
        row["epsilon"] = r.epsilon;
        row["under_resolved"] = r.under_resolved;
        row["energy"] = {{"elastic", r.energy.elastic}, {"bulk", r.energy.bulk}, {"total", r.energy.total}};
        row["bulk_outer"] = r.bulk_outer;
        row["scaled_bulk_inner"] = r.scaled_bulk_inner;
        row["lp_distance"] = r.lp_distance;
        row["quasinorm"] = r.quasinorm;
        row["cover"] = {{"r", r.cover.r},
                        {"delta", r.cover.delta},
                        {"eta", r.cover.eta},
                        {"bad_count", r.cover.bad_count},
                        {"bad_extent", r.cover.bad_extent},
                        {"ball_count", r.cover.ball_count},
                        {"max_ball_distance", r.cover.max_ball_distance},
                        {"contains_mask", r.cover.contains_mask},
                        {"neighborhood_volume", r.cover.neighborhood_volume},
                        {"minkowski_constant", r.cover.minkowski_constant},
                        {"recursion_nodes", r.cover.recursion_nodes},
                        {"min_drop", r.cover.min_drop},
                        {"budget_exceeded", r.cover.budget_exceeded}};
        row["monotonicity"] = {{"centers", r.monotonicity.centers},
                               {"worst_slack_ratio", r.monotonicity.worst_slack_ratio},
                               {"max_relative_violation", r.monotonicity.max_relative_violation}};
        row["el_residual"] = r.el.residual;
        row["eps_grad_sup"] = r.el.eps_grad_sup;
        row["stress_residual"] = r.stress_residual;
        row["regular_scale"] = {{"origin", r.regular_scale_origin},
                                {"half", r.regular_scale_half},
                                {"c0", r.regular_scale_c0}};
        row["phase_histogram"] = {{"isotropic", r.phase_histogram[0]},
                                  {"uniaxial", r.phase_histogram[1]},
                                  {"biaxial", r.phase_histogram[2]}};
        row["solver"] = {{"iterations", r.iterations},
                         {"converged", r.converged},
                         {"final_grad_norm", r.final_grad_norm}};
        if (include_wall_times) row["solver"]["wall_time"] = r.wall_time;
        rows.push_back(row);
    }
    j["rows"] = rows;
    return j;
}

SweepReport report_from_json(const json& j) {
    SweepReport rep;
    rep.n = j.at("n").get<int>();
    rep.h = j.at("h").get<double>();
    const json& m = j.at("material");
    rep.params = MaterialParams::make(m.at("a").get<double>(), m.at("b").get<double>(), m.at("c").get<double>());
    rep.lp_exponents = j.at("lp_exponents").get<std::vector<double>>();
    rep.reference_l2_inner = j.at("reference_l2_inner").get<double>();
    rep.bulk_fit.slope = j.at("fit").at("slope").get<double>();
    rep.bulk_fit.intercept = j.at("fit").at("intercept").get<double>();
    rep.bulk_fit.max_residual = j.at("fit").at("max_residual").get<double>();
    rep.config_hash = j.at("provenance").at("config_hash").get<std::string>();
    rep.code_version = j.at("provenance").at("code_version").get<std::string>();
    for (const json& row : j.at("rows")) {
        SweepRow r;
        r.epsilon = row.at("epsilon").get<double>();
        r.under_resolved = row.at("under_resolved").get<bool>();
        r.energy.elastic = row.at("energy").at("elastic").get<double>();
        r.energy.bulk = row.at("energy").at("bulk").get<double>();
        r.energy.total = row.at("energy").at("total").get<double>();
        r.bulk_outer = row.at("bulk_outer").get<double>();
        r.scaled_bulk_inner = row.at("scaled_bulk_inner").get<double>();
        r.lp_distance = row.at("lp_distance").get<std::vector<double>>();
        r.quasinorm = row.at("quasinorm").get<double>();
        const json& c = row.at("cover");
        r.cover.r = c.at("r").get<double>();
        r.cover.delta = c.at("delta").get<double>();
        r.cover.eta = c.at("eta").get<double>();
        r.cover.bad_count = c.at("bad_count").get<std::size_t>();
        r.cover.bad_extent = c.at("bad_extent").get<double>();
        r.cover.ball_count = c.at("ball_count").get<std::size_t>();
        r.cover.max_ball_distance = c.at("max_ball_distance").get<double>();
        r.cover.contains_mask = c.at("contains_mask").get<bool>();
        r.cover.neighborhood_volume = c.at("neighborhood_volume").get<double>();
        r.cover.minkowski_constant = c.at("minkowski_constant").get<double>();
        r.cover.recursion_nodes = c.at("recursion_nodes").get<std::size_t>();
        r.cover.min_drop = c.at("min_drop").get<double>();
        r.cover.budget_exceeded = c.at("budget_exceeded").get<bool>();
        r.monotonicity.centers = row.at("monotonicity").at("centers").get<int>();
        r.monotonicity.worst_slack_ratio = row.at("monotonicity").at("worst_slack_ratio").get<double>();
        r.monotonicity.max_relative_violation = row.at("monotonicity").at("max_relative_violation").get<double>();
        r.el.residual = row.at("el_residual").get<double>();
        r.el.eps_grad_sup = row.at("eps_grad_sup").get<double>();
        r.stress_residual = row.at("stress_residual").get<double>();
        r.regular_scale_origin = row.at("regular_scale").at("origin").get<double>();
        r.regular_scale_half = row.at("regular_scale").at("half").get<double>();
        r.regular_scale_c0 = row.at("regular_scale").at("c0").get<double>();
        r.phase_histogram = {row.at("phase_histogram").at("isotropic").get<std::size_t>(),
                             row.at("phase_histogram").at("uniaxial").get<std::size_t>(),
                             row.at("phase_histogram").at("biaxial").get<std::size_t>()};
        r.iterations = row.at("solver").at("iterations").get<int>();
        r.converged = row.at("solver").at("converged").get<bool>();
        r.final_grad_norm = row.at("solver").at("final_grad_norm").get<double>();
        r.wall_time = row.at("solver").value("wall_time", 0.0);
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

void write_report_json(const SweepReport& report, std::span<const Verdict> verdicts,
                       const std::filesystem::path& path, bool include_wall_times) {
    json j = report_to_json(report, include_wall_times);
    json vs = json::array();
    for (const Verdict& v : verdicts)
        vs.push_back({{"name", v.name}, {"pass", v.pass}, {"advisory", v.advisory}, {"value", v.value},
                      {"detail", v.detail}});
    j["verdicts"] = vs;
    j["all_pass"] = all_pass(verdicts);
    write_text_atomic(path, j.dump(2) + "\n");
}

void write_plot_data(const SweepReport& report, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "# epsilon bulk_outer fit\n";
    for (const auto& r : report.rows) {
        const double fit = std::exp(report.bulk_fit.intercept + report.bulk_fit.slope * std::log(r.epsilon));
        os << fmt(r.epsilon) << ' ' << fmt(r.bulk_outer) << ' ' << fmt(fit) << '\n';
    }
    write_text_atomic(path, os.str());
}

}  // namespace qlab
