#include "qlab_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "qlab/diagnostics.hpp"
#include "qlab/errors.hpp"

namespace qlab::cli {

using nlohmann::json;

namespace {

MaterialParams read_material(ConfigReader& cfg) {
    const double a = cfg.require_double("material.a");
    const double b = cfg.require_double("material.b");
    const double c = cfg.require_double("material.c");
    try {
        return MaterialParams::make(a, b, c);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("material", e.what());
    }
}

SolveOptions read_solve_options(ConfigReader& cfg) {
    SolveOptions o;
    o.grad_tol = cfg.get_double("solve.grad_tol", 0.0);
    o.max_iters = cfg.get_int("solve.max_iters", o.max_iters);
    if (o.max_iters < 1) throw ConfigError("solve.max_iters", "must be at least 1");
    const std::string policy = cfg.get_string("solve.step_policy", to_string(o.step_policy));
    try {
        o.step_policy = parse_step_policy(policy);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("solve.step_policy", e.what());
    }
    o.record_every = cfg.get_int("solve.record_every", o.record_every);
    if (o.record_every < 1) throw ConfigError("solve.record_every", "must be at least 1");
    return o;
}

BoundaryMode read_boundary(ConfigReader& cfg) {
    const std::string mode = cfg.get_string("boundary.mode", "hedgehog");
    try {
        return parse_boundary_mode(mode);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("boundary.mode", e.what());
    }
}

int read_grid_n(ConfigReader& cfg) {
    const int n = cfg.require_int("grid.n");
    if (n < 8) throw ConfigError("grid.n", "must be at least 8");
    return n;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

json material_json(const MaterialParams& p) {
    return {{"a", p.a}, {"b", p.b}, {"c", p.c}, {"s_star", p.s_star}, {"k", p.k}};
}

json energy_json(const Energy& e) { return {{"elastic", e.elastic}, {"bulk", e.bulk}, {"total", e.total}}; }

QField initial_field(const SolveSpec& spec) {
    const Grid grid(spec.n);
    if (spec.init_mode == "file") {
        QField f = load_field(spec.init_file);
        if (f.grid.n() != spec.n) throw GridMismatch("init.file has n = " + std::to_string(f.grid.n()));
        if (f.params.a != spec.params.a || f.params.b != spec.params.b || f.params.c != spec.params.c)
            throw GridMismatch("init.file was computed with different material constants");
        f.epsilon = spec.epsilon;
        return f;
    }
    if (spec.boundary == BoundaryMode::constant_vacuum)
        return constant_boundary(grid, spec.params, spec.epsilon, uniaxial(spec.params.s_star, spec.director));
    if (spec.init_mode == "boundary") return hedgehog_boundary(grid, spec.params, spec.epsilon);
    return hedgehog_reference(grid, spec.params, spec.init_core_cells * grid.h(), spec.epsilon);
}

int cmd_solve(const SolveSpec& spec, const RunOptions& opts, std::ostream& log) {
    QField field = initial_field(spec);
    const SolveStats stats = minimize_in_place(field, spec.solve);
    const Energy e = discrete_energy(field);
    save_field(field, opts.out / "field.qtnf");

    json j;
    j["command"] = "solve";
    j["n"] = spec.n;
    j["h"] = field.grid.h();
    j["epsilon"] = spec.epsilon;
    j["boundary"] = to_string(spec.boundary);
    j["material"] = material_json(spec.params);
    j["energy"] = energy_json(e);
    j["solver"] = {{"iterations", stats.iterations},
                   {"converged", stats.converged},
                   {"final_grad_norm", stats.final_grad_norm},
                   {"grad_tol", spec.solve.effective_grad_tol(spec.epsilon)},
                   {"step_policy", to_string(spec.solve.step_policy)}};
    if (!opts.deterministic) j["solver"]["wall_time"] = stats.wall_time;
    json trace = json::array();
    for (const EnergySample& s : stats.energy_trace)
        trace.push_back({{"iteration", s.iteration}, {"elastic", s.elastic}, {"bulk", s.bulk}, {"total", s.total}});
    j["energy_trace"] = trace;
    write_text(opts.out / "stats.json", j.dump(2) + "\n");

    if (opts.verbosity > 0)
        log << "solve: n=" << spec.n << " eps=" << spec.epsilon << " iterations=" << stats.iterations
            << " energy=" << std::setprecision(10) << e.total << (stats.converged ? " converged" : " NOT converged")
            << "\n";
    return stats.converged ? kExitOk : kExitNotConverged;
}

int cmd_sweep(SweepConfig cfg, const RunOptions& opts, std::ostream& log) {
    cfg.output_dir = opts.out;
    cfg.deterministic = opts.deterministic;
    const SweepReport report = run_hedgehog_sweep(cfg);
    const std::vector<Verdict> verdicts = rate_certificates(report);

    bool converged = true;
    for (const SweepRow& row : report.rows) {
        converged = converged && row.converged;
        if (opts.verbosity > 1 || (opts.verbosity > 0 && !row.converged))
            log << "eps=" << row.epsilon << " iterations=" << row.iterations
                << " bulk_outer=" << std::setprecision(6) << row.bulk_outer
                << (row.converged ? "" : " NOT converged") << "\n";
    }
    if (opts.verbosity > 0) {
        log << "fit slope " << std::setprecision(4) << report.bulk_fit.slope << "\n";
        for (const Verdict& v : verdicts)
            log << (v.pass ? "PASS " : (v.advisory ? "note " : "FAIL ")) << v.name << ": " << v.detail << "\n";
    }
    if (!converged) return kExitNotConverged;
    return all_pass(verdicts) ? kExitOk : kExitCertificateFailed;
}

void check_matches(const std::optional<double>& want, double have, const char* key) {
    if (want && *want != have) {
        std::ostringstream os;
        os << key << " = " << format_double(*want) << " in the config, " << format_double(have) << " in the field file";
        throw GridMismatch(os.str());
    }
}

int cmd_diagnose(const DiagnoseSpec& spec, const RunOptions& opts, std::ostream& log) {
    const QField field = load_field(spec.field);
    const Grid& g = field.grid;
    if (spec.n && *spec.n != g.n())
        throw GridMismatch("grid.n = " + std::to_string(*spec.n) + " in the config, " + std::to_string(g.n()) +
                           " in the field file");
    check_matches(spec.epsilon, field.epsilon, "model.epsilon");
    check_matches(spec.a, field.params.a, "material.a");
    check_matches(spec.b, field.params.b, "material.b");
    check_matches(spec.c, field.params.c, "material.c");

    const FieldDiagnostics diag(field);
    const MaterialParams& p = field.params;
    json j;
    j["command"] = "diagnose";
    j["field"] = spec.field.string();
    j["n"] = g.n();
    j["epsilon"] = field.epsilon;
    j["material"] = material_json(p);
    j["energy"] = energy_json(discrete_energy(field));
    j["quasinorm"] = weak_l3_quasinorm(diag, spec.region);
    j["stress_residual"] = stress_energy_residual(field, spec.region);
    j["el_residual"] = el_residual_check(field, spec.region).residual;

    // Θ profiles and regular scale at the requested centers.
    std::ostringstream csv;
    csv << "cx,cy,cz,r,theta\n";
    json centers = json::array();
    int violations = 0;
    for (const Vec3& x : spec.centers) {
        const std::vector<double> radii = spec.radii.empty() ? monotonicity_radii(g, x) : spec.radii;
        json cj;
        cj["center"] = {x[0], x[1], x[2]};
        cj["regular_scale"] = regular_scale(diag, x);
        if (!radii.empty()) {
            const MonotonicityProfile prof = monotonicity_profile(diag, x, radii);
            for (std::size_t i = 0; i < radii.size(); ++i)
                csv << format_double(x[0]) << ',' << format_double(x[1]) << ',' << format_double(x[2]) << ','
                    << format_double(prof.radii[i]) << ',' << format_double(prof.theta[i]) << '\n';
            cj["worst_slack_ratio"] = prof.worst_slack_ratio(g.h());
            if (prof.worst_slack_ratio(g.h()) > 1.0) ++violations;
        }
        centers.push_back(cj);
    }
    j["centers"] = centers;
    j["monotonicity_violations"] = violations;
    write_text(opts.out / "theta_profile.csv", csv.str());

    // Bad set and its cover.
    const double eps_r = std::isfinite(field.epsilon) ? 4.0 * field.epsilon : 1.0;
    const double r = spec.cover_r > 0.0 ? spec.cover_r : std::min(1.0, eps_r);
    const double delta = spec.cover_delta > 0.0 ? spec.cover_delta : 0.1 * p.s_star;
    const BadSetMask bad = bad_set(diag, spec.region, r, delta);
    save_mask(field, bad.mask, opts.out / "bad_set.qtnm");
    json cover = {{"r", r}, {"delta", delta}, {"bad_count", bad.count()},
                  {"bad_extent", bad.max_distance_from(g, spec.region.center)}};
    std::ostringstream balls_csv;
    balls_csv << "cx,cy,cz,radius\n";
    try {
        const CoverResult res = cover_bad_set(diag, spec.region, r, delta);
        cover["ball_count"] = res.balls.size();
        cover["contains_mask"] = covers(g, res.balls, res.target.mask);
        cover["eta"] = res.eta;
        cover["recursion_nodes"] = res.recursion_nodes;
        for (const Ball& b : res.balls)
            balls_csv << format_double(b.center[0]) << ',' << format_double(b.center[1]) << ','
                      << format_double(b.center[2]) << ',' << format_double(b.radius) << '\n';
    } catch (const ResolutionError& e) {
        cover["skipped"] = e.what();
    } catch (const BudgetExceeded& e) {
        cover["skipped"] = e.what();
    }
    cover["neighborhood_volume"] = neighborhood_volume(g, bad.mask, r);
    j["cover"] = cover;
    write_text(opts.out / "cover_balls.csv", balls_csv.str());

    std::array<std::size_t, 3> phases{};
    const double tol = 1e-3 * p.s_star;
    for_each_node_in(g, spec.region, [&](std::size_t node, const Vec3&) {
        ++phases[static_cast<std::size_t>(classify_phase(field.at(node), tol).tag)];
    });
    j["phase_histogram"] = {{"isotropic", phases[0]}, {"uniaxial", phases[1]}, {"biaxial", phases[2]}};
    write_text(opts.out / "diagnostics.json", j.dump(2) + "\n");

    if (opts.verbosity > 0)
        log << "diagnose: bad nodes " << bad.count() << ", quasinorm " << std::setprecision(6)
            << j["quasinorm"].get<double>() << ", monotonicity violations " << violations << "\n";
    return kExitOk;
}

int cmd_verify(const VerifySpec& spec, const RunOptions& opts, std::ostream& log) {
    std::ifstream in(spec.report);
    if (!in) throw IoError("cannot open report '" + spec.report.string() + "'");
    SweepReport report;
    try {
        report = report_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw FormatError("report '" + spec.report.string() + "': " + e.what());
    }
    const std::vector<Verdict> verdicts = rate_certificates(report);
    json vs = json::array();
    for (const Verdict& v : verdicts) {
        vs.push_back({{"name", v.name}, {"pass", v.pass}, {"advisory", v.advisory}, {"value", v.value},
                      {"detail", v.detail}});
        if (opts.verbosity > 0)
            log << (v.pass ? "PASS " : (v.advisory ? "note " : "FAIL ")) << v.name << ": " << v.detail << "\n";
    }
    const bool ok = all_pass(verdicts);
    write_text(opts.out / "verdicts.json", json{{"verdicts", vs}, {"all_pass", ok}}.dump(2) + "\n");
    return ok ? kExitOk : kExitCertificateFailed;
}

}  // namespace

SolveSpec read_solve_spec(ConfigReader& cfg) {
    SolveSpec s;
    s.n = read_grid_n(cfg);
    s.params = read_material(cfg);
    s.epsilon = cfg.require_double("model.epsilon");
    if (!(s.epsilon > 0.0)) throw ConfigError("model.epsilon", "must be positive");
    s.boundary = read_boundary(cfg);
    if (s.boundary == BoundaryMode::constant_vacuum) {
        s.director = cfg.get_vec3("boundary.director", s.director);
        if (s.director[0] == 0.0 && s.director[1] == 0.0 && s.director[2] == 0.0)
            throw ConfigError("boundary.director", "must be nonzero");
    }
    s.init_mode = cfg.get_string("init.mode", s.init_mode);
    if (s.init_mode == "reference") {
        s.init_core_cells = cfg.get_double("init.core_cells", s.init_core_cells);
        if (!(s.init_core_cells >= 0.0)) throw ConfigError("init.core_cells", "must be nonnegative");
    } else if (s.init_mode == "file") {
        s.init_file = cfg.require_string("init.file");
    } else if (s.init_mode != "boundary") {
        throw ConfigError("init.mode", "expected reference, boundary or file");
    }
    s.solve = read_solve_options(cfg);
    return s;
}

SweepConfig read_sweep_config(ConfigReader& cfg) {
    SweepConfig s;
    s.n = read_grid_n(cfg);
    s.params = read_material(cfg);
    s.epsilons = cfg.require_doubles("sweep.epsilons");
    s.boundary = read_boundary(cfg);
    s.energy_region.radius = cfg.get_double("sweep.energy_radius", s.energy_region.radius);
    s.inner_region.radius = cfg.get_double("sweep.inner_radius", s.inner_region.radius);
    if (!(s.energy_region.radius > 0.0)) throw ConfigError("sweep.energy_radius", "must be positive");
    if (!(s.inner_region.radius > 0.0)) throw ConfigError("sweep.inner_radius", "must be positive");
    s.lp_exponents = cfg.get_doubles("sweep.lp_exponents", s.lp_exponents);
    s.cover_r_over_eps = cfg.get_double("sweep.cover_r_over_eps", s.cover_r_over_eps);
    s.cover_delta_fraction = cfg.get_double("sweep.cover_delta_fraction", s.cover_delta_fraction);
    s.init_core_cells = cfg.get_double("init.core_cells", s.init_core_cells);
    s.solve = read_solve_options(cfg);
    s.validate();
    return s;
}

DiagnoseSpec read_diagnose_spec(ConfigReader& cfg) {
    DiagnoseSpec s;
    s.field = cfg.require_string("diagnose.field");
    if (cfg.has("grid.n")) s.n = cfg.require_int("grid.n");
    s.epsilon = cfg.find_double("model.epsilon");
    s.a = cfg.find_double("material.a");
    s.b = cfg.find_double("material.b");
    s.c = cfg.find_double("material.c");
    s.region.center = cfg.get_vec3("diagnose.region_center", s.region.center);
    s.region.radius = cfg.get_double("diagnose.region_radius", s.region.radius);
    if (!(s.region.radius > 0.0)) throw ConfigError("diagnose.region_radius", "must be positive");
    s.centers = cfg.get_points("diagnose.centers", monotonicity_centers());
    s.radii = cfg.get_doubles("diagnose.radii", {});
    s.cover_r = cfg.get_double("diagnose.cover_r", 0.0);
    s.cover_delta = cfg.get_double("diagnose.cover_delta", 0.0);
    return s;
}

VerifySpec read_verify_spec(ConfigReader& cfg) {
    VerifySpec s;
    s.report = cfg.require_string("verify.report");
    return s;
}

int run(const RunOptions& opts, std::ostream& log, std::ostream& err) {
    try {
        if (opts.threads > 0) omp_set_num_threads(opts.threads);
        if (opts.deterministic) omp_set_dynamic(0);

        ConfigReader cfg(read_config_file(opts.config));
        std::filesystem::create_directories(opts.out);

        auto echo = [&] {
            cfg.finish(opts.command);
            write_text(opts.out / "effective.conf", "# qtensor-lab " + opts.command + "\n" + cfg.echo());
        };
        if (opts.command == "solve") {
            const SolveSpec spec = read_solve_spec(cfg);
            echo();
            return cmd_solve(spec, opts, log);
        }
        if (opts.command == "sweep") {
            const SweepConfig spec = read_sweep_config(cfg);
            echo();
            return cmd_sweep(spec, opts, log);
        }
        if (opts.command == "diagnose") {
            const DiagnoseSpec spec = read_diagnose_spec(cfg);
            echo();
            return cmd_diagnose(spec, opts, log);
        }
        if (opts.command == "verify") {
            const VerifySpec spec = read_verify_spec(cfg);
            echo();
            return cmd_verify(spec, opts, log);
        }
        err << "error: unknown command '" << opts.command << "'\n";
        return kExitError;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return kExitError;
}

}  // namespace qlab::cli
