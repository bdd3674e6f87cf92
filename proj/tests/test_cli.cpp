#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qlab/errors.hpp"
#include "qlab/field.hpp"
#include "qlab_cli/commands.hpp"
#include "qlab_cli/config.hpp"

using namespace qlab;
using namespace qlab::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("qlab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
    std::ofstream(path) << text;
    return path;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct Outcome {
    int code;
    std::string log, err;
};

Outcome run_cmd(const std::string& command, const fs::path& config, const fs::path& out, bool deterministic = true) {
    RunOptions opts;
    opts.command = command;
    opts.config = config;
    opts.out = out;
    opts.deterministic = deterministic;
    std::ostringstream log, err;
    const int code = run(opts, log, err);
    return {code, log.str(), err.str()};
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(QLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kMaterial = "material.a = 1\nmaterial.b = 1\nmaterial.c = 1\n";

// Hand-made report whose certificates all pass (alpha = 3) or fail the rate (alpha = 2).
SweepReport synthetic(double alpha) {
    SweepReport rep;
    rep.n = 64;
    rep.h = 2.0 / 63.0;
    rep.params = MaterialParams::make(1, 1, 1);
    rep.lp_exponents = {2.0};
    rep.reference_l2_inner = 1.0;
    std::vector<std::pair<double, double>> pairs;
    for (double eps : {0.2, 0.1, 0.05, 0.025}) {
        SweepRow r;
        r.epsilon = eps;
        r.bulk_outer = std::pow(eps, alpha);
        r.scaled_bulk_inner = std::pow(eps, alpha - 2.0);
        r.lp_distance = {0.2 * eps};
        r.quasinorm = 3.0;
        r.converged = true;
        r.monotonicity.centers = 9;
        r.cover.bad_count = 3;
        r.cover.bad_extent = 0.05;
        r.cover.ball_count = 1;
        r.cover.contains_mask = true;
        r.cover.minkowski_constant = 30.0;
        rep.rows.push_back(r);
        pairs.emplace_back(eps, r.bulk_outer);
    }
    rep.bulk_fit = fit_scaling(pairs);
    return rep;
}

}  // namespace

TEST(ConfigParser, CommentsWhitespaceAndLines) {
    const ConfigMap m = parse_config_text("# header\n\n  grid.n = 32  \nmodel.epsilon=0.3 # trailing\n");
    ASSERT_EQ(m.size(), 2u);
    EXPECT_EQ(m.at("grid.n").value, "32");
    EXPECT_EQ(m.at("grid.n").line, 3);
    EXPECT_EQ(m.at("model.epsilon").value, "0.3");
}

TEST(ConfigParser, RejectsMalformedInput) {
    EXPECT_THROW(parse_config_text("grid.n = 1\ngrid.n = 2\n"), ConfigError);
    EXPECT_THROW(parse_config_text("grid.n\n"), ConfigError);
    EXPECT_THROW(parse_config_text("grid.n =\n"), ConfigError);
    EXPECT_THROW(parse_config_text("Grid.N = 3\n"), ConfigError);
    EXPECT_THROW(parse_config_text("a.b.c = 3\n"), ConfigError);
    EXPECT_THROW(read_config_file("/nonexistent/qlab.conf"), IoError);
    try {
        parse_config_text("grid.n = 1\ngrid.n = 2\n");
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "grid.n");
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(ConfigReader, TypedLookupsAndUnknownKeys) {
    ConfigReader cfg(parse_config_text(
        "grid.n = 32\nmodel.epsilon = 0.3\nsweep.epsilons = 0.3, 0.2\ndiagnose.centers = 0,0,0; 0.25,0,0\n"
        "solve.gradtol = 1e-6\nflag.on = true\n"));
    EXPECT_EQ(cfg.require_int("grid.n"), 32);
    EXPECT_EQ(cfg.require_double("model.epsilon"), 0.3);
    EXPECT_EQ(cfg.require_doubles("sweep.epsilons"), (std::vector<double>{0.3, 0.2}));
    const std::vector<Vec3> pts = cfg.get_points("diagnose.centers", {});
    ASSERT_EQ(pts.size(), 2u);
    EXPECT_EQ(pts[1], (Vec3{0.25, 0, 0}));
    EXPECT_TRUE(cfg.get_bool("flag.on", false));
    EXPECT_EQ(cfg.get_double("solve.max_step", 2.5), 2.5);
    EXPECT_THROW(cfg.require_double("material.c"), ConfigError);
    try {
        cfg.finish("solve");
        FAIL() << "unknown key accepted";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "solve.gradtol");
        EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos);
    }
}

TEST(ConfigReader, BadValues) {
    ConfigReader cfg(parse_config_text("grid.n = 3.5\nmodel.epsilon = abc\nx.v = 1,2\nx.b = maybe\n"));
    EXPECT_THROW(cfg.require_int("grid.n"), ConfigError);
    EXPECT_THROW(cfg.require_double("model.epsilon"), ConfigError);
    EXPECT_THROW(cfg.get_vec3("x.v", {}), ConfigError);
    EXPECT_THROW(cfg.get_bool("x.b", false), ConfigError);
}

TEST(ConfigReader, EchoRoundTrips) {
    ConfigReader cfg(parse_config_text("grid.n = 32\nmodel.epsilon = 0.3\n"));
    cfg.require_int("grid.n");
    cfg.require_double("model.epsilon");
    cfg.get_double("solve.grad_tol", 1e-7);
    const std::string echo = cfg.echo();
    ConfigReader again(parse_config_text(echo));
    EXPECT_EQ(again.require_int("grid.n"), 32);
    EXPECT_EQ(again.require_double("model.epsilon"), 0.3);
    EXPECT_EQ(again.require_double("solve.grad_tol"), 1e-7);
    EXPECT_NO_THROW(again.finish("solve"));
    EXPECT_EQ(format_double(0.3), "0.3");
}

TEST(SolveSpec, MaterialAndEpsilonAreRequired) {
    for (const char* missing : {"material.a", "material.b", "material.c", "model.epsilon", "grid.n"}) {
        std::string text = std::string("grid.n = 16\nmodel.epsilon = 0.3\n") + kMaterial;
        const auto pos = text.find(missing);
        text.erase(pos, text.find('\n', pos) - pos + 1);
        ConfigReader cfg(parse_config_text(text));
        EXPECT_THROW(read_solve_spec(cfg), ConfigError) << missing;
    }
}

TEST(Commands, VacuumSolveSucceeds) {
    const fs::path dir = scratch("vacuum");
    const fs::path conf = write_text(dir / "c.conf", std::string("grid.n = 16\nmodel.epsilon = 0.5\n") + kMaterial +
                                                         "boundary.mode = constant-vacuum\nboundary.director = 1,0,0\n");
    const Outcome o = run_cmd("solve", conf, dir / "out");
    EXPECT_EQ(o.code, kExitOk) << o.err;
    const QField f = load_field(dir / "out" / "field.qtnf");
    EXPECT_EQ(f.grid.n(), 16);
    const auto stats = nlohmann::json::parse(slurp(dir / "out" / "stats.json"));
    EXPECT_LE(stats.at("energy").at("total").get<double>(), 1e-12);
    EXPECT_TRUE(fs::exists(dir / "out" / "effective.conf"));
    fs::remove_all(dir);
}

TEST(Commands, HedgehogSolveThenDiagnose) {
    const fs::path dir = scratch("hedgehog");
    const fs::path conf =
        write_text(dir / "s.conf", std::string("grid.n = 32\nmodel.epsilon = 0.3\n") + kMaterial + "solve.record_every = 5\n");
    const Outcome solved = run_cmd("solve", conf, dir / "solve");
    ASSERT_EQ(solved.code, kExitOk) << solved.err;
    const QField f = load_field(dir / "solve" / "field.qtnf");
    EXPECT_EQ(f.epsilon, 0.3);
    const auto stats = nlohmann::json::parse(slurp(dir / "solve" / "stats.json"));
    EXPECT_TRUE(stats.at("solver").at("converged").get<bool>());
    EXPECT_FALSE(stats.at("solver").contains("wall_time"));

    // Echoed config reproduces the run.
    const Outcome again = run_cmd("solve", dir / "solve" / "effective.conf", dir / "solve2");
    ASSERT_EQ(again.code, kExitOk) << again.err;
    EXPECT_EQ(slurp(dir / "solve" / "field.qtnf"), slurp(dir / "solve2" / "field.qtnf"));

    const fs::path dconf = write_text(dir / "d.conf", "diagnose.field = " + (dir / "solve" / "field.qtnf").string() +
                                                          "\ndiagnose.centers = 0,0,0; 0.25,0,0\nmodel.epsilon = 0.3\n");
    const Outcome diag = run_cmd("diagnose", dconf, dir / "diag");
    ASSERT_EQ(diag.code, kExitOk) << diag.err;
    const auto dj = nlohmann::json::parse(slurp(dir / "diag" / "diagnostics.json"));
    EXPECT_GT(dj.at("energy").at("total").get<double>(), 0.0);
    EXPECT_TRUE(fs::exists(dir / "diag" / "theta_profile.csv"));
    EXPECT_TRUE(fs::exists(dir / "diag" / "bad_set.qtnm"));

    // Physics keys that disagree with the file header are rejected.
    const fs::path wrong = write_text(dir / "w.conf", "diagnose.field = " + (dir / "solve" / "field.qtnf").string() +
                                                          "\nmodel.epsilon = 0.2\n");
    EXPECT_EQ(run_cmd("diagnose", wrong, dir / "diag2").code, kExitError);
    fs::remove_all(dir);
}

TEST(Commands, ConfigErrorsExitOne) {
    const fs::path dir = scratch("errors");
    const fs::path unknown =
        write_text(dir / "u.conf", std::string("grid.n = 16\nmodel.epsilon = 0.3\n") + kMaterial + "solve.gradtol = 1\n");
    const Outcome o = run_cmd("solve", unknown, dir / "o1");
    EXPECT_EQ(o.code, kExitError);
    EXPECT_NE(o.err.find("solve.gradtol"), std::string::npos);

    const fs::path missing = write_text(dir / "m.conf", "grid.n = 16\nmodel.epsilon = 0.3\nmaterial.a = 1\nmaterial.b = 1\n");
    const Outcome m = run_cmd("solve", missing, dir / "o2");
    EXPECT_EQ(m.code, kExitError);
    EXPECT_NE(m.err.find("material.c"), std::string::npos);

    const fs::path bad_params = write_text(dir / "b.conf", "grid.n = 16\nmodel.epsilon = 0.3\nmaterial.a = 1\n"
                                                           "material.b = 1\nmaterial.c = -1\n");
    EXPECT_EQ(run_cmd("solve", bad_params, dir / "o3").code, kExitError);
    EXPECT_EQ(run_cmd("bogus", bad_params, dir / "o4").code, kExitError);
    fs::remove_all(dir);
}

TEST(Commands, DiagnoseOnTruncatedFieldExitsOne) {
    const fs::path dir = scratch("truncated");
    const QField f = hedgehog_reference(Grid(12), MaterialParams::make(1, 1, 1), 0.0, 0.3);
    save_field(f, dir / "f.qtnf");
    const std::string bytes = slurp(dir / "f.qtnf");
    std::ofstream(dir / "t.qtnf", std::ios::binary) << bytes.substr(0, bytes.size() - 7);
    const fs::path conf = write_text(dir / "d.conf", "diagnose.field = " + (dir / "t.qtnf").string() + "\n");
    const Outcome o = run_cmd("diagnose", conf, dir / "out");
    EXPECT_EQ(o.code, kExitError);
    EXPECT_NE(o.err.find("truncated"), std::string::npos);
    fs::remove_all(dir);
}

TEST(Commands, SweepWithoutConvergenceExitsTwo) {
    const fs::path dir = scratch("sweep");
    const fs::path conf = write_text(dir / "s.conf", std::string("grid.n = 20\n") + kMaterial +
                                                         "sweep.epsilons = 0.5, 0.4\nsolve.max_iters = 1\n");
    const Outcome o = run_cmd("sweep", conf, dir / "out");
    EXPECT_EQ(o.code, kExitNotConverged) << o.err;
    EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
    EXPECT_TRUE(fs::exists(dir / "out" / "report.csv"));
    fs::remove_all(dir);
}

TEST(Commands, VerifyReflectsCertificates) {
    const fs::path dir = scratch("verify");
    const SweepReport good = synthetic(3.0), bad = synthetic(2.0);
    write_report_json(good, rate_certificates(good), dir / "good.json");
    write_report_json(bad, rate_certificates(bad), dir / "bad.json");
    const auto verify = [&](const std::string& file) {
        const fs::path conf = write_text(dir / (file + ".conf"), "verify.report = " + (dir / file).string() + "\n");
        return run_cmd("verify", conf, dir / ("out_" + file));
    };
    EXPECT_EQ(verify("good.json").code, kExitOk);
    EXPECT_EQ(verify("bad.json").code, kExitCertificateFailed);
    EXPECT_EQ(verify("missing.json").code, kExitError);
    const auto vj = nlohmann::json::parse(slurp(dir / "out_good.json" / "verdicts.json"));
    EXPECT_TRUE(vj.at("all_pass").get<bool>());
    fs::remove_all(dir);
}

TEST(Binary, UsageErrorsAndVersion) {
    const fs::path dir = scratch("binary");
    EXPECT_EQ(run_binary("--version"), 0);
    EXPECT_EQ(run_binary(""), 1);
    EXPECT_EQ(run_binary("solve --out " + dir.string()), 1);
    EXPECT_EQ(run_binary("solve --config /nonexistent.conf --out " + dir.string()), 1);
    const fs::path conf = write_text(dir / "c.conf", std::string("grid.n = 12\nmodel.epsilon = 0.5\n") + kMaterial +
                                                         "boundary.mode = constant-vacuum\n");
    EXPECT_EQ(run_binary("solve --config " + conf.string() + " --out " + (dir / "o").string() +
                         " --threads 1 --deterministic"),
              0);
    EXPECT_TRUE(fs::exists(dir / "o" / "field.qtnf"));
    fs::remove_all(dir);
}
