#pragma once

// The hedgehog sharpness experiment: ε-continuation sweep, diagnostics per
// converged field, scaling fits and the rate certificates evaluated on the
// resulting report.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "qlab/diagnostics.hpp"
#include "qlab/minimizer.hpp"

namespace qlab {

enum class BoundaryMode { hedgehog, constant_vacuum };

std::string_view to_string(BoundaryMode mode);
BoundaryMode parse_boundary_mode(std::string_view name);

struct SweepConfig {
    int n = 64;
    MaterialParams params = MaterialParams::make(1.0, 1.0, 1.0);
    std::vector<double> epsilons{0.25, 0.18, 0.13, 0.09, 0.065};
    SolveOptions solve;
    Ball energy_region{{0.0, 0.0, 0.0}, 0.75};
    Ball inner_region{{0.0, 0.0, 0.0}, 0.5};
    std::vector<double> lp_exponents{1.5, 2.0, 2.5};
    BoundaryMode boundary = BoundaryMode::hedgehog;
    double init_core_cells = 3.0;      ///< first solve starts from hedgehog_reference(core = this × h)
    double cover_r_over_eps = 4.0;     ///< covering scale r = this × ε
    double cover_delta_fraction = 0.1; ///< δ = this × s_*
    std::filesystem::path output_dir;  ///< empty: nothing persisted
    bool deterministic = true;         ///< also drops wall times from report.json

    /// Throws ConfigError for a strictly-decreasing violation, ε below 2h or
    /// a region outside the cube.
    void validate() const;
    /// Canonical text used for the provenance hash.
    std::string canonical() const;
};

struct CoverSummary {
    double r = 0.0;
    double delta = 0.0;
    double eta = 0.0;
    std::size_t bad_count = 0;
    double bad_extent = -1.0;          ///< max |y| over bad nodes, −1 when empty
    std::size_t ball_count = 0;
    double max_ball_distance = 0.0;    ///< max |center| over balls
    bool contains_mask = false;
    double neighborhood_volume = 0.0;  ///< L³ of the r-neighbourhood of the bad set
    double minkowski_constant = 0.0;   ///< neighborhood_volume / r³
    std::size_t recursion_nodes = 0;
    double min_drop = 0.0;             ///< smallest recorded Θ drop along the pinch trace
    bool budget_exceeded = false;
};

struct MonotonicitySummary {
    int centers = 0;
    double worst_slack_ratio = 0.0;  ///< ≤ 1 when every violation is within 5h/r
    double max_relative_violation = 0.0;
};

struct SweepRow {
    double epsilon = 0.0;
    bool under_resolved = false;  ///< ε < 4h
    Energy energy;
    double bulk_outer = 0.0;        ///< ∫_{B_3/4} f
    double scaled_bulk_inner = 0.0; ///< (1/ε²) ∫_{B_1/2} f
    std::vector<double> lp_distance;  ///< per configured exponent, over the inner region
    double quasinorm = 0.0;           ///< weak-L³ of ∇Q over the inner region
    CoverSummary cover;
    MonotonicitySummary monotonicity;
    ElResidual el;
    double stress_residual = 0.0;
    double regular_scale_origin = 0.0;
    double regular_scale_half = 0.0;  ///< at 0.5 e₁
    double regular_scale_c0 = 0.0;    ///< min over the inner region of regular_scale / ε
    std::array<std::size_t, 3> phase_histogram{};  ///< isotropic/uniaxial/biaxial within B_0.15
    int iterations = 0;
    bool converged = false;
    double final_grad_norm = 0.0;
    double wall_time = 0.0;
};

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;
};

struct SweepReport {
    int n = 0;
    double h = 0.0;
    MaterialParams params;
    std::vector<double> lp_exponents;
    double reference_l2_inner = 0.0;  ///< ‖Q₀‖_{L²(B_1/2)}
    std::vector<SweepRow> rows;
    ScalingFit bulk_fit;              ///< log ∫_{B_3/4} f against log ε
    std::string config_hash;
    std::string code_version;
};

SweepReport run_hedgehog_sweep(const SweepConfig& cfg);

/// The nine sampled centers of the monotonicity check, origin first.
std::vector<Vec3> monotonicity_centers();
/// Five evenly spaced radii from max(2h, 0.08) up to the largest radius whose
/// Θ support stays in the cube; empty when that range is empty.
std::vector<double> monotonicity_radii(const Grid& grid, const Vec3& x);

/// Least squares through (log ε, log value). Throws DegenerateInput.
ScalingFit fit_scaling(std::span<const std::pair<double, double>> pairs);

/// (h³ Σ_{region} |Q − Q_ref|^p)^{1/p}, origin node excluded. Throws GridMismatch.
double lp_distance(const QField& field, const QField& reference, double p, const Ball& region);

struct Verdict {
    std::string name;
    bool pass = false;
    bool advisory = false;  ///< recorded, does not affect all_pass
    double value = 0.0;
    std::string detail;
};

std::vector<Verdict> rate_certificates(const SweepReport& report);
bool all_pass(std::span<const Verdict> verdicts);

/// Fixed column order; see README.
std::string report_csv_header(const SweepReport& report);
std::string report_csv_row(const SweepReport& report, const SweepRow& row);
void write_report_csv(const SweepReport& report, const std::filesystem::path& path);

nlohmann::json report_to_json(const SweepReport& report, bool include_wall_times = true);
SweepReport report_from_json(const nlohmann::json& j);
void write_report_json(const SweepReport& report, std::span<const Verdict> verdicts,
                       const std::filesystem::path& path, bool include_wall_times = true);

/// Plain columns: ε, ∫_{B_3/4} f, fitted line value.
void write_plot_data(const SweepReport& report, const std::filesystem::path& path);

/// FNV-1a 64-bit, hex.
std::string fnv1a_hex(std::string_view text);

}  // namespace qlab
