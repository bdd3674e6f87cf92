#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "qlab/errors.hpp"
#include "qlab/minimizer.hpp"

using namespace qlab;

namespace {

const MaterialParams kUnit = MaterialParams::make(1.0, 1.0, 1.0);

QField vacuum_field(int n, double eps) { return constant_boundary(Grid(n), kUnit, eps, uniaxial(1.5, {0, 0, 1})); }

// max |coefficient| over free nodes, the solver's stopping norm
double sup_norm(const std::vector<double>& v, const QField& f) {
    double s = 0.0;
    for (std::size_t node = 0; node < f.grid.node_count(); ++node) {
        if (f.masked(node)) continue;
        for (std::size_t c = 0; c < 5; ++c) s = std::max(s, std::abs(v[5 * node + c]));
    }
    return s;
}

// Converged hedgehog at n = 32, ε = 0.3, shared by several tests.
const SolveResult& hedgehog32() {
    static const SolveResult result = [] {
        const Grid g(32);
        return minimize(hedgehog_reference(g, kUnit, 2.0 * g.h(), 0.3), SolveOptions{});
    }();
    return result;
}

}  // namespace

TEST(DiscreteEnergy, ConstantVacuumIsZero) {
    const Energy e = discrete_energy(vacuum_field(16, 0.5));
    EXPECT_EQ(e.elastic, 0.0);
    EXPECT_LE(std::abs(e.bulk), 1e-12);
    EXPECT_EQ(e.total, e.elastic + e.bulk);
}

TEST(DiscreteEnergy, ZeroFieldGivesKTimesVolume) {
    const QField f(Grid(16), 1.0, kUnit);
    const Energy e = discrete_energy(f);
    EXPECT_EQ(e.elastic, 0.0);
    EXPECT_NEAR(e.bulk, 0.4375 * 8.0, 1e-12);
}

TEST(DiscreteEnergy, LinearFieldIsLatticeExact) {
    std::mt19937_64 rng(31);
    const QTensor A = oracle::random_q(rng);
    QField f(Grid(20), 1.0, kUnit);
    for (std::size_t node = 0; node < f.grid.node_count(); ++node) f.set(node, A * f.grid.position(node)[0]);
    const Energy e = discrete_energy(f);
    EXPECT_NEAR(e.elastic, 0.5 * norm_sq(A) * 8.0, 1e-12 * norm_sq(A) * 8.0);
    EXPECT_EQ(e.total, e.elastic + e.bulk);
    EXPECT_GE(e.bulk, -1e-10 * static_cast<double>(f.grid.node_count()) * std::pow(f.grid.h(), 3));
}

TEST(EnergyGradient, VanishesOnTrivialFields) {
    const QField vac = vacuum_field(12, 0.4);
    EXPECT_LE(sup_norm(energy_gradient(vac), vac), 1e-12);
    const QField zero(Grid(12), 0.4, kUnit);
    EXPECT_EQ(sup_norm(energy_gradient(zero), zero), 0.0);
}

TEST(EnergyGradient, MatchesDirectionalFiniteDifferences) {
    std::mt19937_64 rng(32);
    const Grid g(24);
    QField f = hedgehog_reference(g, kUnit, 3.0 * g.h(), 0.2);
    for (std::size_t node = 0; node < g.node_count(); ++node)
        if (!f.masked(node)) f.set(node, f.at(node) + oracle::random_q(rng, 0.2));
    const std::vector<double> grad = energy_gradient(f);
    const double t = 1e-6;
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> P(f.data.size(), 0.0);
        for (std::size_t node = 0; node < g.node_count(); ++node)
            if (!f.masked(node))
                for (std::size_t c = 0; c < 5; ++c) P[5 * node + c] = std::normal_distribution<double>()(rng);
        QField fp = f, fm = f;
        for (std::size_t i = 0; i < P.size(); ++i) {
            fp.data[i] += t * P[i];
            fm.data[i] -= t * P[i];
        }
        const double fd = (discrete_energy(fp).total - discrete_energy(fm).total) / (2.0 * t);
        const double analytic = weighted_dot(f, grad, P);
        worst = std::max(worst, std::abs(fd - analytic) / std::abs(analytic));
    }
    EXPECT_LE(worst, 1e-5);
}

TEST(EnergyChange, MatchesDifferenceOfEnergies) {
    std::mt19937_64 rng(33);
    const Grid g(12);
    QField f = hedgehog_reference(g, kUnit, 0.3, 0.25);
    std::vector<double> dir(f.data.size(), 0.0);
    for (std::size_t node = 0; node < g.node_count(); ++node)
        if (!f.masked(node))
            for (std::size_t c = 0; c < 5; ++c) dir[5 * node + c] = std::normal_distribution<double>()(rng);
    for (double alpha : {1e-3, 0.1, 0.7}) {
        QField moved = f;
        for (std::size_t i = 0; i < dir.size(); ++i) moved.data[i] += alpha * dir[i];
        const Energy d = energy_change(f, dir, alpha);
        const double direct = discrete_energy(moved).total - discrete_energy(f).total;
        EXPECT_NEAR(d.total, direct, 1e-10 * std::abs(discrete_energy(moved).total));
    }
}

TEST(Minimize, ConstantVacuumReturnsImmediately) {
    QField f = vacuum_field(16, 0.3);
    const SolveStats st = minimize_in_place(f, SolveOptions{});
    EXPECT_TRUE(st.converged);
    EXPECT_EQ(st.iterations, 0);
}

TEST(Minimize, HedgehogConvergesAndDescends) {
    const Grid g(32);
    const QField start = hedgehog_reference(g, kUnit, 2.0 * g.h(), 0.3);
    const SolveResult& res = hedgehog32();
    EXPECT_TRUE(res.stats.converged);
    EXPECT_LT(discrete_energy(res.field).total, discrete_energy(start).total);
    EXPECT_LE(sup_norm(energy_gradient(res.field), res.field), SolveOptions{}.effective_grad_tol(0.3));
    const auto& trace = res.stats.energy_trace;
    ASSERT_GE(trace.size(), 2u);
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i].total, trace[i - 1].total + 1e-12);
    for (std::size_t node = 0; node < g.node_count(); ++node)
        if (start.masked(node))
            for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(res.field.data[5 * node + c], start.data[5 * node + c]);
}

TEST(Minimize, ConvergedFieldIsIdempotent) {
    QField f = hedgehog32().field;
    const SolveStats again = minimize_in_place(f, SolveOptions{});
    EXPECT_TRUE(again.converged);
    EXPECT_LE(again.iterations, 1);
}

TEST(Minimize, RandomLocalPerturbationsDoNotLowerEnergy) {
    const QField& f = hedgehog32().field;
    const double base = discrete_energy(f).total;
    std::mt19937_64 rng(34);
    std::uniform_real_distribution<double> uc(-0.6, 0.6);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 c{uc(rng), uc(rng), uc(rng)};
        const double R = std::uniform_real_distribution<double>(0.1, 0.3)(rng);
        const double amp = std::uniform_real_distribution<double>(0.0, 0.1)(rng);
        QTensor dir = oracle::random_q(rng);
        dir *= amp / norm(dir);
        QField p = f;
        for_each_node_in(f.grid, Ball(c, R), [&](std::size_t node, const Vec3& y) {
            if (p.masked(node)) return;
            const double d2 = ((y[0] - c[0]) * (y[0] - c[0]) + (y[1] - c[1]) * (y[1] - c[1]) +
                               (y[2] - c[2]) * (y[2] - c[2])) / (R * R);
            p.set(node, p.at(node) + dir * (1.0 - d2) * (1.0 - d2));
        });
        EXPECT_GE(discrete_energy(p).total - base, -1e-10) << "trial " << trial;
    }
}

TEST(Minimize, ElResidualWithinToleranceOnConvergedField) {
    const SolveResult& res = hedgehog32();
    const ElResidual el = el_residual_check(res.field, Ball({0, 0, 0}, 0.5));
    // The check is ε²-scaled, the stopping rule is not.
    EXPECT_LE(el.residual, 10.0 * SolveOptions{}.effective_grad_tol(0.3) * 0.09);
    EXPECT_GT(el.eps_grad_sup, 0.0);
    const ElResidual vac = el_residual_check(vacuum_field(16, 0.3), Ball({0, 0, 0}, 0.5));
    EXPECT_LE(vac.residual, 1e-12);
    EXPECT_EQ(vac.eps_grad_sup, 0.0);
}

TEST(Minimize, StepPoliciesAgree) {
    const Grid g(16);
    const QField start = hedgehog_reference(g, kUnit, 2.0 * g.h(), 0.5);
    std::vector<double> energies;
    for (StepPolicy policy : {StepPolicy::fixed, StepPolicy::barzilai_borwein, StepPolicy::nonlinear_cg}) {
        SolveOptions o;
        o.step_policy = policy;
        o.grad_tol = 1e-8;
        const SolveResult r = minimize(start, o);
        EXPECT_TRUE(r.stats.converged) << to_string(policy);
        energies.push_back(discrete_energy(r.field).total);
    }
    EXPECT_NEAR(energies[0], energies[1], 1e-9 * energies[1]);
    EXPECT_NEAR(energies[2], energies[1], 1e-9 * energies[1]);
}

TEST(Minimize, MaxItersFlagsNonConvergence) {
    const Grid g(16);
    SolveOptions o;
    o.max_iters = 1;
    const SolveResult r = minimize(hedgehog_reference(g, kUnit, 2.0 * g.h(), 0.3), o);
    EXPECT_FALSE(r.stats.converged);
    EXPECT_EQ(r.stats.iterations, 1);
}

TEST(Minimize, NonFiniteInputAborts) {
    QField f = hedgehog_reference(Grid(12), kUnit, 0.2, 0.3);
    f.data[5 * f.grid.index(5, 5, 5)] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(minimize_in_place(f, SolveOptions{}), NonFiniteEnergy);
}

TEST(StepPolicy, ParseRoundTrip) {
    for (StepPolicy p : {StepPolicy::fixed, StepPolicy::barzilai_borwein, StepPolicy::nonlinear_cg})
        EXPECT_EQ(parse_step_policy(to_string(p)), p);
    EXPECT_THROW(parse_step_policy("newton"), std::invalid_argument);
}
