#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "qlab/errors.hpp"
#include "qlab/qtensor.hpp"

using namespace qlab;

namespace {

const MaterialParams kUnit = MaterialParams::make(1.0, 1.0, 1.0);

QTensor diag_q(double d1, double d2, double d3) {
    Mat3 M{};
    M[0][0] = d1;
    M[1][1] = d2;
    M[2][2] = d3;
    return from_matrix(M);
}

double frob_diff(const Mat3& A, const Mat3& B) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) s += (A[i][j] - B[i][j]) * (A[i][j] - B[i][j]);
    return std::sqrt(s);
}

}  // namespace

TEST(QTensor, BasisIsOrthonormalAndTraceless) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        const QTensor Q = oracle::random_q(rng);
        const Mat3 M = to_matrix(Q);
        EXPECT_LE(std::abs(M[0][0] + M[1][1] + M[2][2]), 1e-14);
        double fro = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                EXPECT_EQ(M[i][j], M[j][i]);
                fro += M[i][j] * M[i][j];
            }
        EXPECT_NEAR(fro, norm_sq(Q), 1e-12 * norm_sq(Q));
        const QTensor back = from_matrix(M);
        for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(back[c], Q[c], 1e-14);
    }
}

TEST(MaterialParams, UnitConstants) {
    EXPECT_DOUBLE_EQ(kUnit.s_star, 1.5);
    EXPECT_NEAR(kUnit.k, 0.4375, 1e-15);
    EXPECT_NEAR(kUnit.lambda_star, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(kUnit.g_at_lambda_star, 0.289352, 1e-6);
    EXPECT_GT(kUnit.g_at_lambda_star, 0.0);
}

TEST(MaterialParams, RejectsInvalid) {
    EXPECT_THROW(MaterialParams::make(-1.0, 1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(MaterialParams::make(1.0, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(MaterialParams::make(1.0, 1.0, 0.0), std::invalid_argument);
}

TEST(BulkPotential, Examples) {
    EXPECT_DOUBLE_EQ(bulk_potential(QTensor{}, kUnit), kUnit.k);
    // s = 1 uniaxial: 0.4375 − 1/3 − 2/27 + 1/9
    const double expect = 0.4375 - 1.0 / 3.0 - 2.0 / 27.0 + 1.0 / 9.0;
    EXPECT_NEAR(bulk_potential(diag_q(2.0 / 3, -1.0 / 3, -1.0 / 3), kUnit), expect, 1e-14);
    EXPECT_NEAR(expect, 0.141204, 1e-6);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t)
        EXPECT_LE(std::abs(bulk_potential(uniaxial(kUnit.s_star, oracle::random_unit(rng)), kUnit)), 1e-10);
}

TEST(BulkPotential, MatchesMatrixOracleAndFrameInvariant) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 500; ++t) {
        const QTensor Q = oracle::random_q(rng, 1.2);
        const double f = bulk_potential(Q, kUnit);
        EXPECT_NEAR(f, oracle::bulk_from_matrix(to_matrix(Q), 1, 1, 1, kUnit.k), 1e-12 * (1 + std::abs(f)));
        const Mat3 R = oracle::random_rotation(rng);
        const QTensor rotated = from_matrix(oracle::matmul(oracle::transpose(R), oracle::matmul(to_matrix(Q), R)));
        EXPECT_NEAR(bulk_potential(rotated, kUnit), f, 1e-12 * (1 + std::abs(f)));
    }
}

TEST(BulkPotential, Nonnegative) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> ud(0.2, 3.0);
    for (int set = 0; set < 10; ++set) {
        const MaterialParams p = MaterialParams::make(ud(rng), ud(rng), ud(rng));
        for (int t = 0; t < 10000; ++t) {
            QTensor Q = oracle::random_q(rng);
            const double target = std::uniform_real_distribution<double>(0.0, 4.0 * p.s_star)(rng);
            Q *= target / norm(Q);
            EXPECT_GE(bulk_potential(Q, p), -1e-10);
        }
    }
}

TEST(BulkPotential, ChangeMatchesDifference) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 500; ++t) {
        const QTensor Q = oracle::random_q(rng);
        const QTensor d = oracle::random_q(rng, 0.3);
        const double direct = bulk_potential(Q + d, kUnit) - bulk_potential(Q, kUnit);
        EXPECT_NEAR(bulk_potential_change(Q, d, kUnit), direct, 1e-12 * (1 + std::abs(bulk_potential(Q, kUnit))));
    }
}

TEST(BulkGradient, ZeroAtOriginAndVacuum) {
    const QTensor g0 = bulk_gradient(QTensor{}, kUnit);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_EQ(g0[c], 0.0);
    std::mt19937_64 rng(6);
    for (int t = 0; t < 50; ++t) EXPECT_LE(norm(bulk_gradient(uniaxial(1.5, oracle::random_unit(rng)), kUnit)), 1e-12);
}

TEST(BulkGradient, MatchesCentralDifferences) {
    std::mt19937_64 rng(7);
    const double step = 1e-5;
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const QTensor Q = oracle::random_q(rng);
        const QTensor G = bulk_gradient(Q, kUnit);
        for (std::size_t c = 0; c < 5; ++c) {
            QTensor qp = Q, qm = Q;
            qp[c] += step;
            qm[c] -= step;
            const double fd = (bulk_potential(qp, kUnit) - bulk_potential(qm, kUnit)) / (2 * step);
            worst = std::max(worst, std::abs(fd - G[c]) / (1.0 + norm(G)));
        }
    }
    EXPECT_LE(worst, 1e-6);
}

TEST(Eigen, ZeroAndUniaxial) {
    const EigenSystem z = eigen_decompose(QTensor{});
    for (double v : z.values) EXPECT_EQ(v, 0.0);
    const EigenSystem u = eigen_decompose(uniaxial(1.5, {0, 0, 1}));
    EXPECT_NEAR(u.values[0], 1.0, 1e-14);
    EXPECT_NEAR(u.values[1], -0.5, 1e-14);
    EXPECT_NEAR(u.values[2], -0.5, 1e-14);
    EXPECT_NEAR(std::abs(u.vectors[0][2]), 1.0, 1e-14);
}

TEST(Eigen, ReconstructsRandomTensors) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 1000; ++t) {
        QTensor Q = oracle::random_q(rng);
        if (t % 4 == 1) Q = uniaxial(std::normal_distribution<double>()(rng), oracle::random_unit(rng));
        if (t % 4 == 2) Q = uniaxial(1.0, oracle::random_unit(rng)) + oracle::random_q(rng, 1e-9);
        const EigenSystem es = eigen_decompose(Q);
        EXPECT_GE(es.values[0], es.values[1]);
        EXPECT_GE(es.values[1], es.values[2]);
        EXPECT_LE(std::abs(es.values[0] + es.values[1] + es.values[2]), 1e-12);
        Mat3 R{};
        for (int k = 0; k < 3; ++k)
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) R[i][j] += es.values[k] * es.vectors[k][i] * es.vectors[k][j];
        EXPECT_LE(frob_diff(R, to_matrix(Q)), 1e-10 * std::max(1.0, norm(Q)));
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) {
                double d = 0.0;
                for (int i = 0; i < 3; ++i) d += es.vectors[a][i] * es.vectors[b][i];
                EXPECT_NEAR(d, a == b ? 1.0 : 0.0, 1e-12);
            }
    }
}

TEST(DistToVacuum, Examples) {
    EXPECT_NEAR(dist_to_vacuum(QTensor{}, kUnit), 1.5 * std::sqrt(2.0 / 3.0), 1e-14);
    std::mt19937_64 rng(9);
    for (int t = 0; t < 20; ++t) EXPECT_LE(dist_to_vacuum(uniaxial(1.5, oracle::random_unit(rng)), kUnit), 1e-7);
}

TEST(DistToVacuum, MatchesSphereSearch) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 40; ++t) {
        const QTensor Q = oracle::random_q(rng);
        const double closed = dist_to_vacuum(Q, kUnit);
        const double brute = oracle::brute_dist_to_vacuum(Q, kUnit.s_star, 2000);
        EXPECT_NEAR(closed, brute, 1e-3 * brute);
        EXPECT_LE(closed, brute + 1e-12);
    }
}

TEST(ProjectToVacuum, Examples) {
    const QTensor P = uniaxial(1.5, {0.3, -0.4, 0.5});
    const QTensor PP = project_to_vacuum(P, kUnit);
    for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(PP[c], P[c], 1e-13);

    const QTensor small = diag_q(2.0 / 3, -1.0 / 3, -1.0 / 3) * 1e-3;
    const Mat3 M = to_matrix(project_to_vacuum(small, kUnit));
    EXPECT_NEAR(M[0][0], 1.0, 1e-13);
    EXPECT_NEAR(M[1][1], -0.5, 1e-13);
    EXPECT_NEAR(M[2][2], -0.5, 1e-13);

    EXPECT_THROW(project_to_vacuum(QTensor{}, kUnit), DegenerateSpectrum);

    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
        const QTensor Q = oracle::random_q(rng);
        EXPECT_NEAR(norm(Q - project_to_vacuum(Q, kUnit)), dist_to_vacuum(Q, kUnit), 1e-10);
    }
}

TEST(ClassifyPhase, Examples) {
    EXPECT_EQ(classify_phase(QTensor{}, 1e-6).tag, Phase::isotropic);
    EXPECT_EQ(classify_phase(uniaxial(1.5, {1, 2, 3}), 1e-6).tag, Phase::uniaxial);
    const PhaseLabel b = classify_phase(diag_q(0.5, 0.1, -0.6), 1e-6);
    EXPECT_EQ(b.tag, Phase::biaxial);
    EXPECT_THROW(classify_phase(QTensor{}, 0.0), std::invalid_argument);
}

TEST(EqualEigenvalueCurve, MatchesBulkOnStratum) {
    EXPECT_DOUBLE_EQ(equal_eigenvalue_curve(0.0, kUnit), kUnit.k);
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> ud(0.2, 3.0);
    for (int set = 0; set < 20; ++set) {
        const MaterialParams p = MaterialParams::make(ud(rng), ud(rng), ud(rng));
        // λ₁ = λ₂ is the top pair only for λ ≥ 0; at λ = −s_*/3 the curve
        // passes through the vacuum and g vanishes.
        EXPECT_NEAR(equal_eigenvalue_curve(-p.s_star / 3.0, p), 0.0, 1e-12);
        for (int i = 0; i <= 1000; ++i) {
            const double lam = 2.0 * p.s_star * i / 1000.0;
            EXPECT_LE(p.g_at_lambda_star, equal_eigenvalue_curve(lam, p) + 1e-14);
            EXPECT_NEAR(equal_eigenvalue_curve(lam, p), bulk_potential(diag_q(lam, lam, -2 * lam), p),
                        1e-11 * (1 + std::abs(equal_eigenvalue_curve(lam, p))));
        }
    }
}

TEST(VacuumGapThreshold, LowBulkImpliesGap) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> ud(0.2, 3.0);
    for (int set = 0; set < 10; ++set) {
        const MaterialParams p = MaterialParams::make(ud(rng), ud(rng), ud(rng));
        int hits = 0;
        for (int t = 0; t < 20000; ++t) {
            QTensor Q = uniaxial(p.s_star, oracle::random_unit(rng)) + oracle::random_q(rng, 0.3 * p.s_star);
            if (bulk_potential(Q, p) >= p.vacuum_gap_threshold()) continue;
            ++hits;
            const auto lam = eigen_decompose(Q).values;
            EXPECT_GT(lam[0] - lam[1], 1e-9);
        }
        EXPECT_GT(hits, 100);
    }
}

TEST(VacuumCharacterization, SmallBulkMeansCloseToVacuum) {
    std::mt19937_64 rng(14);
    for (int t = 0; t < 5000; ++t) {
        const double amp = std::pow(10.0, std::uniform_real_distribution<double>(-8, 0)(rng));
        const QTensor Q = uniaxial(1.5, oracle::random_unit(rng)) + oracle::random_q(rng, amp);
        if (bulk_potential(Q, kUnit) <= 1e-10) EXPECT_LE(dist_to_vacuum(Q, kUnit), 1e-3);
    }
}
