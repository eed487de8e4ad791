#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "wavefarm/farm_dynamics.hpp"
#include "wavefarm/optimizer.hpp"

using namespace wavefarm;

namespace {

const Environment kEnv{};

/// Climate with explicit nodes, unit quadrature weights and given per-year probabilities.
WaveClimate manual_climate(const std::vector<Eigen::MatrixXd>& years) {
    WaveClimate c;
    const auto n_h = years.front().rows(), n_t = years.front().cols();
    for (Eigen::Index i = 0; i < n_h; ++i) {
        c.hs_nodes.push_back(1.0 + static_cast<double>(i));
        c.hs_weights.push_back(1.0);
    }
    for (Eigen::Index j = 0; j < n_t; ++j) {
        c.tp_nodes.push_back(6.0 + 2.0 * static_cast<double>(j));
        c.tp_weights.push_back(1.0);
    }
    for (std::size_t y = 0; y < years.size(); ++y) {
        c.years.push_back(2000 + static_cast<int>(y));
        c.prob.push_back(years[y]);
    }
    return c;
}

/// Single-body matrices from the oracle at one frequency.
FarmMatrices single(const WecGeometry& g, double w) {
    const auto c = single_body(g, w, kEnv);
    FarmMatrices m;
    m.omegas = {w};
    m.added_mass = {Eigen::MatrixXd::Constant(1, 1, c.added_mass)};
    m.damping = {Eigen::MatrixXd::Constant(1, 1, c.damping)};
    m.excitation = {Eigen::VectorXcd::Constant(1, c.excitation)};
    return m;
}

}  // namespace

TEST(Hydrostatics, UnitRadius) {
    const auto h = hydrostatics({1.0, 2.0}, kEnv);
    EXPECT_NEAR(h.stiffness, 1025.0 * 9.81 * kPi, 1e-9);
    EXPECT_NEAR(h.stiffness, 31590.0, 1.0);
    EXPECT_NEAR(h.mass, 1025.0 * kPi * 2.0, 1e-9);
    const auto z = hydrostatics({0.0, 2.0}, kEnv);
    EXPECT_EQ(z.stiffness, 0.0);
    EXPECT_EQ(z.mass, 0.0);
}

TEST(TransferMatrix, ResonanceIdentity) {
    const double w = 1.3, m = 5000.0, a = 1200.0, b = 800.0, g = 30000.0, bp = 2000.0;
    const double k = w * w * (m + a) - g;
    const auto h = transfer_matrix(w, m, Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b), g,
                                   PtoParams::uniform(1, k, bp));
    EXPECT_NEAR(std::abs(h(0, 0)), 1.0 / (w * (b + bp)), 1e-12 / (w * (b + bp)));
}

TEST(TransferMatrix, SingularDenominatorRejected) {
    const double w = 1.3, m = 5000.0, a = 1200.0, g = 30000.0;
    const double k = w * w * (m + a) - g;
    try {
        transfer_matrix(w, m, Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Zero(1, 1), g,
                        PtoParams::uniform(1, k, 0.0));
        FAIL() << "expected SingularityError";
    } catch (const SingularityError& e) {
        EXPECT_DOUBLE_EQ(e.omega(), w);
    }
    // Exact real-part cancellation with vanishing damping at N = 2 as well.
    EXPECT_THROW(transfer_matrix(w, m, Eigen::Matrix2d::Constant(a), Eigen::Matrix2d::Zero(), g,
                                 PtoParams::uniform(2, k - w * w * a, 0.0)),
                 SingularityError);
    EXPECT_THROW(transfer_matrix(w, m, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(2, 2), g,
                                 PtoParams::uniform(1, 0.0, 0.0)),
                 DomainError);
}

TEST(TransferMatrix, SymmetricAndInverse) {
    const auto bp = SurrogateBundle::oracle(FrequencyGrid::evenly_spaced(0.3, 3.0, 8), kEnv);
    const WecGeometry g{3.0, 2.0};
    const auto m = assemble_farm(bp, g, {{0, 0}, {70, 20}});
    const auto hs = hydrostatics(g, kEnv);
    const PtoParams pto{Eigen::Vector2d(1e4, -2e4), Eigen::Vector2d(3e4, 5e4)};
    for (std::size_t k = 0; k < m.size(); ++k) {
        const double w = m.omegas[k];
        const auto h = transfer_matrix(w, hs.mass, m.added_mass[k], m.damping[k], hs.stiffness, pto);
        EXPECT_LT((h - h.transpose()).norm(), 1e-12 * h.norm());
        Eigen::MatrixXcd z(2, 2);
        z.real() = -w * w * (m.added_mass[k] + hs.mass * Eigen::Matrix2d::Identity());
        z.real().diagonal().array() += hs.stiffness + pto.stiffness.array();
        z.imag() = w * m.damping[k];
        z.imag().diagonal() += w * pto.damping;
        EXPECT_LT((h * z - Eigen::Matrix2cd::Identity()).norm(), 1e-10);
    }
}

TEST(Response, Identities) {
    Eigen::Matrix2cd h;
    h << cplx(1, 2), cplx(0.5, -1), cplx(0.5, -1), cplx(3, 0.25);
    const auto zero = response(h, Eigen::VectorXcd::Zero(2), 2.0);
    EXPECT_EQ(zero.displacement, Eigen::VectorXcd::Zero(2));
    const Eigen::Vector2cd fe(cplx(2, 1), cplx(-1, 4));
    const double w = 1.7;
    const auto r = response(h, fe, w);
    for (int p = 0; p < 2; ++p) {
        EXPECT_EQ(r.velocity(p), cplx(0.0, w) * r.displacement(p));
        EXPECT_EQ(r.acceleration(p), -w * w * r.displacement(p));
        const double t0 = (r.displacement(p) * std::exp(cplx(0.0, w * 0.0))).real();
        EXPECT_EQ(t0, r.displacement(p).real());
    }
    EXPECT_THROW(response(h, Eigen::VectorXcd::Zero(3), 1.0), DomainError);
}

TEST(PowerRegular, Examples) {
    EXPECT_DOUBLE_EQ(power_regular(1.0, Eigen::VectorXcd::Constant(1, cplx(1, 0)), Eigen::VectorXd::Constant(1, 2.0)),
                     1.0);
    EXPECT_EQ(power_regular(2.0, Eigen::VectorXcd::Constant(3, cplx(1, 5)), Eigen::VectorXd::Zero(3)), 0.0);
    // Hermitian form: a purely imaginary amplitude absorbs the same power as a real one.
    EXPECT_DOUBLE_EQ(power_regular(1.0, Eigen::VectorXcd::Constant(1, cplx(0, 1)), Eigen::VectorXd::Constant(1, 2.0)),
                     1.0);
}

TEST(PowerRegular, ReactiveOptimumMatchesAnalyticFormula) {
    const WecGeometry g{4.0, 3.0};
    const auto hs = hydrostatics(g, kEnv);
    for (double w : {0.6, 1.1, 2.0}) {
        const auto c = single_body(g, w, kEnv);
        const auto m = single(g, w);
        const double k_opt = w * w * (hs.mass + c.added_mass) - hs.stiffness;
        const double b_opt = c.damping;
        const double analytic = std::norm(c.excitation) / (8.0 * c.damping);
        const auto opt = regular_power_curve(m, {g, PtoParams::uniform(1, k_opt, b_opt), {{0, 0}}}, kEnv)[0];
        EXPECT_NEAR(opt, analytic, 1e-9 * analytic) << w;
        // 2-D grid search around the optimum never does better.
        double best = 0.0;
        for (int i = -10; i <= 10; ++i)
            for (int j = 1; j <= 40; ++j) {
                const double kk = k_opt + 0.2 * i * std::max(std::abs(k_opt), hs.stiffness);
                const double bb = b_opt * 0.1 * j;
                best = std::max(best, regular_power_curve(m, {g, PtoParams::uniform(1, kk, bb), {{0, 0}}}, kEnv)[0]);
            }
        EXPECT_LE(best, analytic * (1.0 + 1e-12));
        EXPECT_GT(best, 0.99 * analytic);
    }
}

TEST(PowerRegular, ScalesQuadraticallyWithExcitation) {
    const WecGeometry g{3.0, 2.0};
    const auto bp = SurrogateBundle::oracle(FrequencyGrid::evenly_spaced(0.3, 3.0, 10), kEnv);
    auto m = assemble_farm(bp, g, {{0, 0}, {60, 40}, {-50, 70}});
    const FarmDesign d{g, PtoParams::uniform(3, -5e3, 4e4), {{0, 0}, {60, 40}, {-50, 70}}};
    const auto p1 = regular_power_curve(m, d, kEnv);
    for (auto& f : m.excitation) f *= 3.0;
    const auto p3 = regular_power_curve(m, d, kEnv);
    for (std::size_t k = 0; k < p1.size(); ++k) EXPECT_NEAR(p3[k], 9.0 * p1[k], 1e-12 * 9.0 * p1[k]);
}

TEST(PowerSeaState, ZeroSpectrumAndGridRefinement) {
    const auto grid = FrequencyGrid::evenly_spaced(0.1, 7.0, 50);
    // Far below the peak the spectrum underflows to exactly zero.
    const auto low = FrequencyGrid::evenly_spaced(0.005, 0.01, 5);
    EXPECT_EQ(power_sea_state({2.0, 20.0}, low, std::vector<double>(5, 1e9)), 0.0);

    const WecGeometry g{3.0, 2.0};
    const std::vector<Eigen::Vector2d> pos{{0, 0}, {60, 40}, {-50, 70}};
    const FarmDesign d{g, PtoParams::uniform(3, 1e4, 2e5), pos};
    auto pi_on = [&](std::size_t n, const SeaState& s) {
        const auto gr = FrequencyGrid::evenly_spaced(0.1, 7.0, n);
        const auto bp = SurrogateBundle::oracle(gr, kEnv);
        return power_sea_state(s, gr, regular_power_curve(assemble_farm(bp, g, pos), d, kEnv));
    };
    for (const SeaState s : {SeaState{1.5, 7.0}, SeaState{2.5, 9.0}, SeaState{4.0, 12.0}}) {
        const double coarse = pi_on(50, s), fine = pi_on(100, s);
        EXPECT_GT(coarse, 0.0);
        EXPECT_LT(std::abs(fine - coarse) / fine, 0.02) << s.hs << ' ' << s.tp;
    }
}

TEST(PowerSeaState, NonNegativeForRandomFeasibleDesigns) {
    const auto grid = FrequencyGrid::evenly_spaced(0.2, 4.0, 12);
    const auto bp = SurrogateBundle::oracle(grid, kEnv);
    const auto bounds = Bounds::for_farm(3);
    std::size_t singular = 0;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        const auto d = random_feasible(3, bounds, 777 + s).farm();
        try {
            const auto pm = regular_power_curve(assemble_farm(bp, d.geometry, d.layout), d, kEnv);
            for (double p : pm) ASSERT_GE(p, 0.0);
            ASSERT_GE(power_sea_state({2.0, 8.0}, grid, pm), 0.0);
        } catch (const SingularityError&) {
            ++singular;
        }
    }
    EXPECT_LT(singular, 10u);
}

TEST(AveragePower, ConstantIntegrandAndEfficiencies) {
    Eigen::MatrixXd p(2, 3);
    p << 0.1, 0.2, 0.1, 0.3, 0.2, 0.1;
    Eigen::MatrixXd q(2, 3);
    q << 0.5, 0.1, 0.1, 0.1, 0.1, 0.1;
    const auto c = manual_climate({p, q});
    const Efficiencies eff;
    EXPECT_NEAR(eff.product(), 0.8 * 0.95 * 0.98, 1e-15);
    const Eigen::MatrixXd pi = Eigen::MatrixXd::Constant(2, 3, 250.0);
    EXPECT_NEAR(average_power(c, pi, eff), eff.product() * 250.0, 1e-12);

    const auto zero = manual_climate({Eigen::MatrixXd::Zero(2, 3)});
    EXPECT_EQ(average_power(zero, pi, eff), 0.0);

    Eigen::MatrixXd vary(2, 3);
    vary << 10, 20, 30, 40, 50, 60;
    const double pa = average_power(c, vary, eff);
    EXPECT_LE(pa, eff.product() * vary.maxCoeff());
    EXPECT_EQ(average_power(manual_climate({q, p}), vary, eff), pa);
    EXPECT_THROW(average_power(c, Eigen::MatrixXd::Zero(3, 3), eff), DataError);
}

TEST(AveragePower, ClimateWeightsAgreeWithNodeSum) {
    Eigen::MatrixXd p(2, 2);
    p << 0.2, 0.3, 0.4, 0.1;
    const auto c = manual_climate({p});
    const auto grid = FrequencyGrid::evenly_spaced(0.2, 3.0, 20);
    std::vector<double> pm(20);
    for (std::size_t k = 0; k < 20; ++k) pm[k] = 1000.0 / (1.0 + grid[k]);
    Eigen::MatrixXd pi(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) pi(i, j) = power_sea_state({c.hs_nodes[i], c.tp_nodes[j]}, grid, pm);
    const ClimateWeights cw(c, grid);
    EXPECT_NEAR(cw.average_power(pm), average_power(c, pi), 1e-12 * average_power(c, pi));
}

TEST(PowerPerVolume, Examples) {
    const WecGeometry g{3.0, 2.0};
    EXPECT_NEAR(power_per_volume(g.volume(), g), 1.0, 1e-15);
    EXPECT_NEAR(power_per_volume(100.0, {3.0, 4.0}), 0.5 * power_per_volume(100.0, g), 1e-15);
    EXPECT_NEAR(WecGeometry({8.83, 0.54}).volume(), 132.3, 0.05);
    EXPECT_THROW(power_per_volume(1.0, {0.0, 1.0}), DomainError);
}

TEST(EvaluatePower, PipelineConsistentAndExportable) {
    Eigen::MatrixXd p(2, 2);
    p << 0.25, 0.25, 0.25, 0.25;
    const auto c = manual_climate({p});
    const auto bp = SurrogateBundle::oracle(FrequencyGrid::evenly_spaced(0.2, 4.0, 15), kEnv);
    const FarmDesign d{{3.0, 2.0}, PtoParams::uniform(2, 1e4, 4e4), {{0, 0}, {80, 0}}};
    const auto r = evaluate_power(d, bp, c);
    EXPECT_GT(r.p_a, 0.0);
    EXPECT_NEAR(r.p_v, r.p_a / d.geometry.volume(), 1e-12 * r.p_v);
    EXPECT_NEAR(r.p_a, Efficiencies{}.product() * 0.25 * r.p_i.sum(), 1e-12 * r.p_a);
    const auto j = power_result_to_json(r);
    EXPECT_EQ(j["version"], 1);
    std::ostringstream csv;
    write_power_csv(r, c, csv);
    EXPECT_EQ(csv.str().rfind("# wavefarm-power v1\nhs,tp,p_i\n", 0), 0u);
}
