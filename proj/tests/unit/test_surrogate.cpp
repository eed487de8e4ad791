#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "wavefarm/surrogate.hpp"

using namespace wavefarm;

namespace {

const Environment kEnv{};

const FrequencyGrid& small_grid() {
    static const auto g = FrequencyGrid::evenly_spaced(0.1, 7.0, 12);
    return g;
}

/// Small but genuinely trained bundle shared by the tests below.
DataGenOptions small_options() {
    DataGenOptions o;
    o.n_s1 = 36;
    o.n_s2 = 60;
    o.seed = 4;
    return o;
}

const SurrogateBundle& trained() {
    static const SurrogateBundle b = [] {
        const auto [one, two] = generate_training_data(small_options(), small_grid(), kEnv);
        BundleTrainConfig cfg;
        cfg.hidden_one_body = 12;
        cfg.hidden_two_body = 12;
        cfg.hidden_aux = 4;
        cfg.shape.max_epochs = 80;
        cfg.aux.max_epochs = 80;
        return train_bundle(one, two, cfg, kEnv);
    }();
    return b;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(Normalize, DefinitionsAndRoundTrip) {
    const ReferenceMaxima m;
    const auto n = normalize_inputs(m, 20.0, 5.0, 3.5);
    EXPECT_DOUBLE_EQ(n.radius, 1.0);
    EXPECT_DOUBLE_EQ(n.draft, 0.25);
    EXPECT_DOUBLE_EQ(n.omega, 0.5);
    const auto p = normalize_inputs(m, {{4.0, 2.0}, 500.0, kPi / 2}, 1.0);
    const auto back = denormalize_inputs(m, p);
    EXPECT_NEAR(back.distance, 500.0, 1e-12 * 500.0);
    EXPECT_NEAR(back.theta, kPi / 2, 1e-15);
    EXPECT_NEAR(back.radius, 4.0, 1e-15);

    const WecGeometry g{3.0, 2.0};
    const double w = 1.7;
    const double a = 12345.678;
    EXPECT_NEAR(denormalize_output(Quantity::added_mass, normalize_output(Quantity::added_mass, a, g, w, kEnv), g, w,
                                   kEnv),
                a, 1e-12 * a);
    const double bscale = w * kEnv.rho * kPi * 9.0 * 2.0;
    EXPECT_NEAR(normalize_output(Quantity::damping, bscale, g, w, kEnv), 1.0, 1e-15);
    const double fscale = kEnv.rho * kEnv.g * kPi * 9.0 * 2.0;
    EXPECT_NEAR(normalize_output(Quantity::excitation, fscale, g, w, kEnv), 1.0, 1e-15);
}

TEST(Normalize, StrictRejectsPermissiveClamps) {
    const ReferenceMaxima m;
    EXPECT_THROW(normalize_inputs(m, 21.0, 5.0, 1.0), DomainError);
    EXPECT_THROW(normalize_inputs(m, 2.0, 5.0, 8.0), DomainError);
    EXPECT_THROW(normalize_inputs(m, {{2.0, 1.0}, 1200.0, 0.1}, 1.0), DomainError);
    const auto n = normalize_inputs(m, {{2.0, 1.0}, 1200.0, 0.1}, 1.0, NormalizeMode::permissive);
    EXPECT_TRUE(n.clamped);
    EXPECT_DOUBLE_EQ(n.distance, 1.0);
    EXPECT_FALSE(normalize_inputs(m, 2.0, 1.0, 1.0).clamped);
}

TEST(CleanSpikes, SmoothSeriesUnchanged) {
    std::vector<double> s;
    for (int i = 0; i < 30; ++i) s.push_back(std::log(1.0 + i));
    EXPECT_EQ(clean_spikes(s), s);
}

TEST(CleanSpikes, OracleProfilesUnchanged) {
    const auto grid = FrequencyGrid::evenly_spaced(0.1, 7.0, 50);
    for (const WecGeometry g : {WecGeometry{8.0, 4.0}, WecGeometry{0.5, 0.5}, WecGeometry{20.0, 2.0}}) {
        const auto rec = oracle_record(BodyKind::one, g, 0.0, 0.0, grid, kEnv);
        for (const auto& profile : rec.values) EXPECT_EQ(clean_spikes(profile), profile);
    }
}

TEST(CleanSpikes, InteriorSpikeReplacedByNeighbourMean) {
    std::vector<double> s;
    for (int i = 0; i < 20; ++i) s.push_back(1.0 + 0.1 * i);
    s[7] *= 100.0;
    const auto c = clean_spikes(s);
    EXPECT_DOUBLE_EQ(c[7], 0.5 * (s[6] + s[8]));
    for (int i = 0; i < 20; ++i) {
        if (i == 7) continue;
        EXPECT_EQ(c[i], s[i]);
    }
}

TEST(CleanSpikes, ConstantWithSpikeAndEndpoints) {
    std::vector<double> s(15, 2.5);
    s[4] = 250.0;
    const auto c = clean_spikes(s);
    for (double x : c) EXPECT_EQ(x, 2.5);
    std::vector<double> e(10, 1.0);
    e[0] = 50.0;
    e[9] = -40.0;
    const auto ce = clean_spikes(e);
    EXPECT_EQ(ce[0], 1.0);
    EXPECT_EQ(ce[9], 1.0);
    EXPECT_THROW(clean_spikes(std::vector<double>{1.0, 2.0}), DomainError);
}

TEST(ProfileScale, MapsOntoUnitInterval) {
    const std::vector<double> p{0.0, 0.5, 2.0, 1.0};
    const auto s = fit_profile_scale(p);
    EXPECT_DOUBLE_EQ(s.range, 1.0);
    EXPECT_DOUBLE_EQ(s.offset, 1.0);
    EXPECT_DOUBLE_EQ(s.to_unit(0.0), -1.0);
    EXPECT_DOUBLE_EQ(s.to_unit(2.0), 1.0);
    const std::vector<double> c(6, 3.25);
    const auto sc = fit_profile_scale(c);
    EXPECT_TRUE(sc.constant);
    EXPECT_GT(sc.range, 0.0);
    EXPECT_EQ(sc.from_unit(sc.to_unit(3.25)), 3.25);
}

TEST(FitScaling, AuxiliaryNetworksGeneralizeOnSmoothTargets) {
    DataGenOptions o;
    o.n_s1 = 100;
    const auto grid = FrequencyGrid::evenly_spaced(0.1, 7.0, 15);
    const auto ds = generate_training_data(o, grid, kEnv).first;
    const ReferenceMaxima m;
    for (std::size_t target : {0u, 2u}) {  // a, fe_re
        std::vector<std::vector<double>> profiles;
        Eigen::MatrixXd design(static_cast<Eigen::Index>(ds.records.size()), 2);
        for (std::size_t r = 0; r < ds.records.size(); ++r) {
            const auto& rec = ds.records[r];
            design(static_cast<Eigen::Index>(r), 0) = rec.radius / m.radius;
            design(static_cast<Eigen::Index>(r), 1) = rec.draft / m.draft;
            std::vector<double> p(grid.size());
            for (std::size_t w = 0; w < grid.size(); ++w)
                p[w] = normalize_output(target == 0 ? Quantity::added_mass : Quantity::excitation,
                                        rec.values[target][w], {rec.radius, rec.draft}, grid[w], kEnv);
            profiles.push_back(p);
        }
        TrainConfig cfg;
        cfg.seed = 3;
        const auto fit = fit_scaling(profiles, design, 6, cfg);
        EXPECT_EQ(fit.record_scales.size(), ds.records.size());
        EXPECT_LT(fit.report.range_rel_error, 0.10) << target;
        EXPECT_LT(fit.report.offset_rel_error, 0.10) << target;
    }
}

TEST(Bundle, ModelCountAndJsonRoundTrip) {
    const auto& b = trained();
    EXPECT_EQ(b.model_count(), 30u);
    const auto path = std::filesystem::temp_directory_path() / "wavefarm_bundle_test.json";
    save_bundle(b, path.string());
    const auto back = load_bundle(path.string());
    EXPECT_EQ(back.model_count(), 30u);
    const PairConfig pair{{3.0, 2.0}, 150.0, 0.7};
    for (double w : {0.4, 1.0, 3.3}) {
        const auto a = predict_2body(b, pair, w);
        const auto c = predict_2body(back, pair, w);
        EXPECT_EQ(a.a11, c.a11);
        EXPECT_EQ(a.a12, c.a12);
        EXPECT_EQ(a.fe1, c.fe1);
        const auto s = predict_1body(b, pair.geometry, w);
        const auto t = predict_1body(back, pair.geometry, w);
        EXPECT_EQ(s.added_mass, t.added_mass);
        EXPECT_EQ(s.excitation, t.excitation);
    }
    auto j = bundle_to_json(b);
    j["version"] = 7;
    EXPECT_THROW(bundle_from_json(j), DataError);
}

TEST(Bundle, HeldInPredictionOfSmoothOneBodyTargets) {
    const auto& b = trained();
    // (R, D) on the training grid.
    const auto rec = generate_training_data(small_options(), small_grid(), kEnv).first.records[5];
    const WecGeometry g{rec.radius, rec.draft};
    for (std::size_t w = 2; w < small_grid().size(); w += 3) {
        const auto p = predict_1body(b, g, small_grid()[w]);
        EXPECT_LT(rel(p.added_mass, rec.values[0][w]), 0.05) << w;
    }
}

TEST(Bundle, RadiationSymmetricInAngle) {
    const auto& b = trained();
    const WecGeometry g{3.0, 2.0};
    for (double th : {0.0, 0.3, 1.2}) {
        const auto p = predict_2body(b, {g, 200.0, th}, 1.4);
        const auto q = predict_2body(b, {g, 200.0, kPi - th}, 1.4);
        EXPECT_NEAR(p.a11, q.a11, 1e-12 * std::abs(p.a11));
        EXPECT_NEAR(p.a12, q.a12, 1e-12 * std::abs(p.a11));
        EXPECT_NEAR(p.b11, q.b11, 1e-12 * std::abs(p.b11));
        EXPECT_NEAR(p.b12, q.b12, 1e-12 * std::abs(p.b11));
    }
}

TEST(Bundle, OutOfRangeQueriesRejected) {
    const auto& b = trained();
    EXPECT_THROW(predict_1body(b, {25.0, 2.0}, 1.0), DomainError);
    EXPECT_THROW(predict_1body(b, {2.0, 2.0}, 9.0), DomainError);
    EXPECT_THROW(predict_2body(b, {{2.0, 2.0}, 2000.0, 0.1}, 1.0), DomainError);
}

TEST(Bundle, TrainingRejectsMismatchedDatasets) {
    DataGenOptions o;
    o.n_s1 = 16;
    o.n_s2 = 16;
    const auto a = generate_training_data(o, FrequencyGrid::evenly_spaced(0.1, 7.0, 5), kEnv);
    const auto b = generate_training_data(o, FrequencyGrid::evenly_spaced(0.1, 7.0, 6), kEnv);
    EXPECT_THROW(train_bundle(a.first, b.second, {}, kEnv), DataError);
    EXPECT_THROW(train_bundle(a.second, a.first, {}, kEnv), DataError);
}

TEST(AdditiveEffects, DefinitionsAndDecoupling) {
    const auto bp = SurrogateBundle::oracle(small_grid(), kEnv);
    const WecGeometry g{2.0, 1.5};
    const double w = 1.2;
    const PairConfig pair{g, 100.0, 0.5};
    const auto e = additive_effects(bp, pair, w, 0.0);
    const double s_a = output_scale(Quantity::added_mass, g, w, kEnv);
    const double s_b = output_scale(Quantity::damping, g, w, kEnv);
    const double s_f = output_scale(Quantity::excitation, g, w, kEnv);
    const auto one = single_body(g, w, kEnv);
    const auto two = pair_body(pair, w, kEnv);
    EXPECT_NEAR(e.d_a12, two.a12 / s_a, 1e-15);
    EXPECT_NEAR(e.d_a11, two.a11 / s_a - one.added_mass / s_a, 1e-15);
    EXPECT_NEAR(e.d_b12, two.b12 / s_b, 1e-15);
    EXPECT_NEAR(std::abs(e.d_fe11 - (one.excitation - two.fe1) / s_f), 0.0, 1e-15);
    const double k = solve_dispersion(w, kEnv.depth, kEnv.g);
    const auto shifted = additive_effects(bp, pair, w, 30.0);
    EXPECT_NEAR(std::abs(shifted.d_fe11 - e.d_fe11 * std::exp(cplx(0.0, k * 30.0))), 0.0, 1e-15);

}

TEST(Assembly, SingleBodyMatchesOneBodyPrediction) {
    const auto& b = trained();
    const WecGeometry g{3.0, 2.0};
    const auto m = assemble_farm(b, g, {{0.0, 0.0}});
    for (std::size_t k = 0; k < m.size(); ++k) {
        const auto p = predict_1body(b, g, m.omegas[k]);
        EXPECT_NEAR(m.added_mass[k](0, 0), p.added_mass, 1e-12 * std::abs(p.added_mass));
        EXPECT_NEAR(m.damping[k](0, 0), p.damping, 1e-12 * std::abs(p.damping));
        EXPECT_NEAR(std::abs(m.excitation[k](0) - p.excitation), 0.0, 1e-12 * std::abs(p.excitation));
    }
    // Translation changes only the incident-wave phase.
    const auto t = assemble_farm(b, g, {{40.0, -25.0}});
    for (std::size_t k = 0; k < m.size(); ++k) {
        EXPECT_EQ(t.added_mass[k](0, 0), m.added_mass[k](0, 0));
        EXPECT_NEAR(std::abs(t.excitation[k](0)), std::abs(m.excitation[k](0)), 1e-12 * std::abs(m.excitation[k](0)));
    }
}

TEST(Assembly, TwoBodiesReproducePairPrediction) {
    for (const auto* b : {&trained()}) {
        const WecGeometry g{3.0, 2.0};
        const std::vector<Eigen::Vector2d> pos{{0.0, 0.0}, {90.0, 60.0}};
        const auto m = assemble_farm(*b, g, pos);
        const auto rel12 = relative_placement(pos[0], pos[1]);
        const auto rel21 = relative_placement(pos[1], pos[0]);
        for (std::size_t k = 0; k < m.size(); ++k) {
            const double w = m.omegas[k];
            const double kw = solve_dispersion(w, kEnv.depth, kEnv.g);
            const auto p = predict_2body(*b, {g, rel12.distance, rel12.theta}, w);
            const auto q = predict_2body(*b, {g, rel21.distance, rel21.theta}, w);
            const double tol_a = 1e-13 * std::abs(p.a11), tol_b = 1e-13 * std::abs(p.b11);
            EXPECT_NEAR(m.added_mass[k](0, 0), p.a11, tol_a);
            EXPECT_NEAR(m.added_mass[k](1, 1), q.a11, tol_a);
            EXPECT_NEAR(m.added_mass[k](0, 1), p.a12, tol_a);
            EXPECT_NEAR(m.added_mass[k](1, 0), q.a12, tol_a);
            EXPECT_NEAR(m.damping[k](0, 0), p.b11, tol_b);
            EXPECT_NEAR(m.damping[k](0, 1), p.b12, tol_b);
            const double tol_f = 1e-13 * std::abs(p.fe1);
            EXPECT_NEAR(std::abs(m.excitation[k](0) - p.fe1), 0.0, tol_f);
            EXPECT_NEAR(std::abs(m.excitation[k](1) - q.fe1 * std::exp(cplx(0.0, -kw * pos[1].x()))), 0.0, tol_f);
        }
    }
}

TEST(Assembly, BypassMatchesDirectOracleConstruction) {
    const auto bp = SurrogateBundle::oracle(small_grid(), kEnv);
    const WecGeometry g{2.0, 1.0};
    const std::vector<std::vector<Eigen::Vector2d>> layouts{
        {{0, 0}, {40, 10}, {-30, 45}},
        {{0, 0}, {40, 10}, {-30, 45}, {80, -60}, {-70, -50}}};
    for (const auto& pos : layouts) {
        const auto m = assemble_farm(bp, g, pos);
        for (std::size_t k = 0; k < m.size(); ++k) {
            const auto d = oracle_farm(g, pos, m.omegas[k], kEnv);
            EXPECT_LE((m.added_mass[k] - d.added_mass).norm(), 1e-13 * d.added_mass.norm());
            EXPECT_LE((m.damping[k] - d.damping).norm(), 1e-13 * d.damping.norm());
            EXPECT_LE((m.excitation[k] - d.excitation).norm(), 1e-13 * d.excitation.norm());
            EXPECT_EQ(m.added_mass[k], m.added_mass[k].transpose());
            EXPECT_EQ(m.damping[k], m.damping[k].transpose());
        }
    }
}

TEST(Assembly, RejectsUnsafeLayoutInStrictMode) {
    const auto bp = SurrogateBundle::oracle(small_grid(), kEnv);
    EXPECT_THROW(assemble_farm(bp, {5.0, 2.0}, {{0, 0}, {50, 0}}), DomainError);
    EXPECT_NO_THROW(assemble_farm(bp, {5.0, 2.0}, {{0, 0}, {60, 0}}));
}
