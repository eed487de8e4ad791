#include <cmath>

#include <gtest/gtest.h>

#include "wavefarm/neural.hpp"

using namespace wavefarm;

namespace {

MlpModel zero_model(const std::vector<std::size_t>& sizes) {
    auto m = mlp_init(sizes, 1);
    m.set_parameters(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.parameter_count())));
    return m;
}

}  // namespace

TEST(MlpInit, DeterministicAndCounted) {
    const auto a = mlp_init({3, 16, 1}, 5);
    const auto b = mlp_init({3, 16, 1}, 5);
    const auto c = mlp_init({3, 16, 1}, 6);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    EXPECT_EQ(a.parameter_count(), 81u);
    EXPECT_EQ(a.activations.front(), Activation::tanh);
    EXPECT_EQ(a.activations.back(), Activation::identity);
    EXPECT_THROW(mlp_init({3, 0, 1}, 1), DomainError);
    EXPECT_THROW(mlp_init({3, 1}, 1), DomainError);
}

TEST(MlpInit, ParameterVectorRoundTrip) {
    auto m = mlp_init({4, 7, 5, 2}, 9);
    const auto p = m.parameters();
    auto n = mlp_init({4, 7, 5, 2}, 10);
    n.set_parameters(p);
    EXPECT_TRUE(m == n);
}

TEST(MlpForward, ZeroNetworkAndDimensionCheck) {
    const auto m = zero_model({3, 8, 2});
    EXPECT_EQ(mlp_forward(m, Eigen::Vector3d(0.3, -1.0, 2.0)), Eigen::Vector2d::Zero());
    EXPECT_THROW(mlp_forward(m, Eigen::Vector2d(1.0, 2.0)), DomainError);
}

TEST(MlpForward, BatchMatchesPerSample) {
    const auto m = mlp_init({3, 10, 2}, 4);
    Rng rng(2);
    Eigen::MatrixXd x(25, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(-1, 1);
    const Eigen::MatrixXd y = mlp_forward_batch(m, x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd yi = mlp_forward(m, x.row(i).transpose());
        EXPECT_NEAR((yi - y.row(i).transpose()).norm(), 0.0, 1e-14);
    }
}

TEST(MlpTrain, FitsIdentity) {
    Eigen::MatrixXd x(101, 1), y(101, 1);
    for (int i = 0; i <= 100; ++i) x(i, 0) = y(i, 0) = -1.0 + i / 50.0;
    TrainConfig cfg;
    cfg.max_epochs = 200;
    const auto [m, rep] = mlp_train(mlp_init({1, 4, 1}, 3), x, y, cfg);
    EXPECT_LT(mse(m, x, y), 1e-4);
    EXPECT_GT(rep.best_epoch, 0u);
}

TEST(MlpTrain, LinearTargetReachesTinyTestError) {
    Eigen::MatrixXd x(200, 1), y(200, 1);
    for (int i = 0; i < 200; ++i) {
        x(i, 0) = -1.0 + 2.0 * i / 199.0;
        y(i, 0) = 2.0 * x(i, 0) + 1.0;
    }
    TrainConfig cfg;
    cfg.seed = 17;
    const auto [m, rep] = mlp_train(mlp_init({1, 8, 1}, 1), x, y, cfg);
    EXPECT_LT(rep.test_mse, 1e-5);
}

TEST(MlpTrain, PatienceZeroStopsAtFirstWorsening) {
    Rng rng(8);
    Eigen::MatrixXd x(60, 2), y(60, 1);
    for (int i = 0; i < 60; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        x(i, 1) = rng.uniform(-1, 1);
        y(i, 0) = rng.normal();  // pure noise: validation worsens quickly
    }
    TrainConfig cfg;
    cfg.patience = 0;
    cfg.max_epochs = 500;
    const auto [m, rep] = mlp_train(mlp_init({2, 20, 1}, 2), x, y, cfg);
    ASSERT_LT(rep.stop_epoch, 500u);
    EXPECT_EQ(rep.stop_reason, "validation failures exceeded patience");
    // Every epoch before the stop improved on its predecessor's best.
    for (std::size_t e = 1; e + 1 < rep.validation_mse.size(); ++e)
        EXPECT_LT(rep.validation_mse[e], rep.validation_mse[e - 1]);
    EXPECT_GE(rep.validation_mse.back(), rep.best_validation_mse);
}

TEST(MlpTrain, DeterministicAndReturnsBestValidationEpoch) {
    Eigen::MatrixXd x(80, 2), y(80, 1);
    Rng rng(4);
    for (int i = 0; i < 80; ++i) {
        x(i, 0) = rng.uniform(-1, 1);
        x(i, 1) = rng.uniform(-1, 1);
        y(i, 0) = std::sin(2 * x(i, 0)) * x(i, 1);
    }
    TrainConfig cfg;
    cfg.max_epochs = 60;
    const auto a = mlp_train(mlp_init({2, 6, 1}, 1), x, y, cfg);
    const auto b = mlp_train(mlp_init({2, 6, 1}, 1), x, y, cfg);
    EXPECT_TRUE(a.first == b.first);
    EXPECT_TRUE(a.second == b.second);
    for (double v : a.second.validation_mse) EXPECT_LE(a.second.best_validation_mse, v);
}

TEST(MlpTrain, GradientDescentLossNonIncreasing) {
    Eigen::MatrixXd x(50, 1), y(50, 1);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = -1.0 + 2.0 * i / 49.0;
        y(i, 0) = x(i, 0) * x(i, 0);
    }
    TrainConfig cfg;
    cfg.method = TrainMethod::gradient_descent;
    cfg.max_epochs = 50;
    cfg.patience = 50;
    cfg.learning_rate = 1e-3;
    const auto [m, rep] = mlp_train(mlp_init({1, 5, 1}, 2), x, y, cfg);
    ASSERT_EQ(rep.train_mse.size(), 50u);
    for (std::size_t e = 1; e < rep.train_mse.size(); ++e) EXPECT_LE(rep.train_mse[e], rep.train_mse[e - 1]);
}

TEST(MlpTrain, ErrorPaths) {
    Eigen::MatrixXd x(5, 1), y(5, 1);
    x.setZero();
    y.setZero();
    EXPECT_THROW(mlp_train(mlp_init({1, 2, 1}, 1), x, y, {}), DomainError);
    Eigen::MatrixXd xb(20, 1), yb(20, 1);
    xb.setOnes();
    yb.setConstant(1e200);
    EXPECT_THROW(mlp_train(mlp_init({1, 2, 1}, 1), xb, yb, {}), TrainingError);
    TrainConfig bad;
    bad.train_fraction = 0.9;
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = {};
    bad.patience = bad.max_epochs + 1;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(MlpTrain, SplitIsSeventyFifteenFifteen) {
    TrainConfig cfg;
    const auto s = split_indices(200, cfg);
    EXPECT_EQ(s.train.size(), 140u);
    EXPECT_EQ(s.validation.size(), 30u);
    EXPECT_EQ(s.test.size(), 30u);
}

TEST(GradientCheck, RandomNetworksAgreeWithFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto m = mlp_init({3, 7, 2}, seed);
        Rng rng(seed + 100);
        Eigen::VectorXd x(3), y(2);
        for (int i = 0; i < 3; ++i) x(i) = rng.uniform(-1, 1);
        for (int i = 0; i < 2; ++i) y(i) = rng.uniform(-1, 1);
        EXPECT_LT(gradient_check(m, x, y, 1e-6), 1e-6) << seed;
    }
}

TEST(GradientCheck, ZeroNetworkZeroTargetHasZeroGradient) {
    const auto m = zero_model({2, 3, 1});
    const Eigen::VectorXd g = sse_gradient(m, Eigen::MatrixXd::Constant(1, 2, 0.4), Eigen::MatrixXd::Zero(1, 1));
    EXPECT_EQ(g, Eigen::VectorXd::Zero(g.size()));
    EXPECT_EQ(gradient_check(m, Eigen::Vector2d(0.4, 0.4), Eigen::VectorXd::Zero(1), 1e-6), 0.0);
}

TEST(GradientCheck, TruncationErrorGrowsWithStep) {
    const auto m = mlp_init({2, 5, 1}, 3);
    const Eigen::Vector2d x(0.7, -0.4);
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.9);
    EXPECT_GT(gradient_check(m, x, y, 1e-3), gradient_check(m, x, y, 1e-5));
    EXPECT_THROW(gradient_check(m, x, y, 1e-2), DomainError);
    EXPECT_THROW(gradient_check(m, x, y, 0.0), DomainError);
}

TEST(MlpJson, RoundTripPreservesModel) {
    const auto m = mlp_init({3, 9, 2}, 12);
    const auto back = mlp_from_json(nlohmann::json::parse(mlp_to_json(m).dump()));
    EXPECT_TRUE(m == back);
    auto j = mlp_to_json(m);
    j["version"] = 2;
    EXPECT_THROW(mlp_from_json(j), DataError);
}
