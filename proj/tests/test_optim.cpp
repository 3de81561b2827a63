// Clipping, AdaDelta, batching, early stopping and the training loop.
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace pgnn;

namespace {

TrainingData linear_data(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::vector<double> w{0.8, -0.5, 0.3};
    TrainingData d;
    d.features = FeatureMatrix(n, 4);
    d.targets.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        double y = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            d.features(r, c) = g(rng);
            y += w[c] * d.features(r, c);
        }
        d.features(r, 3) = g(rng);  // stand-in for the simulated column
        d.targets[r] = y;
    }
    return d;
}

UnlabeledBatch random_grid(std::size_t nd, std::size_t nt, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    UnlabeledBatch u{FeatureMatrix(nd * nt, cols), GridShape{nd, nt, 0.5}};
    for (std::size_t r = 0; r < nd * nt; ++r) {
        for (std::size_t c = 0; c < cols; ++c) u.features(r, c) = g(rng);
    }
    return u;
}

} // namespace

TEST(Clip, Examples) {
    std::vector<double> a{0.3, 0.4};
    EXPECT_FALSE(clip_by_global_norm(a, 1.0));
    EXPECT_EQ(a, (std::vector<double>{0.3, 0.4}));
    std::vector<double> b{2.0};
    EXPECT_TRUE(clip_by_global_norm(b, 1.0));
    EXPECT_DOUBLE_EQ(b[0], 1.0);
    std::vector<double> c{3.0, 4.0};
    clip_by_global_norm(c, 1.0);
    EXPECT_DOUBLE_EQ(c[0], 0.6);
    EXPECT_DOUBLE_EQ(c[1], 0.8);
    EXPECT_THROW(clip_by_global_norm(c, 0.0), ConfigError);
}

TEST(Clip, NormNeverExceedsBound) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0.0, 5.0);
    for (int k = 0; k < 100; ++k) {
        std::vector<double> v(17);
        for (double& x : v) x = g(rng);
        clip_by_global_norm(v, 1.0);
        double sq = 0.0;
        for (double x : v) sq += x * x;
        EXPECT_LE(std::sqrt(sq), 1.0 + 1e-12);
    }
}

TEST(AdaDelta, FirstStepFromFreshState) {
    std::vector<double> x{0.0};
    AdaDeltaState s(1, 0.95, 1e-6);
    adadelta_step(x, std::vector<double>{1.0}, s);
    // sqrt(eps) / sqrt((1 - rho) g^2 + eps)
    EXPECT_NEAR(x[0], -std::sqrt(1e-6) / std::sqrt(0.05 + 1e-6), 1e-15);
    EXPECT_NEAR(x[0], -0.0044721, 1e-7);
    EXPECT_NEAR(s.accum_grad_sq[0], 0.05, 1e-15);
    EXPECT_NEAR(s.accum_update_sq[0], 0.05 * x[0] * x[0], 1e-18);
}

TEST(AdaDelta, ZeroGradientLeavesParamsAndDecaysAccumulators) {
    std::vector<double> x{1.0, -2.0};
    AdaDeltaState s(2);
    adadelta_step(x, std::vector<double>{0.5, -0.25}, s);
    const std::vector<double> after_one = x;
    const auto eg = s.accum_grad_sq;
    adadelta_step(x, std::vector<double>{0.0, 0.0}, s);
    EXPECT_EQ(x, after_one);
    EXPECT_DOUBLE_EQ(s.accum_grad_sq[0], 0.95 * eg[0]);
    adadelta_step(x, std::vector<double>{0.0, 0.0}, s);
    EXPECT_EQ(x, after_one);
}

TEST(AdaDelta, ShapeAndConfigErrors) {
    std::vector<double> x{0.0, 0.0};
    AdaDeltaState s(1);
    EXPECT_THROW(adadelta_step(x, std::vector<double>{1.0, 1.0}, s), ShapeError);
    EXPECT_THROW(AdaDeltaState(1, 1.0, 1e-6), ConfigError);
    EXPECT_THROW(AdaDeltaState(1, 0.9, 0.0), ConfigError);
}

TEST(Batches, SizesAndPartition) {
    std::mt19937_64 rng(3);
    auto b = make_batches(5, 2, rng);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0].size(), 2u);
    EXPECT_EQ(b[1].size(), 2u);
    EXPECT_EQ(b[2].size(), 1u);
    EXPECT_EQ(make_batches(4, 4, rng).size(), 1u);
    auto big = make_batches(1003, 100, rng);
    std::set<std::size_t> seen;
    for (const auto& v : big) seen.insert(v.begin(), v.end());
    EXPECT_EQ(seen.size(), 1003u);
    EXPECT_EQ(*seen.rbegin(), 1002u);
    EXPECT_THROW(make_batches(0, 3, rng), ConfigError);
}

TEST(Batches, DeterministicForSeed) {
    std::mt19937_64 a(77), b(77);
    EXPECT_EQ(make_batches(50, 7, a), make_batches(50, 7, b));
}

TEST(EarlyStoppingRule, PatienceOne) {
    EarlyStopping es(1, 1e-9);
    EXPECT_TRUE(es.observe(1, 5.0));
    EXPECT_FALSE(es.should_stop());
    EXPECT_FALSE(es.observe(2, 6.0));
    EXPECT_TRUE(es.should_stop());
    EXPECT_EQ(es.best_epoch(), 1u);
}

TEST(EarlyStoppingRule, ImprovementThreshold) {
    EarlyStopping es(3, 1e-9);
    es.observe(1, 1.0);
    EXPECT_FALSE(es.observe(2, 1.0 - 1e-12));  // below threshold
    EXPECT_TRUE(es.observe(3, 0.5));
    EXPECT_EQ(es.best_epoch(), 3u);
}

TEST(Fit, StopsWithinPatienceOnNonImprovingRun) {
    // zero features: the net can only learn a constant, pulled towards +10
    // while validation sits at -10, so validation MSE only grows
    const std::size_t patience = 7;
    TrainingData tr{FeatureMatrix(50, 3), std::vector<double>(50, 10.0)};
    TrainingData val{FeatureMatrix(10, 3), std::vector<double>(10, -10.0)};
    TrainConfig cfg;
    cfg.patience = patience;
    cfg.batch_size = 16;
    const auto res = fit(ModelKind::PGNN0, tr, val, {}, cfg, {0, 0, 0});
    EXPECT_EQ(res.log.best_epoch, 1u);
    EXPECT_LE(res.log.epochs.size(), res.log.best_epoch + patience + 1);
    EXPECT_EQ(res.log.epochs.size(), res.log.best_epoch + patience);
    for (std::size_t e = 1; e < res.log.epochs.size(); ++e) {
        EXPECT_GT(res.log.epochs[e].val_mse, res.log.epochs[0].val_mse);
    }
    // returned parameters reproduce the best validation score
    const double val_mse = mse(forward_batch(res.params, val.features), val.targets);
    EXPECT_EQ(val_mse, res.log.best_val_mse);
}

TEST(Train, ConvergesOnNoiselessLinearTarget) {
    const auto data = linear_data(400, 5);
    TrainConfig cfg;
    cfg.batch_size = 50;
    cfg.max_epochs = 1500;
    cfg.patience = 200;
    cfg.hidden_layers = 1;
    cfg.hidden_width = 4;
    cfg.seed = 3;
    const auto res = train(ModelKind::PGNN0, data, {}, cfg, {0, 0, 0});
    const double train_mse = mse(forward_batch(res.params, data.features), data.targets);
    EXPECT_LT(train_mse, 1e-2);
}

TEST(Train, DeterministicForSeed) {
    const auto data = linear_data(300, 8);
    const auto grid = random_grid(6, 30, 4, 2);
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.max_epochs = 40;
    cfg.seed = 9;
    const LossWeights w{0.01, 0.01, 3.0};
    const auto a = train(ModelKind::PGNN, data, grid, cfg, w);
    const auto b = train(ModelKind::PGNN, data, grid, cfg, w);
    EXPECT_EQ(a.params, b.params);
    ASSERT_EQ(a.log.epochs.size(), b.log.epochs.size());
    for (std::size_t e = 0; e < a.log.epochs.size(); ++e) {
        EXPECT_EQ(a.log.epochs[e].train.total, b.log.epochs[e].train.total);
        EXPECT_EQ(a.log.epochs[e].val_mse, b.log.epochs[e].val_mse);
    }
    cfg.seed = 10;
    EXPECT_NE(train(ModelKind::PGNN, data, grid, cfg, w).params, a.params);
}

TEST(Train, ZeroPhysicsWeightMatchesPgnn0Bitwise) {
    const auto data = linear_data(200, 4);
    const auto grid = random_grid(5, 20, 4, 6);
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.max_epochs = 30;
    cfg.seed = 1;
    const auto pgnn = train(ModelKind::PGNN, data, grid, cfg, {0.05, 0.05, 0.0});
    const auto pgnn0 = train(ModelKind::PGNN0, data, {}, cfg, {0.05, 0.05, 7.0});
    EXPECT_EQ(pgnn.params, pgnn0.params);
    ASSERT_EQ(pgnn.log.epochs.size(), pgnn0.log.epochs.size());
    for (std::size_t e = 0; e < pgnn.log.epochs.size(); ++e) {
        EXPECT_EQ(pgnn.log.epochs[e].val_mse, pgnn0.log.epochs[e].val_mse);
    }
    EXPECT_EQ(pgnn0.log.lambda_phy, 0.0);
}

TEST(Train, NnIgnoresSimulatedColumn) {
    auto data = linear_data(200, 4);
    TrainConfig cfg;
    cfg.batch_size = 32;
    cfg.max_epochs = 20;
    const auto a = train(ModelKind::NN, data, {}, cfg, {0.05, 0.05, 0});
    for (std::size_t r = 0; r < data.size(); ++r) data.features(r, 3) = 1e6 * static_cast<double>(r);
    const auto b = train(ModelKind::NN, data, {}, cfg, {0.05, 0.05, 0});
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.params.input_dim(), 3u);
}

TEST(Train, EveryEpochVisitsEveryTrainingRowOnce) {
    // batch partition is checked directly; the loop uses one partition per epoch
    std::mt19937_64 rng(12);
    for (int e = 0; e < 5; ++e) {
        auto b = make_batches(97, 10, rng);
        std::vector<int> hits(97, 0);
        for (const auto& v : b) {
            for (auto i : v) ++hits[i];
        }
        for (int h : hits) EXPECT_EQ(h, 1);
    }
}

TEST(Train, ConfigErrors) {
    const auto data = linear_data(20, 1);
    TrainConfig cfg;
    cfg.batch_size = 0;
    EXPECT_THROW(train(ModelKind::NN, data, {}, cfg, {}), ConfigError);
    cfg = TrainConfig{};
    cfg.val_fraction = 1.0;
    EXPECT_THROW(train(ModelKind::NN, data, {}, cfg, {}), ConfigError);
    cfg = TrainConfig{};
    EXPECT_THROW(train(ModelKind::PGNN, data, {}, cfg, {}), ConfigError);
    EXPECT_THROW(train(ModelKind::NN, TrainingData{}, {}, cfg, {}), ConfigError);
    EXPECT_THROW(train(ModelKind::NN, data, {}, cfg, {-1.0, 0, 0}), ConfigError);
}

TEST(Train, ValidationSplitIsSeededAndDisjoint) {
    const auto data = linear_data(100, 2);
    auto [tr, val] = split_validation(data, 0.1, 5);
    EXPECT_EQ(val.size(), 10u);
    EXPECT_EQ(tr.size(), 90u);
    auto [tr2, val2] = split_validation(data, 0.1, 5);
    EXPECT_EQ(val.targets, val2.targets);
    std::set<double> all(tr.targets.begin(), tr.targets.end());
    for (double y : val.targets) EXPECT_EQ(all.count(y), 0u);
}

TEST(Train, LargePhysicsWeightReducesViolations) {
    // Labels warm with depth above 4 C, so an unconstrained fit is inverted.
    const std::size_t nd = 6, nt = 20;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x, y;
    for (int r = 0; r < 300; ++r) {
        const double d = u(rng);
        x.push_back(d);
        x.push_back(u(rng));
        y.push_back(10.0 + 3.0 * d);
    }
    TrainingData td{FeatureMatrix(300, 2, x), y};
    std::vector<double> g;
    for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t i = 0; i < nd; ++i) {
            g.push_back(static_cast<double>(i) / static_cast<double>(nd - 1));
            g.push_back(static_cast<double>(t) / static_cast<double>(nt));
        }
    }
    const GridShape shape{nd, nt, 1.0};
    UnlabeledBatch ub{FeatureMatrix(nd * nt, 2, g), shape};
    TrainConfig cfg;
    cfg.batch_size = 50;
    cfg.max_epochs = 150;
    cfg.patience = 150;
    cfg.phys_full_grid = true;
    const auto free_run = train(ModelKind::PGNN, td, ub, cfg, {0.0, 0.0, 0.0});
    const auto phys_run = train(ModelKind::PGNN, td, ub, cfg, {0.0, 0.0, 1e5});
    const auto loss = [&](const MlpParams& p) {
        return physics_loss(TemperatureGrid(shape, forward_batch(p, ub.features)));
    };
    EXPECT_GT(loss(free_run.params), 1e-3);
    EXPECT_LT(loss(phys_run.params), 0.1 * loss(free_run.params));
}
