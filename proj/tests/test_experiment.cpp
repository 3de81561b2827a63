// Experiment orchestration, checkpoints and determinism on a small lake.
#include "pgnn/pgnn.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace pgnn;

namespace {

struct SmallLake {
    LakeScenario s;
    LabeledDataset data;
    UnlabeledGrid grid;

    SmallLake() {
        s.n_days = 120;
        s.start_year = 2002;
        s.max_depth = 6.0;
        s.n_obs = 600;
        data = sample_observations(s, s.n_obs);
        grid = make_grid(s);
    }
};

const SmallLake& lake() {
    static const SmallLake l;
    return l;
}

ExperimentConfig quick_config() {
    ExperimentConfig c;
    c.n_train = 300;
    c.seeds = {0, 1};
    c.train.max_epochs = 25;
    c.train.batch_size = 100;
    c.lambda_l1 = c.lambda_l2 = 0.05;
    return c;
}

} // namespace

TEST(Experiment, ConfigValidation) {
    ExperimentConfig c = quick_config();
    c.models.clear();
    EXPECT_THROW(c.validate(), ConfigError);
    c = quick_config();
    c.seeds = {1, 1};
    EXPECT_THROW(c.validate(), ConfigError);
    c = quick_config();
    c.lambda_phy = -1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(parse_experiment_model("SVM"), ConfigError);
    EXPECT_THROW(learned_kind(ExperimentModel::PHY), ConfigError);
}

TEST(Experiment, RowCountsAndOrder) {
    const auto cfg = quick_config();
    const auto res = run_experiment(lake().data, lake().grid, cfg);
    ASSERT_EQ(res.runs.size(), cfg.models.size() * cfg.seeds.size());
    EXPECT_EQ(res.aggregates.size(), cfg.models.size());
    EXPECT_EQ(res.runs[0].metrics.model, "PHY");
    EXPECT_EQ(res.runs[1].metrics.model, "NN");
    EXPECT_EQ(res.runs[4].metrics.seed, 1u);
    for (const auto& r : res.runs) {
        EXPECT_GE(r.metrics.test_rmse, 0.0);
        EXPECT_GE(r.metrics.phys_inconsistency, 0.0);
        EXPECT_LE(r.metrics.phys_inconsistency, 1.0);
        EXPECT_EQ(r.checkpoint.has_value(), r.metrics.model != "PHY");
    }
}

TEST(Experiment, PhyIgnoresSeeds) {
    ExperimentConfig cfg = quick_config();
    cfg.models = {ExperimentModel::PHY};
    cfg.seeds = {0, 5, 9};
    const auto res = run_experiment(lake().data, lake().grid, cfg);
    for (const auto& r : res.runs) {
        EXPECT_EQ(r.metrics.test_rmse, res.runs[0].metrics.test_rmse);
        EXPECT_EQ(r.metrics.phys_inconsistency, 0.0);
    }
    EXPECT_EQ(res.aggregates[0].rmse_sd, 0.0);
}

TEST(Experiment, ZeroPhysicsWeightMakesPgnnEqualPgnn0) {
    ExperimentConfig cfg = quick_config();
    cfg.models = {ExperimentModel::PGNN0, ExperimentModel::PGNN};
    cfg.lambda_phy = 0.0;
    const auto res = run_experiment(lake().data, lake().grid, cfg);
    ASSERT_EQ(res.aggregates.size(), 2u);
    EXPECT_EQ(res.aggregates[0].rmse_mean, res.aggregates[1].rmse_mean);
    EXPECT_EQ(res.aggregates[0].inconsistency_mean, res.aggregates[1].inconsistency_mean);
}

TEST(Experiment, DeterministicAcrossRunsAndThreads) {
    ExperimentConfig cfg = quick_config();
    const auto a = run_experiment(lake().data, lake().grid, cfg);
    cfg.jobs = 3;
    const auto b = run_experiment(lake().data, lake().grid, cfg);
    std::ostringstream sa, sb;
    write_metrics_csv(sa, a.metrics(), a.aggregates);
    write_metrics_csv(sb, b.metrics(), b.aggregates);
    EXPECT_EQ(sa.str(), sb.str());
    for (std::size_t i = 0; i < a.runs.size(); ++i) {
        if (a.runs[i].checkpoint) {
            EXPECT_EQ(a.runs[i].checkpoint->params, b.runs[i].checkpoint->params);
        }
    }
}

TEST(Experiment, NnNeverReadsSimulatedColumn) {
    ExperimentConfig cfg = quick_config();
    cfg.models = {ExperimentModel::NN, ExperimentModel::PGNN0};
    const auto base = run_experiment(lake().data, lake().grid, cfg);
    LabeledDataset scrambled = lake().data;
    UnlabeledGrid grid = lake().grid;
    for (std::size_t i = 0; i < scrambled.rows.size(); ++i) scrambled.rows[i].y_phy = static_cast<double>(i % 17);
    for (std::size_t i = 0; i < grid.rows.size(); ++i) grid.rows[i].y_phy = -static_cast<double>(i % 5);
    const auto other = run_experiment(scrambled, grid, cfg);
    EXPECT_EQ(base.runs[0].metrics.test_rmse, other.runs[0].metrics.test_rmse);
    EXPECT_EQ(base.runs[0].metrics.phys_inconsistency, other.runs[0].metrics.phys_inconsistency);
    EXPECT_NE(base.runs[1].metrics.test_rmse, other.runs[1].metrics.test_rmse);
}

TEST(Experiment, DefaultLambdaPhyFromTrainingTargets) {
    const auto cfg = quick_config();
    const auto p = prepare_data(lake().data, lake().grid, cfg.n_train, cfg);
    EXPECT_EQ(p.lambda_phy,
              cfg.lambda_phy_scale * default_lambda_phy(p.train.targets, LambdaPhyRule::VarianceOverDensitySd));
    ExperimentConfig unscaled = cfg;
    unscaled.lambda_phy_scale = 1.0;
    EXPECT_EQ(prepare_data(lake().data, lake().grid, cfg.n_train, unscaled).lambda_phy,
              default_lambda_phy(p.train.targets, LambdaPhyRule::VarianceOverDensitySd));
    ExperimentConfig fixed = cfg;
    fixed.lambda_phy = 12.5;
    EXPECT_EQ(prepare_data(lake().data, lake().grid, cfg.n_train, fixed).lambda_phy, 12.5);
    EXPECT_LE(p.train.size(), cfg.n_train);
    EXPECT_EQ(p.train.size() + p.test_y.size(), lake().data.size());
    EXPECT_EQ(p.grid.features.rows(), lake().grid.shape.cells());
}

TEST(Checkpoint, RoundTripReproducesPredictions) {
    ExperimentConfig cfg = quick_config();
    cfg.models = {ExperimentModel::NN, ExperimentModel::PGNN};
    cfg.seeds = {3};
    const auto res = run_experiment(lake().data, lake().grid, cfg);
    const FeatureMatrix raw = lake().grid.features();
    for (const auto& run : res.runs) {
        std::stringstream ss;
        write_checkpoint(ss, *run.checkpoint);
        const auto back = read_checkpoint(ss);
        EXPECT_EQ(back.kind, run.checkpoint->kind);
        EXPECT_EQ(back.params, run.checkpoint->params);
        EXPECT_EQ(forward_batch(back.params, back.model_input(raw)),
                  forward_batch(run.checkpoint->params, run.checkpoint->model_input(raw)));
    }
    std::stringstream bad("pgnn-checkpoint 2\n");
    EXPECT_THROW(read_checkpoint(bad), DataError);
}

TEST(Sweep, ConcatenatesSizes) {
    ExperimentConfig cfg = quick_config();
    cfg.models = {ExperimentModel::PHY, ExperimentModel::NN};
    cfg.seeds = {0};
    const auto res = run_size_sweep(lake().data, lake().grid, cfg, {150, 300});
    ASSERT_EQ(res.runs.size(), 4u);
    EXPECT_EQ(res.runs[0].metrics.n_train, 150u);
    EXPECT_EQ(res.runs[3].metrics.n_train, 300u);
    const auto single = run_experiment(lake().data, lake().grid, cfg);
    EXPECT_EQ(res.runs[2].metrics.test_rmse, single.runs[0].metrics.test_rmse);
    EXPECT_EQ(res.runs[3].metrics.test_rmse, single.runs[1].metrics.test_rmse);
    EXPECT_THROW(run_size_sweep(lake().data, lake().grid, cfg, {}), ConfigError);
}
