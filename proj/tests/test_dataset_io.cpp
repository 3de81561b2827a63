// Scenario and experiment key=value files, dataset / grid CSV round trips.
#include "pgnn/config_io.hpp"
#include "pgnn/dataset_io.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace pgnn;

TEST(KeyValues, ParsesCommentsAndWhitespace) {
    std::istringstream in("# scenario\n\n n_days = 60 \nseed=3\nmax_depth =10\n");
    const auto kv = parse_key_values(in);
    EXPECT_EQ(kv.at("n_days"), "60");
    EXPECT_EQ(kv.at("seed"), "3");
    EXPECT_EQ(kv.at("max_depth"), "10");
    std::istringstream bad("n_days 60\n");
    EXPECT_THROW(parse_key_values(bad), ConfigError);
    std::istringstream empty_key(" = 4\n");
    EXPECT_THROW(parse_key_values(empty_key), ConfigError);
}

TEST(KeyValues, ScenarioOverridesAndErrors) {
    const auto s = scenario_from_key_values({{"n_days", "60"}, {"phy_bias", "1.25"}, {"seed", "9"}});
    EXPECT_EQ(s.n_days, 60u);
    EXPECT_EQ(s.phy_bias, 1.25);
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.max_depth, LakeScenario{}.max_depth);
    EXPECT_THROW(scenario_from_key_values({{"colour", "blue"}}), ConfigError);
    EXPECT_THROW(scenario_from_key_values({{"n_days", "ten"}}), ConfigError);
    EXPECT_THROW(scenario_from_key_values({{"n_days", "-5"}}), ConfigError);
    EXPECT_THROW(scenario_from_key_values({{"max_depth", "1e"}}), ConfigError);
    EXPECT_THROW(scenario_from_key_values({{"n_days", "10"}}), ConfigError);  // fails validation
}

TEST(KeyValues, ScenarioRoundTrip) {
    LakeScenario s;
    s.n_days = 123;
    s.surface_phase = 101.5;
    s.phy_param_perturbation = 0.1 + 0.2;  // not exactly representable in short form
    s.seed = 12345678901ull;
    std::stringstream ss;
    write_scenario(ss, s);
    const auto back = scenario_from_key_values(parse_key_values(ss));
    EXPECT_EQ(back.n_days, s.n_days);
    EXPECT_EQ(back.surface_phase, s.surface_phase);
    EXPECT_EQ(back.phy_param_perturbation, s.phy_param_perturbation);
    EXPECT_EQ(back.seed, s.seed);
}

TEST(DatasetCsv, RoundTrip) {
    LakeScenario s;
    s.n_days = 40;
    s.max_depth = 5.0;
    const auto d = sample_observations(s, 80);
    std::stringstream ss;
    write_dataset_csv(ss, d);
    const std::string text = ss.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), std::string(kDatasetHeader) + ",y_obs_c");
    const auto back = read_dataset_csv(ss);
    ASSERT_EQ(back.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_EQ(back.rows[i].day_index, d.rows[i].day_index);
        EXPECT_EQ(back.rows[i].date, d.rows[i].date);
        EXPECT_NEAR(back.rows[i].y_obs, d.rows[i].y_obs, 1e-8);
        EXPECT_NEAR(back.rows[i].drivers.gdd, d.rows[i].drivers.gdd, 1e-6);
    }
    std::stringstream again;
    write_dataset_csv(again, back);
    EXPECT_EQ(again.str(), text);
}

TEST(DatasetCsv, Errors) {
    std::istringstream empty("");
    EXPECT_THROW(read_dataset_csv(empty), DataError);
    std::istringstream header_only(std::string(kDatasetHeader) + ",y_obs_c\n");
    EXPECT_THROW(read_dataset_csv(header_only), DataError);
    std::istringstream wrong_header("a,b,c\n1,2,3\n");
    EXPECT_THROW(read_dataset_csv(wrong_header), DataError);
    std::istringstream short_row(std::string(kDatasetHeader) + ",y_obs_c\n0,2001-01-01,0.5\n");
    EXPECT_THROW(read_dataset_csv(short_row), DataError);
    std::istringstream bad_number(std::string(kDatasetHeader) +
                                  ",y_obs_c\n0,2001-01-01,x,1,1,1,1,1,1,1,1,0,0,4,4\n");
    EXPECT_THROW(read_dataset_csv(bad_number), DataError);
    EXPECT_THROW(load_dataset("/nonexistent/obs.csv"), DataError);
}

TEST(GridCsv, RoundTripPreservesShape) {
    LakeScenario s;
    s.n_days = 30;
    s.max_depth = 3.0;
    const auto g = make_grid(s);
    std::stringstream ss;
    write_grid_csv(ss, g);
    const auto back = read_grid_csv(ss);
    EXPECT_EQ(back.shape, g.shape);
    EXPECT_EQ(back.shape.n_depths, 7u);
    EXPECT_EQ(back.shape.n_times, 30u);
    EXPECT_NEAR(back.at(6, 29).y_phy, g.at(6, 29).y_phy, 1e-8);
}

TEST(GridCsv, RejectsIncompleteLattice) {
    LakeScenario s;
    s.n_days = 30;
    s.max_depth = 1.0;
    const auto g = make_grid(s);
    std::stringstream ss;
    write_grid_csv(ss, g);
    std::string text = ss.str();
    text.erase(text.rfind('\n', text.size() - 2) + 1);  // drop the final row
    std::istringstream in(text);
    EXPECT_THROW(read_grid_csv(in), DataError);
}

TEST(ExperimentKeys, DefaultsWhenEmpty) {
    const auto r = apply_key_values({}, {});
    EXPECT_EQ(r.experiment.n_train, 3000u);
    EXPECT_EQ(r.experiment.seeds.size(), 10u);
    EXPECT_EQ(r.experiment.models.size(), 4u);
    EXPECT_EQ(r.sizes, default_sweep_sizes());
    EXPECT_FALSE(r.experiment.lambda_phy.has_value());
}

TEST(ExperimentKeys, ParsesListsRangesAndFlags) {
    const KeyValues kv{{"models", "PHY, PGNN"}, {"seeds", "3..6"},       {"sizes", "100,200"},
                       {"lambda_phy", "42"},   {"phys_full_grid", "true"}, {"activation", "relu"},
                       {"batch_size", "64"},   {"lambda_phy_rule", "sd-of-squares"}};
    const auto r = apply_key_values({}, kv);
    const auto& c = r.experiment;
    ASSERT_EQ(c.models.size(), 2u);
    EXPECT_EQ(c.models[1], ExperimentModel::PGNN);
    EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4, 5, 6}));
    EXPECT_EQ(r.sizes, (std::vector<std::size_t>{100, 200}));
    EXPECT_EQ(*c.lambda_phy, 42.0);
    EXPECT_TRUE(c.train.phys_full_grid);
    EXPECT_EQ(c.train.activation, Activation::Relu);
    EXPECT_EQ(c.train.batch_size, 64u);
    EXPECT_EQ(c.lambda_phy_rule, LambdaPhyRule::SdOfSquaresOverDensitySd);
    EXPECT_FALSE(apply_key_values(r, {{"lambda_phy", "auto"}}).experiment.lambda_phy.has_value());
}

TEST(ExperimentKeys, RejectsBadInput) {
    EXPECT_THROW(apply_key_values({}, {{"colour", "blue"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"models", "PHY,RF"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"seeds", "1,1"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"seeds", "5..2"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"batch_size", "-3"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"phys_full_grid", "maybe"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"lambda_phy_scale", "-1"}}), ConfigError);
    EXPECT_THROW(apply_key_values({}, {{"adadelta_rho", "1"}}), ConfigError);
}

TEST(ExperimentKeys, ResolvedValuesRoundTrip) {
    const auto r = apply_key_values({}, {{"seeds", "0,7"}, {"lambda_l1", "0.3"}, {"tolerance", "1e-4"}});
    KeyValues kv;
    for (const auto& [k, v] : to_key_values(r)) kv[k] = v;
    const auto back = apply_key_values({}, kv);
    EXPECT_EQ(back.experiment.seeds, r.experiment.seeds);
    EXPECT_EQ(back.experiment.lambda_l1, 0.3);
    EXPECT_EQ(back.experiment.tolerance, 1e-4);
    EXPECT_EQ(to_key_values(back), to_key_values(r));
}
