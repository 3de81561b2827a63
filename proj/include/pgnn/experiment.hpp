/**
 * @file experiment.hpp
 * @brief Multi-seed comparison of the simulated-temperature baseline and the
 *        three learned models, training-size sweeps, and model checkpoints.
 *
 * For each n_train the labeled data is split once (center window), features
 * are standardized with training statistics, and every (model, seed) pair is
 * trained and scored independently. Runs never share mutable state, so they
 * may execute on worker threads; results are collected in a fixed order.
 */

#pragma once

#include "pgnn/error.hpp"
#include "pgnn/eval.hpp"
#include "pgnn/lakegen.hpp"
#include "pgnn/net.hpp"
#include "pgnn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

namespace pgnn {

/// Models an experiment can compare. PHY is the simulated temperature itself.
enum class ExperimentModel { PHY, NN, PGNN0, PGNN };

inline std::string to_string(ExperimentModel m) {
    switch (m) {
    case ExperimentModel::PHY: return "PHY";
    case ExperimentModel::NN: return "NN";
    case ExperimentModel::PGNN0: return "PGNN0";
    case ExperimentModel::PGNN: return "PGNN";
    }
    return "?";
}

inline ExperimentModel parse_experiment_model(const std::string& s) {
    if (s == "PHY") return ExperimentModel::PHY;
    if (s == "NN") return ExperimentModel::NN;
    if (s == "PGNN0") return ExperimentModel::PGNN0;
    if (s == "PGNN") return ExperimentModel::PGNN;
    throw ConfigError("unknown model '" + s + "' (expected PHY, NN, PGNN0 or PGNN)");
}

inline ModelKind learned_kind(ExperimentModel m) {
    switch (m) {
    case ExperimentModel::NN: return ModelKind::NN;
    case ExperimentModel::PGNN0: return ModelKind::PGNN0;
    case ExperimentModel::PGNN: return ModelKind::PGNN;
    case ExperimentModel::PHY: break;
    }
    throw ConfigError("PHY is not a trainable model");
}

struct ExperimentConfig {
    std::vector<ExperimentModel> models{ExperimentModel::PHY, ExperimentModel::NN, ExperimentModel::PGNN0,
                                        ExperimentModel::PGNN};
    std::size_t n_train = 3000;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    TrainConfig train;
    double lambda_l1 = 0.05;
    double lambda_l2 = 0.05;
    std::optional<double> lambda_phy;   ///< unset: derived from training targets
    double lambda_phy_scale = 1000.0;   ///< multiplies the derived value only
    LambdaPhyRule lambda_phy_rule = LambdaPhyRule::VarianceOverDensitySd;
    double tolerance = kDefaultInconsistencyTolerance;
    std::size_t jobs = 1;

    void validate() const {
        if (models.empty()) throw ConfigError("experiment: at least one model required");
        if (seeds.empty()) throw ConfigError("experiment: at least one seed required");
        if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
            throw ConfigError("experiment: seeds must be distinct");
        }
        if (n_train == 0) throw ConfigError("experiment: n_train must be >= 1");
        if (lambda_phy && (!(*lambda_phy >= 0.0) || !std::isfinite(*lambda_phy))) {
            throw ConfigError("experiment: lambda_phy must be finite and >= 0");
        }
        if (!(lambda_phy_scale >= 0.0) || !std::isfinite(lambda_phy_scale)) {
            throw ConfigError("experiment: lambda_phy_scale must be finite and >= 0");
        }
        if (jobs == 0) throw ConfigError("experiment: jobs must be >= 1");
        train.validate();
    }
};

/// Split and standardized inputs shared by all runs of one training size.
struct PreparedData {
    LabeledDataset train_rows;
    LabeledDataset test_rows;
    Standardizer stats;
    TrainingData train;       ///< standardized features + observed temperatures
    FeatureMatrix test_x;
    std::vector<double> test_y;
    UnlabeledBatch grid;      ///< standardized features for every grid cell
    TemperatureGrid grid_phy; ///< simulated temperatures on the grid
    double lambda_phy = 0.0;
};

inline PreparedData prepare_data(const LabeledDataset& data, const UnlabeledGrid& grid, std::size_t n_train,
                                 const ExperimentConfig& cfg) {
    PreparedData p;
    auto [train_rows, test_rows] = center_window_split(data, n_train);
    p.train_rows = std::move(train_rows);
    p.test_rows = std::move(test_rows);
    auto [stats, mats] = standardize(p.train_rows.features(), {p.test_rows.features(), grid.features()});
    p.stats = std::move(stats);
    p.train.features = std::move(mats[0]);
    p.train.targets = p.train_rows.targets();
    p.test_x = std::move(mats[1]);
    p.test_y = p.test_rows.targets();
    p.grid.features = std::move(mats[2]);
    p.grid.shape = grid.shape;
    p.grid_phy = grid.simulated();
    p.lambda_phy = cfg.lambda_phy ? *cfg.lambda_phy
                                  : cfg.lambda_phy_scale * default_lambda_phy(p.train.targets, cfg.lambda_phy_rule);
    return p;
}

/// A trained model together with the feature statistics it expects.
struct ModelCheckpoint {
    ModelKind kind = ModelKind::PGNN;
    Standardizer stats;
    MlpParams params;

    /// Model-ready features for raw rows (standardized, columns selected).
    FeatureMatrix model_input(const FeatureMatrix& raw) const {
        return detail::model_features(kind, stats.apply(raw));
    }
};

inline void write_checkpoint(std::ostream& os, const ModelCheckpoint& c) {
    os << "pgnn-checkpoint 1\n";
    os << "model " << to_string(c.kind) << '\n';
    char buf[32];
    os << "feature_means " << c.stats.means.size();
    for (double v : c.stats.means) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ' ' << buf;
    }
    os << "\nfeature_sds " << c.stats.sds.size();
    for (double v : c.stats.sds) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        os << ' ' << buf;
    }
    os << '\n';
    write_params(os, c.params);
}

inline ModelCheckpoint read_checkpoint(std::istream& is) {
    std::string tok;
    int version = 0;
    if (!(is >> tok >> version) || tok != "pgnn-checkpoint" || version != 1) {
        throw DataError("not a version-1 pgnn checkpoint");
    }
    ModelCheckpoint c;
    if (!(is >> tok) || tok != "model") throw DataError("checkpoint: missing model line");
    is >> tok;
    try {
        c.kind = parse_model_kind(tok);
    } catch (const ConfigError& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    auto read_vec = [&](const char* name) {
        std::string t;
        std::size_t n = 0;
        if (!(is >> t >> n) || t != name || n > 4096) throw DataError(std::string("checkpoint: missing ") + name);
        std::vector<double> v(n);
        for (double& x : v) {
            if (!(is >> t)) throw DataError("checkpoint: truncated statistics");
            x = std::stod(t);
        }
        return v;
    };
    c.stats.means = read_vec("feature_means");
    c.stats.sds = read_vec("feature_sds");
    if (c.stats.means.size() != c.stats.sds.size()) throw DataError("checkpoint: statistics size mismatch");
    c.params = read_params(is);
    const std::size_t expected_inputs = uses_simulated_feature(c.kind) ? c.stats.means.size() : c.stats.means.size() - 1;
    if (c.params.input_dim() != expected_inputs) throw DataError("checkpoint: network input does not match statistics");
    return c;
}

struct RunOutput {
    RunMetrics metrics;
    std::optional<ModelCheckpoint> checkpoint; ///< absent for PHY
    TrainLog log;
};

/// Trains (unless PHY) and scores one model for one seed.
inline RunOutput run_model(ExperimentModel model, const PreparedData& data, const ExperimentConfig& cfg,
                           std::uint64_t seed) {
    RunOutput out;
    out.metrics.model = to_string(model);
    out.metrics.n_train = cfg.n_train;
    out.metrics.seed = seed;
    out.metrics.n_test = data.test_y.size();
    if (model == ExperimentModel::PHY) {
        out.metrics.test_rmse = rmse(data.test_rows.simulated(), data.test_y);
        out.metrics.phys_inconsistency = inconsistency_fraction(data.grid_phy, cfg.tolerance);
        return out;
    }
    const ModelKind kind = learned_kind(model);
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const LossWeights w{cfg.lambda_l1, cfg.lambda_l2, kind == ModelKind::PGNN ? data.lambda_phy : 0.0};
    TrainResult tr = train(kind, data.train, data.grid, tc, w);

    const FeatureMatrix test_x = detail::model_features(kind, data.test_x);
    UnlabeledBatch grid;
    grid.shape = data.grid.shape;
    grid.features = detail::model_features(kind, data.grid.features);
    out.metrics.test_rmse = rmse(forward_batch(tr.params, test_x), data.test_y);
    out.metrics.phys_inconsistency = physical_inconsistency(tr.params, grid, cfg.tolerance);
    out.checkpoint = ModelCheckpoint{kind, data.stats, std::move(tr.params)};
    out.log = std::move(tr.log);
    return out;
}

struct ExperimentResult {
    std::vector<RunOutput> runs;          ///< ordered by (n_train, seed, model)
    std::vector<AggregateMetrics> aggregates;

    std::vector<RunMetrics> metrics() const {
        std::vector<RunMetrics> m;
        m.reserve(runs.size());
        for (const auto& r : runs) m.push_back(r.metrics);
        return m;
    }
};

namespace detail {

template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < std::min(jobs, n); ++j) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace detail

inline ExperimentResult run_experiment(const LabeledDataset& data, const UnlabeledGrid& grid,
                                       const ExperimentConfig& cfg) {
    cfg.validate();
    const PreparedData prepared = prepare_data(data, grid, cfg.n_train, cfg);
    struct Job {
        ExperimentModel model;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (std::uint64_t seed : cfg.seeds) {
        for (ExperimentModel m : cfg.models) jobs.push_back({m, seed});
    }
    ExperimentResult res;
    res.runs.resize(jobs.size());
    detail::parallel_for(jobs.size(), cfg.jobs,
                         [&](std::size_t i) { res.runs[i] = run_model(jobs[i].model, prepared, cfg, jobs[i].seed); });
    const auto m = res.metrics();
    res.aggregates = aggregate_by_model(m);
    return res;
}

inline const std::vector<std::size_t>& default_sweep_sizes() {
    static const std::vector<std::size_t> sizes{800, 1250, 1500, 2000, 3000};
    return sizes;
}

/// run_experiment for each training size; results concatenated in size order.
inline ExperimentResult run_size_sweep(const LabeledDataset& data, const UnlabeledGrid& grid,
                                       const ExperimentConfig& cfg, const std::vector<std::size_t>& sizes) {
    if (sizes.empty()) throw ConfigError("size sweep: no sizes");
    ExperimentResult all;
    for (std::size_t n : sizes) {
        ExperimentConfig c = cfg;
        c.n_train = n;
        ExperimentResult r = run_experiment(data, grid, c);
        for (auto& run : r.runs) all.runs.push_back(std::move(run));
        for (auto& a : r.aggregates) all.aggregates.push_back(std::move(a));
    }
    return all;
}

} // namespace pgnn
