/**
 * @file eval.hpp
 * @brief Test RMSE, physical-inconsistency fraction, density profiles and
 *        multi-seed aggregation.
 */

#pragma once

#include "pgnn/error.hpp"
#include "pgnn/net.hpp"
#include "pgnn/physics.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pgnn {

inline constexpr double kDefaultInconsistencyTolerance = 1e-5; // kg/m^3

inline double rmse(std::span<const double> preds, std::span<const double> obs) {
    if (preds.size() != obs.size()) throw InvalidInputError("rmse: length mismatch");
    if (preds.empty()) throw InvalidInputError("rmse: empty input");
    return std::sqrt(mse(preds, obs));
}

/// Fraction of time steps with at least one depth pair whose density
/// difference exceeds `tolerance`.
inline double inconsistency_fraction(const TemperatureGrid& temps, double tolerance = kDefaultInconsistencyTolerance) {
    if (!(tolerance >= 0.0)) throw InvalidInputError("inconsistency_fraction: tolerance must be >= 0");
    const ViolationMatrix d = density_deltas(temps);
    std::size_t bad = 0;
    for (std::size_t t = 0; t < d.n_times(); ++t) {
        for (std::size_t i = 0; i < d.n_pairs(); ++i) {
            if (d(i, t) > tolerance) {
                ++bad;
                break;
            }
        }
    }
    return static_cast<double>(bad) / static_cast<double>(d.n_times());
}

/// Predicts every grid cell with `params` and returns inconsistency_fraction.
/// `grid.features` must already be in the model's input space.
inline double physical_inconsistency(const MlpParams& params, const UnlabeledBatch& grid,
                                     double tolerance = kDefaultInconsistencyTolerance) {
    return inconsistency_fraction(TemperatureGrid(grid.shape, forward_batch(params, grid.features)), tolerance);
}

struct ProfilePoint {
    double depth_m;
    double density_kgm3;
};

/// Predicted density at every depth of time step `day`, shallow to deep.
inline std::vector<ProfilePoint> density_profile(const TemperatureGrid& temps, std::size_t day) {
    const GridShape& s = temps.shape();
    if (day >= s.n_times) throw InvalidInputError("density_profile: day outside grid");
    std::vector<ProfilePoint> out;
    out.reserve(s.n_depths);
    for (std::size_t i = 0; i < s.n_depths; ++i) out.push_back({s.depth(i), density_of_temperature(temps(i, day))});
    return out;
}

inline std::vector<ProfilePoint> density_profile(const MlpParams& params, const UnlabeledBatch& grid, std::size_t day) {
    const GridShape& s = grid.shape;
    if (day >= s.n_times) throw InvalidInputError("density_profile: day outside grid");
    FeatureMatrix col(s.n_depths, grid.features.cols());
    for (std::size_t i = 0; i < s.n_depths; ++i) {
        const auto src = grid.features.row(s.index(i, day));
        std::copy(src.begin(), src.end(), col.row(i).begin());
    }
    const TemperatureGrid temps(GridShape{s.n_depths, 1, s.depth_step}, forward_batch(params, col));
    return density_profile(temps, 0);
}

struct RunMetrics {
    std::string model;
    std::size_t n_train = 0;
    std::uint64_t seed = 0;
    double test_rmse = 0.0;
    double phys_inconsistency = 0.0;
    std::size_t n_test = 0;
};

struct AggregateMetrics {
    std::string model;
    std::size_t n_train = 0;
    std::size_t n_runs = 0;
    double rmse_mean = 0.0;
    double rmse_sd = 0.0;
    double inconsistency_mean = 0.0;
    double inconsistency_sd = 0.0;
};

/// Mean and population sd over runs (Welford, so identical runs give sd 0).
inline AggregateMetrics aggregate(std::span<const RunMetrics> runs) {
    if (runs.empty()) throw InvalidInputError("aggregate: no runs");
    AggregateMetrics a;
    a.model = runs.front().model;
    a.n_train = runs.front().n_train;
    a.n_runs = runs.size();
    double m2_rmse = 0.0;
    double m2_inc = 0.0;
    std::size_t k = 0;
    for (const auto& r : runs) {
        ++k;
        const double dr = r.test_rmse - a.rmse_mean;
        a.rmse_mean += dr / static_cast<double>(k);
        m2_rmse += dr * (r.test_rmse - a.rmse_mean);
        const double di = r.phys_inconsistency - a.inconsistency_mean;
        a.inconsistency_mean += di / static_cast<double>(k);
        m2_inc += di * (r.phys_inconsistency - a.inconsistency_mean);
    }
    const double n = static_cast<double>(runs.size());
    a.rmse_sd = std::sqrt(m2_rmse / n);
    a.inconsistency_sd = std::sqrt(m2_inc / n);
    return a;
}

/// Aggregates per (n_train, model) in first-seen order.
inline std::vector<AggregateMetrics> aggregate_by_model(std::span<const RunMetrics> runs) {
    std::vector<std::pair<std::size_t, std::string>> keys;
    std::map<std::pair<std::size_t, std::string>, std::vector<RunMetrics>> groups;
    for (const auto& r : runs) {
        const auto key = std::make_pair(r.n_train, r.model);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) keys.push_back(key);
        it->second.push_back(r);
    }
    std::vector<AggregateMetrics> out;
    for (const auto& k : keys) out.push_back(aggregate(groups[k]));
    return out;
}

/**
 * Metrics CSV. Run rows carry one seed; aggregate rows leave seed empty and
 * fill the sd columns.
 *
 *   row_type,model,n_train,seed,n_runs,n_test,test_rmse,test_rmse_sd,phys_inconsistency,phys_inconsistency_sd
 */
inline void write_metrics_csv(std::ostream& os, std::span<const RunMetrics> runs,
                              std::span<const AggregateMetrics> aggs) {
    os << "row_type,model,n_train,seed,n_runs,n_test,test_rmse,test_rmse_sd,phys_inconsistency,phys_inconsistency_sd\n";
    char buf[256];
    for (const auto& r : runs) {
        std::snprintf(buf, sizeof buf, "run,%s,%zu,%llu,1,%zu,%.10g,,%.10g,\n", r.model.c_str(), r.n_train,
                      static_cast<unsigned long long>(r.seed), r.n_test, r.test_rmse, r.phys_inconsistency);
        os << buf;
    }
    for (const auto& a : aggs) {
        std::snprintf(buf, sizeof buf, "aggregate,%s,%zu,,%zu,,%.10g,%.10g,%.10g,%.10g\n", a.model.c_str(), a.n_train,
                      a.n_runs, a.rmse_mean, a.rmse_sd, a.inconsistency_mean, a.inconsistency_sd);
        os << buf;
    }
}

struct ProfileRow {
    std::string model;
    std::string date;
    ProfilePoint point;
};

inline void write_profile_csv(std::ostream& os, std::span<const ProfileRow> rows) {
    os << "depth_m,density_kgm3,model_name,date\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.10g,%.10f,%s,%s\n", r.point.depth_m, r.point.density_kgm3, r.model.c_str(),
                      r.date.c_str());
        os << buf;
    }
}

} // namespace pgnn
