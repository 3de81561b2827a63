/**
 * @file lakegen.hpp
 * @brief Synthetic 1-D lake: ground-truth temperature field, meteorological
 *        drivers, a biased process-model surrogate, noisy observations, the
 *        center-window train/test split and feature standardization.
 *
 * Ground truth at depth d (m) on day t:
 *
 *   Ts(t) = max(4, mean + amp * sin(2 pi (t - phase) / 365))
 *   Tb(t) = min(T_bottom, Ts(t))
 *   T(d,t) = Tb + (Ts - Tb) * logistic((z_th(t) - d) / w(t))
 *
 * with a thermocline depth z_th(t) that is shallow in spring and deepens into
 * autumn, and a thermocline width w(t) that widens in the cold season. Every
 * profile is non-increasing in depth and never drops below 4 C, so its
 * density never decreases with depth.
 *
 * The simulated temperature (stand-in for a process model) is the same
 * formula evaluated with perturbed parameters plus a constant bias.
 */

#pragma once

#include "pgnn/error.hpp"
#include "pgnn/features.hpp"
#include "pgnn/physics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace pgnn {

struct LakeScenario {
    std::size_t n_days = 1460;
    int start_year = 2001;          ///< day 0 is 1 January of this year
    double max_depth = 25.0;
    double depth_step = 0.5;
    double surface_mean = 12.0;
    double surface_amplitude = 18.0;
    double surface_phase = 114.0;   ///< day of the upward zero crossing
    double bottom_temp = 4.5;
    double thermocline_mean = 8.0;
    double thermocline_amplitude = 4.0;
    double thermocline_phase = 200.0;
    double width_min = 1.0;         ///< thermocline width at peak summer (m)
    double width_amplitude = 3.0;   ///< extra width in winter (m)
    double obs_noise_sd = 0.5;
    double phy_bias = 0.8;
    double phy_param_perturbation = 0.15;
    std::size_t n_obs = 7000;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_days < 30) throw ConfigError("scenario: n_days must be >= 30");
        if (!(depth_step > 0.0)) throw ConfigError("scenario: depth_step must be > 0");
        if (!(max_depth >= depth_step)) throw ConfigError("scenario: max_depth must be >= depth_step");
        const double ratio = max_depth / depth_step;
        if (std::abs(ratio - std::round(ratio)) > 1e-9) {
            throw ConfigError("scenario: max_depth must be a multiple of depth_step");
        }
        if (!(width_min > 0.0) || width_amplitude < 0.0) throw ConfigError("scenario: widths must be positive");
        if (obs_noise_sd < 0.0) throw ConfigError("scenario: obs_noise_sd must be >= 0");
        if (phy_param_perturbation <= -1.0 || phy_param_perturbation >= 1.0) {
            throw ConfigError("scenario: phy_param_perturbation must lie in (-1, 1)");
        }
        if (bottom_temp < 4.0) throw ConfigError("scenario: bottom_temp must be >= 4");
        if (start_year < 1 || start_year > 9999) throw ConfigError("scenario: start_year out of range");
        for (double v : {surface_mean, surface_amplitude, surface_phase, thermocline_mean, thermocline_amplitude,
                         thermocline_phase, phy_bias}) {
            if (!std::isfinite(v)) throw ConfigError("scenario: non-finite parameter");
        }
    }

    std::size_t n_depths() const { return static_cast<std::size_t>(std::llround(max_depth / depth_step)) + 1; }
    GridShape grid_shape() const { return GridShape{n_depths(), n_days, depth_step}; }
};

// ---------------------------------------------------------------------------
// Calendar

struct CivilDate {
    int year;
    unsigned month;
    unsigned day;
};

/// Days since 1970-01-01 for a proleptic Gregorian date.
inline long days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<long>(doe) - 719468;
}

inline CivilDate civil_from_days(long z) {
    z += 719468;
    const long era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const long y = static_cast<long>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp < 10 ? mp + 3 : mp - 9;
    return {static_cast<int>(y + (m <= 2)), m, d};
}

inline CivilDate scenario_date(const LakeScenario& s, std::size_t day) {
    return civil_from_days(days_from_civil(s.start_year, 1, 1) + static_cast<long>(day));
}

inline std::string date_iso(const LakeScenario& s, std::size_t day) {
    const CivilDate c = scenario_date(s, day);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", c.year, c.month, c.day);
    return buf;
}

/// Day of year, 1..366.
inline int day_of_year(const LakeScenario& s, std::size_t day) {
    const CivilDate c = scenario_date(s, day);
    return static_cast<int>(days_from_civil(c.year, c.month, c.day) - days_from_civil(c.year, 1, 1)) + 1;
}

// ---------------------------------------------------------------------------
// Temperature fields

namespace detail {

inline double seasonal(double day, double phase) {
    return std::sin(2.0 * std::numbers::pi * (day - phase) / 365.0);
}

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void check_coords(const LakeScenario& s, double depth, std::size_t day) {
    if (!(depth >= 0.0 && depth <= s.max_depth + 1e-12)) throw InvalidInputError("depth outside [0, max_depth]");
    if (day >= s.n_days) throw InvalidInputError("day index outside scenario");
}

inline double surface_temperature_raw(const LakeScenario& s, double t) {
    return std::max(4.0, s.surface_mean + s.surface_amplitude * seasonal(t, s.surface_phase));
}

inline double profile(const LakeScenario& s, double depth, std::size_t day) {
    const double t = static_cast<double>(day);
    const double ts = surface_temperature_raw(s, t);
    const double tb = std::min(s.bottom_temp, ts);
    const double z_th = std::max(0.0, s.thermocline_mean + s.thermocline_amplitude * seasonal(t, s.thermocline_phase));
    const double w = s.width_min + s.width_amplitude * 0.5 * (1.0 - seasonal(t, s.surface_phase));
    return tb + (ts - tb) * logistic((z_th - depth) / w);
}

} // namespace detail

/// Surface boundary temperature Ts(t), clamped at 4 C.
inline double surface_temperature(const LakeScenario& s, std::size_t day) {
    return detail::surface_temperature_raw(s, static_cast<double>(day));
}

inline double ground_truth(const LakeScenario& s, double depth, std::size_t day) {
    detail::check_coords(s, depth, day);
    return detail::profile(s, depth, day);
}

/// Scenario with the perturbed parameters used by the simulated model.
inline LakeScenario perturbed_scenario(const LakeScenario& s) {
    LakeScenario p = s;
    const double f = s.phy_param_perturbation;
    p.thermocline_mean *= 1.0 + f;
    p.thermocline_amplitude *= 1.0 + f;
    p.width_min *= 1.0 + f;
    p.surface_amplitude *= 1.0 - f;
    return p;
}

/// Simulated (biased) temperature at a cell.
inline double phy_surrogate(const LakeScenario& s, double depth, std::size_t day) {
    detail::check_coords(s, depth, day);
    return detail::profile(perturbed_scenario(s), depth, day) + s.phy_bias;
}

/// Ground-truth temperatures on the scenario's full depth x day lattice.
inline TemperatureGrid ground_truth_grid(const LakeScenario& s) {
    s.validate();
    const GridShape shape = s.grid_shape();
    std::vector<double> v(shape.cells());
    for (std::size_t t = 0; t < shape.n_times; ++t) {
        for (std::size_t i = 0; i < shape.n_depths; ++i) v[shape.index(i, t)] = ground_truth(s, shape.depth(i), t);
    }
    return TemperatureGrid(shape, std::move(v));
}

// ---------------------------------------------------------------------------
// Drivers

/// Daily meteorological drivers. Depth is added per row.
struct Drivers {
    double doy = 0;
    double swrad_wm2 = 0;
    double lwrad_wm2 = 0;
    double airtemp_c = 0;
    double relhum_pct = 0;
    double wind_ms = 0;
    double rain_cm = 0;
    double gdd = 0;
    double is_freezing = 0;
    double is_snowing = 0;
};

/// Model feature columns; the simulated temperature is always last.
inline constexpr std::array<const char*, 12> kFeatureNames = {
    "doy", "depth_m", "swrad_wm2", "lwrad_wm2", "airtemp_c", "relhum_pct",
    "wind_ms", "rain_cm", "gdd", "is_freezing", "is_snowing", "y_phy_c"};
inline constexpr std::size_t kNumFeatures = kFeatureNames.size();
inline constexpr std::size_t kNumDrivers = kNumFeatures - 1;

namespace detail {

inline std::mt19937_64 day_stream(const LakeScenario& s, std::size_t day) {
    std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32), 0x5eedu,
                      static_cast<std::uint32_t>(day)};
    return std::mt19937_64(seq);
}

struct DailyWeather {
    double airtemp;
    double cloud;
    double noise_sw;
    double noise_lw;
    double noise_rh;
    double wind;
    double rain;
};

inline DailyWeather daily_weather(const LakeScenario& s, std::size_t day) {
    auto rng = day_stream(s, day);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::gamma_distribution<double> gamma(4.0, 1.0);
    std::exponential_distribution<double> expo(1.0 / 0.8);
    DailyWeather w{};
    const double t = static_cast<double>(day);
    // air leads the water surface by about three weeks
    w.airtemp = s.surface_mean - 5.0 + (s.surface_amplitude + 4.0) * seasonal(t, s.surface_phase - 20.0) +
                3.0 * normal(rng);
    w.cloud = unif(rng);
    w.noise_sw = normal(rng);
    w.noise_lw = normal(rng);
    w.noise_rh = normal(rng);
    w.wind = gamma(rng);
    const double r = expo(rng);
    w.rain = w.cloud > 0.6 ? r : 0.0;
    return w;
}

inline double gdd_increment(double airtemp) { return std::max(0.0, airtemp - 10.0); }

inline Drivers drivers_from_weather(const LakeScenario& s, std::size_t day, const DailyWeather& w, double gdd) {
    Drivers d;
    d.doy = day_of_year(s, day);
    const double season = seasonal(d.doy, 80.0);
    d.swrad_wm2 = std::max(0.0, (170.0 + 130.0 * season) * (1.0 - 0.5 * w.cloud) + 15.0 * w.noise_sw);
    d.lwrad_wm2 = 300.0 + 2.5 * w.airtemp + 30.0 * w.cloud + 10.0 * w.noise_lw;
    d.airtemp_c = w.airtemp;
    d.relhum_pct = std::clamp(70.0 + 15.0 * w.cloud - 0.3 * (w.airtemp - 10.0) + 5.0 * w.noise_rh, 0.0, 100.0);
    d.wind_ms = w.wind;
    d.rain_cm = w.rain;
    d.gdd = gdd;
    d.is_freezing = w.airtemp < 0.0 ? 1.0 : 0.0;
    d.is_snowing = (w.airtemp < 0.0 && w.rain > 0.0) ? 1.0 : 0.0;
    return d;
}

} // namespace detail

/// Drivers for one day. Growing degree days accumulate max(0, airtemp - 10)
/// from 1 January of the day's calendar year.
inline Drivers synthesize_drivers(const LakeScenario& s, std::size_t day) {
    const int doy = day_of_year(s, day);
    const std::size_t year_start = day >= static_cast<std::size_t>(doy - 1) ? day - static_cast<std::size_t>(doy - 1) : 0;
    double gdd = 0.0;
    for (std::size_t d = year_start; d <= day; ++d) gdd += detail::gdd_increment(detail::daily_weather(s, d).airtemp);
    return detail::drivers_from_weather(s, day, detail::daily_weather(s, day), gdd);
}

/// Drivers for every scenario day; equal to calling synthesize_drivers per day.
inline std::vector<Drivers> driver_table(const LakeScenario& s) {
    std::vector<Drivers> out;
    out.reserve(s.n_days);
    double gdd = 0.0;
    for (std::size_t day = 0; day < s.n_days; ++day) {
        const detail::DailyWeather w = detail::daily_weather(s, day);
        if (day_of_year(s, day) == 1) gdd = 0.0;
        gdd += detail::gdd_increment(w.airtemp);
        out.push_back(detail::drivers_from_weather(s, day, w, gdd));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Datasets

/// One (depth, day) cell with drivers and simulated temperature; y_obs is
/// meaningful only for labeled rows.
struct LakeRow {
    std::size_t day_index = 0;
    std::string date;
    double depth_m = 0;
    Drivers drivers;
    double y_phy = 0;
    double y_obs = 0;

    std::array<double, kNumFeatures> features() const {
        return {drivers.doy, depth_m, drivers.swrad_wm2, drivers.lwrad_wm2, drivers.airtemp_c, drivers.relhum_pct,
                drivers.wind_ms, drivers.rain_cm, drivers.gdd, drivers.is_freezing, drivers.is_snowing, y_phy};
    }
};

struct LabeledDataset {
    std::vector<LakeRow> rows;

    std::size_t size() const { return rows.size(); }

    FeatureMatrix features() const {
        FeatureMatrix m(rows.size(), kNumFeatures);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto f = rows[r].features();
            std::copy(f.begin(), f.end(), m.row(r).begin());
        }
        return m;
    }
    std::vector<double> targets() const {
        std::vector<double> y;
        y.reserve(rows.size());
        for (const auto& r : rows) y.push_back(r.y_obs);
        return y;
    }
    std::vector<double> simulated() const {
        std::vector<double> y;
        y.reserve(rows.size());
        for (const auto& r : rows) y.push_back(r.y_phy);
        return y;
    }
};

/// Complete depth x day lattice of feature rows, time-major.
struct UnlabeledGrid {
    GridShape shape;
    std::vector<LakeRow> rows;

    const LakeRow& at(std::size_t depth_i, std::size_t time_t) const { return rows[shape.index(depth_i, time_t)]; }

    FeatureMatrix features() const {
        FeatureMatrix m(rows.size(), kNumFeatures);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto f = rows[r].features();
            std::copy(f.begin(), f.end(), m.row(r).begin());
        }
        return m;
    }

    TemperatureGrid simulated() const {
        std::vector<double> v;
        v.reserve(rows.size());
        for (const auto& r : rows) v.push_back(r.y_phy);
        return TemperatureGrid(shape, std::move(v));
    }
};

inline UnlabeledGrid make_grid(const LakeScenario& s) {
    s.validate();
    const auto drivers = driver_table(s);
    UnlabeledGrid g;
    g.shape = s.grid_shape();
    g.rows.reserve(g.shape.cells());
    for (std::size_t t = 0; t < g.shape.n_times; ++t) {
        const std::string date = date_iso(s, t);
        for (std::size_t i = 0; i < g.shape.n_depths; ++i) {
            LakeRow r;
            r.day_index = t;
            r.date = date;
            r.depth_m = g.shape.depth(i);
            r.drivers = drivers[t];
            r.y_phy = phy_surrogate(s, r.depth_m, t);
            g.rows.push_back(std::move(r));
        }
    }
    return g;
}

/**
 * @brief Noisy observations at irregular (depth, day) cells.
 *
 * Days are drawn with weights that favour the open-water season and vary from
 * year to year; depths are uniform on [0, max_depth] at 0.1 m resolution.
 * Rows come back sorted by (day, depth).
 */
inline LabeledDataset sample_observations(const LakeScenario& s, std::size_t n_obs) {
    s.validate();
    if (n_obs == 0) throw ConfigError("sample_observations: n_obs must be >= 1");
    std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32), 0x0b5u};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> year_factor(0.3, 1.5);

    std::vector<double> weights(s.n_days);
    int current_year = -1;
    double yf = 1.0;
    for (std::size_t day = 0; day < s.n_days; ++day) {
        const int year = scenario_date(s, day).year;
        if (year != current_year) {
            current_year = year;
            yf = year_factor(rng);
        }
        const double summer = std::max(0.0, detail::seasonal(day_of_year(s, day), 91.0));
        weights[day] = yf * (0.1 + summer * summer);
    }
    std::discrete_distribution<std::size_t> pick_day(weights.begin(), weights.end());
    const int depth_steps = static_cast<int>(std::floor(s.max_depth * 10.0 + 1e-9));
    std::uniform_int_distribution<int> pick_depth(0, depth_steps);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<std::pair<std::size_t, int>> cells(n_obs);
    std::vector<double> eps(n_obs);
    for (std::size_t k = 0; k < n_obs; ++k) {
        cells[k] = {pick_day(rng), pick_depth(rng)};
        eps[k] = noise(rng);
    }
    std::vector<std::size_t> order(n_obs);
    for (std::size_t k = 0; k < n_obs; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cells[a] < cells[b]; });

    const auto drivers = driver_table(s);
    LabeledDataset ds;
    ds.rows.reserve(n_obs);
    for (std::size_t k : order) {
        LakeRow r;
        r.day_index = cells[k].first;
        r.date = date_iso(s, r.day_index);
        r.depth_m = std::min(s.max_depth, cells[k].second / 10.0);
        r.drivers = drivers[r.day_index];
        r.y_phy = phy_surrogate(s, r.depth_m, r.day_index);
        const double truth = ground_truth(s, r.depth_m, r.day_index);
        r.y_obs = s.obs_noise_sd > 0.0 ? truth + s.obs_noise_sd * eps[k] : truth;
        ds.rows.push_back(std::move(r));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Train/test split

/// Inclusive range of distinct-day positions forming the test window.
struct DayWindow {
    std::size_t first = 0;
    std::size_t last = 0;
};

/**
 * @brief Temporal split with a test block in the middle of the record.
 *
 * Starting from the median row's day, whole days are added to the test
 * window alternately on the earlier and later side (earlier first) until the
 * rows outside the window number at most n_train. When one side runs out of
 * days the window keeps growing on the other side. Outside rows are the
 * training set.
 */
inline std::pair<LabeledDataset, LabeledDataset> center_window_split(const LabeledDataset& data, std::size_t n_train) {
    if (data.rows.empty()) throw ConfigError("center_window_split: empty dataset");
    if (n_train >= data.rows.size()) throw ConfigError("center_window_split: n_train must be < number of rows");
    if (n_train == 0) throw ConfigError("center_window_split: n_train must be >= 1");

    std::vector<std::size_t> order(data.rows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data.rows[a].day_index < data.rows[b].day_index; });

    std::vector<std::size_t> days;
    std::vector<std::size_t> counts;
    for (std::size_t i : order) {
        const std::size_t d = data.rows[i].day_index;
        if (days.empty() || days.back() != d) {
            days.push_back(d);
            counts.push_back(0);
        }
        ++counts.back();
    }
    const std::size_t median_day = data.rows[order[order.size() / 2]].day_index;
    const std::size_t m = static_cast<std::size_t>(std::lower_bound(days.begin(), days.end(), median_day) - days.begin());

    std::size_t lo = m;
    std::size_t hi = m;
    std::size_t outside = data.rows.size() - counts[m];
    bool take_left = true;
    while (outside > n_train) {
        const bool can_left = lo > 0;
        const bool can_right = hi + 1 < days.size();
        if (!can_left && !can_right) break;
        if ((take_left && can_left) || !can_right) {
            --lo;
            outside -= counts[lo];
        } else {
            ++hi;
            outside -= counts[hi];
        }
        take_left = !take_left;
    }
    if (outside == 0) throw ConfigError("center_window_split: no training rows left");

    LabeledDataset train;
    LabeledDataset test;
    for (const auto& r : data.rows) {
        const bool in_window = r.day_index >= days[lo] && r.day_index <= days[hi];
        (in_window ? test : train).rows.push_back(r);
    }
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Standardization

/// Per-column affine map (x - mean) / sd fitted on training rows.
struct Standardizer {
    std::vector<double> means;
    std::vector<double> sds;

    /// Population statistics; a constant column gets sd = 1.
    static Standardizer fit(const FeatureMatrix& train) {
        if (train.rows() == 0) throw InvalidInputError("Standardizer::fit: empty training matrix");
        Standardizer s;
        const std::size_t n = train.rows();
        s.means.assign(train.cols(), 0.0);
        s.sds.assign(train.cols(), 0.0);
        for (std::size_t c = 0; c < train.cols(); ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += train(r, c);
            mean /= static_cast<double>(n);
            double ss = 0.0;
            for (std::size_t r = 0; r < n; ++r) ss += (train(r, c) - mean) * (train(r, c) - mean);
            double sd = std::sqrt(ss / static_cast<double>(n));
            if (!(sd > 1e-12 * (1.0 + std::abs(mean)))) sd = 1.0;
            s.means[c] = mean;
            s.sds[c] = sd;
        }
        return s;
    }

    FeatureMatrix apply(const FeatureMatrix& x) const {
        if (x.cols() != means.size()) throw ShapeError("Standardizer::apply: column count mismatch");
        FeatureMatrix out = x;
        for (std::size_t r = 0; r < out.rows(); ++r) {
            for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) = (x(r, c) - means[c]) / sds[c];
        }
        return out;
    }
};

/// Fits on `train` and transforms it together with every matrix in `others`.
inline std::pair<Standardizer, std::vector<FeatureMatrix>> standardize(const FeatureMatrix& train,
                                                                       const std::vector<FeatureMatrix>& others = {}) {
    Standardizer s = Standardizer::fit(train);
    std::vector<FeatureMatrix> out;
    out.reserve(others.size() + 1);
    out.push_back(s.apply(train));
    for (const auto& o : others) out.push_back(s.apply(o));
    return {std::move(s), std::move(out)};
}

} // namespace pgnn
