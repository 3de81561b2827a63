/**
 * @file dataset_io.hpp
 * @brief Text formats for scenarios (flat key=value) and for labeled / grid
 *        datasets (CSV).
 *
 * Dataset CSV columns, in order:
 *
 *   day_index,date_iso,depth_m,doy,swrad_wm2,lwrad_wm2,airtemp_c,relhum_pct,
 *   wind_ms,rain_cm,gdd,is_freezing,is_snowing,y_phy_c,y_obs_c
 *
 * Grid files use the same columns without y_obs_c and list every depth of a
 * day (shallow to deep) before moving to the next day.
 */

#pragma once

#include "pgnn/error.hpp"
#include "pgnn/lakegen.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace pgnn {

using KeyValues = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; blank lines and lines starting with '#' are skipped.
inline KeyValues parse_key_values(std::istream& is) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        kv[key] = trim(t.substr(eq + 1));
    }
    return kv;
}

inline KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return parse_key_values(in);
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': not a number: '" + v + "'");
    }
}

inline unsigned long long parse_unsigned(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        const unsigned long long n = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ConfigError("'" + key + "': not a non-negative integer: '" + v + "'");
    }
}

/// Shortest of %.15g / %.17g that reads back to the same double.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

inline LakeScenario scenario_from_key_values(const KeyValues& kv) {
    LakeScenario s;
    for (const auto& [k, v] : kv) {
        if (k == "n_days") s.n_days = detail::parse_unsigned(k, v);
        else if (k == "start_year") s.start_year = static_cast<int>(detail::parse_unsigned(k, v));
        else if (k == "max_depth") s.max_depth = detail::parse_double(k, v);
        else if (k == "depth_step") s.depth_step = detail::parse_double(k, v);
        else if (k == "surface_mean") s.surface_mean = detail::parse_double(k, v);
        else if (k == "surface_amplitude") s.surface_amplitude = detail::parse_double(k, v);
        else if (k == "surface_phase") s.surface_phase = detail::parse_double(k, v);
        else if (k == "bottom_temp") s.bottom_temp = detail::parse_double(k, v);
        else if (k == "thermocline_mean") s.thermocline_mean = detail::parse_double(k, v);
        else if (k == "thermocline_amplitude") s.thermocline_amplitude = detail::parse_double(k, v);
        else if (k == "thermocline_phase") s.thermocline_phase = detail::parse_double(k, v);
        else if (k == "width_min") s.width_min = detail::parse_double(k, v);
        else if (k == "width_amplitude") s.width_amplitude = detail::parse_double(k, v);
        else if (k == "obs_noise_sd") s.obs_noise_sd = detail::parse_double(k, v);
        else if (k == "phy_bias") s.phy_bias = detail::parse_double(k, v);
        else if (k == "phy_param_perturbation") s.phy_param_perturbation = detail::parse_double(k, v);
        else if (k == "n_obs") s.n_obs = detail::parse_unsigned(k, v);
        else if (k == "seed") s.seed = detail::parse_unsigned(k, v);
        else throw ConfigError("unknown scenario key '" + k + "'");
    }
    s.validate();
    return s;
}

inline void write_scenario(std::ostream& os, const LakeScenario& s) {
    using detail::fmt;
    os << "n_days = " << s.n_days << '\n'
       << "start_year = " << s.start_year << '\n'
       << "max_depth = " << fmt(s.max_depth) << '\n'
       << "depth_step = " << fmt(s.depth_step) << '\n'
       << "surface_mean = " << fmt(s.surface_mean) << '\n'
       << "surface_amplitude = " << fmt(s.surface_amplitude) << '\n'
       << "surface_phase = " << fmt(s.surface_phase) << '\n'
       << "bottom_temp = " << fmt(s.bottom_temp) << '\n'
       << "thermocline_mean = " << fmt(s.thermocline_mean) << '\n'
       << "thermocline_amplitude = " << fmt(s.thermocline_amplitude) << '\n'
       << "thermocline_phase = " << fmt(s.thermocline_phase) << '\n'
       << "width_min = " << fmt(s.width_min) << '\n'
       << "width_amplitude = " << fmt(s.width_amplitude) << '\n'
       << "obs_noise_sd = " << fmt(s.obs_noise_sd) << '\n'
       << "phy_bias = " << fmt(s.phy_bias) << '\n'
       << "phy_param_perturbation = " << fmt(s.phy_param_perturbation) << '\n'
       << "n_obs = " << s.n_obs << '\n'
       << "seed = " << s.seed << '\n';
}

inline constexpr const char* kDatasetHeader =
    "day_index,date_iso,depth_m,doy,swrad_wm2,lwrad_wm2,airtemp_c,relhum_pct,wind_ms,rain_cm,gdd,"
    "is_freezing,is_snowing,y_phy_c";

namespace detail {

inline void write_row(std::ostream& os, const LakeRow& r, bool with_obs) {
    const Drivers& d = r.drivers;
    char buf[512];
    std::snprintf(buf, sizeof buf, "%zu,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%d,%.10g", r.day_index,
                  r.date.c_str(), r.depth_m, d.doy, d.swrad_wm2, d.lwrad_wm2, d.airtemp_c, d.relhum_pct, d.wind_ms,
                  d.rain_cm, d.gdd, static_cast<int>(d.is_freezing), static_cast<int>(d.is_snowing), r.y_phy);
    os << buf;
    if (with_obs) {
        std::snprintf(buf, sizeof buf, ",%.10g", r.y_obs);
        os << buf;
    }
    os << '\n';
}

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(line);
    while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline LakeRow parse_row(const std::vector<std::string>& f, bool with_obs, std::size_t lineno) {
    const std::size_t expected = with_obs ? 15 : 14;
    if (f.size() != expected) {
        throw DataError("line " + std::to_string(lineno) + ": expected " + std::to_string(expected) + " fields, got " +
                        std::to_string(f.size()));
    }
    auto num = [&](std::size_t i) {
        try {
            std::size_t used = 0;
            const double v = std::stod(f[i], &used);
            if (used != f[i].size()) throw std::invalid_argument(f[i]);
            return v;
        } catch (const std::exception&) {
            throw DataError("line " + std::to_string(lineno) + ": bad number '" + f[i] + "'");
        }
    };
    LakeRow r;
    const double day = num(0);
    if (day < 0 || day != std::floor(day)) throw DataError("line " + std::to_string(lineno) + ": bad day_index");
    r.day_index = static_cast<std::size_t>(day);
    r.date = f[1];
    r.depth_m = num(2);
    r.drivers.doy = num(3);
    r.drivers.swrad_wm2 = num(4);
    r.drivers.lwrad_wm2 = num(5);
    r.drivers.airtemp_c = num(6);
    r.drivers.relhum_pct = num(7);
    r.drivers.wind_ms = num(8);
    r.drivers.rain_cm = num(9);
    r.drivers.gdd = num(10);
    r.drivers.is_freezing = num(11);
    r.drivers.is_snowing = num(12);
    r.y_phy = num(13);
    if (with_obs) r.y_obs = num(14);
    return r;
}

inline std::vector<LakeRow> read_rows(std::istream& is, bool with_obs) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("empty dataset file");
    const std::string header = trim(line);
    const std::string want = std::string(kDatasetHeader) + (with_obs ? ",y_obs_c" : "");
    if (header != want) throw DataError("unexpected dataset header: '" + header + "'");
    std::vector<LakeRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        rows.push_back(parse_row(split_csv(trim(line)), with_obs, lineno));
    }
    return rows;
}

} // namespace detail

inline void write_dataset_csv(std::ostream& os, const LabeledDataset& ds) {
    os << kDatasetHeader << ",y_obs_c\n";
    for (const auto& r : ds.rows) detail::write_row(os, r, true);
}

inline LabeledDataset read_dataset_csv(std::istream& is) {
    LabeledDataset ds;
    ds.rows = detail::read_rows(is, true);
    if (ds.rows.empty()) throw DataError("dataset has no rows");
    return ds;
}

inline void write_grid_csv(std::ostream& os, const UnlabeledGrid& g) {
    os << kDatasetHeader << '\n';
    for (const auto& r : g.rows) detail::write_row(os, r, false);
}

/// Reads a grid file and checks that it forms a complete regular lattice.
inline UnlabeledGrid read_grid_csv(std::istream& is) {
    UnlabeledGrid g;
    g.rows = detail::read_rows(is, false);
    if (g.rows.empty()) throw DataError("grid has no rows");
    std::size_t nd = 0;
    while (nd < g.rows.size() && g.rows[nd].day_index == g.rows[0].day_index) ++nd;
    if (nd < 2) throw DataError("grid needs at least 2 depths per day");
    if (g.rows.size() % nd != 0) throw DataError("grid is not a complete lattice");
    const std::size_t nt = g.rows.size() / nd;
    const double step = g.rows[1].depth_m - g.rows[0].depth_m;
    if (!(step > 0.0)) throw DataError("grid depths must increase within a day");
    for (std::size_t t = 0; t < nt; ++t) {
        for (std::size_t i = 0; i < nd; ++i) {
            const LakeRow& r = g.rows[t * nd + i];
            if (r.day_index != g.rows[t * nd].day_index) throw DataError("grid: uneven number of depths per day");
            if (std::abs(r.depth_m - g.rows[i].depth_m) > 1e-9) throw DataError("grid: depths differ between days");
            if (i > 0 && !(r.depth_m > g.rows[t * nd + i - 1].depth_m)) throw DataError("grid: depths not increasing");
            if (std::abs(r.depth_m - g.rows[0].depth_m - step * static_cast<double>(i)) > 1e-6) {
                throw DataError("grid: depths are not evenly spaced");
            }
        }
        if (t > 0 && !(g.rows[t * nd].day_index > g.rows[(t - 1) * nd].day_index)) {
            throw DataError("grid: days not increasing");
        }
    }
    g.shape = GridShape{nd, nt, step};
    return g;
}

inline LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset '" + path + "'");
    return read_dataset_csv(in);
}

inline UnlabeledGrid load_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open grid '" + path + "'");
    return read_grid_csv(in);
}

} // namespace pgnn
