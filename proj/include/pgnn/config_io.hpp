/**
 * @file config_io.hpp
 * @brief Flat key=value form of ExperimentConfig and the training-size list.
 *
 * Recognized keys:
 *
 *   models            comma list of PHY, NN, PGNN0, PGNN
 *   n_train           count
 *   seeds             comma list, or a range "a..b" (inclusive)
 *   sizes             comma list of training sizes (size sweeps only)
 *   batch_size, max_epochs, patience, unlabeled_batch_size,
 *   hidden_layers, hidden_width, jobs                     counts
 *   val_fraction, clip_norm, min_improvement, adadelta_rho,
 *   adadelta_eps, lambda_l1, lambda_l2, tolerance         numbers
 *   phys_full_grid    true / false
 *   activation        tanh / relu
 *   lambda_phy        number, or "auto" for the target-derived default
 *   lambda_phy_scale  number multiplying the target-derived default
 *   lambda_phy_rule   variance / sd-of-squares
 */

#pragma once

#include "pgnn/dataset_io.hpp"
#include "pgnn/error.hpp"
#include "pgnn/experiment.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pgnn {

struct RunSettings {
    ExperimentConfig experiment;
    std::vector<std::size_t> sizes = default_sweep_sizes();
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + key + "': expected true or false, got '" + v + "'");
}

inline std::vector<std::uint64_t> parse_seeds(const std::string& v) {
    std::vector<std::uint64_t> seeds;
    const auto dots = v.find("..");
    if (dots != std::string::npos) {
        const auto lo = parse_unsigned("seeds", trim(v.substr(0, dots)));
        const auto hi = parse_unsigned("seeds", trim(v.substr(dots + 2)));
        if (hi < lo || hi - lo >= 100000) throw ConfigError("seeds: bad range '" + v + "'");
        for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    for (const auto& s : split_list(v)) seeds.push_back(parse_unsigned("seeds", s));
    return seeds;
}

inline std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) out += (out.empty() ? "" : ",") + x;
    return out;
}

} // namespace detail

/// Applies `kv` on top of `base`; unknown keys are configuration errors.
inline RunSettings apply_key_values(RunSettings base, const KeyValues& kv) {
    using namespace detail;
    ExperimentConfig& c = base.experiment;
    TrainConfig& t = c.train;
    for (const auto& [k, v] : kv) {
        if (k == "models") {
            c.models.clear();
            for (const auto& m : split_list(v)) c.models.push_back(parse_experiment_model(m));
        } else if (k == "n_train") c.n_train = parse_unsigned(k, v);
        else if (k == "seeds") c.seeds = parse_seeds(v);
        else if (k == "sizes") {
            base.sizes.clear();
            for (const auto& s : split_list(v)) base.sizes.push_back(parse_unsigned(k, s));
        } else if (k == "batch_size") t.batch_size = parse_unsigned(k, v);
        else if (k == "max_epochs") t.max_epochs = parse_unsigned(k, v);
        else if (k == "patience") t.patience = parse_unsigned(k, v);
        else if (k == "unlabeled_batch_size") t.unlabeled_batch_size = parse_unsigned(k, v);
        else if (k == "hidden_layers") t.hidden_layers = parse_unsigned(k, v);
        else if (k == "hidden_width") t.hidden_width = parse_unsigned(k, v);
        else if (k == "jobs") c.jobs = parse_unsigned(k, v);
        else if (k == "val_fraction") t.val_fraction = parse_double(k, v);
        else if (k == "clip_norm") t.clip_norm = parse_double(k, v);
        else if (k == "min_improvement") t.min_improvement = parse_double(k, v);
        else if (k == "adadelta_rho") t.adadelta_rho = parse_double(k, v);
        else if (k == "adadelta_eps") t.adadelta_eps = parse_double(k, v);
        else if (k == "lambda_l1") c.lambda_l1 = parse_double(k, v);
        else if (k == "lambda_l2") c.lambda_l2 = parse_double(k, v);
        else if (k == "tolerance") c.tolerance = parse_double(k, v);
        else if (k == "phys_full_grid") t.phys_full_grid = parse_bool(k, v);
        else if (k == "activation") t.activation = parse_activation(v);
        else if (k == "lambda_phy") {
            if (v == "auto") c.lambda_phy.reset();
            else c.lambda_phy = parse_double(k, v);
        } else if (k == "lambda_phy_scale") c.lambda_phy_scale = parse_double(k, v);
        else if (k == "lambda_phy_rule") c.lambda_phy_rule = parse_lambda_phy_rule(v);
        else throw ConfigError("unknown experiment key '" + k + "'");
    }
    if (base.sizes.empty()) throw ConfigError("sizes: empty list");
    c.validate();
    return base;
}

/// Every key with its resolved value, in the order listed above.
inline std::vector<std::pair<std::string, std::string>> to_key_values(const RunSettings& r) {
    using detail::fmt;
    const ExperimentConfig& c = r.experiment;
    const TrainConfig& t = c.train;
    std::vector<std::string> models, seeds, sizes;
    for (auto m : c.models) models.push_back(to_string(m));
    for (auto s : c.seeds) seeds.push_back(std::to_string(s));
    for (auto s : r.sizes) sizes.push_back(std::to_string(s));
    return {
        {"models", detail::join(models)},
        {"n_train", std::to_string(c.n_train)},
        {"seeds", detail::join(seeds)},
        {"sizes", detail::join(sizes)},
        {"batch_size", std::to_string(t.batch_size)},
        {"max_epochs", std::to_string(t.max_epochs)},
        {"patience", std::to_string(t.patience)},
        {"unlabeled_batch_size", std::to_string(t.unlabeled_batch_size)},
        {"hidden_layers", std::to_string(t.hidden_layers)},
        {"hidden_width", std::to_string(t.hidden_width)},
        {"jobs", std::to_string(c.jobs)},
        {"val_fraction", fmt(t.val_fraction)},
        {"clip_norm", fmt(t.clip_norm)},
        {"min_improvement", fmt(t.min_improvement)},
        {"adadelta_rho", fmt(t.adadelta_rho)},
        {"adadelta_eps", fmt(t.adadelta_eps)},
        {"lambda_l1", fmt(c.lambda_l1)},
        {"lambda_l2", fmt(c.lambda_l2)},
        {"tolerance", fmt(c.tolerance)},
        {"phys_full_grid", t.phys_full_grid ? "true" : "false"},
        {"activation", to_string(t.activation)},
        {"lambda_phy", c.lambda_phy ? fmt(*c.lambda_phy) : "auto"},
        {"lambda_phy_scale", fmt(c.lambda_phy_scale)},
        {"lambda_phy_rule", c.lambda_phy_rule == LambdaPhyRule::VarianceOverDensitySd ? "variance" : "sd-of-squares"},
    };
}

} // namespace pgnn
