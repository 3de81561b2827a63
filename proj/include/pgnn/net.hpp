/**
 * @file net.hpp
 * @brief Dense feed-forward regressor, the physics-guided training objective
 *        and its exact reverse-mode gradient.
 *
 * Network with L hidden layers:
 *
 *   z_1 = W_1^T x + b_1
 *   z_i = W_i^T a_{i-1} + b_i        i = 2..L
 *   a_i = f(z_i)                     i = 1..L
 *   y   = w_{L+1}^T a_L + b_{L+1}    (affine output)
 *
 * Objective:
 *
 *   total = mse(labeled) + l1 * sum|W| + l2 * sum W^2 + lambda_phy * physics_loss(unlabeled grid)
 *
 * Biases are excluded from both norms.
 */

#pragma once

#include "pgnn/error.hpp"
#include "pgnn/features.hpp"
#include "pgnn/physics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pgnn {

enum class Activation { Tanh, Relu };

inline std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

inline Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    throw ConfigError("unknown activation '" + s + "' (expected tanh or relu)");
}

/**
 * @brief Weights and biases of an MLP stored in one flat array.
 *
 * Layer l (0-based, mapping sizes[l] -> sizes[l+1]) stores its weight matrix
 * row-major as sizes[l] x sizes[l+1] (entry [k][j] connects input k to unit
 * j), immediately followed by its sizes[l+1] biases.
 */
class MlpParams {
public:
    MlpParams() = default;

    MlpParams(std::vector<std::size_t> layer_sizes, Activation activation)
        : sizes_(std::move(layer_sizes)), activation_(activation) {
        if (sizes_.size() < 3) throw ConfigError("MlpParams: need input, >= 1 hidden and output layer");
        for (std::size_t s : sizes_) {
            if (s == 0) throw ConfigError("MlpParams: zero-width layer");
        }
        if (sizes_.back() != 1) throw ConfigError("MlpParams: output layer must have width 1");
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            offsets_.push_back(off);
            off += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
        }
        values_.assign(off, 0.0);
    }

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
    Activation activation() const { return activation_; }
    std::size_t n_layers() const { return sizes_.size() - 1; }
    std::size_t input_dim() const { return sizes_.front(); }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::size_t weight_offset(std::size_t l) const { return offsets_[l]; }
    std::size_t bias_offset(std::size_t l) const { return offsets_[l] + sizes_[l] * sizes_[l + 1]; }

    std::span<const double> weights(std::size_t l) const {
        return {values_.data() + weight_offset(l), sizes_[l] * sizes_[l + 1]};
    }
    std::span<double> weights(std::size_t l) { return {values_.data() + weight_offset(l), sizes_[l] * sizes_[l + 1]}; }
    std::span<const double> biases(std::size_t l) const { return {values_.data() + bias_offset(l), sizes_[l + 1]}; }
    std::span<double> biases(std::size_t l) { return {values_.data() + bias_offset(l), sizes_[l + 1]}; }

    double& weight(std::size_t l, std::size_t in, std::size_t out) {
        return values_[weight_offset(l) + in * sizes_[l + 1] + out];
    }
    double weight(std::size_t l, std::size_t in, std::size_t out) const {
        return values_[weight_offset(l) + in * sizes_[l + 1] + out];
    }

    /// True if flat index `i` addresses a weight (not a bias).
    bool is_weight(std::size_t i) const {
        for (std::size_t l = 0; l < n_layers(); ++l) {
            if (i >= weight_offset(l) && i < bias_offset(l)) return true;
        }
        return false;
    }

    void validate() const {
        for (double v : values_) {
            if (!std::isfinite(v)) throw InvalidInputError("MlpParams: non-finite parameter");
        }
    }

    bool operator==(const MlpParams&) const = default;

private:
    std::vector<std::size_t> sizes_;
    std::vector<std::size_t> offsets_;
    Activation activation_ = Activation::Tanh;
    std::vector<double> values_;
};

struct LossWeights {
    double lambda_l1 = 1.0;
    double lambda_l2 = 1.0;
    double lambda_phy = 0.0;

    void validate() const {
        for (double v : {lambda_l1, lambda_l2, lambda_phy}) {
            if (!std::isfinite(v) || v < 0.0) throw ConfigError("LossWeights: weights must be finite and >= 0");
        }
    }
};

struct ObjectiveBreakdown {
    double empirical = 0.0;
    double structural = 0.0;
    double physical = 0.0;
    double total = 0.0;
};

/// Labeled rows with their observed temperatures.
struct LabeledBatch {
    FeatureMatrix features;
    std::vector<double> targets;
};

/// Feature rows for every cell of a (sub-)grid, time-major like TemperatureGrid.
/// A batch with zero rows means "no physics term".
struct UnlabeledBatch {
    FeatureMatrix features;
    GridShape shape{};

    bool empty() const { return features.empty(); }
};

namespace detail {

inline double activate(Activation a, double z) { return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0); }

/// Derivative of the activation expressed through its output.
inline double activation_slope(Activation a, double out) {
    return a == Activation::Tanh ? 1.0 - out * out : (out > 0.0 ? 1.0 : 0.0);
}

inline std::size_t activation_width(const MlpParams& p) {
    std::size_t w = 0;
    for (std::size_t l = 1; l < p.layer_sizes().size(); ++l) w += p.layer_sizes()[l];
    return w;
}

/// Runs one row through the network, writing every layer's output (hidden
/// activations, then the scalar prediction) into `acts`. Returns the prediction.
inline double forward_row(const MlpParams& p, std::span<const double> x, std::span<double> acts) {
    const auto& sizes = p.layer_sizes();
    std::span<const double> in = x;
    std::size_t pos = 0;
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        const std::size_t n_in = sizes[l];
        const std::size_t n_out = sizes[l + 1];
        const auto w = p.weights(l);
        const auto b = p.biases(l);
        std::span<double> out = acts.subspan(pos, n_out);
        for (std::size_t j = 0; j < n_out; ++j) out[j] = b[j];
        for (std::size_t k = 0; k < n_in; ++k) {
            const double xk = in[k];
            const double* wrow = w.data() + k * n_out;
            for (std::size_t j = 0; j < n_out; ++j) out[j] += xk * wrow[j];
        }
        if (l + 1 < p.n_layers()) {
            for (std::size_t j = 0; j < n_out; ++j) out[j] = activate(p.activation(), out[j]);
        }
        in = out;
        pos += n_out;
    }
    return acts[pos - 1];
}

} // namespace detail

inline double forward(const MlpParams& params, std::span<const double> x) {
    if (x.size() != params.input_dim()) {
        throw ShapeError("forward: feature dimension " + std::to_string(x.size()) + " != network input " +
                         std::to_string(params.input_dim()));
    }
    std::vector<double> acts(detail::activation_width(params));
    return detail::forward_row(params, x, acts);
}

inline std::vector<double> forward_batch(const MlpParams& params, const FeatureMatrix& xs) {
    std::vector<double> out(xs.rows());
    if (xs.rows() == 0) return out;
    if (xs.cols() != params.input_dim()) {
        throw ShapeError("forward_batch: feature dimension " + std::to_string(xs.cols()) + " != network input " +
                         std::to_string(params.input_dim()));
    }
    std::vector<double> acts(detail::activation_width(params));
    for (std::size_t r = 0; r < xs.rows(); ++r) out[r] = detail::forward_row(params, xs.row(r), acts);
    return out;
}

inline double mse(std::span<const double> preds, std::span<const double> obs) {
    if (preds.size() != obs.size()) throw InvalidInputError("mse: length mismatch");
    if (preds.empty()) throw InvalidInputError("mse: empty input");
    double sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double r = obs[i] - preds[i];
        sum += r * r;
    }
    return sum / static_cast<double>(preds.size());
}

/// l1 * sum|W| + l2 * sum W^2 over all weight matrices (biases excluded).
inline double regularization(const MlpParams& params, const LossWeights& w) {
    double l1 = 0.0;
    double l2 = 0.0;
    for (std::size_t l = 0; l < params.n_layers(); ++l) {
        for (double v : params.weights(l)) {
            l1 += std::abs(v);
            l2 += v * v;
        }
    }
    return w.lambda_l1 * l1 + w.lambda_l2 * l2;
}

inline ObjectiveBreakdown pgnn_objective(const MlpParams& params, const LabeledBatch& labeled,
                                         const UnlabeledBatch& unlabeled, const LossWeights& w) {
    if (labeled.features.rows() == 0) throw InvalidInputError("pgnn_objective: empty labeled batch");
    if (labeled.targets.size() != labeled.features.rows()) throw ShapeError("pgnn_objective: targets/rows mismatch");
    ObjectiveBreakdown out;
    out.empirical = mse(forward_batch(params, labeled.features), labeled.targets);
    out.structural = regularization(params, w);
    if (!unlabeled.empty()) {
        if (unlabeled.features.rows() != unlabeled.shape.cells()) {
            throw ShapeError("pgnn_objective: unlabeled rows do not match grid shape");
        }
        out.physical = physics_loss(TemperatureGrid(unlabeled.shape, forward_batch(params, unlabeled.features)));
    }
    out.total = out.empirical + out.structural + w.lambda_phy * out.physical;
    return out;
}

struct ObjectiveGradient {
    ObjectiveBreakdown objective;
    std::vector<double> grad; ///< same layout as MlpParams::values()
};

/**
 * @brief Objective value and its exact gradient with respect to every weight
 *        and bias.
 *
 * Labeled and unlabeled rows are pushed through one shared backward pass; each
 * row enters with its own upstream derivative dLoss/dy (2(y - obs)/n for
 * labeled rows, lambda_phy * dPhys/dT for grid cells). The L1 subgradient at
 * a zero weight is 0; relu's slope at 0 is 0.
 *
 * The physics path is skipped entirely (value still reported) when
 * lambda_phy == 0 so that the update is bit-identical to the plain objective.
 */
inline ObjectiveGradient gradients(const MlpParams& params, const LabeledBatch& labeled,
                                   const UnlabeledBatch& unlabeled, const LossWeights& w) {
    const std::size_t n_lab = labeled.features.rows();
    if (n_lab == 0) throw InvalidInputError("gradients: empty labeled batch");
    if (labeled.targets.size() != n_lab) throw ShapeError("gradients: targets/rows mismatch");
    if (labeled.features.cols() != params.input_dim()) throw ShapeError("gradients: labeled feature dimension");
    const std::size_t n_unl = unlabeled.features.rows();
    if (n_unl > 0) {
        if (unlabeled.features.cols() != params.input_dim()) throw ShapeError("gradients: unlabeled feature dimension");
        if (n_unl != unlabeled.shape.cells()) throw ShapeError("gradients: unlabeled rows do not match grid shape");
    }

    const auto& sizes = params.layer_sizes();
    const std::size_t width = detail::activation_width(params);
    const std::size_t n_rows = n_lab + n_unl;
    std::vector<double> acts(n_rows * width);
    std::vector<double> preds(n_rows);
    for (std::size_t r = 0; r < n_lab; ++r) {
        preds[r] = detail::forward_row(params, labeled.features.row(r), {acts.data() + r * width, width});
    }
    for (std::size_t r = 0; r < n_unl; ++r) {
        const std::size_t rr = n_lab + r;
        preds[rr] = detail::forward_row(params, unlabeled.features.row(r), {acts.data() + rr * width, width});
    }

    ObjectiveGradient out;
    std::vector<double> upstream(n_rows, 0.0);

    double sq = 0.0;
    const double inv_n = 1.0 / static_cast<double>(n_lab);
    for (std::size_t r = 0; r < n_lab; ++r) {
        const double res = preds[r] - labeled.targets[r];
        sq += res * res;
        upstream[r] = 2.0 * res * inv_n;
    }
    out.objective.empirical = sq / static_cast<double>(n_lab);
    out.objective.structural = regularization(params, w);
    if (n_unl > 0) {
        const TemperatureGrid grid(unlabeled.shape, std::vector<double>(preds.begin() + n_lab, preds.end()));
        out.objective.physical = physics_loss(grid);
        if (w.lambda_phy != 0.0) {
            const std::vector<double> g = physics_loss_gradient(grid);
            for (std::size_t r = 0; r < n_unl; ++r) upstream[n_lab + r] = w.lambda_phy * g[r];
        }
    }
    out.objective.total = out.objective.empirical + out.objective.structural + w.lambda_phy * out.objective.physical;

    out.grad.assign(params.size(), 0.0);
    std::vector<double>& grad = out.grad;

    std::size_t max_w = 0;
    for (std::size_t s : sizes) max_w = std::max(max_w, s);
    std::vector<double> delta(max_w);
    std::vector<double> delta_prev(max_w);

    // Start offset of each layer's outputs inside a row's activation block.
    std::vector<std::size_t> act_pos(params.n_layers());
    for (std::size_t l = 0, pos = 0; l < params.n_layers(); ++l) {
        act_pos[l] = pos;
        pos += sizes[l + 1];
    }

    for (std::size_t r = 0; r < n_rows; ++r) {
        if (upstream[r] == 0.0) continue;
        const double* row_acts = acts.data() + r * width;
        const std::span<const double> x = r < n_lab ? labeled.features.row(r) : unlabeled.features.row(r - n_lab);
        delta[0] = upstream[r];
        for (std::size_t l = params.n_layers(); l-- > 0;) {
            const std::size_t n_in = sizes[l];
            const std::size_t n_out = sizes[l + 1];
            const double* in = l == 0 ? x.data() : row_acts + act_pos[l - 1];
            double* gw = grad.data() + params.weight_offset(l);
            double* gb = grad.data() + params.bias_offset(l);
            for (std::size_t j = 0; j < n_out; ++j) gb[j] += delta[j];
            for (std::size_t k = 0; k < n_in; ++k) {
                const double ik = in[k];
                double* grow = gw + k * n_out;
                for (std::size_t j = 0; j < n_out; ++j) grow[j] += ik * delta[j];
            }
            if (l == 0) break;
            const auto wl = params.weights(l);
            for (std::size_t k = 0; k < n_in; ++k) {
                double s = 0.0;
                const double* wrow = wl.data() + k * n_out;
                for (std::size_t j = 0; j < n_out; ++j) s += wrow[j] * delta[j];
                delta_prev[k] = s * detail::activation_slope(params.activation(), in[k]);
            }
            std::swap(delta, delta_prev);
        }
    }

    for (std::size_t l = 0; l < params.n_layers(); ++l) {
        const auto wl = params.weights(l);
        double* gw = grad.data() + params.weight_offset(l);
        for (std::size_t k = 0; k < wl.size(); ++k) {
            const double v = wl[k];
            const double sign = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
            gw[k] += w.lambda_l1 * sign + 2.0 * w.lambda_l2 * v;
        }
    }
    return out;
}

/// Weights i.i.d. uniform on [0, 1), biases zero; deterministic in `seed`.
inline MlpParams init_params(const std::vector<std::size_t>& layer_sizes, Activation activation, std::uint64_t seed) {
    MlpParams p(layer_sizes, activation);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        for (double& v : p.weights(l)) v = unif(rng);
    }
    return p;
}

/// Default 12 -> 12 -> 12 -> 12 -> 1 layout for a given input width.
inline std::vector<std::size_t> default_layer_sizes(std::size_t input_dim, std::size_t hidden_layers = 3,
                                                    std::size_t hidden_width = 12) {
    std::vector<std::size_t> s{input_dim};
    for (std::size_t i = 0; i < hidden_layers; ++i) s.push_back(hidden_width);
    s.push_back(1);
    return s;
}

/// How the physics-loss weight is derived from the training targets.
enum class LambdaPhyRule {
    VarianceOverDensitySd,  ///< sd(Y)^2 / sd(rho(Y)): units of degC^2 per kg/m^3
    SdOfSquaresOverDensitySd ///< sd(Y^2) / sd(rho(Y))
};

inline LambdaPhyRule parse_lambda_phy_rule(const std::string& s) {
    if (s == "variance") return LambdaPhyRule::VarianceOverDensitySd;
    if (s == "sd-of-squares") return LambdaPhyRule::SdOfSquaresOverDensitySd;
    throw ConfigError("unknown lambda_phy rule '" + s + "' (expected variance or sd-of-squares)");
}

namespace detail {
inline double population_sd(std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));
}
} // namespace detail

inline double default_lambda_phy(std::span<const double> train_targets, LambdaPhyRule rule) {
    if (train_targets.empty()) throw InvalidInputError("default_lambda_phy: no targets");
    std::vector<double> dens(train_targets.size());
    std::vector<double> squares(train_targets.size());
    for (std::size_t i = 0; i < train_targets.size(); ++i) {
        dens[i] = density_of_temperature(train_targets[i]);
        squares[i] = train_targets[i] * train_targets[i];
    }
    const double sd_rho = detail::population_sd(dens);
    if (!(sd_rho > 0.0)) throw InvalidInputError("default_lambda_phy: training densities have zero spread");
    if (rule == LambdaPhyRule::VarianceOverDensitySd) {
        const double sd_y = detail::population_sd(train_targets);
        return sd_y * sd_y / sd_rho;
    }
    return detail::population_sd(squares) / sd_rho;
}

/*
 * Parameter block text layout (all numbers printed with 17 significant
 * digits so that they round-trip exactly):
 *
 *   layers <n> <s_0> ... <s_{n-1}>
 *   activation <tanh|relu>
 *   layer <l> weights <rows> <cols>
 *   <row-major weights, one row per line>
 *   layer <l> biases <cols>
 *   <biases on one line>
 *   ...
 */
inline void write_params(std::ostream& os, const MlpParams& p) {
    const auto& s = p.layer_sizes();
    os << "layers " << s.size();
    for (std::size_t v : s) os << ' ' << v;
    os << "\nactivation " << to_string(p.activation()) << '\n';
    char buf[32];
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        os << "layer " << l << " weights " << s[l] << ' ' << s[l + 1] << '\n';
        for (std::size_t k = 0; k < s[l]; ++k) {
            for (std::size_t j = 0; j < s[l + 1]; ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", p.weight(l, k, j));
                os << (j ? " " : "") << buf;
            }
            os << '\n';
        }
        os << "layer " << l << " biases " << s[l + 1] << '\n';
        const auto b = p.biases(l);
        for (std::size_t j = 0; j < b.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", b[j]);
            os << (j ? " " : "") << buf;
        }
        os << '\n';
    }
}

inline MlpParams read_params(std::istream& is) {
    auto expect = [&](const std::string& word) {
        std::string tok;
        if (!(is >> tok) || tok != word) throw DataError("checkpoint: expected '" + word + "', got '" + tok + "'");
    };
    auto read_size = [&]() {
        std::size_t v = 0;
        if (!(is >> v)) throw DataError("checkpoint: expected integer");
        return v;
    };
    expect("layers");
    const std::size_t n = read_size();
    if (n < 3 || n > 64) throw DataError("checkpoint: bad layer count");
    std::vector<std::size_t> sizes(n);
    for (auto& v : sizes) v = read_size();
    expect("activation");
    std::string act;
    is >> act;
    MlpParams p;
    try {
        p = MlpParams(sizes, parse_activation(act));
    } catch (const Error& e) {
        throw DataError(std::string("checkpoint: ") + e.what());
    }
    auto read_double = [&]() {
        std::string tok;
        if (!(is >> tok)) throw DataError("checkpoint: truncated values");
        try {
            return std::stod(tok);
        } catch (const std::exception&) {
            throw DataError("checkpoint: bad number '" + tok + "'");
        }
    };
    for (std::size_t l = 0; l < p.n_layers(); ++l) {
        expect("layer");
        if (read_size() != l) throw DataError("checkpoint: layer index mismatch");
        expect("weights");
        if (read_size() != sizes[l] || read_size() != sizes[l + 1]) throw DataError("checkpoint: weight shape mismatch");
        for (double& v : p.weights(l)) v = read_double();
        expect("layer");
        if (read_size() != l) throw DataError("checkpoint: layer index mismatch");
        expect("biases");
        if (read_size() != sizes[l + 1]) throw DataError("checkpoint: bias shape mismatch");
        for (double& v : p.biases(l)) v = read_double();
    }
    return p;
}

} // namespace pgnn
