/**
 * @file optim.hpp
 * @brief AdaDelta with global-norm gradient clipping, mini-batching and the
 *        early-stopped training loop.
 *
 * AdaDelta update per parameter x with gradient g:
 *
 *   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
 *   dx       = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
 *   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
 *   x       <- x + dx
 */

#pragma once

#include "pgnn/error.hpp"
#include "pgnn/features.hpp"
#include "pgnn/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pgnn {

/// Scales `grads` in place so that its global L2 norm is at most `clip_norm`.
/// Returns true if scaling happened.
inline bool clip_by_global_norm(std::span<double> grads, double clip_norm) {
    if (!(clip_norm > 0.0)) throw ConfigError("clip_by_global_norm: clip_norm must be positive");
    double sq = 0.0;
    for (double g : grads) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm) return false;
    const double scale = clip_norm / norm;
    for (double& g : grads) g *= scale;
    return true;
}

struct AdaDeltaState {
    std::vector<double> accum_grad_sq;
    std::vector<double> accum_update_sq;
    double decay_rho = 0.95;
    double epsilon = 1e-6;

    AdaDeltaState() = default;
    explicit AdaDeltaState(std::size_t n, double rho = 0.95, double eps = 1e-6)
        : accum_grad_sq(n, 0.0), accum_update_sq(n, 0.0), decay_rho(rho), epsilon(eps) {
        if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("AdaDelta: decay must lie in (0, 1)");
        if (!(eps > 0.0)) throw ConfigError("AdaDelta: epsilon must be positive");
    }
};

inline void adadelta_step(std::span<double> params, std::span<const double> grads, AdaDeltaState& state) {
    if (params.size() != grads.size() || params.size() != state.accum_grad_sq.size() ||
        params.size() != state.accum_update_sq.size()) {
        throw ShapeError("adadelta_step: parameter/gradient/state sizes differ");
    }
    const double rho = state.decay_rho;
    const double eps = state.epsilon;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& eg = state.accum_grad_sq[i];
        double& ex = state.accum_update_sq[i];
        eg = rho * eg + (1.0 - rho) * g * g;
        const double dx = -std::sqrt(ex + eps) / std::sqrt(eg + eps) * g;
        ex = rho * ex + (1.0 - rho) * dx * dx;
        params[i] += dx;
    }
}

/// One shuffled pass over n_items split into chunks of batch_size.
inline std::vector<std::vector<std::size_t>> make_batches(std::size_t n_items, std::size_t batch_size,
                                                          std::mt19937_64& rng) {
    if (n_items == 0) throw ConfigError("make_batches: no items");
    if (batch_size == 0) throw ConfigError("make_batches: batch_size must be >= 1");
    std::vector<std::size_t> perm(n_items);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < n_items; start += batch_size) {
        const std::size_t end = std::min(n_items, start + batch_size);
        out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

enum class ModelKind {
    NN,     ///< drivers only, no physics loss
    PGNN0,  ///< drivers + simulated temperature, no physics loss
    PGNN    ///< drivers + simulated temperature, physics loss on unlabeled grid
};

inline std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::NN: return "NN";
    case ModelKind::PGNN0: return "PGNN0";
    case ModelKind::PGNN: return "PGNN";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "NN") return ModelKind::NN;
    if (s == "PGNN0") return ModelKind::PGNN0;
    if (s == "PGNN") return ModelKind::PGNN;
    throw ConfigError("unknown model kind '" + s + "'");
}

/// Whether a model consumes the simulated-temperature feature.
inline bool uses_simulated_feature(ModelKind k) { return k != ModelKind::NN; }

struct TrainConfig {
    std::size_t batch_size = 1000;
    std::size_t max_epochs = 10000;
    std::size_t patience = 500;
    double val_fraction = 0.10;
    double clip_norm = 1.0;
    /// Grid cells per step for the physics term, rounded up to whole time
    /// columns. 0 means "same as batch_size".
    std::size_t unlabeled_batch_size = 0;
    /// Evaluate the physics term on the whole grid at every step.
    bool phys_full_grid = false;
    double min_improvement = 1e-9;
    double adadelta_rho = 0.95;
    double adadelta_eps = 1e-6;
    std::size_t hidden_layers = 3;
    std::size_t hidden_width = 12;
    Activation activation = Activation::Tanh;
    std::uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
        if (patience < 1) throw ConfigError("patience must be >= 1");
        if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
        if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
        if (hidden_layers < 1 || hidden_width < 1) throw ConfigError("network needs >= 1 hidden layer of width >= 1");
        if (!(min_improvement >= 0.0)) throw ConfigError("min_improvement must be >= 0");
        if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw ConfigError("adadelta_rho must lie in (0, 1)");
        if (!(adadelta_eps > 0.0)) throw ConfigError("adadelta_eps must be positive");
    }
};

struct EpochRecord {
    std::size_t epoch = 0; ///< 1-based
    ObjectiveBreakdown train;  ///< mean over the epoch's steps, evaluated before each update
    double val_mse = 0.0;
    std::size_t clipped_steps = 0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_mse = std::numeric_limits<double>::infinity();
    double lambda_phy = 0.0;
};

inline void write_train_log_csv(std::ostream& os, const TrainLog& log) {
    os << "epoch,empirical,structural,physical,total,val_mse,clipped_steps\n";
    char buf[256];
    for (const auto& e : log.epochs) {
        std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g,%zu\n", e.epoch, e.train.empirical,
                      e.train.structural, e.train.physical, e.train.total, e.val_mse, e.clipped_steps);
        os << buf;
    }
}

/// Patience-based stopping rule on a validation score (lower is better).
class EarlyStopping {
public:
    EarlyStopping(std::size_t patience, double min_improvement)
        : patience_(patience), min_improvement_(min_improvement) {}

    /// Records `score` for `epoch` (1-based). Returns true if it is a new best.
    bool observe(std::size_t epoch, double score) {
        if (best_epoch_ == 0 || score < best_ - min_improvement_) {
            best_ = score;
            best_epoch_ = epoch;
            last_epoch_ = epoch;
            return true;
        }
        last_epoch_ = epoch;
        return false;
    }

    bool should_stop() const { return best_epoch_ != 0 && last_epoch_ - best_epoch_ >= patience_; }
    std::size_t best_epoch() const { return best_epoch_; }
    double best() const { return best_; }

private:
    std::size_t patience_;
    double min_improvement_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t last_epoch_ = 0;
};

/// Standardized features (last column = simulated temperature) and targets.
struct TrainingData {
    FeatureMatrix features;
    std::vector<double> targets;

    std::size_t size() const { return targets.size(); }
};

struct TrainResult {
    MlpParams params;
    TrainLog log;
};

namespace detail {

/// Drops the simulated-temperature column for models that must not see it.
inline FeatureMatrix model_features(ModelKind kind, const FeatureMatrix& full) {
    return uses_simulated_feature(kind) ? full : full.leading_columns(full.cols() - 1);
}

inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tag)};
    return std::mt19937_64(seq);
}

/// Copies the listed time columns of `grid` into a compact sub-grid batch.
inline UnlabeledBatch grid_columns(const UnlabeledBatch& grid, std::span<const std::size_t> cols) {
    const std::size_t nd = grid.shape.n_depths;
    UnlabeledBatch out;
    out.shape = GridShape{nd, cols.size(), grid.shape.depth_step};
    out.features = FeatureMatrix(nd * cols.size(), grid.features.cols());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (std::size_t i = 0; i < nd; ++i) {
            const auto src = grid.features.row(grid.shape.index(i, cols[c]));
            std::copy(src.begin(), src.end(), out.features.row(c * nd + i).begin());
        }
    }
    return out;
}

} // namespace detail

/**
 * @brief Trains one model with an explicit validation set.
 *
 * `train_set`, `val_set` and `grid` carry all feature columns; NN models have
 * the trailing simulated-temperature column removed here. For NN and PGNN0
 * the physics weight is forced to 0. Returns the parameters of the epoch
 * with the lowest validation MSE.
 */
inline TrainResult fit(ModelKind kind, const TrainingData& train_set, const TrainingData& val_set,
                       const UnlabeledBatch& grid, const TrainConfig& cfg, LossWeights weights) {
    cfg.validate();
    weights.validate();
    if (train_set.size() == 0) throw ConfigError("fit: empty training set");
    if (val_set.size() == 0) throw ConfigError("fit: empty validation set");
    if (kind != ModelKind::PGNN) weights.lambda_phy = 0.0;
    const bool use_grid = kind == ModelKind::PGNN;
    if (use_grid && grid.empty()) throw ConfigError("fit: PGNN requires a non-empty unlabeled grid");
    if (use_grid && grid.features.rows() != grid.shape.cells()) throw ShapeError("fit: grid rows do not match shape");

    const FeatureMatrix x_train = detail::model_features(kind, train_set.features);
    const FeatureMatrix x_val = detail::model_features(kind, val_set.features);
    UnlabeledBatch full_grid;
    if (use_grid) {
        full_grid.shape = grid.shape;
        full_grid.features = detail::model_features(kind, grid.features);
    }

    MlpParams params = init_params(default_layer_sizes(x_train.cols(), cfg.hidden_layers, cfg.hidden_width),
                                   cfg.activation, cfg.seed);
    AdaDeltaState state(params.size(), cfg.adadelta_rho, cfg.adadelta_eps);
    std::mt19937_64 batch_rng = detail::stream(cfg.seed, 2);
    std::mt19937_64 grid_rng = detail::stream(cfg.seed, 3);

    std::size_t cols_per_step = 0;
    std::vector<std::size_t> col_pool;
    if (use_grid && !cfg.phys_full_grid) {
        const std::size_t cells = cfg.unlabeled_batch_size ? cfg.unlabeled_batch_size : cfg.batch_size;
        const std::size_t nd = grid.shape.n_depths;
        cols_per_step = std::min(grid.shape.n_times, (cells + nd - 1) / nd);
        col_pool.resize(grid.shape.n_times);
        std::iota(col_pool.begin(), col_pool.end(), std::size_t{0});
    }

    TrainResult result;
    result.log.lambda_phy = weights.lambda_phy;
    EarlyStopping stopper(cfg.patience, cfg.min_improvement);
    MlpParams best = params;
    UnlabeledBatch no_grid;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        const auto batches = make_batches(x_train.rows(), cfg.batch_size, batch_rng);
        for (const auto& idx : batches) {
            LabeledBatch lb;
            lb.features = x_train.select_rows(idx);
            lb.targets.resize(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) lb.targets[k] = train_set.targets[idx[k]];

            const UnlabeledBatch* ub = &no_grid;
            UnlabeledBatch sampled;
            if (use_grid) {
                if (cfg.phys_full_grid) {
                    ub = &full_grid;
                } else {
                    // partial Fisher-Yates: first cols_per_step entries become the sample
                    for (std::size_t c = 0; c < cols_per_step; ++c) {
                        std::uniform_int_distribution<std::size_t> pick(c, col_pool.size() - 1);
                        std::swap(col_pool[c], col_pool[pick(grid_rng)]);
                    }
                    sampled = detail::grid_columns(full_grid, std::span(col_pool).first(cols_per_step));
                    ub = &sampled;
                }
            }

            ObjectiveGradient og = gradients(params, lb, *ub, weights);
            if (!std::isfinite(og.objective.total)) {
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch));
            }
            if (clip_by_global_norm(og.grad, cfg.clip_norm)) ++rec.clipped_steps;
            adadelta_step(params.values(), og.grad, state);

            rec.train.empirical += og.objective.empirical;
            rec.train.structural += og.objective.structural;
            rec.train.physical += og.objective.physical;
            rec.train.total += og.objective.total;
        }
        const double nb = static_cast<double>(batches.size());
        rec.train.empirical /= nb;
        rec.train.structural /= nb;
        rec.train.physical /= nb;
        rec.train.total /= nb;

        rec.val_mse = mse(forward_batch(params, x_val), val_set.targets);
        if (!std::isfinite(rec.val_mse)) {
            throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
        }
        result.log.epochs.push_back(rec);
        if (stopper.observe(epoch, rec.val_mse)) best = params;
        if (stopper.should_stop()) break;
    }
    result.log.best_epoch = stopper.best_epoch();
    result.log.best_val_mse = stopper.best();
    result.params = std::move(best);
    return result;
}

/// Random (seeded) split of `data` into training and validation parts.
inline std::pair<TrainingData, TrainingData> split_validation(const TrainingData& data, double val_fraction,
                                                              std::uint64_t seed) {
    if (data.size() < 2) throw ConfigError("split_validation: need at least 2 labeled rows");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    std::vector<std::size_t> perm(data.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng = detail::stream(seed, 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(data.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, data.size() - 1);
    // keep original row order inside each part
    std::vector<std::size_t> val_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(val_idx.begin(), val_idx.end());
    std::sort(train_idx.begin(), train_idx.end());
    auto take = [&](const std::vector<std::size_t>& idx) {
        TrainingData out;
        out.features = data.features.select_rows(idx);
        out.targets.reserve(idx.size());
        for (std::size_t i : idx) out.targets.push_back(data.targets[i]);
        return out;
    };
    return {take(train_idx), take(val_idx)};
}

/// Full protocol: seeded validation split, then fit().
inline TrainResult train(ModelKind kind, const TrainingData& labeled, const UnlabeledBatch& grid,
                         const TrainConfig& cfg, const LossWeights& weights) {
    cfg.validate();
    if (labeled.size() == 0) throw ConfigError("train: empty labeled data");
    auto [tr, val] = split_validation(labeled, cfg.val_fraction, cfg.seed);
    return fit(kind, tr, val, grid, cfg, weights);
}

} // namespace pgnn
