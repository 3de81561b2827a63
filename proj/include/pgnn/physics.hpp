/**
 * @file physics.hpp
 * @brief Temperature-density law of fresh water and the density-depth
 *        monotonicity constraint used as a physics-based training loss.
 *
 * Density of water as a function of temperature (T in deg C, rho in kg/m^3):
 *
 *   rho(T) = 1000 * (1 - (T + 288.9414) (T - 3.9863)^2 / (508929.2 (T + 68.12963)))
 *
 * Water is densest near 4 C, so a stable water column has density that does
 * not decrease with depth. For a depth x time grid of temperature estimates,
 *
 *   delta[i,t] = rho(T[i,t]) - rho(T[i+1,t])      (depth i shallower than i+1)
 *
 * is positive wherever the estimate puts lighter water below heavier water.
 * The physics loss is the mean of relu(delta) over all consecutive depth
 * pairs and time steps.
 *
 * Grids are stored time-major: all depths of time step 0 (shallow to deep),
 * then all depths of time step 1, and so on. Cell (i, t) lives at
 * t * n_depths + i.
 */

#pragma once

#include "pgnn/error.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pgnn {

namespace water {
inline constexpr double kRefDensity = 1000.0;
inline constexpr double kOffsetA = 288.9414;
inline constexpr double kMaxDensityTemp = 3.9863;
inline constexpr double kScale = 508929.2;
inline constexpr double kOffsetB = 68.12963;
} // namespace water

/// Relative density deficit 1 - rho/1000 (dimensionless, >= 0 near 4 C).
/// Differences of deficits keep full precision where differences of
/// densities near 1000 would cancel.
inline double density_deficit(double t) {
    if (!std::isfinite(t)) {
        throw InvalidInputError("density_of_temperature: non-finite temperature");
    }
    using namespace water;
    const double dt = t - kMaxDensityTemp;
    return (t + kOffsetA) * dt * dt / (kScale * (t + kOffsetB));
}

/// Density (kg/m^3) of fresh water at temperature `t` (deg C).
inline double density_of_temperature(double t) { return water::kRefDensity * (1.0 - density_deficit(t)); }

/// Closed-form d(rho)/dT in kg/m^3 per deg C.
inline double d_density_d_temperature(double t) {
    if (!std::isfinite(t)) {
        throw InvalidInputError("d_density_d_temperature: non-finite temperature");
    }
    using namespace water;
    const double dt = t - kMaxDensityTemp;
    const double num = (t + kOffsetA) * dt * dt;
    const double dnum = dt * dt + 2.0 * (t + kOffsetA) * dt;
    const double den = t + kOffsetB;
    // rho = K (1 - num / (S den))  =>  rho' = -K (num' den - num) / (S den^2)
    return -kRefDensity * (dnum * den - num) / (kScale * den * den);
}

/// Regular depth x time lattice. Depths are depth_step * i, i = 0..n_depths-1.
struct GridShape {
    std::size_t n_depths = 0;
    std::size_t n_times = 0;
    double depth_step = 0.5;

    void validate() const {
        if (n_depths < 2) throw ShapeError("GridShape: need at least 2 depths");
        if (n_times < 1) throw ShapeError("GridShape: need at least 1 time step");
        if (!(depth_step > 0.0) || !std::isfinite(depth_step)) {
            throw ShapeError("GridShape: depth_step must be positive");
        }
    }

    std::size_t cells() const { return n_depths * n_times; }
    std::size_t index(std::size_t depth_i, std::size_t time_t) const { return time_t * n_depths + depth_i; }
    double depth(std::size_t depth_i) const { return depth_step * static_cast<double>(depth_i); }

    bool operator==(const GridShape&) const = default;
};

/// A complete grid of values (temperatures or densities), time-major.
class TemperatureGrid {
public:
    TemperatureGrid() = default;

    TemperatureGrid(GridShape shape, std::vector<double> values)
        : shape_(shape), values_(std::move(values)) {
        shape_.validate();
        if (values_.size() != shape_.cells()) {
            throw ShapeError("TemperatureGrid: expected " + std::to_string(shape_.cells()) +
                             " cells, got " + std::to_string(values_.size()));
        }
    }

    /// Grid with every cell set to `value`.
    static TemperatureGrid filled(GridShape shape, double value) {
        shape.validate();
        return TemperatureGrid(shape, std::vector<double>(shape.cells(), value));
    }

    const GridShape& shape() const { return shape_; }
    std::span<const double> values() const { return values_; }

    double operator()(std::size_t depth_i, std::size_t time_t) const {
        return values_[shape_.index(depth_i, time_t)];
    }
    double& operator()(std::size_t depth_i, std::size_t time_t) {
        return values_[shape_.index(depth_i, time_t)];
    }

private:
    GridShape shape_{};
    std::vector<double> values_;
};

/// (n_depths - 1) x n_times density differences, time-major.
class ViolationMatrix {
public:
    ViolationMatrix(std::size_t n_pairs, std::size_t n_times)
        : n_pairs_(n_pairs), n_times_(n_times), deltas_(n_pairs * n_times, 0.0) {}

    std::size_t n_pairs() const { return n_pairs_; }
    std::size_t n_times() const { return n_times_; }
    std::span<const double> values() const { return deltas_; }

    double operator()(std::size_t pair_i, std::size_t time_t) const { return deltas_[time_t * n_pairs_ + pair_i]; }
    double& operator()(std::size_t pair_i, std::size_t time_t) { return deltas_[time_t * n_pairs_ + pair_i]; }

private:
    std::size_t n_pairs_;
    std::size_t n_times_;
    std::vector<double> deltas_;
};

inline ViolationMatrix density_deltas(const TemperatureGrid& temps) {
    const GridShape& s = temps.shape();
    s.validate();
    ViolationMatrix out(s.n_depths - 1, s.n_times);
    for (std::size_t t = 0; t < s.n_times; ++t) {
        double upper = density_deficit(temps(0, t));
        for (std::size_t i = 0; i + 1 < s.n_depths; ++i) {
            const double lower = density_deficit(temps(i + 1, t));
            out(i, t) = water::kRefDensity * (lower - upper);
            upper = lower;
        }
    }
    return out;
}

/// Raw-array overload; `temps` must be time-major with shape.cells() entries.
inline ViolationMatrix density_deltas(std::span<const double> temps, const GridShape& shape) {
    return density_deltas(TemperatureGrid(shape, std::vector<double>(temps.begin(), temps.end())));
}

/// Mean of relu(delta) over every consecutive depth pair and time step.
inline double physics_loss(const TemperatureGrid& temps) {
    const ViolationMatrix d = density_deltas(temps);
    double sum = 0.0;
    for (double v : d.values()) {
        if (v > 0.0) sum += v;
    }
    return sum / static_cast<double>(d.values().size());
}

inline double physics_loss(std::span<const double> temps, const GridShape& shape) {
    return physics_loss(TemperatureGrid(shape, std::vector<double>(temps.begin(), temps.end())));
}

/// Gradient of physics_loss with respect to each temperature cell (time-major).
/// relu'(0) is taken as 0.
inline std::vector<double> physics_loss_gradient(const TemperatureGrid& temps) {
    const GridShape& s = temps.shape();
    const ViolationMatrix d = density_deltas(temps);
    const double scale = 1.0 / static_cast<double>(d.values().size());
    std::vector<double> grad(s.cells(), 0.0);
    for (std::size_t t = 0; t < s.n_times; ++t) {
        for (std::size_t i = 0; i < s.n_depths; ++i) {
            double coeff = 0.0;
            if (i + 1 < s.n_depths && d(i, t) > 0.0) coeff += 1.0;
            if (i > 0 && d(i - 1, t) > 0.0) coeff -= 1.0;
            if (coeff != 0.0) {
                grad[s.index(i, t)] = coeff * scale * d_density_d_temperature(temps(i, t));
            }
        }
    }
    return grad;
}

/// Generic constraint penalty: sum of squared equality residuals plus the sum
/// of relu over inequality values (constraints of the form h <= 0).
inline double generic_constraint_loss(std::span<const double> equality_residuals,
                                      std::span<const double> inequality_values) {
    double sum = 0.0;
    for (double g : equality_residuals) {
        if (!std::isfinite(g)) throw InvalidInputError("generic_constraint_loss: non-finite residual");
        sum += g * g;
    }
    for (double h : inequality_values) {
        if (!std::isfinite(h)) throw InvalidInputError("generic_constraint_loss: non-finite value");
        if (h > 0.0) sum += h;
    }
    return sum;
}

} // namespace pgnn
