/**
 * @file features.hpp
 * @brief Dense row-major feature matrix shared by the data, model and
 *        evaluation layers.
 */

#pragma once

#include "pgnn/error.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace pgnn {

class FeatureMatrix {
public:
    FeatureMatrix() = default;
    FeatureMatrix(std::size_t n_rows, std::size_t n_cols)
        : n_rows_(n_rows), n_cols_(n_cols), data_(n_rows * n_cols, 0.0) {}
    FeatureMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<double> data)
        : n_rows_(n_rows), n_cols_(n_cols), data_(std::move(data)) {
        if (data_.size() != n_rows_ * n_cols_) {
            throw ShapeError("FeatureMatrix: data size " + std::to_string(data_.size()) +
                             " != " + std::to_string(n_rows_) + "x" + std::to_string(n_cols_));
        }
    }

    std::size_t rows() const { return n_rows_; }
    std::size_t cols() const { return n_cols_; }
    bool empty() const { return n_rows_ == 0; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * n_cols_, n_cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * n_cols_, n_cols_}; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * n_cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * n_cols_ + c]; }

    std::span<const double> data() const { return data_; }

    /// Copy of the listed rows, in order.
    FeatureMatrix select_rows(std::span<const std::size_t> idx) const {
        FeatureMatrix out(idx.size(), n_cols_);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            const auto src = row(idx[k]);
            std::copy(src.begin(), src.end(), out.row(k).begin());
        }
        return out;
    }

    /// Copy with only the first `n` columns.
    FeatureMatrix leading_columns(std::size_t n) const {
        if (n > n_cols_) throw ShapeError("FeatureMatrix: too many columns requested");
        FeatureMatrix out(n_rows_, n);
        for (std::size_t r = 0; r < n_rows_; ++r) {
            for (std::size_t c = 0; c < n; ++c) out(r, c) = (*this)(r, c);
        }
        return out;
    }

private:
    std::size_t n_rows_ = 0;
    std::size_t n_cols_ = 0;
    std::vector<double> data_;
};

} // namespace pgnn
