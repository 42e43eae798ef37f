#pragma once

#include <stdexcept>
#include <vector>

#include "lifecal/tensor.hpp"

namespace lifecal {

// Per-feature min-max scaling to [0,1], fitted on the training feature set.
// Constant features map to 0. Queries outside the fitted range pass through
// unclamped (the affine map extrapolates).
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(std::vector<double> mins, std::vector<double> maxs)
        : mins_(std::move(mins)), maxs_(std::move(maxs)) {
        if (mins_.size() != maxs_.size())
            throw std::invalid_argument("minmax scaler: bounds size mismatch");
        rebuild_scale();
    }

    void fit(const Tensor& rows) {
        if (rows.rows() == 0) throw std::invalid_argument("minmax scaler: empty fit set");
        mins_.assign(rows.cols(), 0.0);
        maxs_.assign(rows.cols(), 0.0);
        for (std::size_t j = 0; j < rows.cols(); ++j) {
            double lo = rows(0, j), hi = rows(0, j);
            for (std::size_t i = 1; i < rows.rows(); ++i) {
                lo = std::min(lo, rows(i, j));
                hi = std::max(hi, rows(i, j));
            }
            mins_[j] = lo;
            maxs_[j] = hi;
        }
        rebuild_scale();
    }

    std::size_t features() const { return mins_.size(); }
    const std::vector<double>& mins() const { return mins_; }
    const std::vector<double>& maxs() const { return maxs_; }

    double apply_one(double x, std::size_t j) const { return (x - mins_[j]) * scale_[j]; }
    double invert_one(double s, std::size_t j) const { return mins_[j] + s * (maxs_[j] - mins_[j]); }

    void apply_row(const double* in, double* out) const {
        for (std::size_t j = 0; j < mins_.size(); ++j) out[j] = apply_one(in[j], j);
    }

    bool operator==(const MinMaxScaler& o) const { return mins_ == o.mins_ && maxs_ == o.maxs_; }

private:
    void rebuild_scale() {
        scale_.resize(mins_.size());
        for (std::size_t j = 0; j < mins_.size(); ++j)
            scale_[j] = maxs_[j] > mins_[j] ? 1.0 / (maxs_[j] - mins_[j]) : 0.0;
    }

    std::vector<double> mins_, maxs_, scale_;
};

} // namespace lifecal
