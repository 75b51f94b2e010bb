#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geneval/error.hpp"

namespace geneval {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ValueRange {
    double lo = 0.0;
    double hi = 0.0;
};

/// N x D block of finite observations, one per row.
class SampleMatrix {
public:
    SampleMatrix() = default;

    explicit SampleMatrix(RowMatrix data, std::optional<ValueRange> range = std::nullopt)
        : data_(std::move(data)), range_(range) {
        require(data_.rows() >= 1 && data_.cols() >= 1, "SampleMatrix: need at least one row and one column");
        if (range_) {
            require(range_->hi > range_->lo, "SampleMatrix: value range must have hi > lo");
        }
        for (Eigen::Index i = 0; i < data_.size(); ++i) {
            const double v = data_.data()[i];
            if (!std::isfinite(v)) {
                throw Error("SampleMatrix: non-finite entry at flat index " + std::to_string(i));
            }
            if (range_ && !(v >= range_->lo && v <= range_->hi)) {
                throw Error("SampleMatrix: entry " + std::to_string(v) + " outside declared value range");
            }
        }
    }

    /// Builds from a flat row-major buffer.
    static SampleMatrix from_rows(std::size_t n, std::size_t d, const std::vector<double>& values,
                                  std::optional<ValueRange> range = std::nullopt) {
        require(values.size() == n * d, "SampleMatrix: buffer size does not match shape");
        RowMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        std::copy(values.begin(), values.end(), m.data());
        return SampleMatrix(std::move(m), range);
    }

    [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(data_.rows()); }
    [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(data_.cols()); }

    [[nodiscard]] std::span<const double> row(std::size_t i) const {
        return {data_.data() + i * cols(), cols()};
    }

    [[nodiscard]] const RowMatrix& matrix() const { return data_; }
    [[nodiscard]] const std::optional<ValueRange>& value_range() const { return range_; }

    /// Rows [begin, end) as a new matrix.
    [[nodiscard]] SampleMatrix slice(std::size_t begin, std::size_t end) const {
        require(begin < end && end <= rows(), "SampleMatrix::slice: bad row range");
        return SampleMatrix(data_.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)),
                            range_);
    }

    [[nodiscard]] SampleMatrix select(const std::vector<std::size_t>& indices) const {
        require(!indices.empty(), "SampleMatrix::select: empty index list");
        RowMatrix out(static_cast<Eigen::Index>(indices.size()), data_.cols());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            require(indices[i] < rows(), "SampleMatrix::select: index out of range");
            out.row(static_cast<Eigen::Index>(i)) = data_.row(static_cast<Eigen::Index>(indices[i]));
        }
        return SampleMatrix(std::move(out), range_);
    }

private:
    RowMatrix data_;
    std::optional<ValueRange> range_;
};

/// Mean with its standard error, accumulated sequentially in index order.
struct MeanEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

inline MeanEstimate mean_and_std_error(std::span<const double> values) {
    require(!values.empty(), "mean_and_std_error: empty input");
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    const double mean = sum / static_cast<double>(values.size());
    if (values.size() < 2 || !std::isfinite(mean)) {
        return {mean, values.size() < 2 ? 0.0 : std::numeric_limits<double>::infinity()};
    }
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double var = ss / static_cast<double>(values.size() - 1);
    return {mean, std::sqrt(var / static_cast<double>(values.size()))};
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace geneval
