#pragma once

// Nearest-neighbor overfitting test: crop a fixed window from every training
// image, shift the crop diagonally by a few pixels, and measure how often the
// shifted crop's Euclidean nearest neighbor is still its own source image.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "geneval/error.hpp"
#include "geneval/images.hpp"
#include "geneval/parallel.hpp"
#include "geneval/rng.hpp"
#include "geneval/sample_matrix.hpp"

namespace geneval {

/// Windows cropped at offset (shift, shift), one per source image.
struct ShiftedQuerySet {
    std::size_t shift = 0;
    QuantizedImageSet queries;  // geometry (window, window, channels)
    std::vector<std::size_t> source_indices;
};

struct NeighborMatch {
    std::size_t index = 0;
    double squared_distance = 0.0;
};

struct ConfidenceInterval {
    double low = 0.0;
    double high = 1.0;
};

struct PrecisionPoint {
    std::size_t shift = 0;
    double precision = 0.0;
    double ci_low = 0.0;
    double ci_high = 1.0;
    std::size_t n_queries = 0;
};

/// Crops the window x window block at (shift, shift) from the given images
/// (all images when `indices` is empty). Output keeps every channel, flattened
/// row-major with channels interleaved.
inline ShiftedQuerySet extract_window_set(const QuantizedImageSet& images, std::size_t window, std::size_t shift,
                                          const std::vector<std::size_t>& indices = {}) {
    const auto& g = images.geometry();
    require(window >= 1, "extract_shifted_windows: window must be >= 1");
    require(window + shift <= g.height && window + shift <= g.width,
            "extract_shifted_windows: window " + std::to_string(window) + " with shift " + std::to_string(shift) +
                " does not fit in a " + std::to_string(g.height) + "x" + std::to_string(g.width) + " image");
    std::vector<std::size_t> sources = indices;
    if (sources.empty()) {
        sources.resize(images.size());
        for (std::size_t i = 0; i < sources.size(); ++i) {
            sources[i] = i;
        }
    }
    const std::size_t row_bytes = window * g.channels;
    std::vector<std::uint8_t> out(sources.size() * window * row_bytes);
    for (std::size_t q = 0; q < sources.size(); ++q) {
        require(sources[q] < images.size(), "extract_shifted_windows: source index out of range");
        const auto img = images.image(sources[q]);
        for (std::size_t r = 0; r < window; ++r) {
            const std::size_t src = ((r + shift) * g.width + shift) * g.channels;
            std::copy_n(img.begin() + static_cast<std::ptrdiff_t>(src), row_bytes,
                        out.begin() + static_cast<std::ptrdiff_t>((q * window + r) * row_bytes));
        }
    }
    return {shift, QuantizedImageSet(std::move(out), sources.size(), ImageGeometry{window, window, g.channels}),
            std::move(sources)};
}

/// One query set per shift; shift 0 is the reference (top-left window).
inline std::vector<ShiftedQuerySet> extract_shifted_windows(const QuantizedImageSet& images, std::size_t window,
                                                            const std::vector<std::size_t>& shifts,
                                                            const std::vector<std::size_t>& indices = {}) {
    const auto& g = images.geometry();
    for (std::size_t s : shifts) {
        require(window + s <= g.height && window + s <= g.width,
                "extract_shifted_windows: window " + std::to_string(window) + " with shift " + std::to_string(s) +
                    " does not fit in a " + std::to_string(g.height) + "x" + std::to_string(g.width) + " image");
    }
    std::vector<ShiftedQuerySet> out;
    for (std::size_t s : shifts) {
        out.push_back(extract_window_set(images, window, s, indices));
    }
    return out;
}

/// Exact argmin of squared Euclidean distance; ties go to the smallest index.
inline NeighborMatch nearest_neighbor(std::span<const double> query, const SampleMatrix& train) {
    require(train.rows() >= 1, "nearest_neighbor: empty training set");
    require(query.size() == train.cols(), "nearest_neighbor: dimension mismatch");
    NeighborMatch best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < train.rows(); ++i) {
        const double d = squared_distance(query, train.row(i));
        if (d < best.squared_distance) {
            best = {i, d};
        }
    }
    return best;
}

namespace detail {

inline std::int64_t squared_distance_u8(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    // 32768 * 255^2 < 2^31, so int32 partial sums cannot overflow.
    constexpr std::size_t kChunk = 32768;
    std::int64_t total = 0;
    for (std::size_t start = 0; start < n; start += kChunk) {
        const std::size_t stop = std::min(n, start + kChunk);
        std::int32_t acc = 0;
        for (std::size_t i = start; i < stop; ++i) {
            const std::int32_t d = static_cast<std::int32_t>(a[i]) - static_cast<std::int32_t>(b[i]);
            acc += d * d;
        }
        total += acc;
    }
    return total;
}

}  // namespace detail

/// Integer-exact variant over 8-bit pixels.
inline NeighborMatch nearest_neighbor(std::span<const std::uint8_t> query, const QuantizedImageSet& train) {
    require(train.size() >= 1, "nearest_neighbor: empty training set");
    require(query.size() == train.dim(), "nearest_neighbor: dimension mismatch");
    const std::size_t d = train.dim();
    const std::uint8_t* base = train.pixels().data();
    std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const std::int64_t dist = detail::squared_distance_u8(query.data(), base + i * d, d);
        if (dist < best_d) {
            best_d = dist;
            best_i = i;
        }
    }
    return {best_i, static_cast<double>(best_d)};
}

/// Two-sided Clopper-Pearson interval for a binomial proportion.
inline ConfidenceInterval binomial_ci(std::size_t successes, std::size_t n, double level) {
    require(n >= 1, "binomial_ci: n must be >= 1");
    require(successes <= n, "binomial_ci: successes exceed trials");
    require(level > 0.0 && level < 1.0, "binomial_ci: level must lie in (0, 1)");
    const double alpha = 1.0 - level;
    const auto k = static_cast<double>(successes);
    const auto nn = static_cast<double>(n);
    ConfidenceInterval ci;
    ci.low = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, nn - k + 1.0, alpha / 2.0);
    ci.high = successes == n ? 1.0 : boost::math::ibeta_inv(k + 1.0, nn - k, 1.0 - alpha / 2.0);
    ci.low = std::clamp(ci.low, 0.0, 1.0);
    ci.high = std::clamp(ci.high, 0.0, 1.0);
    return ci;
}

struct ShiftPrecisionDetails {
    std::vector<PrecisionPoint> points;
    std::vector<std::size_t> sources;              // sampled query images
    std::vector<std::vector<NeighborMatch>> matches;  // [shift][query]
};

/// Samples `n_queries` source images without replacement; a shifted query is
/// correct when its nearest neighbor among all shift-0 windows is its source.
inline ShiftPrecisionDetails shift_precision_details(const QuantizedImageSet& images, std::size_t window,
                                                     const std::vector<std::size_t>& shifts, std::size_t n_queries,
                                                     RngSeed seed, double level) {
    require(n_queries >= 1, "shift_precision_curve: n_queries must be >= 1");
    require(n_queries <= images.size(), "shift_precision_curve: n_queries exceeds the number of images");
    require(!shifts.empty(), "shift_precision_curve: no shifts given");
    const ShiftedQuerySet reference = extract_window_set(images, window, 0);
    ShiftPrecisionDetails out;
    out.sources = sample_without_replacement(images.size(), n_queries, seed);
    const auto query_sets = extract_shifted_windows(images, window, shifts, out.sources);
    for (const auto& qs : query_sets) {
        std::vector<NeighborMatch> matches(n_queries);
        parallel_for(n_queries, [&](std::size_t begin, std::size_t end) {
            for (std::size_t q = begin; q < end; ++q) {
                matches[q] = nearest_neighbor(qs.queries.image(q), reference.queries);
            }
        });
        std::size_t correct = 0;
        for (std::size_t q = 0; q < n_queries; ++q) {
            correct += matches[q].index == qs.source_indices[q] ? 1 : 0;
        }
        const auto ci = binomial_ci(correct, n_queries, level);
        out.points.push_back({qs.shift, static_cast<double>(correct) / static_cast<double>(n_queries), ci.low, ci.high,
                              n_queries});
        out.matches.push_back(std::move(matches));
    }
    return out;
}

inline std::vector<PrecisionPoint> shift_precision_curve(const QuantizedImageSet& images, std::size_t window,
                                                         const std::vector<std::size_t>& shifts,
                                                         std::size_t n_queries, RngSeed seed, double level) {
    return shift_precision_details(images, window, shifts, n_queries, seed, level).points;
}

}  // namespace geneval
