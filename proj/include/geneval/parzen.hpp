#pragma once

// Parzen-window (Gaussian KDE) log-likelihood estimates, validation-based
// bandwidth selection, convergence sweeps, and the k-means sample generator
// that scores well under Parzen estimates while having no density at all.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "geneval/density.hpp"
#include "geneval/error.hpp"
#include "geneval/parallel.hpp"
#include "geneval/rng.hpp"
#include "geneval/sample_matrix.hpp"

namespace geneval {

struct ParzenEstimator {
    SampleMatrix centers;
    double bandwidth = 1.0;

    ParzenEstimator(SampleMatrix c, double h) : centers(std::move(c)), bandwidth(h) {
        require(centers.rows() >= 1, "ParzenEstimator: need at least one center");
        require(std::isfinite(bandwidth) && bandwidth > 0.0, "ParzenEstimator: bandwidth must be positive");
    }
};

/// Exact squared Euclidean distances, rows of `a` against rows of `b`.
inline RowMatrix pairwise_squared_distances(const SampleMatrix& a, const SampleMatrix& b) {
    require(a.cols() == b.cols(), "pairwise_squared_distances: dimension mismatch (" + std::to_string(a.cols()) +
                                      " vs " + std::to_string(b.cols()) + ")");
    RowMatrix out(static_cast<Eigen::Index>(a.rows()), static_cast<Eigen::Index>(b.rows()));
    parallel_for(a.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = 0; j < b.rows(); ++j) {
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = squared_distance(a.row(i), b.row(j));
            }
        }
    });
    return out;
}

namespace detail {

/// Per-row KDE log-density from a precomputed (rows x centers) distance matrix.
inline std::vector<double> kde_scores_from_distances(const RowMatrix& sq_dists, std::size_t dim, double bandwidth) {
    const auto rows = static_cast<std::size_t>(sq_dists.rows());
    const auto m = static_cast<std::size_t>(sq_dists.cols());
    const double d = static_cast<double>(dim);
    const double offset = -std::log(static_cast<double>(m)) - d * std::log(bandwidth) - 0.5 * d * kLogTwoPi;
    const double inv_2h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    std::vector<double> out(rows);
    parallel_for(rows, [&](std::size_t begin, std::size_t end) {
        std::vector<double> terms(m);
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                terms[j] = -sq_dists(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * inv_2h2;
            }
            out[i] = log_sum_exp(terms) + offset;
        }
    });
    return out;
}

}  // namespace detail

/// Per-row log-density of `test` under the KDE.
inline std::vector<double> parzen_scores(const ParzenEstimator& est, const SampleMatrix& test) {
    require(est.centers.cols() == test.cols(), "parzen_log_likelihood: dimension mismatch (" +
                                                   std::to_string(est.centers.cols()) + " vs " +
                                                   std::to_string(test.cols()) + ")");
    return detail::kde_scores_from_distances(pairwise_squared_distances(test, est.centers), test.cols(),
                                             est.bandwidth);
}

/// Mean test log-likelihood (nats per item) under the KDE.
inline double parzen_log_likelihood(const ParzenEstimator& est, const SampleMatrix& test) {
    return mean_and_std_error(parzen_scores(est, test)).mean;
}

inline MeanEstimate parzen_log_likelihood_with_error(const ParzenEstimator& est, const SampleMatrix& test) {
    return mean_and_std_error(parzen_scores(est, test));
}

/// Root of the mean per-dimension variance; the natural unit for bandwidths.
inline double data_scale(const SampleMatrix& samples) {
    if (samples.rows() < 2) {
        return 1.0;
    }
    const Eigen::RowVectorXd mean = samples.matrix().colwise().mean();
    const double ss = (samples.matrix().rowwise() - mean).squaredNorm();
    const double var = ss / (static_cast<double>(samples.rows() - 1) * static_cast<double>(samples.cols()));
    return var > 0.0 ? std::sqrt(var) : 1.0;
}

/// `points` log-spaced values over [lo, hi] x scale.
inline std::vector<double> log_spaced_grid(double scale, std::size_t points = 20, double lo = 0.01, double hi = 1.0) {
    require(points >= 1 && lo > 0.0 && hi >= lo && scale > 0.0, "log_spaced_grid: invalid range");
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
        grid[i] = scale * std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
    }
    return grid;
}

struct BandwidthScore {
    double bandwidth = 0.0;
    double mean_ll = 0.0;
};

/// Mean validation log-likelihood for every grid bandwidth (distances computed once).
inline std::vector<BandwidthScore> bandwidth_scores(const SampleMatrix& samples, const SampleMatrix& validation,
                                                    const std::vector<double>& grid) {
    require(!grid.empty(), "select_bandwidth: empty bandwidth grid");
    for (double h : grid) {
        require(std::isfinite(h) && h > 0.0, "select_bandwidth: bandwidths must be positive");
    }
    const RowMatrix sq = pairwise_squared_distances(validation, samples);
    std::vector<BandwidthScore> out;
    out.reserve(grid.size());
    for (double h : grid) {
        out.push_back({h, mean_and_std_error(detail::kde_scores_from_distances(sq, samples.cols(), h)).mean});
    }
    return out;
}

/// Grid bandwidth maximizing mean validation log-likelihood; ties go to the smaller bandwidth.
inline double select_bandwidth(const SampleMatrix& samples, const SampleMatrix& validation,
                               const std::vector<double>& grid) {
    require(validation.rows() >= 1, "select_bandwidth: empty validation set");
    const auto scores = bandwidth_scores(samples, validation, grid);
    BandwidthScore best = scores.front();
    for (const auto& s : scores) {
        if (s.mean_ll > best.mean_ll || (s.mean_ll == best.mean_ll && s.bandwidth < best.bandwidth)) {
            best = s;
        }
    }
    return best.bandwidth;
}

struct SweepRow {
    std::size_t sample_count = 0;
    double bandwidth_used = 0.0;
    double mean_test_ll = 0.0;
    double std_error = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double reference = 0.0;  // true model's mean test log-likelihood
    double reference_std_error = 0.0;
};

/// For each n: draw n samples from the true model, hold out the last 10% for
/// bandwidth selection, and score the test set with a KDE on the first 90%.
/// When n < 10 there is no held-out part and the centers double as validation.
template <typename Model>
    requires requires(const Model& m, std::span<const double> x, std::size_t n, RngSeed s) {
        { m.dim() } -> std::convertible_to<std::size_t>;
        { m.log_density(x) } -> std::convertible_to<double>;
        { sample(m, n, s) } -> std::same_as<SampleMatrix>;
    }
SweepResult parzen_convergence_sweep(const Model& true_model, const std::vector<std::size_t>& sample_counts,
                                     const SampleMatrix& test, const std::vector<double>& bandwidth_grid, RngSeed seed) {
    require(!sample_counts.empty(), "parzen_convergence_sweep: no sample counts");
    require(test.cols() == true_model.dim(), "parzen_convergence_sweep: test dimension does not match model");
    for (std::size_t i = 0; i < sample_counts.size(); ++i) {
        require(sample_counts[i] >= 1, "parzen_convergence_sweep: sample counts must be >= 1");
        require(i == 0 || sample_counts[i] > sample_counts[i - 1],
                "parzen_convergence_sweep: sample counts must be strictly increasing");
    }
    SweepResult result;
    std::vector<double> ref(test.rows());
    for (std::size_t i = 0; i < test.rows(); ++i) {
        ref[i] = true_model.log_density(test.row(i));
    }
    const auto ref_est = mean_and_std_error(ref);
    result.reference = ref_est.mean;
    result.reference_std_error = ref_est.std_error;

    for (std::size_t idx = 0; idx < sample_counts.size(); ++idx) {
        const std::size_t n = sample_counts[idx];
        const SampleMatrix drawn = sample(true_model, n, derive_seed(seed, idx));
        const std::size_t n_val = n / 10;
        const SampleMatrix centers = n_val == 0 ? drawn : drawn.slice(0, n - n_val);
        const SampleMatrix validation = n_val == 0 ? drawn : drawn.slice(n - n_val, n);
        const double h = select_bandwidth(centers, validation, bandwidth_grid);
        const auto est = parzen_log_likelihood_with_error(ParzenEstimator(centers, h), test);
        result.rows.push_back({n, h, est.mean, est.std_error});
    }
    return result;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
    SampleMatrix centroids;
    std::vector<std::size_t> assignments;
    double inertia = 0.0;
    std::size_t iterations = 0;
    std::vector<double> inertia_trace;  // after seeding, then after every Lloyd step
};

inline double kmeans_inertia(const SampleMatrix& data, const SampleMatrix& centroids,
                             const std::vector<std::size_t>& assignments) {
    require(assignments.size() == data.rows(), "kmeans_inertia: one assignment per row required");
    double total = 0.0;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        require(assignments[i] < centroids.rows(), "kmeans_inertia: assignment out of range");
        total += squared_distance(data.row(i), centroids.row(assignments[i]));
    }
    return total;
}

namespace detail {

/// Nearest-centroid search. Candidates come from the expanded-norm form
/// |x|^2 + |c|^2 - 2 x.c (blocked GEMM); a row only moves when the exact
/// distance to the candidate is strictly smaller than to its current centroid.
inline std::size_t kmeans_assign(const RowMatrix& x, const RowMatrix& c, std::vector<std::size_t>& assign,
                                 std::vector<double>& dist) {
    constexpr Eigen::Index kBlock = 256;
    const Eigen::Index n = x.rows();
    const Eigen::VectorXd c_norms = c.rowwise().squaredNorm();
    const auto n_blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
    std::vector<std::size_t> changed(n_blocks, 0);
    parallel_for(n_blocks, [&](std::size_t begin, std::size_t end) {
        for (std::size_t blk = begin; blk < end; ++blk) {
            const Eigen::Index r0 = static_cast<Eigen::Index>(blk) * kBlock;
            const Eigen::Index rows = std::min(kBlock, n - r0);
            const Eigen::MatrixXd cross = x.middleRows(r0, rows) * c.transpose();
            for (Eigen::Index r = 0; r < rows; ++r) {
                const Eigen::Index i = r0 + r;
                Eigen::Index best = 0;
                (c_norms.transpose() - 2.0 * cross.row(r)).minCoeff(&best);
                const auto cur = static_cast<Eigen::Index>(assign[static_cast<std::size_t>(i)]);
                const double cur_d = (x.row(i) - c.row(cur)).squaredNorm();
                double best_d = cur_d;
                if (best != cur) {
                    best_d = (x.row(i) - c.row(best)).squaredNorm();
                }
                if (best != cur && best_d < cur_d) {
                    assign[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
                    dist[static_cast<std::size_t>(i)] = best_d;
                    ++changed[blk];
                } else {
                    dist[static_cast<std::size_t>(i)] = cur_d;
                }
            }
        }
    });
    return std::accumulate(changed.begin(), changed.end(), std::size_t{0});
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops after `max_iters` Lloyd
/// steps or when no assignment changes. An empty cluster is re-seeded at the
/// point currently farthest from its own centroid.
inline KMeansResult kmeans(const SampleMatrix& data, std::size_t k, std::size_t max_iters, RngSeed seed) {
    const std::size_t n = data.rows();
    require(k >= 1, "kmeans: k must be >= 1");
    require(k <= n, "kmeans: k (" + std::to_string(k) + ") exceeds the number of points (" + std::to_string(n) + ")");
    const RowMatrix& x = data.matrix();
    const auto dim = static_cast<Eigen::Index>(data.cols());
    RowMatrix c(static_cast<Eigen::Index>(k), dim);

    // k-means++ seeding with exact distances.
    Rng rng(seed);
    std::vector<std::size_t> assign(n, 0);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::size_t first = rng.uniform_index(n);
    c.row(0) = x.row(static_cast<Eigen::Index>(first));
    for (std::size_t j = 0; j < k; ++j) {
        if (j > 0) {
            double total = 0.0;
            for (double v : dist) {
                total += v;
            }
            std::size_t pick = 0;
            if (total > 0.0) {
                const double target = rng.uniform() * total;
                double running = 0.0;
                pick = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    running += dist[i];
                    if (target < running && dist[i] > 0.0) {
                        pick = i;
                        break;
                    }
                }
            } else {
                pick = rng.uniform_index(n);  // every point already coincides with a center
            }
            c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(pick));
        }
        const auto row = c.row(static_cast<Eigen::Index>(j));
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                const double d = (x.row(static_cast<Eigen::Index>(i)) - row).squaredNorm();
                if (d < dist[i]) {
                    dist[i] = d;
                    assign[i] = j;
                }
            }
        }, 256);
    }

    KMeansResult result;
    auto current_inertia = [&] {
        double total = 0.0;
        for (double v : dist) {
            total += v;
        }
        return total;
    };
    result.inertia_trace.push_back(current_inertia());

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        // Update step.
        RowMatrix sums = RowMatrix::Zero(static_cast<Eigen::Index>(k), dim);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(assign[i])) += x.row(static_cast<Eigen::Index>(i));
            ++counts[assign[i]];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] > 0) {
                c.row(static_cast<Eigen::Index>(j)) = sums.row(static_cast<Eigen::Index>(j)) / static_cast<double>(counts[j]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            dist[i] = (x.row(static_cast<Eigen::Index>(i)) - c.row(static_cast<Eigen::Index>(assign[i]))).squaredNorm();
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) {
                const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
                c.row(static_cast<Eigen::Index>(j)) = x.row(static_cast<Eigen::Index>(far));
                --counts[assign[far]];
                assign[far] = j;
                counts[j] = 1;
                dist[far] = 0.0;
            }
        }
        // Assignment step.
        const std::size_t changed = detail::kmeans_assign(x, c, assign, dist);
        result.iterations = iter + 1;
        result.inertia_trace.push_back(current_inertia());
        if (changed == 0) {
            break;
        }
    }
    result.centroids = SampleMatrix(c);
    result.assignments = std::move(assign);
    result.inertia = kmeans_inertia(data, result.centroids, result.assignments);
    return result;
}

/// n rows drawn uniformly with replacement from the centroids, no added noise.
inline SampleMatrix sample_centroids(const SampleMatrix& centroids, std::size_t n, RngSeed seed) {
    require(n >= 1, "sample_centroids: n must be >= 1");
    Rng rng(seed);
    std::vector<std::size_t> idx(n);
    for (auto& i : idx) {
        i = rng.uniform_index(centroids.rows());
    }
    return centroids.select(idx);
}

// ---------------------------------------------------------------------------
// Benchmark

struct BenchmarkEntry {
    std::string name;
    SampleMatrix samples;
};

struct BenchmarkRow {
    std::string name;
    std::size_t n_samples = 0;
    double bandwidth = 0.0;
    double mean_nats = 0.0;
    double std_error = 0.0;
};

/// Per entry: select a bandwidth on `validation`, then score `test`. Sorted by
/// descending score; equal scores keep input order.
inline std::vector<BenchmarkRow> parzen_benchmark(const std::vector<BenchmarkEntry>& entries, const SampleMatrix& test,
                                                  const SampleMatrix& validation,
                                                  const std::vector<double>& bandwidth_grid) {
    std::vector<BenchmarkRow> rows;
    for (const auto& e : entries) {
        require(e.samples.cols() == test.cols() && validation.cols() == test.cols(),
                "parzen_benchmark: entry '" + e.name + "' has the wrong dimensionality");
        const double h = select_bandwidth(e.samples, validation, bandwidth_grid);
        const auto est = parzen_log_likelihood_with_error(ParzenEstimator(e.samples, h), test);
        rows.push_back({e.name, e.samples.rows(), h, est.mean, est.std_error});
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const BenchmarkRow& a, const BenchmarkRow& b) { return a.mean_nats > b.mean_nats; });
    return rows;
}

}  // namespace geneval
