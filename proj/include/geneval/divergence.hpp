#pragma once

// Fitting an isotropic Gaussian to a target by minimizing KLD, MMD or JSD.
//
// KLD[p||q] has a closed-form minimizer (moment matching). MMD is estimated
// from samples (biased V-statistic, Gaussian kernel bank) and minimized with
// analytic gradients through a frozen reparameterization x = mean + sigma*z.
// JSD is evaluated by trapezoid quadrature on a tensor grid and minimized with
// central finite differences. Both iterative fits run plain gradient descent on
// (mean, log sigma).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geneval/density.hpp"
#include "geneval/error.hpp"
#include "geneval/parallel.hpp"
#include "geneval/rng.hpp"
#include "geneval/sample_matrix.hpp"

namespace geneval {

struct KernelBank {
    std::vector<double> bandwidths;

    explicit KernelBank(std::vector<double> bw) : bandwidths(std::move(bw)) {
        require(!bandwidths.empty(), "KernelBank: need at least one bandwidth");
        for (double b : bandwidths) {
            require(std::isfinite(b) && b > 0.0, "KernelBank: bandwidths must be positive");
        }
    }

    /// Sum of exp(-d2 / (2 s^2)) over the bank.
    [[nodiscard]] double operator()(double squared_dist) const {
        double k = 0.0;
        for (double b : bandwidths) {
            k += std::exp(-squared_dist / (2.0 * b * b));
        }
        return k;
    }

    /// Multiples of the median pairwise Euclidean distance (over the first 2000 rows).
    static KernelBank median_heuristic(const SampleMatrix& samples,
                                       const std::vector<double>& multipliers = {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const std::size_t n = std::min<std::size_t>(samples.rows(), 2000);
        require(n >= 2, "KernelBank::median_heuristic: need at least two samples");
        std::vector<double> dists;
        dists.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                dists.push_back(std::sqrt(squared_distance(samples.row(i), samples.row(j))));
            }
        }
        const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
        std::nth_element(dists.begin(), mid, dists.end());
        double median = *mid;
        if (dists.size() % 2 == 0) {
            median = 0.5 * (median + *std::max_element(dists.begin(), mid));
        }
        require(median > 0.0, "KernelBank::median_heuristic: all samples coincide");
        std::vector<double> bw;
        for (double m : multipliers) {
            bw.push_back(m * median);
        }
        return KernelBank(std::move(bw));
    }
};

struct FitConfig {
    std::size_t max_iters = 500;
    double step_size = 1.0;
    double tolerance = 1e-6;
    std::optional<IsotropicGaussian> init;  // defaults to the KLD solution where one exists
    RngSeed seed{0};
    std::size_t model_samples = 1000;  // frozen reparameterization noise (MMD only)

    void validate() const {
        require(max_iters >= 1, "FitConfig: max_iters must be >= 1");
        require(std::isfinite(step_size) && step_size > 0.0, "FitConfig: step_size must be positive");
        require(std::isfinite(tolerance) && tolerance > 0.0, "FitConfig: tolerance must be positive");
        require(model_samples >= 1, "FitConfig: model_samples must be >= 1");
    }
};

struct FitTraceRow {
    std::size_t iter = 0;
    double objective = 0.0;
    Eigen::VectorXd mean;
    double sigma = 0.0;
};

struct FitResult {
    IsotropicGaussian model;
    double objective = 0.0;  // at the returned parameters
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<FitTraceRow> trace;
};

// ---------------------------------------------------------------------------
// KLD

/// Closed-form argmin over isotropic q of KLD[p||q]: match the mean and the
/// average per-dimension second central moment.
inline IsotropicGaussian fit_kld(const GaussianMixture& target) {
    const Eigen::VectorXd mean = target.mean();
    double second = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        const auto& c = target.components()[k];
        second += target.weights()[k] * (c.variance.sum() + (c.mean - mean).squaredNorm());
    }
    return IsotropicGaussian(mean, std::sqrt(second / static_cast<double>(target.dim())));
}

// ---------------------------------------------------------------------------
// MMD

/// Biased (V-statistic) estimate of MMD^2, self-pairs included.
inline double mmd_squared(const SampleMatrix& p, const SampleMatrix& q, const KernelBank& kernels) {
    require(p.cols() == q.cols(), "mmd_squared: dimension mismatch (" + std::to_string(p.cols()) + " vs " +
                                      std::to_string(q.cols()) + ")");
    auto mean_kernel = [&](const SampleMatrix& a, const SampleMatrix& b) {
        std::vector<double> row_sums(a.rows(), 0.0);
        parallel_for(a.rows(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < b.rows(); ++j) {
                    s += kernels(squared_distance(a.row(i), b.row(j)));
                }
                row_sums[i] = s;
            }
        });
        double total = 0.0;
        for (double s : row_sums) {
            total += s;
        }
        return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
    };
    const double value = mean_kernel(p, p) - 2.0 * mean_kernel(p, q) + mean_kernel(q, q);
    return std::max(value, 0.0);
}

/// MMD^2 between fixed target samples and the reparameterized model
/// mean + exp(log_sigma) * z, as a smooth function of (mean, log_sigma).
class MmdObjective {
public:
    MmdObjective(SampleMatrix target, KernelBank kernels, std::size_t model_samples, RngSeed seed)
        : target_(std::move(target)), kernels_(std::move(kernels)) {
        require(model_samples >= 1, "MmdObjective: model_samples must be >= 1");
        const std::size_t d = target_.cols();
        noise_ = RowMatrix(static_cast<Eigen::Index>(model_samples), static_cast<Eigen::Index>(d));
        Rng rng(seed);
        for (Eigen::Index i = 0; i < noise_.size(); ++i) {
            noise_.data()[i] = rng.normal();
        }
        const std::size_t m = model_samples;
        noise_sq_dists_.resize(m * (m - 1) / 2);
        std::size_t idx = 0;
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t l = j + 1; l < m; ++l) {
                noise_sq_dists_[idx++] = (noise_.row(static_cast<Eigen::Index>(j)) - noise_.row(static_cast<Eigen::Index>(l))).squaredNorm();
            }
        }
        target_term_ = mean_target_kernel();
    }

    [[nodiscard]] std::size_t dim() const { return target_.cols(); }

    struct Evaluation {
        double value = 0.0;
        Eigen::VectorXd gradient;  // d/d(mean_0..mean_{D-1}, log_sigma)
    };

    [[nodiscard]] Evaluation evaluate(const Eigen::VectorXd& mean, double log_sigma) const {
        require(static_cast<std::size_t>(mean.size()) == dim(), "MmdObjective: dimension mismatch");
        const std::size_t d = dim();
        const std::size_t n = target_.rows();
        const auto m = static_cast<std::size_t>(noise_.rows());
        const double sigma = std::exp(log_sigma);
        std::vector<double> inv_bw2(kernels_.bandwidths.size());
        for (std::size_t b = 0; b < inv_bw2.size(); ++b) {
            inv_bw2[b] = 1.0 / (kernels_.bandwidths[b] * kernels_.bandwidths[b]);
        }

        // Cross term, one slot per model sample: sum_i k(t_i, y_j) and its gradient.
        std::vector<double> cross(m, 0.0);
        RowMatrix cross_grad = RowMatrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d + 1));
        parallel_for(m, [&](std::size_t begin, std::size_t end) {
            std::vector<double> y(d);
            std::vector<double> diff(d);
            for (std::size_t j = begin; j < end; ++j) {
                const auto z = noise_.row(static_cast<Eigen::Index>(j));
                for (std::size_t c = 0; c < d; ++c) {
                    y[c] = mean[static_cast<Eigen::Index>(c)] + sigma * z[static_cast<Eigen::Index>(c)];
                }
                double kv = 0.0;
                auto g = cross_grad.row(static_cast<Eigen::Index>(j));
                for (std::size_t i = 0; i < n; ++i) {
                    const auto t = target_.row(i);
                    double d2 = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        diff[c] = t[c] - y[c];
                        d2 += diff[c] * diff[c];
                    }
                    double weight = 0.0;  // sum_b k_b / s_b^2, the common factor of dk/dy
                    for (std::size_t b = 0; b < inv_bw2.size(); ++b) {
                        const double e = std::exp(-0.5 * d2 * inv_bw2[b]);
                        kv += e;
                        weight += e * inv_bw2[b];
                    }
                    double dz = 0.0;
                    for (std::size_t c = 0; c < d; ++c) {
                        g[static_cast<Eigen::Index>(c)] += weight * diff[c];
                        dz += diff[c] * z[static_cast<Eigen::Index>(c)];
                    }
                    g[static_cast<Eigen::Index>(d)] += weight * sigma * dz;
                }
                cross[j] = kv;
            }
        });

        // Model self term depends on sigma only: k(s * ||z_j - z_l||).
        std::vector<double> self(m, 0.0);
        std::vector<double> self_grad(m, 0.0);
        const double s2 = sigma * sigma;
        parallel_for(m, [&](std::size_t begin, std::size_t end) {
            for (std::size_t j = begin; j < end; ++j) {
                double kv = 0.0;
                double g = 0.0;
                std::size_t offset = j * m - j * (j + 1) / 2;  // start of row j in the packed upper triangle
                for (std::size_t l = j + 1; l < m; ++l) {
                    const double r2 = noise_sq_dists_[offset + (l - j - 1)];
                    for (std::size_t b = 0; b < inv_bw2.size(); ++b) {
                        const double e = std::exp(-0.5 * s2 * r2 * inv_bw2[b]);
                        kv += e;
                        g -= e * s2 * r2 * inv_bw2[b];
                    }
                }
                self[j] = kv;
                self_grad[j] = g;
            }
        });

        double cross_sum = 0.0;
        Eigen::VectorXd cross_g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d + 1));
        double self_sum = 0.0;
        double self_g = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            cross_sum += cross[j];
            cross_g += cross_grad.row(static_cast<Eigen::Index>(j)).transpose();
            self_sum += self[j];
            self_g += self_grad[j];
        }
        const double nm = static_cast<double>(n) * static_cast<double>(m);
        const double mm = static_cast<double>(m) * static_cast<double>(m);
        const auto bank = static_cast<double>(kernels_.bandwidths.size());

        Evaluation out;
        out.value = target_term_ - 2.0 * cross_sum / nm + (static_cast<double>(m) * bank + 2.0 * self_sum) / mm;
        out.gradient = -2.0 * cross_g / nm;
        out.gradient[static_cast<Eigen::Index>(d)] += 2.0 * self_g / mm;
        return out;
    }

    [[nodiscard]] SampleMatrix model_samples(const Eigen::VectorXd& mean, double sigma) const {
        RowMatrix y = (sigma * noise_).rowwise() + mean.transpose();
        return SampleMatrix(std::move(y));
    }

private:
    double mean_target_kernel() const {
        const std::size_t n = target_.rows();
        std::vector<double> row_sums(n, 0.0);
        parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    s += kernels_(squared_distance(target_.row(i), target_.row(j)));
                }
                row_sums[i] = s;
            }
        });
        double total = 0.0;
        for (double s : row_sums) {
            total += s;
        }
        return total / (static_cast<double>(n) * static_cast<double>(n));
    }

    SampleMatrix target_;
    KernelBank kernels_;
    RowMatrix noise_;
    std::vector<double> noise_sq_dists_;
    double target_term_ = 0.0;
};

namespace detail {

inline Eigen::VectorXd pack(const IsotropicGaussian& g) {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(g.dim() + 1));
    theta.head(static_cast<Eigen::Index>(g.dim())) = g.mean();
    theta[static_cast<Eigen::Index>(g.dim())] = std::log(g.sigma());
    return theta;
}

inline IsotropicGaussian unpack(const Eigen::VectorXd& theta) {
    const Eigen::Index d = theta.size() - 1;
    return IsotropicGaussian(theta.head(d), std::exp(theta[d]));
}

inline FitTraceRow trace_row(std::size_t iter, double objective, const Eigen::VectorXd& theta) {
    const Eigen::Index d = theta.size() - 1;
    return {iter, objective, theta.head(d), std::exp(theta[d])};
}

/// Gradient descent on theta = (mean, log sigma). `objective(theta)` returns
/// (value, gradient).
template <typename Objective>
FitResult gradient_descent(Objective&& objective, Eigen::VectorXd theta, const FitConfig& config,
                           const std::string& who) {
    FitResult result;
    for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
        const auto [value, grad] = objective(theta);
        if (!std::isfinite(value) || !grad.allFinite()) {
            throw Error(who + ": non-finite gradient at iteration " + std::to_string(iter));
        }
        result.trace.push_back(trace_row(iter, value, theta));
        const Eigen::VectorXd update = config.step_size * grad;
        theta -= update;
        result.iterations = iter + 1;
        if (update.norm() < config.tolerance) {
            result.converged = true;
            break;
        }
    }
    const auto [final_value, final_grad] = objective(theta);
    (void)final_grad;
    result.model = unpack(theta);
    result.objective = final_value;
    result.trace.push_back(trace_row(result.iterations, final_value, theta));
    return result;
}

}  // namespace detail

/// Gradient descent on MMD^2 between target samples and the reparameterized model.
inline FitResult fit_mmd(const SampleMatrix& target_samples, const KernelBank& kernels, const FitConfig& config) {
    config.validate();
    require(config.init.has_value(), "fit_mmd: an initial model is required");
    require(config.init->dim() == target_samples.cols(), "fit_mmd: init dimension does not match target samples");
    const MmdObjective objective(target_samples, kernels, config.model_samples, config.seed);
    const auto d = static_cast<Eigen::Index>(target_samples.cols());
    auto eval = [&](const Eigen::VectorXd& theta) {
        const auto e = objective.evaluate(theta.head(d), theta[d]);
        return std::pair<double, Eigen::VectorXd>{e.value, e.gradient};
    };
    return detail::gradient_descent(eval, detail::pack(*config.init), config, "fit_mmd");
}

// ---------------------------------------------------------------------------
// JSD

struct GridAxis {
    double lo = 0.0;
    double hi = 1.0;
    std::size_t points = 2;
};

struct QuadratureGrid {
    static constexpr std::size_t kMaxDims = 3;
    static constexpr std::size_t kMaxPoints = 4'000'000;

    std::vector<GridAxis> axes;

    explicit QuadratureGrid(std::vector<GridAxis> a) : axes(std::move(a)) {
        require(!axes.empty() && axes.size() <= kMaxDims, "QuadratureGrid: supports 1 to 3 dimensions");
        std::size_t total = 1;
        for (const auto& ax : axes) {
            require(std::isfinite(ax.lo) && std::isfinite(ax.hi) && ax.hi > ax.lo, "QuadratureGrid: need hi > lo");
            require(ax.points >= 2, "QuadratureGrid: need at least 2 points per axis");
            total *= ax.points;
            require(total <= kMaxPoints, "QuadratureGrid: more than 4e6 nodes");
        }
    }

    [[nodiscard]] std::size_t dim() const { return axes.size(); }

    [[nodiscard]] std::size_t size() const {
        std::size_t total = 1;
        for (const auto& ax : axes) {
            total *= ax.points;
        }
        return total;
    }

    /// Box spanning mean +- n_sd standard deviations of every component of every model.
    static QuadratureGrid covering(const std::vector<GaussianMixture>& models, std::size_t points_per_axis,
                                   double n_sd = 8.0) {
        require(!models.empty(), "QuadratureGrid::covering: no models");
        const std::size_t d = models.front().dim();
        std::vector<GridAxis> axes(d, GridAxis{std::numeric_limits<double>::infinity(),
                                               -std::numeric_limits<double>::infinity(), points_per_axis});
        for (const auto& model : models) {
            require(model.dim() == d, "QuadratureGrid::covering: dimension mismatch");
            for (const auto& c : model.components()) {
                for (std::size_t i = 0; i < d; ++i) {
                    const auto j = static_cast<Eigen::Index>(i);
                    const double sd = std::sqrt(c.variance[j]);
                    axes[i].lo = std::min(axes[i].lo, c.mean[j] - n_sd * sd);
                    axes[i].hi = std::max(axes[i].hi, c.mean[j] + n_sd * sd);
                }
            }
        }
        return QuadratureGrid(std::move(axes));
    }

    /// Covers the target and every model a JSD fit is likely to visit: the KLD
    /// solution with its sigma doubled, out to 6 of those standard deviations.
    static QuadratureGrid for_fit(const GaussianMixture& target, std::size_t points_per_axis = 201) {
        const IsotropicGaussian kld = fit_kld(target);
        const auto wide = GaussianMixture::from_gaussian(IsotropicGaussian(kld.mean(), 2.0 * kld.sigma()));
        QuadratureGrid grid = covering({target}, points_per_axis, 8.0);
        const QuadratureGrid outer = covering({wide}, points_per_axis, 6.0);
        for (std::size_t i = 0; i < grid.dim(); ++i) {
            grid.axes[i].lo = std::min(grid.axes[i].lo, outer.axes[i].lo);
            grid.axes[i].hi = std::max(grid.axes[i].hi, outer.axes[i].hi);
        }
        return grid;
    }
};

/// Trapezoid quadrature of JSD[p, q] against a fixed p.
class JsdEvaluator {
public:
    JsdEvaluator(const GaussianMixture& p, QuadratureGrid grid) : grid_(std::move(grid)) {
        require(p.dim() == grid_.dim(), "jsd: grid dimension does not match the densities");
        const std::size_t n = grid_.size();
        const std::size_t d = grid_.dim();
        nodes_ = RowMatrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
        weights_.resize(n);
        for (std::size_t flat = 0; flat < n; ++flat) {
            std::size_t rem = flat;
            double w = 1.0;
            for (std::size_t a = d; a-- > 0;) {
                const auto& ax = grid_.axes[a];
                const std::size_t k = rem % ax.points;
                rem /= ax.points;
                const double h = (ax.hi - ax.lo) / static_cast<double>(ax.points - 1);
                nodes_(static_cast<Eigen::Index>(flat), static_cast<Eigen::Index>(a)) = ax.lo + h * static_cast<double>(k);
                w *= (k == 0 || k + 1 == ax.points) ? 0.5 * h : h;
            }
            weights_[flat] = w;
        }
        log_p_ = evaluate_on_grid([&](std::span<const double> x) { return p.log_density(x); });
        p_.resize(n);
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            p_[i] = std::exp(log_p_[i]);
            mass += weights_[i] * p_[i];
        }
        check_mass(mass, "p");
    }

    [[nodiscard]] double operator()(const LogDensity& q) const {
        const std::vector<double> log_q = evaluate_on_grid(q);
        return from_log_densities(log_q);
    }

    [[nodiscard]] double operator()(const IsotropicGaussian& q) const {
        require(q.dim() == grid_.dim(), "jsd: dimension mismatch");
        const std::size_t d = grid_.dim();
        const double inv_two_var = 1.0 / (2.0 * q.sigma() * q.sigma());
        const double log_norm = -0.5 * static_cast<double>(d) * kLogTwoPi - static_cast<double>(d) * std::log(q.sigma());
        const double* mu = q.mean().data();
        const std::vector<double> log_q = evaluate_on_grid([&](std::span<const double> x) {
            double sq = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double t = x[j] - mu[j];
                sq += t * t;
            }
            return log_norm - sq * inv_two_var;
        });
        return from_log_densities(log_q);
    }

    [[nodiscard]] const QuadratureGrid& grid() const { return grid_; }

private:
    static constexpr double kDensityFloor = 1e-300;

    template <typename F>
    std::vector<double> evaluate_on_grid(F&& f) const {
        std::vector<double> out(grid_.size());
        parallel_for(out.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                out[i] = f(std::span<const double>(nodes_.data() + i * grid_.dim(), grid_.dim()));
            }
        }, 4096);
        return out;
    }

    void check_mass(double mass, const char* which) const {
        if (!(std::abs(mass - 1.0) <= 1e-3)) {
            throw Error(std::string("insufficient quadrature: density ") + which + " integrates to " +
                        std::to_string(mass) + " on the grid");
        }
    }

    [[nodiscard]] double from_log_densities(const std::vector<double>& log_q) const {
        const double ln2 = std::numbers::ln2;
        double mass = 0.0;
        double kl_p = 0.0;
        double kl_q = 0.0;
        for (std::size_t i = 0; i < log_q.size(); ++i) {
            const double lq = log_q[i];
            const double q = std::exp(lq);
            const double p = p_[i];
            mass += weights_[i] * q;
            if (p < kDensityFloor && q < kDensityFloor) {
                continue;
            }
            const double lm = std::log(p + q) - ln2;
            if (p >= kDensityFloor) {
                kl_p += weights_[i] * p * (log_p_[i] - lm);
            }
            if (q >= kDensityFloor) {
                kl_q += weights_[i] * q * (lq - lm);
            }
        }
        check_mass(mass, "q");
        return std::clamp(0.5 * kl_p + 0.5 * kl_q, 0.0, ln2);
    }

    QuadratureGrid grid_;
    RowMatrix nodes_;
    std::vector<double> weights_;
    std::vector<double> log_p_;
    std::vector<double> p_;
};

inline double jsd(const GaussianMixture& p, const IsotropicGaussian& q, const QuadratureGrid& grid) {
    return JsdEvaluator(p, grid)(q);
}

inline double jsd(const IsotropicGaussian& p, const IsotropicGaussian& q, const QuadratureGrid& grid) {
    return jsd(GaussianMixture::from_gaussian(p), q, grid);
}

/// Gradient descent on JSD[target, model]; central differences on (mean, log sigma)
/// with step 1e-4 * max(1, |theta_i|). Starts from the KLD fit unless config.init is set.
inline FitResult fit_jsd(const GaussianMixture& target, const QuadratureGrid& grid, const FitConfig& config) {
    config.validate();
    const JsdEvaluator evaluator(target, grid);
    const IsotropicGaussian init = config.init.value_or(fit_kld(target));
    require(init.dim() == target.dim(), "fit_jsd: init dimension does not match target");
    auto eval = [&](const Eigen::VectorXd& theta) {
        const double value = evaluator(detail::unpack(theta));
        Eigen::VectorXd grad(theta.size());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const double h = 1e-4 * std::max(1.0, std::abs(theta[i]));
            Eigen::VectorXd up = theta;
            Eigen::VectorXd down = theta;
            up[i] += h;
            down[i] -= h;
            grad[i] = (evaluator(detail::unpack(up)) - evaluator(detail::unpack(down))) / (2.0 * h);
        }
        return std::pair<double, Eigen::VectorXd>{value, grad};
    };
    return detail::gradient_descent(eval, detail::pack(init), config, "fit_jsd");
}

/// fit_jsd from `restarts` seeded random initializations: means uniform over the
/// target's +-2 sd component box, sigma log-uniform in [0.5, 2] x the KLD sigma.
inline std::vector<FitResult> fit_jsd_multistart(const GaussianMixture& target, const QuadratureGrid& grid,
                                                 const FitConfig& config, std::size_t restarts) {
    require(restarts >= 1, "fit_jsd_multistart: restarts must be >= 1");
    const std::size_t d = target.dim();
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), std::numeric_limits<double>::infinity());
    Eigen::VectorXd hi = -lo;
    for (const auto& c : target.components()) {
        const Eigen::VectorXd sd = c.variance.array().sqrt();
        lo = lo.cwiseMin(c.mean - 2.0 * sd);
        hi = hi.cwiseMax(c.mean + 2.0 * sd);
    }
    const double base_sigma = fit_kld(target).sigma();
    std::vector<FitResult> out;
    for (std::size_t r = 0; r < restarts; ++r) {
        Rng rng(derive_seed(config.seed, r));
        Eigen::VectorXd mean(static_cast<Eigen::Index>(d));
        for (Eigen::Index i = 0; i < mean.size(); ++i) {
            mean[i] = lo[i] + (hi[i] - lo[i]) * rng.uniform();
        }
        const double sigma = base_sigma * std::exp(std::log(0.5) + std::log(4.0) * rng.uniform());
        FitConfig local = config;
        local.init = IsotropicGaussian(mean, sigma);
        out.push_back(fit_jsd(target, grid, local));
    }
    return out;
}

}  // namespace geneval
