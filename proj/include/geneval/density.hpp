#pragma once

// Gaussian density primitives. All log-densities are in nats.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "geneval/error.hpp"
#include "geneval/rng.hpp"
#include "geneval/sample_matrix.hpp"

namespace geneval {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline const double kLogTwoPi = std::log(2.0 * std::numbers::pi);

/// log(sum(exp(values))). -inf entries contribute nothing; all -inf gives -inf.
inline double log_sum_exp(std::span<const double> values) {
    require(!values.empty(), "empty aggregation");
    double peak = kNegInf;
    for (double v : values) {
        require(!std::isnan(v), "log_sum_exp: NaN input");
        peak = std::max(peak, v);
    }
    if (peak == kNegInf) {
        return kNegInf;
    }
    if (std::isinf(peak)) {
        return peak;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += std::exp(v - peak);
    }
    return peak + std::log(sum);
}

inline double log_sum_exp(std::initializer_list<double> values) {
    return log_sum_exp(std::span<const double>(values.begin(), values.size()));
}

/// Log-density over R^D; the common currency between modules.
using LogDensity = std::function<double(std::span<const double>)>;

class IsotropicGaussian {
public:
    IsotropicGaussian() = default;

    IsotropicGaussian(Eigen::VectorXd mean, double sigma) : mean_(std::move(mean)), sigma_(sigma) {
        require(mean_.size() >= 1, "IsotropicGaussian: dimension must be >= 1");
        require(mean_.allFinite(), "IsotropicGaussian: mean must be finite");
        require(std::isfinite(sigma_) && sigma_ > 0.0, "IsotropicGaussian: sigma must be positive");
    }

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
    [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
    [[nodiscard]] double sigma() const { return sigma_; }

    [[nodiscard]] double log_density(std::span<const double> x) const {
        if (x.size() != dim()) {
            throw Error("IsotropicGaussian: dimension mismatch (model " + std::to_string(dim()) + ", point " +
                        std::to_string(x.size()) + ")");
        }
        double sq = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = x[i] - mean_[static_cast<Eigen::Index>(i)];
            sq += d * d;
        }
        const auto d = static_cast<double>(dim());
        return -0.5 * d * kLogTwoPi - d * std::log(sigma_) - sq / (2.0 * sigma_ * sigma_);
    }

    [[nodiscard]] LogDensity as_log_density() const {
        return [model = *this](std::span<const double> x) { return model.log_density(x); };
    }

private:
    Eigen::VectorXd mean_;
    double sigma_ = 1.0;
};

inline double gaussian_log_density(const IsotropicGaussian& model, std::span<const double> x) {
    return model.log_density(x);
}

struct GaussianComponent {
    Eigen::VectorXd mean;
    Eigen::VectorXd variance;  // per-dimension (diagonal covariance)
};

class GaussianMixture {
public:
    GaussianMixture() = default;

    GaussianMixture(std::vector<double> weights, std::vector<GaussianComponent> components)
        : weights_(std::move(weights)), components_(std::move(components)) {
        require(!weights_.empty(), "GaussianMixture: need at least one component");
        require(weights_.size() == components_.size(), "GaussianMixture: weight/component count mismatch");
        const Eigen::Index d = components_.front().mean.size();
        require(d >= 1, "GaussianMixture: dimension must be >= 1");
        double total = 0.0;
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            require(std::isfinite(weights_[k]) && weights_[k] >= 0.0, "GaussianMixture: weights must be nonnegative");
            total += weights_[k];
            const auto& c = components_[k];
            require(c.mean.size() == d && c.variance.size() == d,
                    "GaussianMixture: component " + std::to_string(k) + " has inconsistent dimension");
            require(c.mean.allFinite(), "GaussianMixture: component means must be finite");
            require(c.variance.allFinite() && (c.variance.array() > 0.0).all(),
                    "GaussianMixture: variances must be positive");
        }
        require(std::abs(total - 1.0) <= 1e-12, "GaussianMixture: weights must sum to 1");
        precompute();
    }

    /// Single-component mixture equal to an isotropic Gaussian.
    static GaussianMixture from_gaussian(const IsotropicGaussian& g) {
        const auto d = static_cast<Eigen::Index>(g.dim());
        return GaussianMixture({1.0}, {GaussianComponent{g.mean(), Eigen::VectorXd::Constant(d, g.sigma() * g.sigma())}});
    }

    /// Uniform weights, shared isotropic variance, one component per row of `centers`.
    static GaussianMixture uniform_isotropic(const SampleMatrix& centers, double variance) {
        require(variance > 0.0, "GaussianMixture: variance must be positive");
        const std::size_t n = centers.rows();
        const auto d = static_cast<Eigen::Index>(centers.cols());
        std::vector<GaussianComponent> comps;
        comps.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            comps.push_back({centers.matrix().row(static_cast<Eigen::Index>(i)).transpose(),
                             Eigen::VectorXd::Constant(d, variance)});
        }
        // Exact 1/n weights may not sum to 1 within 1e-12 for awkward n; renormalize the last.
        std::vector<double> w(n, 1.0 / static_cast<double>(n));
        double partial = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            partial += w[i];
        }
        w.back() = 1.0 - partial;
        return GaussianMixture(std::move(w), std::move(comps));
    }

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(components_.front().mean.size()); }
    [[nodiscard]] std::size_t size() const { return components_.size(); }
    [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
    [[nodiscard]] const std::vector<GaussianComponent>& components() const { return components_; }

    [[nodiscard]] double component_log_density(std::size_t k, std::span<const double> x) const {
        const auto& c = components_[k];
        double q = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto j = static_cast<Eigen::Index>(i);
            const double d = x[i] - c.mean[j];
            q += d * d / c.variance[j];
        }
        return log_norm_[k] - 0.5 * q;
    }

    [[nodiscard]] double log_density(std::span<const double> x) const {
        if (x.size() != dim()) {
            throw Error("GaussianMixture: dimension mismatch (model " + std::to_string(dim()) + ", point " +
                        std::to_string(x.size()) + ")");
        }
        if (size() == 1) {
            return component_log_density(0, x);
        }
        // Two passes (max, then shifted sum) so evaluation never allocates.
        double peak = kNegInf;
        for (std::size_t k = 0; k < size(); ++k) {
            if (log_weights_[k] != kNegInf) {
                peak = std::max(peak, log_weights_[k] + component_log_density(k, x));
            }
        }
        if (peak == kNegInf) {
            return kNegInf;
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < size(); ++k) {
            if (log_weights_[k] != kNegInf) {
                sum += std::exp(log_weights_[k] + component_log_density(k, x) - peak);
            }
        }
        return peak + std::log(sum);
    }

    [[nodiscard]] Eigen::VectorXd mean() const {
        Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
        for (std::size_t k = 0; k < size(); ++k) {
            m += weights_[k] * components_[k].mean;
        }
        return m;
    }

    [[nodiscard]] LogDensity as_log_density() const {
        return [model = *this](std::span<const double> x) { return model.log_density(x); };
    }

private:
    void precompute() {
        log_weights_.resize(weights_.size());
        log_norm_.resize(weights_.size());
        for (std::size_t k = 0; k < weights_.size(); ++k) {
            log_weights_[k] = weights_[k] > 0.0 ? std::log(weights_[k]) : kNegInf;
            const auto& var = components_[k].variance;
            log_norm_[k] = -0.5 * static_cast<double>(var.size()) * kLogTwoPi - 0.5 * var.array().log().sum();
        }
    }

    std::vector<double> weights_;
    std::vector<GaussianComponent> components_;
    std::vector<double> log_weights_;
    std::vector<double> log_norm_;
};

inline double gmm_log_density(const GaussianMixture& model, std::span<const double> x) {
    return model.log_density(x);
}

/// Gaussian with a dense covariance matrix.
class FullCovarianceGaussian {
public:
    FullCovarianceGaussian() = default;

    FullCovarianceGaussian(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
        : mean_(std::move(mean)), covariance_(std::move(covariance)) {
        const Eigen::Index d = mean_.size();
        require(d >= 1, "FullCovarianceGaussian: dimension must be >= 1");
        require(covariance_.rows() == d && covariance_.cols() == d, "FullCovarianceGaussian: covariance shape mismatch");
        require(mean_.allFinite() && covariance_.allFinite(), "FullCovarianceGaussian: parameters must be finite");
        require((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * covariance_.cwiseAbs().maxCoeff(),
                "FullCovarianceGaussian: covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(covariance_);
        require(llt.info() == Eigen::Success, "FullCovarianceGaussian: covariance must be positive definite");
        chol_ = llt.matrixL();
        log_det_ = 2.0 * chol_.diagonal().array().log().sum();
    }

    [[nodiscard]] std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
    [[nodiscard]] const Eigen::VectorXd& mean() const { return mean_; }
    [[nodiscard]] const Eigen::MatrixXd& covariance() const { return covariance_; }
    /// Lower Cholesky factor L with L L^T = covariance.
    [[nodiscard]] const Eigen::MatrixXd& cholesky() const { return chol_; }

    [[nodiscard]] double log_density(std::span<const double> x) const {
        if (x.size() != dim()) {
            throw Error("FullCovarianceGaussian: dimension mismatch (model " + std::to_string(dim()) + ", point " +
                        std::to_string(x.size()) + ")");
        }
        Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(x.data(), mean_.size()) - mean_;
        chol_.triangularView<Eigen::Lower>().solveInPlace(r);
        const auto d = static_cast<double>(dim());
        return -0.5 * d * kLogTwoPi - 0.5 * log_det_ - 0.5 * r.squaredNorm();
    }

    [[nodiscard]] LogDensity as_log_density() const {
        return [model = *this](std::span<const double> x) { return model.log_density(x); };
    }

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
    Eigen::MatrixXd chol_;
    double log_det_ = 0.0;
};

/// Maximum-likelihood Gaussian (covariance normalized by N).
inline FullCovarianceGaussian fit_full_gaussian(const SampleMatrix& data) {
    require(data.rows() >= 2, "fit_full_gaussian: need at least two rows");
    const Eigen::VectorXd mean = data.matrix().colwise().mean().transpose();
    const RowMatrix centered = data.matrix().rowwise() - mean.transpose();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(data.rows());
    cov = 0.5 * (cov + cov.transpose());
    return {mean, std::move(cov)};
}

/// Draws n rows; row i only depends on (seed, i).
inline SampleMatrix sample(const IsotropicGaussian& model, std::size_t n, RngSeed seed) {
    require(n >= 1, "sample: n must be >= 1");
    const auto d = static_cast<Eigen::Index>(model.dim());
    RowMatrix out(static_cast<Eigen::Index>(n), d);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            out(i, j) = model.mean()[j] + model.sigma() * rng.normal();
        }
    }
    return SampleMatrix(std::move(out));
}

/// Component index by weight, then a Gaussian draw within the component.
inline SampleMatrix sample(const GaussianMixture& model, std::size_t n, RngSeed seed,
                           std::vector<std::size_t>* labels = nullptr) {
    require(n >= 1, "sample: n must be >= 1");
    const auto d = static_cast<Eigen::Index>(model.dim());
    RowMatrix out(static_cast<Eigen::Index>(n), d);
    Rng rng(seed);
    if (labels) {
        labels->assign(n, 0);
    }
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const std::size_t k = rng.categorical(model.weights());
        const auto& c = model.components()[k];
        for (Eigen::Index j = 0; j < d; ++j) {
            out(i, j) = c.mean[j] + std::sqrt(c.variance[j]) * rng.normal();
        }
        if (labels) {
            (*labels)[static_cast<std::size_t>(i)] = k;
        }
    }
    return SampleMatrix(std::move(out));
}

/// mean + L z with z standard normal; row i only depends on (seed, i).
inline SampleMatrix sample(const FullCovarianceGaussian& model, std::size_t n, RngSeed seed) {
    require(n >= 1, "sample: n must be >= 1");
    const auto d = static_cast<Eigen::Index>(model.dim());
    RowMatrix z(static_cast<Eigen::Index>(n), d);
    Rng rng(seed);
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        z.data()[i] = rng.normal();
    }
    RowMatrix out = z * model.cholesky().transpose();
    out.rowwise() += model.mean().transpose();
    return SampleMatrix(std::move(out));
}

}  // namespace geneval
