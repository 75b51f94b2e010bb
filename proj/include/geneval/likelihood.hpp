#pragma once

// Dequantization, discrete log-likelihoods of continuous models, bits/dim
// reporting, and the mixture constructions used to separate likelihood from
// sample quality.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geneval/density.hpp"
#include "geneval/error.hpp"
#include "geneval/images.hpp"
#include "geneval/parallel.hpp"
#include "geneval/rng.hpp"
#include "geneval/sample_matrix.hpp"

namespace geneval {

inline constexpr double kPixelLevels = 256.0;

/// y = x + u, u ~ U[0,1)^D independently per entry. Image i draws from
/// stream i of `seed`. With `rescale` the result is divided by 256 and
/// tagged with value range (0, 1).
inline SampleMatrix dequantize(const QuantizedImageSet& images, RngSeed seed, bool rescale) {
    require(images.size() >= 1, "dequantize: empty image set");
    const std::size_t d = images.dim();
    RowMatrix out(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(d));
    const double scale = rescale ? 1.0 / kPixelLevels : 1.0;
    parallel_for(images.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(seed, i);
            const auto img = images.image(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double x = img[j];
                // x + u can round up to x + 1 when u is within 2^-53 of 1; keep the cell half-open.
                const double y = std::min(x + rng.uniform(), std::nextafter(x + 1.0, 0.0));
                out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = y * scale;
            }
        }
    }, 64);
    const ValueRange range = rescale ? ValueRange{0.0, 1.0} : ValueRange{0.0, kPixelLevels};
    return SampleMatrix(std::move(out), range);
}

/// Converts a log-likelihood measured on data rescaled by 1/256 into the
/// original 0..256 pixel units (the Jacobian of the rescaling, -D ln 256).
inline double rescaled_ll_to_pixel_units(double ll_rescaled, std::size_t d) {
    return ll_rescaled - static_cast<double>(d) * std::log(kPixelLevels);
}

/// Wraps a density defined on [0,1)-rescaled data as a density on pixel units.
inline LogDensity pixel_units_density(LogDensity rescaled_model, std::size_t d) {
    return [model = std::move(rescaled_model), d](std::span<const double> y) {
        std::vector<double> scaled(y.begin(), y.end());
        for (double& v : scaled) {
            v /= kPixelLevels;
        }
        return rescaled_ll_to_pixel_units(model(scaled), d);
    };
}

inline double nats_to_bits_per_dim(double ll_nats_per_item, std::size_t d) {
    require(d >= 1, "nats_to_bits_per_dim: d must be >= 1");
    return -ll_nats_per_item / (static_cast<double>(d) * std::numbers::ln2);
}

struct DiscreteLLEstimate {
    double mean_log_mass = 0.0;  // nats per item
    double std_error = 0.0;
    std::size_t mc_samples = 0;
};

namespace detail {

struct CellStatistics {
    DiscreteLLEstimate estimate;
    double log_density_mean = 0.0;      // mean of log q(x + u) over the draws
    double log_density_variance = 0.0;  // sample variance of log q(x + u)
};

template <std::integral T>
CellStatistics cell_statistics(const LogDensity& model, std::span<const T> x, std::size_t mc_samples, RngSeed seed) {
    require(mc_samples >= 1, "discrete_log_likelihood: mc_samples must be >= 1");
    Rng rng(seed);
    std::vector<double> point(x.size());
    std::vector<double> log_q(mc_samples);
    for (std::size_t s = 0; s < mc_samples; ++s) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            point[j] = static_cast<double>(x[j]) + rng.uniform();
        }
        log_q[s] = model(point);
        require(!std::isnan(log_q[s]), "discrete_log_likelihood: model returned NaN");
    }

    CellStatistics out;
    out.estimate.mc_samples = mc_samples;
    const double m = static_cast<double>(mc_samples);
    const double lse = log_sum_exp(log_q);
    if (lse == kNegInf) {
        out.estimate.mean_log_mass = kNegInf;
        out.estimate.std_error = std::numeric_limits<double>::infinity();
        out.log_density_mean = kNegInf;
        out.log_density_variance = std::numeric_limits<double>::infinity();
        return out;
    }
    out.estimate.mean_log_mass = lse - std::log(m);

    // Delta method: se(ln w_bar) = sd(w) / (sqrt(m) w_bar), with w scaled by the max.
    double peak = kNegInf;
    for (double v : log_q) {
        peak = std::max(peak, v);
    }
    double w_sum = 0.0;
    for (double v : log_q) {
        w_sum += std::exp(v - peak);
    }
    const double w_bar = w_sum / m;
    double lq_sum = 0.0;
    for (double v : log_q) {
        lq_sum += v;
    }
    out.log_density_mean = lq_sum / m;
    if (mc_samples < 2) {
        out.estimate.std_error = std::numeric_limits<double>::infinity();
        out.log_density_variance = std::numeric_limits<double>::infinity();
        return out;
    }
    double w_ss = 0.0;
    double lq_ss = 0.0;
    for (double v : log_q) {
        const double w = std::exp(v - peak) - w_bar;
        w_ss += w * w;
        if (std::isfinite(out.log_density_mean)) {
            lq_ss += (v - out.log_density_mean) * (v - out.log_density_mean);
        }
    }
    out.estimate.std_error = std::sqrt(w_ss / (m - 1.0)) / (std::sqrt(m) * w_bar);
    out.log_density_variance =
        std::isfinite(out.log_density_mean) ? lq_ss / (m - 1.0) : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace detail

/// Monte-Carlo estimate of ln Q(x), Q(x) = integral of q over the unit cell
/// [x, x+1)^D: log-mean-exp of log q(x + u) over `mc_samples` uniform draws.
template <std::integral T>
DiscreteLLEstimate discrete_log_likelihood(const LogDensity& model, std::span<const T> x, std::size_t mc_samples,
                                           RngSeed seed) {
    return detail::cell_statistics(model, x, mc_samples, seed).estimate;
}

inline DiscreteLLEstimate discrete_log_likelihood(const LogDensity& model, const std::vector<int>& x,
                                                  std::size_t mc_samples, RngSeed seed) {
    return discrete_log_likelihood(model, std::span<const int>(x), mc_samples, seed);
}

struct JensenCheck {
    double continuous_ll = 0.0;  // mean over images of log q(x + u), one u per image
    double discrete_ll = 0.0;    // mean over images of the ln Q(x) estimate
    double continuous_se = 0.0;
    double discrete_se = 0.0;
    double combined_se = 0.0;

    [[nodiscard]] double gap() const { return discrete_ll - continuous_ll; }
    /// continuous <= discrete + n_se * combined standard error
    [[nodiscard]] bool holds(double n_se = 3.0) const { return continuous_ll <= discrete_ll + n_se * combined_se; }
};

/// Compares the dequantized (continuous) log-likelihood with the discrete one
/// it lower-bounds in expectation. The continuous value's standard error uses
/// the per-image variance of log q(x + u) estimated from the Monte-Carlo draws.
inline JensenCheck jensen_bound_check(const LogDensity& model, const QuantizedImageSet& images, RngSeed seed,
                                      std::size_t mc_samples) {
    require(images.size() >= 1, "jensen_bound_check: empty image set");
    require(mc_samples >= 1, "jensen_bound_check: mc_samples must be >= 1");
    const std::size_t n = images.size();
    const std::size_t d = images.dim();
    const RngSeed continuous_seed = derive_seed(seed, 0);
    const RngSeed discrete_seed = derive_seed(seed, 1);

    std::vector<double> continuous(n);
    std::vector<detail::CellStatistics> cells(n);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> point(d);
        for (std::size_t i = begin; i < end; ++i) {
            const auto img = images.image(i);
            Rng rng(continuous_seed, i);
            for (std::size_t j = 0; j < d; ++j) {
                point[j] = static_cast<double>(img[j]) + rng.uniform();
            }
            continuous[i] = model(point);
            cells[i] = detail::cell_statistics(model, img, mc_samples, derive_seed(discrete_seed, i));
        }
    });

    JensenCheck out;
    double c_sum = 0.0;
    double d_sum = 0.0;
    double c_var = 0.0;
    double d_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        c_sum += continuous[i];
        d_sum += cells[i].estimate.mean_log_mass;
        c_var += cells[i].log_density_variance;
        d_var += cells[i].estimate.std_error * cells[i].estimate.std_error;
    }
    const double nn = static_cast<double>(n);
    out.continuous_ll = c_sum / nn;
    out.discrete_ll = d_sum / nn;
    out.continuous_se = std::sqrt(c_var) / nn;
    out.discrete_se = std::sqrt(d_var) / nn;
    out.combined_se = std::sqrt(c_var + d_var) / nn;
    return out;
}

/// Uniform mixture of N(x_n, epsilon^2 I) over the training rows: the
/// "lookup table" model that memorizes its training set.
inline GaussianMixture build_lookup_table_model(const SampleMatrix& train, double epsilon) {
    require(std::isfinite(epsilon) && epsilon > 0.0, "build_lookup_table_model: epsilon must be positive");
    return GaussianMixture::uniform_isotropic(train, epsilon * epsilon);
}

/// w * p + (1 - w) * q for a good model p and a bad model q.
struct MixtureTrickModel {
    LogDensity good;
    LogDensity bad;
    double weight_good = 0.01;

    MixtureTrickModel(LogDensity p, LogDensity q, double w = 0.01)
        : good(std::move(p)), bad(std::move(q)), weight_good(w) {
        require(good && bad, "MixtureTrickModel: both densities are required");
        require(w > 0.0 && w < 1.0, "MixtureTrickModel: weight_good must lie in (0, 1)");
    }
};

inline double mixture_trick_log_density(const MixtureTrickModel& model, std::span<const double> x) {
    return log_sum_exp({std::log(model.weight_good) + model.good(x), std::log1p(-model.weight_good) + model.bad(x)});
}

enum class MixtureComponent : std::uint8_t { good, bad };

struct MixtureSample {
    SampleMatrix samples;
    std::vector<MixtureComponent> labels;
};

using Sampler = std::function<SampleMatrix(std::size_t, RngSeed)>;

/// Bernoulli(weight_good) component choice per draw, then a draw from that component.
inline MixtureSample sample_mixture_trick(const MixtureTrickModel& model, const Sampler& sample_good,
                                          const Sampler& sample_bad, std::size_t n, RngSeed seed) {
    require(n >= 1, "sample_mixture_trick: n must be >= 1");
    Rng rng(derive_seed(seed, 0));
    std::vector<MixtureComponent> labels(n);
    std::size_t n_good = 0;
    for (auto& label : labels) {
        label = rng.bernoulli(model.weight_good) ? MixtureComponent::good : MixtureComponent::bad;
        n_good += label == MixtureComponent::good ? 1 : 0;
    }
    const std::size_t n_bad = n - n_good;
    std::optional<SampleMatrix> good;
    std::optional<SampleMatrix> bad;
    if (n_good > 0) {
        good = sample_good(n_good, derive_seed(seed, 1));
    }
    if (n_bad > 0) {
        bad = sample_bad(n_bad, derive_seed(seed, 2));
    }
    const std::size_t d = good ? good->cols() : bad->cols();
    require(!(good && bad) || good->cols() == bad->cols(), "sample_mixture_trick: samplers disagree on dimension");
    RowMatrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::size_t gi = 0;
    std::size_t bi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        if (labels[i] == MixtureComponent::good) {
            out.row(row) = good->matrix().row(static_cast<Eigen::Index>(gi++));
        } else {
            out.row(row) = bad->matrix().row(static_cast<Eigen::Index>(bi++));
        }
    }
    return {SampleMatrix(std::move(out)), std::move(labels)};
}

/// Posterior probability that x came from the good component:
/// sigmoid(log_p - log_q - ln((1 - w) / w)).
inline double posterior_alpha(double log_p, double log_q, double weight_good = 0.01) {
    require(weight_good > 0.0 && weight_good < 1.0, "posterior_alpha: weight_good must lie in (0, 1)");
    const double z = log_p - log_q - (std::log1p(-weight_good) - std::log(weight_good));
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace geneval
