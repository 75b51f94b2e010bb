#pragma once

// Text schema for Gaussian models, shared with experiment configs.
//
// Isotropic Gaussian:
//   type = isotropic_gaussian
//   mean = 0 0
//   sigma = 1
//
// Diagonal Gaussian mixture:
//   type = gaussian_mixture
//   components = 2
//   component.0.weight = 0.5
//   component.0.mean = -2 0
//   component.0.variance = 1 1
//   component.1.weight = 0.5
//   ...
//
// Inside an experiment config the same keys appear under a prefix,
// e.g. `target.type`, `target.component.0.mean`.

#include <charconv>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "geneval/config.hpp"
#include "geneval/density.hpp"

namespace geneval {

using GaussianModel = std::variant<IsotropicGaussian, GaussianMixture>;

namespace detail {
/// Shortest text that parses back to the same double.
inline std::string format_exact(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

inline std::string format_vector(const Eigen::VectorXd& v) {
    std::string out;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) {
            out += ' ';
        }
        out += format_exact(v[i]);
    }
    return out;
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}
}  // namespace detail

inline std::string to_text(const IsotropicGaussian& g, const std::string& prefix = "") {
    std::ostringstream out;
    out << prefix << "type = isotropic_gaussian\n";
    out << prefix << "mean = " << detail::format_vector(g.mean()) << '\n';
    out << prefix << "sigma = " << detail::format_exact(g.sigma()) << '\n';
    return out.str();
}

inline std::string to_text(const GaussianMixture& m, const std::string& prefix = "") {
    std::ostringstream out;
    out << prefix << "type = gaussian_mixture\n";
    out << prefix << "components = " << m.size() << '\n';
    for (std::size_t k = 0; k < m.size(); ++k) {
        const std::string p = prefix + "component." + std::to_string(k) + ".";
        out << p << "weight = " << detail::format_exact(m.weights()[k]) << '\n';
        out << p << "mean = " << detail::format_vector(m.components()[k].mean) << '\n';
        out << p << "variance = " << detail::format_vector(m.components()[k].variance) << '\n';
    }
    return out.str();
}

inline std::string to_text(const GaussianModel& model, const std::string& prefix = "") {
    return std::visit([&](const auto& m) { return to_text(m, prefix); }, model);
}

inline GaussianModel model_from_config(const KeyValueConfig& cfg, const std::string& prefix = "") {
    const std::string type = cfg.raw(prefix + "type");
    if (type == "isotropic_gaussian") {
        return IsotropicGaussian(detail::to_eigen(cfg.get_doubles(prefix + "mean")), cfg.get_double(prefix + "sigma"));
    }
    if (type == "gaussian_mixture") {
        const auto k = cfg.get_uint(prefix + "components");
        require(k >= 1, "gaussian_mixture: components must be >= 1");
        std::vector<double> weights;
        std::vector<GaussianComponent> comps;
        for (std::uint64_t i = 0; i < k; ++i) {
            const std::string p = prefix + "component." + std::to_string(i) + ".";
            weights.push_back(cfg.get_double(p + "weight"));
            comps.push_back({detail::to_eigen(cfg.get_doubles(p + "mean")),
                             detail::to_eigen(cfg.get_doubles(p + "variance"))});
        }
        return GaussianMixture(std::move(weights), std::move(comps));
    }
    throw Error("unknown model type '" + type + "' (expected isotropic_gaussian or gaussian_mixture)");
}

inline GaussianModel model_from_text(const std::string& text) {
    return model_from_config(KeyValueConfig::parse(text, "<model>"));
}

inline GaussianMixture as_mixture(const GaussianModel& model) {
    if (const auto* g = std::get_if<IsotropicGaussian>(&model)) {
        return GaussianMixture::from_gaussian(*g);
    }
    return std::get<GaussianMixture>(model);
}

}  // namespace geneval
