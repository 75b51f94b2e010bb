#pragma once

// Experiment orchestration: parameter parsing with recorded defaults, the six
// experiments, CSV outputs and the run manifest.
//
// Every experiment reads its parameters from a KeyValueConfig. All keys are
// read (and validated) before any computation; unknown keys are an error.
// The manifest written next to the CSVs is itself a config file that
// reproduces the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/version.hpp>

#include "geneval/config.hpp"
#include "geneval/csv.hpp"
#include "geneval/datasets.hpp"
#include "geneval/density.hpp"
#include "geneval/divergence.hpp"
#include "geneval/likelihood.hpp"
#include "geneval/model_io.hpp"
#include "geneval/nn_overfit.hpp"
#include "geneval/parallel.hpp"
#include "geneval/parzen.hpp"

namespace geneval {

inline constexpr const char* kVersion = "0.1.0";

inline const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"fit-divergence", "parzen-sweep",  "parzen-benchmark",
                                                   "nn-shift",       "mixture-demo", "dequantize-ll"};
    return names;
}

// ---------------------------------------------------------------------------
// Parameters

/// Typed access to a config that records the effective value of every key
/// read, defaults included.
class Params {
public:
    explicit Params(KeyValueConfig cfg) : cfg_(std::move(cfg)) {}

    std::string text(const std::string& key, const std::string& fallback) {
        return record(key, cfg_.get_string(key, fallback));
    }

    std::string choice(const std::string& key, const std::string& fallback, const std::set<std::string>& allowed) {
        const std::string v = text(key, fallback);
        if (allowed.count(v) == 0) {
            std::string list;
            for (const auto& a : allowed) {
                list += (list.empty() ? "" : ", ") + a;
            }
            throw Error("config key '" + key + "': '" + v + "' is not one of " + list);
        }
        return v;
    }

    double real(const std::string& key, double fallback) {
        const double v = cfg_.get_double(key, fallback);
        record(key, detail::format_exact(v));
        return v;
    }

    double positive(const std::string& key, double fallback) {
        const double v = real(key, fallback);
        require(std::isfinite(v) && v > 0.0, "config key '" + key + "' must be positive");
        return v;
    }

    std::size_t count(const std::string& key, std::uint64_t fallback, std::uint64_t min = 0) {
        const auto v = cfg_.get_uint(key, fallback);
        require(v >= min, "config key '" + key + "' must be >= " + std::to_string(min));
        record(key, std::to_string(v));
        return static_cast<std::size_t>(v);
    }

    std::vector<double> reals(const std::string& key, std::vector<double> fallback) {
        const auto v = cfg_.get_doubles(key, std::move(fallback));
        std::string s;
        for (double x : v) {
            s += (s.empty() ? "" : " ") + detail::format_exact(x);
        }
        record(key, s);
        return v;
    }

    std::vector<std::size_t> counts(const std::string& key, std::vector<std::uint64_t> fallback) {
        const auto v = cfg_.get_uints(key, std::move(fallback));
        std::string s;
        for (auto x : v) {
            s += (s.empty() ? "" : " ") + std::to_string(x);
        }
        record(key, s);
        return {v.begin(), v.end()};
    }

    bool flag(const std::string& key, bool fallback) {
        const bool v = cfg_.get_bool(key, fallback);
        record(key, v ? "true" : "false");
        return v;
    }

    std::string existing_path(const std::string& key) {
        const std::string p = text(key, "");
        require(!p.empty(), "config key '" + key + "' is required");
        require(std::filesystem::exists(p), "config key '" + key + "': path '" + p + "' does not exist");
        return p;
    }

    /// A Gaussian model under `prefix`, or `fallback` when no key starts with it.
    GaussianModel model(const std::string& prefix, const GaussianModel& fallback) {
        bool present = false;
        for (const auto& [key, value] : cfg_.entries()) {
            present = present || key.rfind(prefix, 0) == 0;
        }
        const GaussianModel m = present ? model_from_config(cfg_, prefix) : fallback;
        const auto parsed = KeyValueConfig::parse(to_text(m, prefix));
        for (const auto& [key, value] : parsed.entries()) {
            record(key, value);
        }
        return m;
    }

    /// Rejects keys that were never read.
    void finish() const {
        for (const auto& [key, value] : cfg_.entries()) {
            if (key != "experiment" && resolved_.count(key) == 0) {
                throw Error("unknown config key '" + key + "'");
            }
        }
    }

    [[nodiscard]] const std::map<std::string, std::string>& resolved() const { return resolved_; }

private:
    std::string record(const std::string& key, std::string value) {
        resolved_[key] = value;
        return value;
    }

    KeyValueConfig cfg_;
    std::map<std::string, std::string> resolved_;
};

// ---------------------------------------------------------------------------
// Datasets

struct DatasetSpec {
    std::string format = "synthetic";  // cifar10, mnist or synthetic
    std::string path;
    std::size_t synthetic_count = 2000;
    ImageGeometry synthetic_geometry{32, 32, 3};
};

inline DatasetSpec parse_dataset(Params& p, const std::set<std::string>& formats, ImageGeometry synthetic_default) {
    DatasetSpec d;
    d.format = p.choice("dataset.format", "synthetic", formats);
    if (d.format == "synthetic") {
        d.synthetic_count = p.count("dataset.count", 2000, 1);
        d.synthetic_geometry.height = p.count("dataset.height", synthetic_default.height, 1);
        d.synthetic_geometry.width = p.count("dataset.width", synthetic_default.width, 1);
        d.synthetic_geometry.channels = p.count("dataset.channels", synthetic_default.channels, 1);
    } else {
        d.path = p.existing_path("dataset.path");
    }
    return d;
}

namespace detail {
inline std::string in_dir(const std::string& path, const std::string& name) {
    return std::filesystem::is_directory(path) ? (std::filesystem::path(path) / name).string() : path;
}
}  // namespace detail

/// Training images of the dataset. CIFAR-10 directories yield the five
/// training batches; MNIST directories the train-images file.
inline QuantizedImageSet load_training_images(const DatasetSpec& d, RngSeed seed) {
    if (d.format == "cifar10") {
        return std::filesystem::is_directory(d.path) ? read_cifar10_training_set(d.path) : read_cifar10(d.path);
    }
    if (d.format == "mnist") {
        return read_mnist_idx(detail::in_dir(d.path, "train-images-idx3-ubyte"));
    }
    return synthetic_images(d.synthetic_count, d.synthetic_geometry, seed);
}

// ---------------------------------------------------------------------------
// Outputs

struct OutputTable {
    std::string name;  // file stem
    CsvTable table;
    std::size_t x_column = 0;
};

struct RunOptions {
    std::string out_dir = ".";
    bool gnuplot = false;
};

struct RunSummary {
    std::vector<std::string> files;
    double wall_seconds = 0.0;
};

// ---------------------------------------------------------------------------
// fit-divergence

inline GaussianMixture default_two_mode_target() {
    return GaussianMixture({0.5, 0.5}, {{Eigen::Vector2d(-2.0, 0.0), Eigen::Vector2d(1.0, 1.0)},
                                        {Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d(1.0, 1.0)}});
}

struct FitDivergenceParams {
    GaussianMixture target = default_two_mode_target();
    std::set<std::string> methods = {"kld", "mmd", "jsd"};
    std::size_t mmd_target_samples = 2000;
    FitConfig mmd;
    std::vector<double> mmd_multipliers = {0.25, 0.5, 1.0, 2.0, 4.0};
    FitConfig jsd;
    std::size_t jsd_grid_points = 161;
    std::size_t jsd_restarts = 10;
    RngSeed seed{0};

    static FitDivergenceParams parse(Params& p) {
        FitDivergenceParams out;
        out.seed = RngSeed{p.count("seed", 0)};
        out.target = as_mixture(p.model("target.", default_two_mode_target()));
        std::istringstream methods(p.text("methods", "kld mmd jsd"));
        out.methods.clear();
        for (std::string m; methods >> m;) {
            require(m == "kld" || m == "mmd" || m == "jsd", "config key 'methods': unknown method '" + m + "'");
            out.methods.insert(m);
        }
        require(!out.methods.empty(), "config key 'methods' is empty");
        out.mmd_target_samples = p.count("mmd.target_samples", 2000, 2);
        out.mmd.model_samples = p.count("mmd.model_samples", 1000, 1);
        out.mmd.step_size = p.positive("mmd.step_size", 1.0);
        out.mmd.max_iters = p.count("mmd.max_iters", 500, 1);
        out.mmd.tolerance = p.positive("mmd.tolerance", 1e-6);
        out.mmd_multipliers = p.reals("mmd.bandwidth_multipliers", {0.25, 0.5, 1.0, 2.0, 4.0});
        out.jsd.step_size = p.positive("jsd.step_size", 1.0);
        out.jsd.max_iters = p.count("jsd.max_iters", 500, 1);
        out.jsd.tolerance = p.positive("jsd.tolerance", 1e-6);
        out.jsd_grid_points = p.count("jsd.grid_points", 161, 2);
        out.jsd_restarts = p.count("jsd.restarts", 10, 1);
        if (out.methods.count("jsd")) {
            require(out.target.dim() <= QuadratureGrid::kMaxDims, "fit-divergence: jsd needs a target of at most 3 dimensions");
        }
        return out;
    }
};

struct DivergenceFits {
    IsotropicGaussian kld;
    std::optional<FitResult> mmd;
    std::optional<FitResult> jsd;  // best restart
    std::vector<FitResult> jsd_restarts;
};

inline DivergenceFits run_fit_divergence(const FitDivergenceParams& p) {
    DivergenceFits out{fit_kld(p.target), std::nullopt, std::nullopt, {}};
    if (p.methods.count("mmd")) {
        const SampleMatrix samples = sample(p.target, p.mmd_target_samples, derive_seed(p.seed, 1));
        FitConfig cfg = p.mmd;
        cfg.init = out.kld;
        cfg.seed = derive_seed(p.seed, 2);
        out.mmd = fit_mmd(samples, KernelBank::median_heuristic(samples, p.mmd_multipliers), cfg);
    }
    if (p.methods.count("jsd")) {
        FitConfig cfg = p.jsd;
        cfg.seed = derive_seed(p.seed, 3);
        out.jsd_restarts = fit_jsd_multistart(p.target, QuadratureGrid::for_fit(p.target, p.jsd_grid_points), cfg,
                                              p.jsd_restarts);
        std::size_t best = 0;
        for (std::size_t r = 1; r < out.jsd_restarts.size(); ++r) {
            if (out.jsd_restarts[r].objective < out.jsd_restarts[best].objective) {
                best = r;
            }
        }
        out.jsd = out.jsd_restarts[best];
    }
    return out;
}

inline std::vector<OutputTable> fit_divergence_tables(const FitDivergenceParams& p, const DivergenceFits& fits) {
    const std::size_t d = p.target.dim();
    std::vector<std::string> fit_cols = {"method", "objective", "iterations", "converged", "sigma"};
    std::vector<std::string> trace_cols = {"method", "iter", "objective"};
    for (std::size_t i = 0; i < d; ++i) {
        fit_cols.push_back("mean_" + std::to_string(i));
        trace_cols.push_back("mean_" + std::to_string(i));
    }
    trace_cols.push_back("sigma");
    CsvTable table(fit_cols);
    CsvTable trace(trace_cols);
    {
        auto row = table.row();
        row << "kld" << "" << 0 << 1 << fits.kld.sigma();
        for (std::size_t i = 0; i < d; ++i) {
            row << fits.kld.mean()[static_cast<Eigen::Index>(i)];
        }
    }
    auto add = [&](const std::string& name, const FitResult& r) {
        {
            auto row = table.row();
            row << name << r.objective << r.iterations << (r.converged ? 1 : 0) << r.model.sigma();
            for (std::size_t i = 0; i < d; ++i) {
                row << r.model.mean()[static_cast<Eigen::Index>(i)];
            }
        }
        for (const auto& t : r.trace) {
            auto row = trace.row();
            row << name << t.iter << t.objective;
            for (std::size_t i = 0; i < d; ++i) {
                row << t.mean[static_cast<Eigen::Index>(i)];
            }
            row << t.sigma;
        }
    };
    if (fits.mmd) {
        add("mmd", *fits.mmd);
    }
    if (fits.jsd) {
        add("jsd", *fits.jsd);
    }
    return {{"fits", std::move(table), 0}, {"trace", std::move(trace), 1}};
}

// ---------------------------------------------------------------------------
// parzen-sweep

using TrueModel = std::variant<IsotropicGaussian, FullCovarianceGaussian>;

struct PatchParams {
    std::size_t size = 6;
    ChannelMode channel_mode = ChannelMode::grayscale;
    std::size_t count = 50000;

    static PatchParams parse(Params& p, std::size_t default_count) {
        PatchParams out;
        out.size = p.count("patch.size", 6, 1);
        out.channel_mode =
            p.choice("patch.channels", "grayscale", {"grayscale", "color"}) == "grayscale" ? ChannelMode::grayscale
                                                                                           : ChannelMode::color;
        out.count = p.count("patch.count", default_count, 2);
        return out;
    }
};

struct ParzenSweepParams {
    std::string source = "synthetic";  // cifar10, synthetic (patch pipeline) or isotropic
    DatasetSpec dataset;
    PatchParams patch;
    std::size_t iso_dim = 36;
    double iso_sigma = 1.0;
    std::vector<std::size_t> sample_counts = {100, 1000, 10000};
    std::size_t test_count = 1000;
    std::size_t grid_points = 20;
    double grid_lo = 0.01;
    double grid_hi = 1.0;
    RngSeed seed{0};

    static ParzenSweepParams parse(Params& p) {
        ParzenSweepParams out;
        out.seed = RngSeed{p.count("seed", 0)};
        out.source = p.choice("source", "synthetic", {"cifar10", "synthetic", "isotropic"});
        if (out.source == "isotropic") {
            out.iso_dim = p.count("isotropic.dim", 36, 1);
            out.iso_sigma = p.positive("isotropic.sigma", 1.0);
        } else {
            out.dataset.format = out.source;
            if (out.source == "cifar10") {
                out.dataset.path = p.existing_path("dataset.path");
            } else {
                out.dataset.synthetic_count = p.count("dataset.count", 2000, 1);
                out.dataset.synthetic_geometry = {32, 32, 3};
            }
            out.patch = PatchParams::parse(p, 50000);
        }
        out.sample_counts = p.counts("sample_counts", {100, 1000, 10000});
        out.test_count = p.count("test_count", 1000, 1);
        out.grid_points = p.count("bandwidth.points", 20, 1);
        out.grid_lo = p.positive("bandwidth.lo", 0.01);
        out.grid_hi = p.positive("bandwidth.hi", 1.0);
        return out;
    }
};

/// Full-covariance Gaussian fit to dequantized patches rescaled by 1/256.
inline FullCovarianceGaussian fit_patch_gaussian(const QuantizedImageSet& images, const PatchParams& patch,
                                                 RngSeed seed) {
    const auto patches = extract_patches(images, PatchSpec{patch.size, patch.channel_mode, patch.count, derive_seed(seed, 0)});
    return fit_full_gaussian(dequantize(patches, derive_seed(seed, 1), true));
}

inline TrueModel parzen_sweep_truth(const ParzenSweepParams& p) {
    if (p.source == "isotropic") {
        return IsotropicGaussian(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.iso_dim)), p.iso_sigma);
    }
    return fit_patch_gaussian(load_training_images(p.dataset, derive_seed(p.seed, 10)), p.patch, derive_seed(p.seed, 11));
}

inline SweepResult run_parzen_sweep(const ParzenSweepParams& p) {
    const TrueModel truth = parzen_sweep_truth(p);
    return std::visit(
        [&](const auto& model) {
            const SampleMatrix test = sample(model, p.test_count, derive_seed(p.seed, 1));
            const double scale = data_scale(sample(model, 2000, derive_seed(p.seed, 2)));
            const auto grid = log_spaced_grid(scale, p.grid_points, p.grid_lo, p.grid_hi);
            return parzen_convergence_sweep(model, p.sample_counts, test, grid, derive_seed(p.seed, 3));
        },
        truth);
}

inline std::vector<OutputTable> parzen_sweep_tables(const SweepResult& r) {
    CsvTable t({"n", "bandwidth", "mean_nats", "reference_nats", "std_error", "reference_std_error"});
    for (const auto& row : r.rows) {
        t.row() << row.sample_count << row.bandwidth_used << row.mean_test_ll << r.reference << row.std_error
                << r.reference_std_error;
    }
    return {{"sweep", std::move(t), 0}};
}

// ---------------------------------------------------------------------------
// parzen-benchmark

struct ParzenBenchmarkParams {
    DatasetSpec dataset;
    std::size_t train = 10000;
    std::size_t validation = 1000;
    std::size_t test = 1000;
    std::size_t samples = 1000;
    std::size_t k = 1000;
    std::size_t kmeans_iters = 100;
    std::size_t grid_points = 20;
    double grid_lo = 0.01;
    double grid_hi = 1.0;
    RngSeed seed{0};

    static ParzenBenchmarkParams parse(Params& p) {
        ParzenBenchmarkParams out;
        out.seed = RngSeed{p.count("seed", 0)};
        out.dataset = parse_dataset(p, {"mnist", "synthetic"}, ImageGeometry{28, 28, 1});
        out.train = p.count("split.train", 10000, 1);
        out.validation = p.count("split.validation", 1000, 1);
        out.test = p.count("split.test", 1000, 1);
        out.samples = p.count("samples", 1000, 1);
        out.k = p.count("kmeans.k", 1000, 1);
        out.kmeans_iters = p.count("kmeans.max_iters", 100, 1);
        out.grid_points = p.count("bandwidth.points", 20, 1);
        out.grid_lo = p.positive("bandwidth.lo", 0.01);
        out.grid_hi = p.positive("bandwidth.hi", 1.0);
        require(out.k <= out.train, "parzen-benchmark: kmeans.k exceeds split.train");
        if (out.dataset.format == "mnist") {
            require(std::filesystem::is_directory(out.dataset.path),
                    "parzen-benchmark: dataset.path must be the MNIST directory");
            for (const char* f : {"train-images-idx3-ubyte", "t10k-images-idx3-ubyte"}) {
                require(std::filesystem::exists(detail::in_dir(out.dataset.path, f)),
                        std::string("parzen-benchmark: missing ") + f + " in " + out.dataset.path);
            }
        } else {
            require(out.train + out.validation + out.test + out.samples <= out.dataset.synthetic_count,
                    "parzen-benchmark: split sizes exceed dataset.count");
        }
        return out;
    }
};

/// Disjoint random subsets of the training file for k-means fitting,
/// validation and held-out true samples; the test set comes from the separate
/// test file (or, for synthetic data, a further disjoint subset). Pixels are
/// scaled to [0, 1] by 1/255. Entries are "kmeans" (samples drawn from the
/// centroids) and "true_samples".
inline std::vector<BenchmarkRow> run_parzen_benchmark(const ParzenBenchmarkParams& p) {
    const QuantizedImageSet pool = load_training_images(p.dataset, derive_seed(p.seed, 10));
    const bool synthetic = p.dataset.format == "synthetic";
    const std::size_t needed = p.train + p.validation + p.samples + (synthetic ? p.test : 0);
    require(needed <= pool.size(), "parzen-benchmark: split sizes exceed the dataset");
    const auto order = sample_without_replacement(pool.size(), needed, derive_seed(p.seed, 1));
    auto part = [&](std::size_t from, std::size_t n) {
        return pool.select({order.begin() + static_cast<std::ptrdiff_t>(from),
                            order.begin() + static_cast<std::ptrdiff_t>(from + n)})
            .to_samples(1.0 / 255.0);
    };
    const SampleMatrix train = part(0, p.train);
    const SampleMatrix validation = part(p.train, p.validation);
    const SampleMatrix true_samples = part(p.train + p.validation, p.samples);
    SampleMatrix test;
    if (synthetic) {
        test = part(p.train + p.validation + p.samples, p.test);
    } else {
        const auto test_pool = read_mnist_idx(detail::in_dir(p.dataset.path, "t10k-images-idx3-ubyte"));
        require(p.test <= test_pool.size(), "parzen-benchmark: split.test exceeds the test file");
        test = test_pool.select(sample_without_replacement(test_pool.size(), p.test, derive_seed(p.seed, 2)))
                   .to_samples(1.0 / 255.0);
    }
    const auto km = kmeans(train, p.k, p.kmeans_iters, derive_seed(p.seed, 3));
    const SampleMatrix km_samples = sample_centroids(km.centroids, p.samples, derive_seed(p.seed, 4));
    const auto grid = log_spaced_grid(data_scale(train), p.grid_points, p.grid_lo, p.grid_hi);
    return parzen_benchmark({{"kmeans", km_samples}, {"true_samples", true_samples}}, test, validation, grid);
}

inline std::vector<OutputTable> parzen_benchmark_tables(const std::vector<BenchmarkRow>& rows) {
    CsvTable t({"entry_name", "n_samples", "bandwidth", "mean_nats", "std_error"});
    for (const auto& r : rows) {
        t.row() << r.name << r.n_samples << r.bandwidth << r.mean_nats << r.std_error;
    }
    return {{"benchmark", std::move(t), 0}};
}

// ---------------------------------------------------------------------------
// nn-shift

struct NnShiftParams {
    DatasetSpec dataset;
    std::size_t subset = 0;  // 0 keeps every training image
    std::size_t window = 28;
    std::vector<std::size_t> shifts = {0, 1, 2, 3, 4};
    std::size_t queries = 1000;
    double level = 0.9;
    RngSeed seed{0};

    static NnShiftParams parse(Params& p) {
        NnShiftParams out;
        out.seed = RngSeed{p.count("seed", 0)};
        out.dataset = parse_dataset(p, {"cifar10", "synthetic"}, ImageGeometry{32, 32, 3});
        out.subset = p.count("dataset.subset", 0);
        out.window = p.count("window", 28, 1);
        out.shifts = p.counts("shifts", {0, 1, 2, 3, 4});
        out.queries = p.count("queries", 1000, 1);
        out.level = p.real("level", 0.9);
        require(out.level > 0.0 && out.level < 1.0, "config key 'level' must lie in (0, 1)");
        require(!out.shifts.empty(), "config key 'shifts' is empty");
        if (out.dataset.format == "synthetic") {
            const auto& g = out.dataset.synthetic_geometry;
            for (auto s : out.shifts) {
                require(out.window + s <= std::min(g.height, g.width), "nn-shift: window + shift exceeds the image size");
            }
        }
        return out;
    }
};

inline std::vector<PrecisionPoint> run_nn_shift(const NnShiftParams& p) {
    QuantizedImageSet images = load_training_images(p.dataset, derive_seed(p.seed, 10));
    if (p.subset != 0) {
        require(p.subset <= images.size(), "nn-shift: dataset.subset exceeds the dataset");
        images = images.select(sample_without_replacement(images.size(), p.subset, derive_seed(p.seed, 1)));
    }
    return shift_precision_curve(images, p.window, p.shifts, p.queries, derive_seed(p.seed, 2), p.level);
}

inline std::vector<OutputTable> nn_shift_tables(const std::vector<PrecisionPoint>& points, RngSeed seed) {
    CsvTable t({"shift", "precision", "ci_low", "ci_high", "n_queries", "seed"});
    for (const auto& pt : points) {
        t.row() << pt.shift << pt.precision << pt.ci_low << pt.ci_high << pt.n_queries << seed.value;
    }
    return {{"precision", std::move(t), 0}};
}

// ---------------------------------------------------------------------------
// mixture-demo

struct MixtureDemoParams {
    std::size_t dim = 36;
    double mean = 0.5;
    double good_sigma = 0.1;
    double bad_sigma = 0.288675134594813;  // sd of U[0, 1)
    double weight_good = 0.01;
    std::size_t test_count = 1000;
    std::size_t samples = 1000;
    std::size_t lookup_train = 1000;
    double lookup_epsilon = 0.01;
    RngSeed seed{0};

    static MixtureDemoParams parse(Params& p) {
        MixtureDemoParams out;
        out.seed = RngSeed{p.count("seed", 0)};
        out.dim = p.count("dim", 36, 1);
        out.mean = p.real("mean", 0.5);
        out.good_sigma = p.positive("good.sigma", 0.1);
        out.bad_sigma = p.positive("bad.sigma", 0.288675134594813);
        out.weight_good = p.real("weight_good", 0.01);
        require(out.weight_good > 0.0 && out.weight_good < 1.0, "config key 'weight_good' must lie in (0, 1)");
        out.test_count = p.count("test_count", 1000, 1);
        out.samples = p.count("samples", 1000, 1);
        out.lookup_train = p.count("lookup.train", 1000, 1);
        out.lookup_epsilon = p.positive("lookup.epsilon", 0.01);
        return out;
    }
};

struct MixtureDemoResult {
    std::vector<std::pair<std::string, double>> metrics;
    std::vector<double> alphas;      // posterior of the good component per test point
    std::vector<double> penalties;   // log p - log mixture per test point
};

/// p is the "good" model and generates the test points; q is broad noise.
inline MixtureDemoResult run_mixture_demo(const MixtureDemoParams& p) {
    const auto d = static_cast<Eigen::Index>(p.dim);
    const IsotropicGaussian good(Eigen::VectorXd::Constant(d, p.mean), p.good_sigma);
    const IsotropicGaussian bad(Eigen::VectorXd::Constant(d, p.mean), p.bad_sigma);
    const MixtureTrickModel mix{good.as_log_density(), bad.as_log_density(), p.weight_good};
    const SampleMatrix test = sample(good, p.test_count, derive_seed(p.seed, 1));

    MixtureDemoResult out;
    double sum_p = 0.0;
    double sum_mix = 0.0;
    std::size_t confident = 0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        const double lp = good.log_density(test.row(i));
        const double lq = bad.log_density(test.row(i));
        const double lm = mixture_trick_log_density(mix, test.row(i));
        sum_p += lp;
        sum_mix += lm;
        out.penalties.push_back(lp - lm);
        out.alphas.push_back(posterior_alpha(lp, lq, p.weight_good));
        confident += out.alphas.back() > 0.999 ? 1 : 0;
    }
    const double n = static_cast<double>(test.rows());

    const auto drawn = sample_mixture_trick(
        mix, [&](std::size_t k, RngSeed s) { return sample(good, k, s); },
        [&](std::size_t k, RngSeed s) { return sample(bad, k, s); }, p.samples, derive_seed(p.seed, 2));
    std::size_t n_good = 0;
    for (auto l : drawn.labels) {
        n_good += l == MixtureComponent::good ? 1 : 0;
    }

    const SampleMatrix lookup_train = sample(good, p.lookup_train, derive_seed(p.seed, 3));
    const GaussianMixture lookup = build_lookup_table_model(lookup_train, p.lookup_epsilon);
    double lookup_train_ll = 0.0;
    for (std::size_t i = 0; i < lookup_train.rows(); ++i) {
        lookup_train_ll += lookup.log_density(lookup_train.row(i));
    }
    double lookup_test_ll = 0.0;
    for (std::size_t i = 0; i < test.rows(); ++i) {
        lookup_test_ll += lookup.log_density(test.row(i));
    }

    out.metrics = {
        {"log_100", std::log(100.0)},
        {"penalty_bound", -std::log(p.weight_good)},
        {"mean_log_p", sum_p / n},
        {"mean_log_mixture", sum_mix / n},
        {"max_penalty", *std::max_element(out.penalties.begin(), out.penalties.end())},
        {"min_penalty", *std::min_element(out.penalties.begin(), out.penalties.end())},
        {"min_alpha", *std::min_element(out.alphas.begin(), out.alphas.end())},
        {"fraction_alpha_above_0.999", static_cast<double>(confident) / n},
        {"sample_fraction_good", static_cast<double>(n_good) / static_cast<double>(p.samples)},
        {"lookup_train_ll", lookup_train_ll / static_cast<double>(lookup_train.rows())},
        {"lookup_test_ll", lookup_test_ll / n},
    };
    return out;
}

inline std::vector<OutputTable> mixture_demo_tables(const MixtureDemoResult& r) {
    CsvTable t({"metric", "value"});
    for (const auto& [name, value] : r.metrics) {
        t.row() << name << value;
    }
    return {{"mixture", std::move(t), 0}};
}

// ---------------------------------------------------------------------------
// dequantize-ll

struct DequantizeLLParams {
    DatasetSpec dataset;
    PatchParams patch;
    std::size_t test_count = 1000;
    std::size_t mc_samples = 200;
    std::size_t runs = 20;
    RngSeed seed{0};

    static DequantizeLLParams parse(Params& p) {
        DequantizeLLParams out;
        out.seed = RngSeed{p.count("seed", 0)};
        out.dataset = parse_dataset(p, {"cifar10", "synthetic"}, ImageGeometry{32, 32, 3});
        out.patch = PatchParams::parse(p, 20000);
        out.test_count = p.count("test_count", 1000, 1);
        out.mc_samples = p.count("mc_samples", 200, 1);
        out.runs = p.count("runs", 20, 1);
        return out;
    }
};

struct DequantizeLLRun {
    RngSeed seed;
    JensenCheck check;
    std::size_t dim = 0;
};

/// Each run fits a full-covariance Gaussian (pixel units) to dequantized
/// training patches, then compares its dequantized and discrete
/// log-likelihoods on fresh test patches.
inline std::vector<DequantizeLLRun> run_dequantize_ll(const DequantizeLLParams& p) {
    const QuantizedImageSet images = load_training_images(p.dataset, derive_seed(p.seed, 10));
    std::vector<DequantizeLLRun> out;
    for (std::size_t r = 0; r < p.runs; ++r) {
        const RngSeed s = derive_seed(p.seed, 100 + r);
        const auto train = extract_patches(images, PatchSpec{p.patch.size, p.patch.channel_mode, p.patch.count, derive_seed(s, 0)});
        const auto model = fit_full_gaussian(dequantize(train, derive_seed(s, 1), false));
        const auto test = extract_patches(images, PatchSpec{p.patch.size, p.patch.channel_mode, p.test_count, derive_seed(s, 2)});
        out.push_back({s, jensen_bound_check(model.as_log_density(), test, derive_seed(s, 3), p.mc_samples), test.dim()});
    }
    return out;
}

inline std::vector<OutputTable> dequantize_ll_tables(const DequantizeLLParams& p, const std::vector<DequantizeLLRun>& runs) {
    CsvTable t({"dataset", "model", "nats_per_item", "bits_per_dim", "std_error", "mc_samples", "seed"});
    for (const auto& r : runs) {
        t.row() << p.dataset.format << "gaussian/dequantized" << r.check.continuous_ll
                << nats_to_bits_per_dim(r.check.continuous_ll, r.dim) << r.check.continuous_se << 1 << r.seed.value;
        t.row() << p.dataset.format << "gaussian/discrete" << r.check.discrete_ll
                << nats_to_bits_per_dim(r.check.discrete_ll, r.dim) << r.check.discrete_se << p.mc_samples
                << r.seed.value;
    }
    return {{"loglik", std::move(t), 0}};
}

// ---------------------------------------------------------------------------
// Driver

/// Parses the whole config (failing before any computation on a bad key or
/// path) and returns a closure that computes the output tables.
inline std::function<std::vector<OutputTable>()> prepare_experiment(const std::string& name, Params& params) {
    std::function<std::vector<OutputTable>()> job;
    if (name == "fit-divergence") {
        job = [p = FitDivergenceParams::parse(params)] { return fit_divergence_tables(p, run_fit_divergence(p)); };
    } else if (name == "parzen-sweep") {
        job = [p = ParzenSweepParams::parse(params)] { return parzen_sweep_tables(run_parzen_sweep(p)); };
    } else if (name == "parzen-benchmark") {
        job = [p = ParzenBenchmarkParams::parse(params)] { return parzen_benchmark_tables(run_parzen_benchmark(p)); };
    } else if (name == "nn-shift") {
        job = [p = NnShiftParams::parse(params)] { return nn_shift_tables(run_nn_shift(p), p.seed); };
    } else if (name == "mixture-demo") {
        job = [p = MixtureDemoParams::parse(params)] { return mixture_demo_tables(run_mixture_demo(p)); };
    } else if (name == "dequantize-ll") {
        job = [p = DequantizeLLParams::parse(params)] { return dequantize_ll_tables(p, run_dequantize_ll(p)); };
    } else {
        throw Error("unknown experiment '" + name + "'");
    }
    params.finish();
    return job;
}

/// Runs `name`, writing <table>.csv files (and .dat files with `gnuplot`)
/// plus manifest.txt into the output directory.
inline RunSummary run_experiment(const std::string& name, const KeyValueConfig& config, const RunOptions& options) {
    if (config.has("experiment")) {
        require(config.raw("experiment") == name,
                "config is for experiment '" + config.raw("experiment") + "', not '" + name + "'");
    }
    Params params(config);
    const auto job = prepare_experiment(name, params);

    std::filesystem::create_directories(options.out_dir);
    const auto start = std::chrono::steady_clock::now();
    const auto tables = job();
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    RunSummary summary;
    summary.wall_seconds = wall;
    for (const auto& t : tables) {
        const auto path = std::filesystem::path(options.out_dir) / (t.name + ".csv");
        t.table.write(path.string());
        summary.files.push_back(path.string());
        if (options.gnuplot) {
            const auto dat = std::filesystem::path(options.out_dir) / (t.name + ".dat");
            std::ofstream out(dat, std::ios::binary);
            out << t.table.gnuplot_str(t.x_column);
            require(static_cast<bool>(out), "failed writing '" + dat.string() + "'");
            summary.files.push_back(dat.string());
        }
    }

    std::ostringstream manifest;
    manifest << "# geneval " << kVersion << "\n";
    manifest << "# eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION
             << ", boost " << BOOST_VERSION / 100000 << '.' << BOOST_VERSION / 100 % 1000 << '.' << BOOST_VERSION % 100
             << "\n";
    manifest << "# threads " << max_threads() << "\n";
    char wall_text[32];
    std::snprintf(wall_text, sizeof wall_text, "%.3f", wall);
    manifest << "# wall_time_seconds " << wall_text << "\n";
    manifest << "# outputs";
    for (const auto& t : tables) {
        manifest << ' ' << t.name << ".csv";
    }
    manifest << "\nexperiment = " << name << "\n";
    for (const auto& [key, value] : params.resolved()) {
        manifest << key << " = " << value << "\n";
    }
    const auto manifest_path = std::filesystem::path(options.out_dir) / "manifest.txt";
    std::ofstream out(manifest_path, std::ios::binary);
    out << manifest.str();
    require(static_cast<bool>(out), "failed writing '" + manifest_path.string() + "'");
    summary.files.push_back(manifest_path.string());
    return summary;
}

}  // namespace geneval
