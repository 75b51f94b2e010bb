// Acceptance checks: one PASS/FAIL/SKIP line per criterion.
//
// Dataset directories come from the GENEVAL_MNIST_DIR and GENEVAL_CIFAR10_DIR
// environment variables, falling back to the values configured in CMake.
// Exit status: 0 when nothing failed, 1 otherwise.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geneval/experiments.hpp"

using namespace geneval;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict;
    std::string detail;
};

std::string dataset_dir(const char* env, const char* configured) {
    if (const char* v = std::getenv(env); v != nullptr && *v != '\0') {
        return v;
    }
    return configured;
}

#ifndef GENEVAL_MNIST_DIR
#define GENEVAL_MNIST_DIR ""
#endif
#ifndef GENEVAL_CIFAR10_DIR
#define GENEVAL_CIFAR10_DIR ""
#endif

const std::string kMnistDir = dataset_dir("GENEVAL_MNIST_DIR", GENEVAL_MNIST_DIR);
const std::string kCifarDir = dataset_dir("GENEVAL_CIFAR10_DIR", GENEVAL_CIFAR10_DIR);

bool have_mnist() {
    return !kMnistDir.empty() && std::filesystem::exists(std::filesystem::path(kMnistDir) / "train-images-idx3-ubyte") &&
           std::filesystem::exists(std::filesystem::path(kMnistDir) / "t10k-images-idx3-ubyte");
}

bool have_cifar() {
    return !kCifarDir.empty() && std::filesystem::exists(std::filesystem::path(kCifarDir) / "data_batch_1.bin");
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename P>
P parse_params(const std::string& text) {
    Params params(KeyValueConfig::parse(text, "<acceptance>"));
    P p = P::parse(params);
    params.finish();
    return p;
}

// 1 -------------------------------------------------------------------------

Outcome figure_one_tradeoff() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = parse_params<FitDivergenceParams>("seed = 1\n");
    const auto fits = run_fit_divergence(p);
    const double secs = seconds_since(t0);
    auto mode_distance = [&](const IsotropicGaussian& g) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& c : p.target.components()) {
            best = std::min(best, (g.mean() - c.mean).norm());
        }
        return best;
    };
    const auto& mmd = fits.mmd->model;
    const auto& jsd = fits.jsd->model;
    const bool kld_ok = std::abs(fits.kld.sigma() - std::sqrt(3.0)) <= 1e-9;
    const bool mmd_ok = mmd.sigma() < 1.3 && mode_distance(mmd) <= 0.5;
    const bool jsd_ok = jsd.sigma() < 1.3 && mode_distance(jsd) <= 0.5;
    const bool ok = kld_ok && mmd_ok && jsd_ok && secs < 60.0;
    return {ok ? Verdict::pass : Verdict::fail,
            fmt("kld sigma %.12f; mmd sigma %.4f, mode distance %.3f; jsd sigma %.4f, mode distance %.3f; %.1f s",
                fits.kld.sigma(), mmd.sigma(), mode_distance(mmd), jsd.sigma(), mode_distance(jsd), secs)};
}

// 2 -------------------------------------------------------------------------

Outcome jensen_bound() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = parse_params<DequantizeLLParams>(
        "seed = 2\ndataset.format = synthetic\npatch.size = 6\npatch.channels = grayscale\nruns = 20\n");
    const auto runs = run_dequantize_ll(p);
    const double secs = seconds_since(t0);
    std::size_t violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& r : runs) {
        violations += r.check.holds(3.0) ? 0 : 1;
        min_margin = std::min(min_margin, (r.check.discrete_ll + 3.0 * r.check.combined_se - r.check.continuous_ll) /
                                              r.check.combined_se);
    }
    const bool ok = runs.size() == 20 && runs.front().dim == 36 && violations == 0 && secs < 60.0;
    return {ok ? Verdict::pass : Verdict::fail,
            fmt("%zu runs, %zu violations, smallest slack %.2f SE, %.1f s", runs.size(), violations, min_margin, secs)};
}

// 3 -------------------------------------------------------------------------

Outcome mixture_penalty() {
    const IsotropicGaussian good(Eigen::VectorXd::Constant(36, 0.5), 0.1);
    const MixtureTrickModel mix{good.as_log_density(), [](std::span<const double>) { return -1e4; }, 0.01};
    const auto pts = sample(good, 100, RngSeed{3});
    double worst = 0.0;
    for (std::size_t i = 0; i < pts.rows(); ++i) {
        const double penalty = good.log_density(pts.row(i)) - mixture_trick_log_density(mix, pts.row(i));
        worst = std::max(worst, std::abs(penalty - std::log(100.0)));
    }
    const bool ok = worst < 1e-6 && fmt("%.4f", std::log(100.0)) == "4.6052";
    return {ok ? Verdict::pass : Verdict::fail,
            fmt("ln 100 = %.4f, largest deviation over 100 points %.3g", std::log(100.0), worst)};
}

// 4 -------------------------------------------------------------------------

Outcome posterior_robustness() {
    const auto p = parse_params<MixtureDemoParams>("seed = 4\ntest_count = 1000\n");
    const auto r = run_mixture_demo(p);
    const auto confident = std::count_if(r.alphas.begin(), r.alphas.end(), [](double a) { return a > 0.999; });
    const double frac = static_cast<double>(confident) / static_cast<double>(r.alphas.size());
    return {frac >= 0.99 ? Verdict::pass : Verdict::fail,
            fmt("%.1f%% of %zu patches have alpha > 0.999 (minimum alpha %.4f)", 100.0 * frac, r.alphas.size(),
                *std::min_element(r.alphas.begin(), r.alphas.end()))};
}

// 5 -------------------------------------------------------------------------

Outcome parzen_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    const bool cifar = have_cifar();
    const std::string source = cifar ? "source = cifar10\ndataset.path = " + kCifarDir + "\n" : "source = synthetic\n";
    const auto p = parse_params<ParzenSweepParams>("seed = 5\n" + source + "sample_counts = 100 1000 10000\n");
    const auto r = run_parzen_sweep(p);
    const double secs = seconds_since(t0);
    bool increasing = true;
    for (std::size_t i = 1; i < r.rows.size(); ++i) {
        increasing = increasing && r.rows[i].mean_test_ll - r.rows[i - 1].mean_test_ll >
                                       2.0 * std::hypot(r.rows[i].std_error, r.rows[i - 1].std_error);
    }
    const double gap = r.reference - r.rows.back().mean_test_ll;
    const bool ok = increasing && gap > 10.0 && secs < 600.0;
    return {ok ? Verdict::pass : Verdict::fail,
            fmt("%s patches: estimates %.2f, %.2f, %.2f vs truth %.2f, final gap %.2f nats, %.1f s",
                cifar ? "CIFAR-10" : "synthetic", r.rows[0].mean_test_ll, r.rows[1].mean_test_ll,
                r.rows[2].mean_test_ll, r.reference, gap, secs)};
}

// 6 -------------------------------------------------------------------------

Outcome improper_scoring() {
    if (!have_mnist()) {
        return {Verdict::skip, "MNIST not found (set GENEVAL_MNIST_DIR)"};
    }
    const auto t0 = std::chrono::steady_clock::now();
    int wins = 0;
    std::string scores;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto p = parse_params<ParzenBenchmarkParams>("seed = " + std::to_string(seed) +
                                                           "\ndataset.format = mnist\ndataset.path = " + kMnistDir + "\n");
        const auto rows = run_parzen_benchmark(p);
        double km = 0.0;
        double truth = 0.0;
        for (const auto& row : rows) {
            (row.name == "kmeans" ? km : truth) = row.mean_nats;
        }
        wins += km > truth ? 1 : 0;
        if (seed == 0) {
            scores = fmt("seed 0: kmeans %.1f vs true samples %.1f nats", km, truth);
        }
    }
    const double secs = seconds_since(t0);
    const bool ok = wins >= 9 && secs < 900.0;
    return {ok ? Verdict::pass : Verdict::fail, fmt("kmeans ranked first in %d of 10 seeds; %s; %.1f s", wins, scores.c_str(), secs)};
}

// 7 -------------------------------------------------------------------------

Outcome shift_precision() {
    if (!have_cifar()) {
        return {Verdict::skip, "CIFAR-10 not found (set GENEVAL_CIFAR10_DIR)"};
    }
    const unsigned saved = max_threads();
    set_max_threads(1);
    const auto t0 = std::chrono::steady_clock::now();
    const auto p = parse_params<NnShiftParams>("seed = 7\ndataset.format = cifar10\ndataset.path = " + kCifarDir + "\n");
    const auto pts = run_nn_shift(p);
    const double secs = seconds_since(t0);
    set_max_threads(saved);
    const double expected[] = {100.0, 96.1, 27.1, 4.9, 1.5};
    bool ok = pts.size() == 5 && secs < 1200.0;
    std::string measured;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double pct = 100.0 * pts[i].precision;
        ok = ok && std::abs(pct - expected[i]) <= 5.0;
        ok = ok && pts[i].ci_low <= pts[i].precision && pts[i].precision <= pts[i].ci_high;
        measured += fmt("%s%.1f [%.1f, %.1f]", i ? ", " : "", pct, 100.0 * pts[i].ci_low, 100.0 * pts[i].ci_high);
    }
    return {ok ? Verdict::pass : Verdict::fail, fmt("precision %% at shifts 0-4: %s; %.1f s", measured.c_str(), secs)};
}

// 8 -------------------------------------------------------------------------

Outcome oracles() {
    std::vector<std::string> failures;
    Rng rng(RngSeed{8});

    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.uniform_index(50);
        const std::size_t d = 1 + rng.uniform_index(40);
        std::vector<std::uint8_t> px(n * d);
        for (auto& v : px) {
            v = static_cast<std::uint8_t>(rng.uniform_index(4) * 60);
        }
        const QuantizedImageSet train(px, n, ImageGeometry{1, d, 1});
        std::vector<std::uint8_t> q(d);
        for (auto& v : q) {
            v = static_cast<std::uint8_t>(rng.uniform_index(4) * 60);
        }
        std::size_t best = 0;
        std::int64_t best_d = std::numeric_limits<std::int64_t>::max();
        for (std::size_t i = 0; i < n; ++i) {
            std::int64_t s = 0;
            for (std::size_t j = 0; j < d; ++j) {
                const std::int64_t diff = static_cast<std::int64_t>(px[i * d + j]) - q[j];
                s += diff * diff;
            }
            if (s < best_d) {
                best_d = s;
                best = i;
            }
        }
        const auto m = nearest_neighbor(std::span<const std::uint8_t>(q), train);
        const std::vector<double> qd(q.begin(), q.end());
        const auto md = nearest_neighbor(qd, train.to_samples());
        if (m.index != best || m.squared_distance != static_cast<double>(best_d) || md.index != best) {
            failures.push_back("nearest_neighbor");
            break;
        }
    }

    {
        const std::vector<double> x = {0.0, 1.0, 8.0, 9.0};
        double oracle = std::numeric_limits<double>::infinity();
        for (unsigned mask = 1; mask < 15; ++mask) {
            double s[2] = {0, 0}, c[2] = {0, 0};
            for (unsigned i = 0; i < 4; ++i) {
                s[(mask >> i) & 1] += x[i];
                c[(mask >> i) & 1] += 1;
            }
            double inertia = 0.0;
            for (unsigned i = 0; i < 4; ++i) {
                const unsigned g = (mask >> i) & 1;
                inertia += (x[i] - s[g] / c[g]) * (x[i] - s[g] / c[g]);
            }
            oracle = std::min(oracle, inertia);
        }
        const auto km = kmeans(SampleMatrix::from_rows(4, 1, x), 2, 100, RngSeed{8});
        if (std::abs(km.inertia - oracle) > 1e-12) {
            failures.push_back("kmeans");
        }
    }

    {
        const auto centers = sample(IsotropicGaussian(Eigen::VectorXd::Zero(5), 1.0), 40, RngSeed{81});
        const auto test = sample(IsotropicGaussian(Eigen::VectorXd::Zero(5), 1.5), 30, RngSeed{82});
        const ParzenEstimator est(centers, 0.4);
        const auto scores = parzen_scores(est, test);
        const auto gmm = GaussianMixture::uniform_isotropic(centers, 0.16);
        for (std::size_t i = 0; i < test.rows(); ++i) {
            if (std::abs(scores[i] - gmm_log_density(gmm, test.row(i))) > 1e-12) {
                failures.push_back("parzen");
                break;
            }
        }
    }

    {
        const auto a = sample(IsotropicGaussian(Eigen::VectorXd::Zero(2), 1.0), 5, RngSeed{83});
        const auto b = sample(IsotropicGaussian(Eigen::VectorXd::Ones(2), 1.0), 5, RngSeed{84});
        const KernelBank bank({0.5, 1.0, 2.0});
        double kxx = 0.0, kyy = 0.0, kxy = 0.0;
        for (std::size_t i = 0; i < 5; ++i) {
            for (std::size_t j = 0; j < 5; ++j) {
                for (double s : bank.bandwidths) {
                    auto k = [&](std::span<const double> u, std::span<const double> v) {
                        double d2 = 0.0;
                        for (std::size_t t = 0; t < u.size(); ++t) {
                            d2 += (u[t] - v[t]) * (u[t] - v[t]);
                        }
                        return std::exp(-d2 / (2.0 * s * s));
                    };
                    kxx += k(a.row(i), a.row(j));
                    kyy += k(b.row(i), b.row(j));
                    kxy += k(a.row(i), b.row(j));
                }
            }
        }
        const double oracle = (kxx + kyy - 2.0 * kxy) / 25.0;
        if (std::abs(mmd_squared(a, b, bank) - oracle) > 1e-12) {
            failures.push_back("mmd");
        }
    }

    std::string detail = "nearest_neighbor, kmeans, parzen and mmd agree with their oracles";
    if (!failures.empty()) {
        detail = "mismatch:";
        for (const auto& f : failures) {
            detail += " " + f;
        }
    }
    return {failures.empty() ? Verdict::pass : Verdict::fail, detail};
}

// 9 -------------------------------------------------------------------------

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const std::vector<std::pair<std::string, std::string>> runs = {
        {"fit-divergence", "jsd.grid_points = 81\njsd.restarts = 2\nmmd.target_samples = 300\nmmd.model_samples = 200\n"},
        {"parzen-sweep", "dataset.count = 200\npatch.count = 3000\nsample_counts = 50 500\ntest_count = 200\n"},
        {"parzen-benchmark",
         "dataset.count = 1500\nsplit.train = 800\nsplit.validation = 200\nsplit.test = 200\nsamples = 200\nkmeans.k = 50\n"},
        {"nn-shift", "dataset.count = 500\nqueries = 200\n"},
        {"mixture-demo", "test_count = 300\n"},
        {"dequantize-ll", "dataset.count = 200\npatch.count = 2000\ntest_count = 200\nruns = 2\nmc_samples = 50\n"},
    };
    const auto root = std::filesystem::temp_directory_path() / "geneval_acceptance_determinism";
    std::filesystem::remove_all(root);
    const unsigned saved = max_threads();
    std::vector<std::string> differing;
    std::size_t compared = 0;
    for (const auto& [name, text] : runs) {
        const auto cfg = KeyValueConfig::parse("seed = 9\n" + text);
        std::vector<std::vector<std::string>> outputs;
        for (unsigned threads : {1u, 1u, 4u}) {
            set_max_threads(threads);
            const auto dir = root / (name + "_" + std::to_string(outputs.size()));
            const auto summary = run_experiment(name, cfg, {dir.string(), false});
            std::vector<std::string> csvs;
            for (const auto& f : summary.files) {
                if (std::filesystem::path(f).extension() == ".csv") {
                    csvs.push_back(read_file(f));
                }
            }
            outputs.push_back(std::move(csvs));
        }
        compared += outputs.front().size();
        if (outputs[0] != outputs[1] || outputs[0] != outputs[2]) {
            differing.push_back(name);
        }
    }
    set_max_threads(saved);
    std::filesystem::remove_all(root);
    std::string detail = fmt("%zu CSV files from 6 experiments byte-identical across reruns and thread caps 1 and 4", compared);
    if (!differing.empty()) {
        detail = "outputs differ for:";
        for (const auto& d : differing) {
            detail += " " + d;
        }
    }
    return {differing.empty() ? Verdict::pass : Verdict::fail, detail};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::function<Outcome()>> criteria = {
        figure_one_tradeoff, jensen_bound, mixture_penalty, posterior_robustness, parzen_convergence,
        improper_scoring,    shift_precision, oracles,       determinism};
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    bool failed = false;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!selected.empty() && selected.count(number) == 0) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i]();
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("error: ") + e.what()};
        }
        const char* label = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
        std::printf("criterion %d: %s  %s\n", number, label, o.detail.c_str());
        std::fflush(stdout);
        failed = failed || o.verdict == Verdict::fail;
    }
    return failed ? 1 : 0;
}
