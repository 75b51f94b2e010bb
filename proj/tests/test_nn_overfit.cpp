#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "geneval/nn_overfit.hpp"

using namespace geneval;
using Catch::Approx;

namespace {

QuantizedImageSet noise_images(std::size_t n, ImageGeometry g, RngSeed seed) {
    std::vector<std::uint8_t> px(n * g.size());
    Rng rng(seed);
    for (auto& p : px) {
        p = static_cast<std::uint8_t>(rng.uniform_index(256));
    }
    return {std::move(px), n, g};
}

// Sums of a few random low-frequency waves, so nearby pixels are correlated.
QuantizedImageSet smooth_images(std::size_t n, std::size_t side, RngSeed seed) {
    std::vector<std::uint8_t> px(n * side * side);
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        double a[4], fx[4], fy[4], ph[4];
        for (int k = 0; k < 4; ++k) {
            a[k] = 30.0 + 30.0 * rng.uniform();
            fx[k] = 0.05 + 0.3 * rng.uniform();
            fy[k] = 0.05 + 0.3 * rng.uniform();
            ph[k] = 6.283 * rng.uniform();
        }
        for (std::size_t r = 0; r < side; ++r) {
            for (std::size_t c = 0; c < side; ++c) {
                double v = 128.0;
                for (int k = 0; k < 4; ++k) {
                    v += a[k] * std::sin(fx[k] * static_cast<double>(c) + fy[k] * static_cast<double>(r) + ph[k]);
                }
                px[(i * side + r) * side + c] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    }
    return {std::move(px), n, ImageGeometry{side, side, 1}};
}

NeighborMatch brute_force(std::span<const double> q, const SampleMatrix& train) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < train.rows(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) {
            d += (q[j] - train.row(i)[j]) * (q[j] - train.row(i)[j]);
        }
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {best, best_d};
}

// Clopper-Pearson by bisection on explicit binomial tail sums.
double binom_tail_ge(std::size_t k, std::size_t n, double p) {
    double s = 0.0;
    for (std::size_t i = k; i <= n; ++i) {
        const double lp = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                          static_cast<double>(i) * std::log(p) + static_cast<double>(n - i) * std::log1p(-p);
        s += std::exp(lp);
    }
    return s;
}

double bisect(auto f, double lo, double hi) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

ConfidenceInterval clopper_pearson_oracle(std::size_t k, std::size_t n, double level) {
    const double a = (1.0 - level) / 2.0;
    ConfidenceInterval ci{0.0, 1.0};
    if (k > 0) {
        ci.low = bisect([&](double p) { return binom_tail_ge(k, n, p) >= a; }, 0.0, 1.0);
    }
    if (k < n) {
        ci.high = bisect([&](double p) { return 1.0 - binom_tail_ge(k + 1, n, p) <= a; }, 0.0, 1.0);
    }
    return ci;
}

}  // namespace

// windows -------------------------------------------------------------------

TEST_CASE("shifted windows", "[nn][windows]") {
    const auto imgs = noise_images(5, ImageGeometry{32, 32, 3}, RngSeed{1});
    const auto sets = extract_shifted_windows(imgs, 28, {0, 1, 4});
    REQUIRE(sets.size() == 3);
    const auto reference = extract_window_set(imgs, 28, 0);
    CHECK(sets[0].queries.pixels() == reference.queries.pixels());
    CHECK(sets[0].queries.dim() == 28 * 28 * 3);
    CHECK(sets[2].source_indices == std::vector<std::size_t>{0, 1, 2, 3, 4});
    CHECK_THROWS(extract_shifted_windows(imgs, 28, {5}));
    CHECK_THROWS(extract_shifted_windows(imgs, 33, {0}));

    // Row-major, channel-interleaved crop at (s, s).
    const auto& q = sets[1].queries;
    for (std::size_t r : {0, 13, 27}) {
        for (std::size_t c : {0, 5, 27}) {
            for (std::size_t ch = 0; ch < 3; ++ch) {
                CHECK(q.image(2)[(r * 28 + c) * 3 + ch] == imgs.at(2, r + 1, c + 1, ch));
            }
        }
    }

    const QuantizedImageSet flat(std::vector<std::uint8_t>(2 * 32 * 32, 77), 2, ImageGeometry{32, 32, 1});
    const auto fs = extract_shifted_windows(flat, 28, {0, 1, 2, 3, 4});
    for (const auto& s : fs) {
        CHECK(s.queries.pixels() == fs[0].queries.pixels());
    }

    const auto subset = extract_window_set(imgs, 10, 2, {4, 1});
    CHECK(subset.source_indices == std::vector<std::size_t>{4, 1});
    CHECK(subset.queries.image(0)[0] == imgs.at(4, 2, 2, 0));
}

// nearest neighbor ----------------------------------------------------------

TEST_CASE("nearest_neighbor examples", "[nn][search]") {
    const auto train = SampleMatrix::from_rows(2, 2, {0.0, 0.0, 3.0, 4.0});
    const auto m = nearest_neighbor(std::vector<double>{1.0, 1.0}, train);
    CHECK(m.index == 0);
    CHECK(m.squared_distance == 2.0);

    const auto rows = SampleMatrix::from_rows(6, 1, {10.0, 9.0, 4.0, 8.0, 7.0, 6.0});
    const auto tie = nearest_neighbor(std::vector<double>{5.0}, rows);
    CHECK(tie.index == 2);
    CHECK(tie.squared_distance == 1.0);
    const auto self = nearest_neighbor(rows.row(3), rows);
    CHECK(self.index == 3);
    CHECK(self.squared_distance == 0.0);

    CHECK_THROWS(nearest_neighbor(std::vector<double>{1.0, 2.0}, rows));
    CHECK_THROWS(nearest_neighbor(std::vector<double>{1.0}, SampleMatrix()));

    const QuantizedImageSet u8({0, 0, 3, 4, 1, 1, 1, 1}, 4, ImageGeometry{1, 2, 1});
    const std::vector<std::uint8_t> q = {1, 1};
    CHECK(nearest_neighbor(std::span<const std::uint8_t>(q), u8).index == 2);
    const std::vector<std::uint8_t> wrong = {1};
    CHECK_THROWS(nearest_neighbor(std::span<const std::uint8_t>(wrong), u8));
}

TEST_CASE("nearest_neighbor agrees with a brute-force loop", "[nn][search][oracle]") {
    Rng rng(RngSeed{2});
    for (std::uint64_t t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.uniform_index(60);
        const std::size_t d = 1 + rng.uniform_index(50);
        // Few distinct levels so that ties actually happen.
        const auto train = noise_images(n, ImageGeometry{1, d, 1}, RngSeed{100 + t});
        std::vector<std::uint8_t> qv(d);
        for (auto& v : qv) {
            v = static_cast<std::uint8_t>(rng.uniform_index(4) * 85);
        }
        std::vector<std::uint8_t> coarse = train.pixels();
        for (auto& v : coarse) {
            v = static_cast<std::uint8_t>((v / 86) * 85);
        }
        const QuantizedImageSet levels(std::move(coarse), n, ImageGeometry{1, d, 1});
        const auto as_real = levels.to_samples();
        std::vector<double> qd(qv.begin(), qv.end());
        const auto oracle = brute_force(qd, as_real);
        const auto exact = nearest_neighbor(std::span<const std::uint8_t>(qv), levels);
        const auto real = nearest_neighbor(qd, as_real);
        CHECK(exact.index == oracle.index);
        CHECK(exact.squared_distance == oracle.squared_distance);
        CHECK(real.index == oracle.index);
        CHECK(real.squared_distance == oracle.squared_distance);
    }
}

TEST_CASE("integer distances do not overflow on large images", "[nn][search]") {
    const std::size_t d = 100000;
    const QuantizedImageSet train({std::vector<std::uint8_t>(d, 0)}, 1, ImageGeometry{1, d, 1});
    const std::vector<std::uint8_t> q(d, 255);
    CHECK(nearest_neighbor(std::span<const std::uint8_t>(q), train).squared_distance == 255.0 * 255.0 * 100000.0);
}

// confidence intervals ------------------------------------------------------

TEST_CASE("binomial_ci examples", "[nn][ci]") {
    const auto all = binomial_ci(1000, 1000, 0.90);
    CHECK(all.low == Approx(std::pow(0.05, 1.0 / 1000.0)).epsilon(1e-12));
    CHECK(all.low == Approx(0.99701).margin(1e-5));
    CHECK(all.high == 1.0);
    const auto none = binomial_ci(0, 1, 0.90);
    CHECK(none.low == 0.0);
    CHECK(none.high == Approx(0.95).epsilon(1e-12));
    CHECK_THROWS(binomial_ci(2, 1, 0.9));
    CHECK_THROWS(binomial_ci(0, 0, 0.9));
    CHECK_THROWS(binomial_ci(1, 2, 1.0));
}

TEST_CASE("binomial_ci matches a bisection oracle", "[nn][ci][oracle]") {
    for (std::size_t n : {1, 7, 50, 300}) {
        for (std::size_t k : {std::size_t{0}, n / 3, n / 2, n}) {
            for (double level : {0.8, 0.9, 0.99}) {
                const auto ci = binomial_ci(k, n, level);
                const auto ref = clopper_pearson_oracle(k, n, level);
                INFO("k=" << k << " n=" << n << " level=" << level);
                CHECK(ci.low == Approx(ref.low).margin(1e-10));
                CHECK(ci.high == Approx(ref.high).margin(1e-10));
            }
        }
    }
}

TEST_CASE("binomial_ci widens with the level and covers at the nominal rate", "[nn][ci][property]") {
    for (std::size_t k : {0, 3, 10, 20}) {
        const auto narrow = binomial_ci(k, 20, 0.5);
        const auto wide = binomial_ci(k, 20, 0.95);
        CHECK(wide.low <= narrow.low);
        CHECK(wide.high >= narrow.high);
        CHECK(narrow.low <= static_cast<double>(k) / 20.0);
        CHECK(narrow.high >= static_cast<double>(k) / 20.0);
    }
    Rng rng(RngSeed{3});
    const double level = 0.9;
    std::size_t covered = 0;
    for (int e = 0; e < 10000; ++e) {
        const double p = rng.uniform();
        const std::size_t n = 1 + rng.uniform_index(100);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) {
            k += rng.bernoulli(p) ? 1 : 0;
        }
        const auto ci = binomial_ci(k, n, level);
        covered += (ci.low <= p && p <= ci.high) ? 1 : 0;
    }
    CHECK(static_cast<double>(covered) / 10000.0 >= level - 0.01);
}

// precision curve -----------------------------------------------------------

TEST_CASE("shift-0 queries find themselves", "[nn][precision]") {
    const auto imgs = noise_images(300, ImageGeometry{12, 12, 3}, RngSeed{4});
    const auto pts = shift_precision_curve(imgs, 10, {0, 1, 2}, 100, RngSeed{5}, 0.9);
    REQUIRE(pts.size() == 3);
    CHECK(pts[0].shift == 0);
    CHECK(pts[0].precision == 1.0);
    CHECK(pts[0].ci_high == 1.0);
    CHECK(pts[0].ci_low == Approx(std::pow(0.05, 0.01)).epsilon(1e-12));
    for (const auto& p : pts) {
        CHECK(p.n_queries == 100);
        CHECK(p.ci_low <= p.precision);
        CHECK(p.precision <= p.ci_high);
    }
    CHECK_THROWS(shift_precision_curve(imgs, 10, {0}, 301, RngSeed{5}, 0.9));
    CHECK_THROWS(shift_precision_curve(imgs, 10, {3}, 10, RngSeed{5}, 0.9));
}

TEST_CASE("precision falls with the shift on smooth images", "[nn][precision][property]") {
    const auto imgs = smooth_images(400, 32, RngSeed{6});
    const auto pts = shift_precision_curve(imgs, 28, {0, 1, 2, 3, 4}, 200, RngSeed{7}, 0.9);
    CHECK(pts[0].precision >= 0.99);
    for (std::size_t i = 1; i < pts.size(); ++i) {
        const double width = pts[i - 1].ci_high - pts[i - 1].ci_low;
        CHECK(pts[i].precision <= pts[i - 1].precision + 2.0 * width);
    }
    CHECK(pts.back().precision < pts.front().precision);
}

TEST_CASE("duplicated training rows and the tie-break rule", "[nn][precision]") {
    // Every image appears twice, at i and i + n. The lower copy wins every tie,
    // so only queries sourced from the lower copy count as correct.
    const std::size_t n = 50;
    const auto base = noise_images(n, ImageGeometry{8, 8, 1}, RngSeed{8});
    std::vector<std::uint8_t> px = base.pixels();
    px.insert(px.end(), base.pixels().begin(), base.pixels().end());
    const QuantizedImageSet doubled(std::move(px), 2 * n, base.geometry());
    const auto details = shift_precision_details(doubled, 6, {0}, 2 * n, RngSeed{9}, 0.9);
    std::size_t low_sources = 0;
    for (std::size_t q = 0; q < details.sources.size(); ++q) {
        const std::size_t src = details.sources[q];
        CHECK(details.matches[0][q].index == src % n);
        low_sources += src < n ? 1 : 0;
    }
    CHECK(details.points[0].precision == Approx(static_cast<double>(low_sources) / (2.0 * n)));
    CHECK(details.points[0].precision == Approx(0.5));
}

TEST_CASE("precision curve is deterministic across thread counts", "[nn][precision]") {
    const auto imgs = smooth_images(200, 16, RngSeed{10});
    const auto a = shift_precision_details(imgs, 12, {0, 1, 2}, 100, RngSeed{11}, 0.9);
    set_max_threads(3);
    const auto b = shift_precision_details(imgs, 12, {0, 1, 2}, 100, RngSeed{11}, 0.9);
    set_max_threads(0);
    CHECK(a.sources == b.sources);
    for (std::size_t s = 0; s < a.matches.size(); ++s) {
        for (std::size_t q = 0; q < a.matches[s].size(); ++q) {
            CHECK(a.matches[s][q].index == b.matches[s][q].index);
        }
        CHECK(a.points[s].precision == b.points[s].precision);
    }
}
