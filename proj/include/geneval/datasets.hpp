#pragma once

// Readers for the CIFAR-10 binary batches and MNIST IDX image files, and
// random patch extraction.

#include <cstddef>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>
#include <vector>

#include "geneval/error.hpp"
#include "geneval/images.hpp"
#include "geneval/rng.hpp"

namespace geneval {

namespace detail {
inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace detail

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarRecord = 1 + 3 * kCifarSide * kCifarSide;

/// Decodes CIFAR-10 binary records (label byte, then R, G and B planes of
/// 32x32 row-major) into interleaved 32x32x3 images. Labels are dropped.
inline QuantizedImageSet parse_cifar10(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<buffer>") {
    if (bytes.size() % kCifarRecord != 0) {
        throw Error("truncated record in " + origin + ": " + std::to_string(bytes.size()) +
                    " bytes is not a multiple of 3073 (partial record at byte offset " +
                    std::to_string(bytes.size() - bytes.size() % kCifarRecord) + ")");
    }
    const std::size_t n = bytes.size() / kCifarRecord;
    require(n >= 1, "empty dataset: " + origin);
    constexpr std::size_t plane = kCifarSide * kCifarSide;
    std::vector<std::uint8_t> pixels(n * 3 * plane);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* rec = bytes.data() + i * kCifarRecord + 1;
        std::uint8_t* dst = pixels.data() + i * 3 * plane;
        for (std::size_t p = 0; p < plane; ++p) {
            for (std::size_t c = 0; c < 3; ++c) {
                dst[p * 3 + c] = rec[c * plane + p];
            }
        }
    }
    return {std::move(pixels), n, ImageGeometry{kCifarSide, kCifarSide, 3}};
}

inline QuantizedImageSet read_cifar10(const std::string& path) { return parse_cifar10(detail::read_bytes(path), path); }

/// Concatenates several batch files in the given order.
inline QuantizedImageSet read_cifar10(const std::vector<std::string>& paths) {
    require(!paths.empty(), "read_cifar10: no files given");
    std::vector<std::uint8_t> pixels;
    std::size_t n = 0;
    for (const auto& p : paths) {
        const auto part = read_cifar10(p);
        pixels.insert(pixels.end(), part.pixels().begin(), part.pixels().end());
        n += part.size();
    }
    return {std::move(pixels), n, ImageGeometry{kCifarSide, kCifarSide, 3}};
}

/// The five training batches data_batch_{1..5}.bin of a cifar-10-batches-bin directory.
inline QuantizedImageSet read_cifar10_training_set(const std::string& dir) {
    std::vector<std::string> paths;
    for (int i = 1; i <= 5; ++i) {
        paths.push_back((std::filesystem::path(dir) / ("data_batch_" + std::to_string(i) + ".bin")).string());
    }
    return read_cifar10(paths);
}

inline constexpr std::uint32_t kIdxImageMagic = 2051;

/// IDX image file: big-endian magic 2051, then count, rows, cols, then pixels.
inline QuantizedImageSet parse_mnist_idx(const std::vector<std::uint8_t>& bytes, const std::string& origin = "<buffer>") {
    require(bytes.size() >= 16, "truncated IDX header in " + origin);
    auto be32 = [&](std::size_t off) {
        return (static_cast<std::uint32_t>(bytes[off]) << 24) | (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
               (static_cast<std::uint32_t>(bytes[off + 2]) << 8) | static_cast<std::uint32_t>(bytes[off + 3]);
    };
    const std::uint32_t magic = be32(0);
    if (magic != kIdxImageMagic) {
        throw Error("bad IDX magic in " + origin + ": found " + std::to_string(magic) + ", expected 2051");
    }
    const std::size_t count = be32(4);
    const std::size_t rows = be32(8);
    const std::size_t cols = be32(12);
    require(count >= 1, "empty dataset: " + origin);
    require(rows >= 1 && cols >= 1, "IDX file " + origin + " declares zero-sized images");
    const std::size_t expected = 16 + count * rows * cols;
    if (bytes.size() != expected) {
        throw Error("IDX file " + origin + " declares " + std::to_string(count) + " images of " + std::to_string(rows) +
                    "x" + std::to_string(cols) + " (" + std::to_string(expected) + " bytes) but has " +
                    std::to_string(bytes.size()) + " bytes");
    }
    std::vector<std::uint8_t> pixels(bytes.begin() + 16, bytes.end());
    return {std::move(pixels), count, ImageGeometry{rows, cols, 1}};
}

inline QuantizedImageSet read_mnist_idx(const std::string& path) {
    return parse_mnist_idx(detail::read_bytes(path), path);
}

/// Concatenation of image sets with identical geometry.
inline QuantizedImageSet concatenate(const std::vector<QuantizedImageSet>& parts) {
    require(!parts.empty(), "concatenate: nothing to join");
    std::vector<std::uint8_t> pixels;
    std::size_t n = 0;
    for (const auto& p : parts) {
        require(p.geometry() == parts.front().geometry(), "concatenate: geometry mismatch");
        pixels.insert(pixels.end(), p.pixels().begin(), p.pixels().end());
        n += p.size();
    }
    return {std::move(pixels), n, parts.front().geometry()};
}

/// Smooth random images: per channel a base level plus four random plane
/// waves, with N(0, 4^2) pixel noise, rounded and clamped to 0..255. Image i
/// draws from stream i of `seed`.
inline QuantizedImageSet synthetic_images(std::size_t n, ImageGeometry g, RngSeed seed) {
    require(n >= 1, "synthetic_images: n must be >= 1");
    require(g.height >= 1 && g.width >= 1 && g.channels >= 1, "synthetic_images: geometry must be positive");
    std::vector<std::uint8_t> pixels(n * g.size());
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, i);
        std::uint8_t* dst = pixels.data() + i * g.size();
        for (std::size_t ch = 0; ch < g.channels; ++ch) {
            const double base = 64.0 + 128.0 * rng.uniform();
            double amp[4], fx[4], fy[4], phase[4];
            for (int k = 0; k < 4; ++k) {
                amp[k] = 10.0 + 30.0 * rng.uniform();
                fx[k] = 0.6 * rng.uniform() - 0.3;
                fy[k] = 0.6 * rng.uniform() - 0.3;
                phase[k] = 2.0 * std::numbers::pi * rng.uniform();
            }
            for (std::size_t r = 0; r < g.height; ++r) {
                for (std::size_t c = 0; c < g.width; ++c) {
                    double v = base + 4.0 * rng.normal();
                    for (int k = 0; k < 4; ++k) {
                        v += amp[k] * std::sin(fx[k] * static_cast<double>(c) + fy[k] * static_cast<double>(r) + phase[k]);
                    }
                    dst[(r * g.width + c) * g.channels + ch] = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
                }
            }
        }
    }
    return {std::move(pixels), n, g};
}

enum class ChannelMode { grayscale, color };

struct PatchSpec {
    std::size_t patch_size = 6;
    ChannelMode channel_mode = ChannelMode::grayscale;
    std::size_t count = 1000;
    RngSeed seed{0};
};

/// `count` patches at uniformly random (image, row, col) positions. Grayscale
/// mode averages channels with round-half-up.
inline QuantizedImageSet extract_patches(const QuantizedImageSet& images, const PatchSpec& spec) {
    const auto& g = images.geometry();
    require(images.size() >= 1, "extract_patches: empty image set");
    require(spec.patch_size >= 1 && spec.patch_size <= g.height && spec.patch_size <= g.width,
            "extract_patches: patch_size must fit inside the images");
    require(spec.count >= 1, "extract_patches: count must be >= 1");
    const QuantizedImageSet source = spec.channel_mode == ChannelMode::grayscale ? to_grayscale(images) : images;
    const std::size_t c = source.geometry().channels;
    const std::size_t p = spec.patch_size;
    std::vector<std::uint8_t> out(spec.count * p * p * c);
    Rng rng(spec.seed);
    for (std::size_t i = 0; i < spec.count; ++i) {
        const std::size_t img = rng.uniform_index(source.size());
        const std::size_t r0 = rng.uniform_index(g.height - p + 1);
        const std::size_t c0 = rng.uniform_index(g.width - p + 1);
        const auto src = source.image(img);
        for (std::size_t r = 0; r < p; ++r) {
            const std::size_t from = ((r0 + r) * g.width + c0) * c;
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), p * c,
                        out.begin() + static_cast<std::ptrdiff_t>((i * p + r) * p * c));
        }
    }
    return {std::move(out), spec.count, ImageGeometry{p, p, c}};
}

}  // namespace geneval
