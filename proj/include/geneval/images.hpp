#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geneval/error.hpp"
#include "geneval/sample_matrix.hpp"

namespace geneval {

struct ImageGeometry {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 1;

    [[nodiscard]] std::size_t size() const { return height * width * channels; }
    bool operator==(const ImageGeometry&) const = default;
};

/// N images of 8-bit pixels. Each image is stored row-major with channels
/// interleaved: index = (row * width + col) * channels + channel.
class QuantizedImageSet {
public:
    QuantizedImageSet() = default;

    QuantizedImageSet(std::vector<std::uint8_t> pixels, std::size_t count, ImageGeometry geometry)
        : pixels_(std::move(pixels)), count_(count), geometry_(geometry) {
        require(geometry_.height >= 1 && geometry_.width >= 1 && geometry_.channels >= 1,
                "QuantizedImageSet: geometry must be positive");
        require(pixels_.size() == count_ * geometry_.size(), "QuantizedImageSet: pixel buffer does not match geometry");
    }

    [[nodiscard]] std::size_t size() const { return count_; }
    [[nodiscard]] std::size_t dim() const { return geometry_.size(); }
    [[nodiscard]] const ImageGeometry& geometry() const { return geometry_; }

    [[nodiscard]] std::span<const std::uint8_t> image(std::size_t i) const {
        return {pixels_.data() + i * dim(), dim()};
    }

    [[nodiscard]] std::uint8_t at(std::size_t i, std::size_t row, std::size_t col, std::size_t channel) const {
        return pixels_[i * dim() + (row * geometry_.width + col) * geometry_.channels + channel];
    }

    [[nodiscard]] const std::vector<std::uint8_t>& pixels() const { return pixels_; }

    [[nodiscard]] QuantizedImageSet select(const std::vector<std::size_t>& indices) const {
        std::vector<std::uint8_t> out;
        out.reserve(indices.size() * dim());
        for (std::size_t idx : indices) {
            require(idx < count_, "QuantizedImageSet::select: index out of range");
            const auto img = image(idx);
            out.insert(out.end(), img.begin(), img.end());
        }
        return {std::move(out), indices.size(), geometry_};
    }

    /// Pixels as reals, optionally multiplied by `scale`.
    [[nodiscard]] SampleMatrix to_samples(double scale = 1.0) const {
        require(count_ >= 1, "QuantizedImageSet::to_samples: empty set");
        RowMatrix m(static_cast<Eigen::Index>(count_), static_cast<Eigen::Index>(dim()));
        for (std::size_t i = 0; i < pixels_.size(); ++i) {
            m.data()[i] = scale * static_cast<double>(pixels_[i]);
        }
        return SampleMatrix(std::move(m), ValueRange{0.0, 255.0 * scale});
    }

private:
    std::vector<std::uint8_t> pixels_;
    std::size_t count_ = 0;
    ImageGeometry geometry_;
};

/// Channel average with round-half-up; single-channel input is returned unchanged.
inline QuantizedImageSet to_grayscale(const QuantizedImageSet& images) {
    const auto& g = images.geometry();
    if (g.channels == 1) {
        return images;
    }
    const std::size_t px = g.height * g.width;
    std::vector<std::uint8_t> out(images.size() * px);
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto img = images.image(i);
        for (std::size_t p = 0; p < px; ++p) {
            unsigned sum = 0;
            for (std::size_t c = 0; c < g.channels; ++c) {
                sum += img[p * g.channels + c];
            }
            out[i * px + p] = static_cast<std::uint8_t>((2 * sum + g.channels) / (2 * g.channels));
        }
    }
    return {std::move(out), images.size(), ImageGeometry{g.height, g.width, 1}};
}

}  // namespace geneval
