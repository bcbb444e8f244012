#pragma once

#include <cstdint>
#include <vector>

namespace derm {

// Row-major 3-channel float image. Samples are unit-interval for pixel data;
// channel-normalized images (see normalize_channels) may leave [0,1].
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<float> data;  // size = width * height * 3

    static constexpr int kChannels = 3;

    RasterImage() = default;
    RasterImage(int w, int h, float fill = 0.f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * kChannels, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    float at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * kChannels + c];
    }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Per-pixel {0,1} mask.
struct BinaryMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;  // size = width * height, values 0 or 1

    BinaryMask() = default;
    BinaryMask(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Per-pixel probability in [0,1].
struct ProbMask {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    ProbMask() = default;
    ProbMask(int w, int h, float fill = 0.f)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// Rec.601 luma of one pixel, inputs in [0,1].
inline float luminance(float r, float g, float b) {
    return 0.299f * r + 0.587f * g + 0.114f * b;
}

}  // namespace derm
