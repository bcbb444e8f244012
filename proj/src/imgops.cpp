#include "derm/imgops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "derm/error.hpp"

namespace derm {

namespace {

void check_dims(int w, int h) {
    if (w < 1 || h < 1) throw Error("resize: target dimensions must be >= 1");
}

// Generic planar resize over a float accessor.
template <typename GetFn, typename SetFn>
void resample(int sw, int sh, int dw, int dh, int planes, ResizeMode mode, GetFn get, SetFn set) {
    const double sx_scale = static_cast<double>(sw) / dw;
    const double sy_scale = static_cast<double>(sh) / dh;
    for (int y = 0; y < dh; ++y) {
        const double sy = (y + 0.5) * sy_scale - 0.5;
        for (int x = 0; x < dw; ++x) {
            const double sx = (x + 0.5) * sx_scale - 0.5;
            if (mode == ResizeMode::nearest) {
                const int nx = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, sw - 1);
                const int ny = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, sh - 1);
                for (int c = 0; c < planes; ++c) set(y, x, c, get(ny, nx, c));
            } else {
                const double cx = std::clamp(sx, 0.0, static_cast<double>(sw - 1));
                const double cy = std::clamp(sy, 0.0, static_cast<double>(sh - 1));
                const int x0 = static_cast<int>(std::floor(cx));
                const int y0 = static_cast<int>(std::floor(cy));
                const int x1 = std::min(x0 + 1, sw - 1);
                const int y1 = std::min(y0 + 1, sh - 1);
                const double fx = cx - x0;
                const double fy = cy - y0;
                for (int c = 0; c < planes; ++c) {
                    const double v00 = get(y0, x0, c);
                    const double v01 = get(y0, x1, c);
                    const double v10 = get(y1, x0, c);
                    const double v11 = get(y1, x1, c);
                    const double v = (v00 * (1 - fx) + v01 * fx) * (1 - fy) +
                                     (v10 * (1 - fx) + v11 * fx) * fy;
                    set(y, x, c, static_cast<float>(v));
                }
            }
        }
    }
}

}  // namespace

RasterImage resize(const RasterImage& img, int w, int h, ResizeMode mode) {
    check_dims(w, h);
    RasterImage out(w, h);
    resample(
        img.width, img.height, w, h, RasterImage::kChannels, mode,
        [&](int y, int x, int c) { return img.at(y, x, c); },
        [&](int y, int x, int c, float v) { out.at(y, x, c) = v; });
    return out;
}

ProbMask resize(const ProbMask& m, int w, int h, ResizeMode mode) {
    check_dims(w, h);
    ProbMask out(w, h);
    resample(
        m.width, m.height, w, h, 1, mode, [&](int y, int x, int) { return m.at(y, x); },
        [&](int y, int x, int, float v) { out.at(y, x) = v; });
    return out;
}

BinaryMask resize(const BinaryMask& m, int w, int h, ResizeMode mode) {
    check_dims(w, h);
    if (mode != ResizeMode::nearest)
        throw Error("resize: binary masks require nearest mode to stay binary");
    BinaryMask out(w, h);
    resample(
        m.width, m.height, w, h, 1, mode,
        [&](int y, int x, int) { return static_cast<float>(m.at(y, x)); },
        [&](int y, int x, int, float v) { out.at(y, x) = v != 0.f ? 1 : 0; });
    return out;
}

RasterImage normalize_channels(const RasterImage& img, const std::array<float, 3>& mean,
                               const std::array<float, 3>& stddev) {
    for (int c = 0; c < 3; ++c)
        if (!(stddev[c] > 0.f)) throw Error("normalize_channels: std must be > 0 per channel");
    RasterImage out = img;
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < 3; ++c)
            out.data[i * 3 + c] = (img.data[i * 3 + c] - mean[c]) / stddev[c];
    return out;
}

BinaryMask binarize(const ProbMask& p, float threshold) {
    if (!(threshold > 0.f && threshold < 1.f)) throw Error("binarize: threshold must be in (0,1)");
    BinaryMask out(p.width, p.height);
    for (std::size_t i = 0; i < p.data.size(); ++i) out.data[i] = p.data[i] >= threshold ? 1 : 0;
    return out;
}

BinaryMask fill_holes(const BinaryMask& m) {
    const int w = m.width, h = m.height;
    if (w == 0 || h == 0) return m;
    // Flood the background from the border over 0-pixels (4-connected);
    // unreached 0-pixels are holes.
    std::vector<std::uint8_t> outside(m.data.size(), 0);
    std::vector<int> stack;
    auto push = [&](int y, int x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        if (!outside[i] && m.data[i] == 0) {
            outside[i] = 1;
            stack.push_back(static_cast<int>(i));
        }
    };
    for (int x = 0; x < w; ++x) {
        push(0, x);
        push(h - 1, x);
    }
    for (int y = 0; y < h; ++y) {
        push(y, 0);
        push(y, w - 1);
    }
    while (!stack.empty()) {
        const int i = stack.back();
        stack.pop_back();
        const int y = i / w, x = i % w;
        if (x > 0) push(y, x - 1);
        if (x + 1 < w) push(y, x + 1);
        if (y > 0) push(y - 1, x);
        if (y + 1 < h) push(y + 1, x);
    }
    BinaryMask out = m;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (out.data[i] == 0 && !outside[i]) out.data[i] = 1;
    return out;
}

}  // namespace derm
