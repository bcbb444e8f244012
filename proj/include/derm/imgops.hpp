#pragma once

#include <array>

#include "derm/image.hpp"

namespace derm {

enum class ResizeMode { bilinear, nearest };

// Resampling uses half-pixel centers: destination pixel (x,y) samples the
// source at ((x+0.5)*sw/dw - 0.5, (y+0.5)*sh/dh - 0.5), clamped to the
// source grid. Pinned here because metric values depend on the convention.
RasterImage resize(const RasterImage& img, int w, int h, ResizeMode mode);
ProbMask resize(const ProbMask& m, int w, int h, ResizeMode mode);
// Binary masks only admit nearest (output stays binary); bilinear throws.
BinaryMask resize(const BinaryMask& m, int w, int h, ResizeMode mode);

// out[c] = (in[c] - mean[c]) / std[c]. std must be > 0 per channel.
RasterImage normalize_channels(const RasterImage& img, const std::array<float, 3>& mean,
                               const std::array<float, 3>& stddev);

// out = 1 where p >= threshold. Requires 0 < threshold < 1.
BinaryMask binarize(const ProbMask& p, float threshold);

// Morphological hole filling: 0-pixels 4-connected to the border stay 0,
// every other 0-pixel becomes 1. Output >= input pointwise.
BinaryMask fill_holes(const BinaryMask& m);

}  // namespace derm
