#pragma once

#include <string>

#include "derm/image.hpp"

namespace derm {

// Binary masks: single-channel 8-bit PNG with values {0,255}.
void write_mask_png(const std::string& path, const BinaryMask& m);
BinaryMask read_mask_png(const std::string& path);

// Probability masks: single-channel 16-bit PNG, value = round(p * 65535).
void write_prob_png(const std::string& path, const ProbMask& m);
ProbMask read_prob_png(const std::string& path);

// Images: 8-bit RGB PNG. Grayscale and alpha inputs are widened/stripped.
void write_image_png(const std::string& path, const RasterImage& img);
RasterImage read_image_png(const std::string& path);

// Reads only the IHDR dimensions.
void read_png_size(const std::string& path, int& width, int& height);

}  // namespace derm
