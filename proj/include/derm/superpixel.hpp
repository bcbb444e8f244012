#pragma once

#include <array>
#include <string>
#include <vector>

#include "derm/image.hpp"

namespace derm {

// Attribute classes, index 0 = absent. Ties in score argmax break toward the
// lowest index, so absent wins ties.
inline constexpr int kNumAttributeClasses = 6;
extern const std::array<std::string, kNumAttributeClasses> kAttributeClassNames;

struct SuperpixelMap {
    int width = 0;
    int height = 0;
    int num_regions = 0;                 // K
    std::vector<int> labels;             // per pixel, 0..K-1
    std::vector<std::array<double, 2>> centroids;  // per region (row, col) means

    int label_at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

struct AttributePrediction {
    std::vector<int> classes;  // per superpixel, 0..5
    std::vector<std::array<double, kNumAttributeClasses>> scores;  // optional, empty or K rows
};

// SLIC in CIELAB space: grid-seeded cluster centers, `iters` assignment/update
// rounds in 2S windows, then orphan fragments merged into an adjacent region.
// No RNG; K lands within about +-20% of target_k on regular images.
SuperpixelMap slic_segment(const RasterImage& img, int target_k, double compactness, int iters);

// size x size patch with the region's rounded centroid at the patch center
// pixel (index size/2); borders reflection-padded. Centroid rounding is
// round-half-down on both axes.
RasterImage extract_patch(const RasterImage& img, const SuperpixelMap& sp, int region, int size);

// Per-class argmax over score rows.
AttributePrediction attribute_prediction_from_scores(
    const std::vector<std::array<double, kNumAttributeClasses>>& scores);

// One mask per non-absent class (index c-1 for class c): pixel = 1 iff its
// superpixel is predicted class c. Masks are pairwise disjoint.
std::vector<BinaryMask> compose_attribute_masks(const SuperpixelMap& sp,
                                                const AttributePrediction& pred);

// Classes whose superpixel count is strictly below min_count are reassigned
// to absent; others untouched.
AttributePrediction prune_sparse_positives(const AttributePrediction& pred, int min_count);

// Challenge naming scheme for emitted masks.
std::string attribute_mask_filename(const std::string& image_id, int cls);

}  // namespace derm
