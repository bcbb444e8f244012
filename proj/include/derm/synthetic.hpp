#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "derm/image.hpp"
#include "derm/manifest.hpp"
#include "derm/superpixel.hpp"

namespace derm {

// Desk-scale benchmark corpus: dark elliptical lesions with texture on a
// light skin background, tinted attribute blobs inside the lesion, and a
// diagnosis class encoded in the lesion hue (linearly separable by design).
struct SyntheticCorpusConfig {
    int count = 200;
    int width = 96;
    int height = 96;
    std::uint64_t seed = 0;
    int min_attr_blobs = 2;
    int max_attr_blobs = 4;
};

extern const std::vector<std::string> kSyntheticDiagnosisNames;  // 4 classes

struct SyntheticImage {
    std::string image_id;
    std::string group_id;
    int diagnosis = 0;
    RasterImage image;
    BinaryMask lesion_mask;
    std::vector<BinaryMask> attribute_masks;  // 5, index = class - 1
};

std::vector<SyntheticImage> generate_corpus(const SyntheticCorpusConfig& cfg);

// Writes images/, masks/, attr_gt/ and manifest.csv under dir.
void write_corpus(const std::string& dir, const std::vector<SyntheticImage>& corpus);

// Majority-vote region labels against ground-truth attribute masks: a region
// takes class c when class-c pixels cover more than half of it, else absent.
std::vector<int> oracle_superpixel_labels(const SuperpixelMap& sp,
                                          const std::vector<BinaryMask>& attribute_masks);

}  // namespace derm
