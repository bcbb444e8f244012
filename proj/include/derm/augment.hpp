#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "derm/image.hpp"
#include "derm/metrics.hpp"

namespace derm {

// Training-augmentation recipe: random crop (area/aspect constrained), flips,
// rotation, shear, area scaling and color jitter. Defaults are the Task-3
// recipe; color jitter magnitudes are config, not constants.
struct AugmentSpec {
    int out_size = 224;  // model input edge

    double crop_area_min = 0.4, crop_area_max = 1.0;      // fraction of original area
    double crop_aspect_min = 3.0 / 4.0, crop_aspect_max = 4.0 / 3.0;
    bool hflip = true;  // enable random horizontal flip (p = 0.5)
    bool vflip = true;
    double rotation_min = 0.0, rotation_max = 90.0;  // degrees
    double shear_min = 0.0, shear_max = 20.0;        // degrees
    double area_scale_min = 0.8, area_scale_max = 1.2;
    double saturation_min = 0.7, saturation_max = 1.3;
    double brightness_min = 0.7, brightness_max = 1.3;
    double contrast_min = 0.7, contrast_max = 1.3;
    double hue_min = -0.05, hue_max = 0.05;  // fraction of the hue circle

    // Identity recipe: all ranges collapsed, flips off.
    static AugmentSpec identity(int out_size);

    void validate() const;
};

// One concrete draw from an AugmentSpec. Re-sampling with the stored seed
// reproduces identical values.
struct SampledAugmentation {
    std::uint64_t seed = 0;
    double crop_area = 1.0;
    double crop_aspect = 1.0;
    double crop_x = 0.5, crop_y = 0.5;  // placement fractions within the valid range
    bool hflip = false;
    bool vflip = false;
    double rotation_deg = 0.0;
    double shear_deg = 0.0;
    double area_scale = 1.0;
    double saturation = 1.0;
    double brightness = 1.0;
    double contrast = 1.0;
    double hue_shift = 0.0;
    int out_size = 224;
    bool geometry_enabled = true;  // false for flips+color-only draws
};

enum class TtaMode { full_scenario_j, flips_color_only };

// Uniform draw of every parameter, in a fixed stream order; deterministic
// per seed.
SampledAugmentation sample_augmentation(const AugmentSpec& spec, std::uint64_t seed);

// Flips+color variant: geometry frozen to identity so patch centering is
// preserved (Task-2 contract).
SampledAugmentation sample_flips_color(const AugmentSpec& spec, std::uint64_t seed);

// Applies crop -> flip -> rotate -> shear -> scale -> color, in that pinned
// order, resampling onto an out_size x out_size grid with bilinear sampling
// and symmetric reflection for out-of-support pixels. If the sampled crop
// does not fit the image it is redrawn up to 10 times, then falls back to
// the largest centered crop with the sampled aspect.
RasterImage apply_augmentation(const RasterImage& img, const SampledAugmentation& a);

// n replicas with seeds seed+0 .. seed+n-1, so replica sets extend without
// recomputation.
std::vector<RasterImage> make_tta_replicas(const RasterImage& img, int n, TtaMode mode,
                                           const AugmentSpec& spec, std::uint64_t seed);

// Arithmetic mean per class across replica predictions.
PredictionVector average_replica_predictions(const std::vector<PredictionVector>& preds);

// Flat key=value (de)serialization of the spec.
std::string format_augment_spec(const AugmentSpec& spec);
AugmentSpec parse_augment_spec(const std::string& text);

}  // namespace derm
