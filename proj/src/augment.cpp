#include "derm/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "derm/error.hpp"
#include "derm/rng.hpp"

namespace derm {

AugmentSpec AugmentSpec::identity(int out_size) {
    AugmentSpec s;
    s.out_size = out_size;
    s.crop_area_min = s.crop_area_max = 1.0;
    s.crop_aspect_min = s.crop_aspect_max = 1.0;
    s.hflip = s.vflip = false;
    s.rotation_min = s.rotation_max = 0.0;
    s.shear_min = s.shear_max = 0.0;
    s.area_scale_min = s.area_scale_max = 1.0;
    s.saturation_min = s.saturation_max = 1.0;
    s.brightness_min = s.brightness_max = 1.0;
    s.contrast_min = s.contrast_max = 1.0;
    s.hue_min = s.hue_max = 0.0;
    return s;
}

void AugmentSpec::validate() const {
    auto range = [](double lo, double hi, const char* name) {
        if (!(lo <= hi)) throw Error(std::string("augment spec: empty range for ") + name);
    };
    if (out_size < 1) throw Error("augment spec: out_size must be >= 1");
    range(crop_area_min, crop_area_max, "crop_area");
    if (crop_area_min <= 0.0 || crop_area_max > 1.0)
        throw Error("augment spec: crop_area must be within (0,1]");
    range(crop_aspect_min, crop_aspect_max, "crop_aspect");
    if (crop_aspect_min <= 0.0) throw Error("augment spec: crop_aspect must be positive");
    range(rotation_min, rotation_max, "rotation");
    range(shear_min, shear_max, "shear");
    range(area_scale_min, area_scale_max, "area_scale");
    if (area_scale_min <= 0.0) throw Error("augment spec: area_scale must be positive");
    range(saturation_min, saturation_max, "saturation");
    range(brightness_min, brightness_max, "brightness");
    range(contrast_min, contrast_max, "contrast");
    range(hue_min, hue_max, "hue");
}

SampledAugmentation sample_augmentation(const AugmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    SampledAugmentation a;
    a.seed = seed;
    a.out_size = spec.out_size;
    // Fixed draw order; consumers rely on it for reproducibility.
    a.crop_area = rng.uniform(spec.crop_area_min, spec.crop_area_max);
    a.crop_aspect = rng.uniform(spec.crop_aspect_min, spec.crop_aspect_max);
    a.crop_x = rng.uniform();
    a.crop_y = rng.uniform();
    a.hflip = spec.hflip && rng.coin();
    a.vflip = spec.vflip && rng.coin();
    a.rotation_deg = rng.uniform(spec.rotation_min, spec.rotation_max);
    a.shear_deg = rng.uniform(spec.shear_min, spec.shear_max);
    a.area_scale = rng.uniform(spec.area_scale_min, spec.area_scale_max);
    a.saturation = rng.uniform(spec.saturation_min, spec.saturation_max);
    a.brightness = rng.uniform(spec.brightness_min, spec.brightness_max);
    a.contrast = rng.uniform(spec.contrast_min, spec.contrast_max);
    a.hue_shift = rng.uniform(spec.hue_min, spec.hue_max);
    return a;
}

SampledAugmentation sample_flips_color(const AugmentSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    SampledAugmentation a;
    a.seed = seed;
    a.out_size = spec.out_size;
    a.geometry_enabled = false;
    a.hflip = spec.hflip && rng.coin();
    a.vflip = spec.vflip && rng.coin();
    a.saturation = rng.uniform(spec.saturation_min, spec.saturation_max);
    a.brightness = rng.uniform(spec.brightness_min, spec.brightness_max);
    a.contrast = rng.uniform(spec.contrast_min, spec.contrast_max);
    a.hue_shift = rng.uniform(spec.hue_min, spec.hue_max);
    return a;
}

namespace {

struct CropRect {
    double x0, y0, w, h;  // source pixel units
};

// crop_aspect is a factor on the image's own aspect ratio, so the crop is
// cw = W*sqrt(area*aspect), ch = H*sqrt(area/aspect); area=aspect=1 is the
// whole image. Redraws follow the sample's own seed so (image, sample)
// fixes the result.
CropRect choose_crop(const SampledAugmentation& a, int img_w, int img_h) {
    double area = a.crop_area, aspect = a.crop_aspect, fx = a.crop_x, fy = a.crop_y;
    Rng retry_rng(a.seed ^ 0x9e3779b97f4a7c15ULL);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const double cw = img_w * std::sqrt(area * aspect);
        const double ch = img_h * std::sqrt(area / aspect);
        if (cw <= img_w && ch <= img_h && cw >= 1.0 && ch >= 1.0) {
            return {fx * (img_w - cw), fy * (img_h - ch), cw, ch};
        }
        area = retry_rng.uniform(std::min(a.crop_area, 1.0), 1.0);
        aspect = retry_rng.uniform(std::min(a.crop_aspect, 1.0), std::max(a.crop_aspect, 1.0));
        fx = retry_rng.uniform();
        fy = retry_rng.uniform();
    }
    // Fallback: largest centered crop at the originally sampled aspect factor.
    const double fb_area = std::min(a.crop_aspect, 1.0 / a.crop_aspect);
    const double cw = std::max(1.0, img_w * std::sqrt(fb_area * a.crop_aspect));
    const double ch = std::max(1.0, img_h * std::sqrt(fb_area / a.crop_aspect));
    return {(img_w - cw) / 2.0, (img_h - ch) / 2.0, cw, ch};
}

// Symmetric reflection (edge repeated) into the sample domain
// [-0.5, n-0.5); mirrors sit on pixel edges so the convention matches the
// half-pixel-center resize.
double reflect_coord(double x, int n) {
    if (n == 1) return 0.0;
    const double lo = -0.5, hi = n - 0.5;
    const double period = 2.0 * (hi - lo);
    double t = std::fmod(x - lo, period);
    if (t < 0) t += period;
    if (t > hi - lo) t = period - t;
    return lo + t;
}

float sample_bilinear(const RasterImage& img, double x, double y, int c) {
    x = reflect_coord(x, img.width);
    y = reflect_coord(y, img.height);
    const double cx = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    const double cy = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    const int x0 = static_cast<int>(std::floor(cx));
    const int y0 = static_cast<int>(std::floor(cy));
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fx = cx - x0, fy = cy - y0;
    return static_cast<float>((img.at(y0, x0, c) * (1 - fx) + img.at(y0, x1, c) * fx) * (1 - fy) +
                              (img.at(y1, x0, c) * (1 - fx) + img.at(y1, x1, c) * fx) * fy);
}

void jitter_saturation(RasterImage& img, double f) {
    if (f == 1.0) return;
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        float* p = &img.data[i * 3];
        const float lum = luminance(p[0], p[1], p[2]);
        for (int c = 0; c < 3; ++c)
            p[c] = std::clamp(lum + static_cast<float>(f) * (p[c] - lum), 0.f, 1.f);
    }
}

void jitter_brightness(RasterImage& img, double f) {
    if (f == 1.0) return;
    for (auto& v : img.data) v = std::clamp(static_cast<float>(f) * v, 0.f, 1.f);
}

void jitter_contrast(RasterImage& img, double f) {
    if (f == 1.0) return;
    double mean = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
        mean += luminance(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);
    mean /= static_cast<double>(img.pixel_count());
    const float m = static_cast<float>(mean);
    for (auto& v : img.data) v = std::clamp(m + static_cast<float>(f) * (v - m), 0.f, 1.f);
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
    const float mx = std::max({r, g, b});
    const float mn = std::min({r, g, b});
    const float d = mx - mn;
    v = mx;
    s = mx <= 0.f ? 0.f : d / mx;
    if (d <= 0.f) {
        h = 0.f;
        return;
    }
    if (mx == r)
        h = 60.f * std::fmod((g - b) / d + 6.f, 6.f);
    else if (mx == g)
        h = 60.f * ((b - r) / d + 2.f);
    else
        h = 60.f * ((r - g) / d + 4.f);
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
    const float c = v * s;
    const float hp = h / 60.f;
    const float x = c * (1.f - std::fabs(std::fmod(hp, 2.f) - 1.f));
    float rr = 0, gg = 0, bb = 0;
    if (hp < 1) { rr = c; gg = x; }
    else if (hp < 2) { rr = x; gg = c; }
    else if (hp < 3) { gg = c; bb = x; }
    else if (hp < 4) { gg = x; bb = c; }
    else if (hp < 5) { rr = x; bb = c; }
    else { rr = c; bb = x; }
    const float m = v - c;
    r = rr + m;
    g = gg + m;
    b = bb + m;
}

void jitter_hue(RasterImage& img, double shift) {
    if (shift == 0.0) return;
    const float deg = static_cast<float>(shift * 360.0);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) {
        float* p = &img.data[i * 3];
        float h, s, v;
        rgb_to_hsv(p[0], p[1], p[2], h, s, v);
        h = std::fmod(h + deg + 360.f, 360.f);
        hsv_to_rgb(h, s, v, p[0], p[1], p[2]);
        for (int c = 0; c < 3; ++c) p[c] = std::clamp(p[c], 0.f, 1.f);
    }
}

}  // namespace

RasterImage apply_augmentation(const RasterImage& img, const SampledAugmentation& a) {
    if (img.width < 1 || img.height < 1) throw Error("apply_augmentation: empty image");
    const int out = a.out_size;

    CropRect crop = a.geometry_enabled
                        ? choose_crop(a, img.width, img.height)
                        : CropRect{0.0, 0.0, static_cast<double>(img.width),
                                   static_cast<double>(img.height)};

    // Inverse-compose the geometric chain (crop -> flip -> rotate -> shear ->
    // scale -> resize) and pull each output pixel from the source.
    const double theta = a.rotation_deg * M_PI / 180.0;
    const double shear_t = std::tan(a.shear_deg * M_PI / 180.0);
    const double lin_scale = std::sqrt(a.area_scale);
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double cx_out = (out - 1) / 2.0, cy_out = (out - 1) / 2.0;
    const double cx_crop = crop.x0 + (crop.w - 1) / 2.0;
    const double cy_crop = crop.y0 + (crop.h - 1) / 2.0;

    RasterImage result(out, out);
    for (int v = 0; v < out; ++v) {
        for (int u = 0; u < out; ++u) {
            // undo final resize
            double dx = (u - cx_out) * crop.w / out;
            double dy = (v - cy_out) * crop.h / out;
            // undo scale
            dx /= lin_scale;
            dy /= lin_scale;
            // undo shear (horizontal)
            dx -= shear_t * dy;
            // undo rotation (content rotates CCW on screen by theta)
            const double rx = cos_t * dx - sin_t * dy;
            const double ry = sin_t * dx + cos_t * dy;
            dx = rx;
            dy = ry;
            // undo flips
            if (a.hflip) dx = -dx;
            if (a.vflip) dy = -dy;
            const double sx = cx_crop + dx;
            const double sy = cy_crop + dy;
            for (int c = 0; c < 3; ++c)
                result.at(v, u, c) = std::clamp(sample_bilinear(img, sx, sy, c), 0.f, 1.f);
        }
    }

    jitter_saturation(result, a.saturation);
    jitter_brightness(result, a.brightness);
    jitter_contrast(result, a.contrast);
    jitter_hue(result, a.hue_shift);
    return result;
}

std::vector<RasterImage> make_tta_replicas(const RasterImage& img, int n, TtaMode mode,
                                           const AugmentSpec& spec, std::uint64_t seed) {
    if (n < 1) throw Error("make_tta_replicas: n must be >= 1");
    std::vector<RasterImage> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
        const SampledAugmentation a = mode == TtaMode::full_scenario_j
                                          ? sample_augmentation(spec, s)
                                          : sample_flips_color(spec, s);
        out.push_back(apply_augmentation(img, a));
    }
    return out;
}

PredictionVector average_replica_predictions(const std::vector<PredictionVector>& preds) {
    if (preds.empty()) throw Error("average_replica_predictions: no predictions");
    const std::size_t len = preds[0].size();
    PredictionVector mean(len, 0.0);
    for (const auto& p : preds) {
        if (p.size() != len) throw Error("average_replica_predictions: length mismatch");
        for (std::size_t c = 0; c < len; ++c) mean[c] += p[c];
    }
    for (auto& v : mean) v /= static_cast<double>(preds.size());
    return mean;
}

std::string format_augment_spec(const AugmentSpec& s) {
    std::ostringstream o;
    o.precision(17);
    o << "out_size=" << s.out_size << '\n'
      << "crop_area_min=" << s.crop_area_min << '\n'
      << "crop_area_max=" << s.crop_area_max << '\n'
      << "crop_aspect_min=" << s.crop_aspect_min << '\n'
      << "crop_aspect_max=" << s.crop_aspect_max << '\n'
      << "hflip=" << (s.hflip ? 1 : 0) << '\n'
      << "vflip=" << (s.vflip ? 1 : 0) << '\n'
      << "rotation_min=" << s.rotation_min << '\n'
      << "rotation_max=" << s.rotation_max << '\n'
      << "shear_min=" << s.shear_min << '\n'
      << "shear_max=" << s.shear_max << '\n'
      << "area_scale_min=" << s.area_scale_min << '\n'
      << "area_scale_max=" << s.area_scale_max << '\n'
      << "saturation_min=" << s.saturation_min << '\n'
      << "saturation_max=" << s.saturation_max << '\n'
      << "brightness_min=" << s.brightness_min << '\n'
      << "brightness_max=" << s.brightness_max << '\n'
      << "contrast_min=" << s.contrast_min << '\n'
      << "contrast_max=" << s.contrast_max << '\n'
      << "hue_min=" << s.hue_min << '\n'
      << "hue_max=" << s.hue_max << '\n';
    return o.str();
}

AugmentSpec parse_augment_spec(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("augment spec: bad line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    AugmentSpec s;
    auto num = [&](const char* key, double& field) {
        auto it = kv.find(key);
        if (it != kv.end()) field = std::stod(it->second);
    };
    if (auto it = kv.find("out_size"); it != kv.end()) s.out_size = std::stoi(it->second);
    num("crop_area_min", s.crop_area_min);
    num("crop_area_max", s.crop_area_max);
    num("crop_aspect_min", s.crop_aspect_min);
    num("crop_aspect_max", s.crop_aspect_max);
    if (auto it = kv.find("hflip"); it != kv.end()) s.hflip = it->second != "0";
    if (auto it = kv.find("vflip"); it != kv.end()) s.vflip = it->second != "0";
    num("rotation_min", s.rotation_min);
    num("rotation_max", s.rotation_max);
    num("shear_min", s.shear_min);
    num("shear_max", s.shear_max);
    num("area_scale_min", s.area_scale_min);
    num("area_scale_max", s.area_scale_max);
    num("saturation_min", s.saturation_min);
    num("saturation_max", s.saturation_max);
    num("brightness_min", s.brightness_min);
    num("brightness_max", s.brightness_max);
    num("contrast_min", s.contrast_min);
    num("contrast_max", s.contrast_max);
    num("hue_min", s.hue_min);
    num("hue_max", s.hue_max);
    s.validate();
    return s;
}

}  // namespace derm
