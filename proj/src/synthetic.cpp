#include "derm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "derm/error.hpp"
#include "derm/png_io.hpp"
#include "derm/rng.hpp"

namespace derm {

namespace fs = std::filesystem;

const std::vector<std::string> kSyntheticDiagnosisNames = {"mel", "nv", "bkl", "vasc"};

namespace {

struct Rgb {
    float r, g, b;
};

// Hue-separated dark lesion palettes per diagnosis class; the gap to the
// light background keeps the luminance segmenter and the color classifier
// both comfortably inside their acceptance margins.
constexpr Rgb kLesionColor[4] = {
    {0.45f, 0.10f, 0.10f},  // mel: dark red
    {0.28f, 0.38f, 0.08f},  // nv: olive
    {0.08f, 0.34f, 0.40f},  // bkl: teal
    {0.22f, 0.10f, 0.46f},  // vasc: violet
};
constexpr Rgb kBackground = {0.86f, 0.76f, 0.68f};

// Attribute blob tints, multiplied onto the lesion color.
constexpr Rgb kAttrTint[5] = {
    {1.5f, 1.1f, 0.7f},  // pigment_network
    {0.6f, 1.3f, 1.3f},  // negative_network
    {1.4f, 0.6f, 1.2f},  // streaks
    {1.6f, 1.6f, 1.6f},  // milia_like_cyst
    {0.5f, 0.5f, 0.5f},  // globules
};

struct Ellipse {
    double cx, cy, ax, ay, angle;

    bool contains(double x, double y, double scale = 1.0) const {
        const double dx = x - cx, dy = y - cy;
        const double ca = std::cos(angle), sa = std::sin(angle);
        const double u = (ca * dx + sa * dy) / (ax * scale);
        const double v = (-sa * dx + ca * dy) / (ay * scale);
        return u * u + v * v <= 1.0;
    }
};

}  // namespace

std::vector<SyntheticImage> generate_corpus(const SyntheticCorpusConfig& cfg) {
    if (cfg.count < 1 || cfg.width < 32 || cfg.height < 32)
        throw Error("generate_corpus: need count >= 1 and at least 32x32 images");
    std::vector<SyntheticImage> corpus;
    corpus.reserve(cfg.count);

    Rng group_rng(cfg.seed ^ 0xababcdcd12345678ULL);
    int group_counter = 0;
    int remaining_in_group = 0;
    int group_class = 0;

    for (int idx = 0; idx < cfg.count; ++idx) {
        Rng rng(cfg.seed + 0x1000 + static_cast<std::uint64_t>(idx));
        SyntheticImage s;
        char id[32];
        std::snprintf(id, sizeof(id), "syn_%06d", idx);
        s.image_id = id;

        // Some lesions get several shots; all shots share group and class.
        if (remaining_in_group == 0) {
            ++group_counter;
            const auto draw = group_rng.below(10);
            remaining_in_group = draw < 7 ? 1 : (draw < 9 ? 2 : 3);
            group_class = static_cast<int>(group_rng.below(4));
        }
        s.group_id = "case_" + std::to_string(group_counter);
        s.diagnosis = group_class;
        --remaining_in_group;

        const int w = cfg.width, h = cfg.height;
        Ellipse lesion;
        lesion.cx = w / 2.0 + rng.uniform(-w * 0.08, w * 0.08);
        lesion.cy = h / 2.0 + rng.uniform(-h * 0.08, h * 0.08);
        lesion.ax = rng.uniform(w * 0.20, w * 0.32);
        lesion.ay = rng.uniform(h * 0.20, h * 0.32);
        lesion.angle = rng.uniform(0.0, M_PI);

        const Rgb base = kLesionColor[s.diagnosis];
        s.image = RasterImage(w, h);
        s.lesion_mask = BinaryMask(w, h);
        s.attribute_masks.assign(5, BinaryMask(w, h));

        // Attribute blobs: circles inside the lesion core, non-overlapping.
        struct Blob {
            double cx, cy, r;
            int cls;  // 1..5
        };
        std::vector<Blob> blobs;
        const int want = cfg.min_attr_blobs +
                         static_cast<int>(rng.below(cfg.max_attr_blobs - cfg.min_attr_blobs + 1));
        for (int b = 0; b < want; ++b) {
            for (int attempt = 0; attempt < 40; ++attempt) {
                Blob blob;
                blob.r = rng.uniform(4.0, 7.0);
                blob.cx = lesion.cx + rng.uniform(-lesion.ax, lesion.ax);
                blob.cy = lesion.cy + rng.uniform(-lesion.ay, lesion.ay);
                blob.cls = 1 + static_cast<int>(rng.below(5));
                if (!lesion.contains(blob.cx, blob.cy, 0.6)) continue;
                bool clear = true;
                for (const auto& other : blobs) {
                    const double d = std::hypot(blob.cx - other.cx, blob.cy - other.cy);
                    if (d < blob.r + other.r + 2.0) clear = false;
                }
                if (!clear) continue;
                blobs.push_back(blob);
                break;
            }
        }

        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                Rgb px = kBackground;
                const bool inside = lesion.contains(x + 0.5, y + 0.5);
                if (inside) {
                    s.lesion_mask.at(y, x) = 1;
                    px = base;
                    // gentle radial darkening toward the center
                    const double d = std::hypot((x - lesion.cx) / lesion.ax,
                                                (y - lesion.cy) / lesion.ay);
                    const float shade = static_cast<float>(0.85 + 0.15 * d);
                    px = {px.r * shade, px.g * shade, px.b * shade};
                    for (const auto& blob : blobs) {
                        const double bd = std::hypot(x + 0.5 - blob.cx, y + 0.5 - blob.cy);
                        if (bd <= blob.r) {
                            const Rgb t = kAttrTint[blob.cls - 1];
                            px = {px.r * t.r, px.g * t.g, px.b * t.b};
                            s.attribute_masks[blob.cls - 1].at(y, x) = 1;
                            break;
                        }
                    }
                }
                const float noise_amp = inside ? 0.035f : 0.02f;
                const float noise = static_cast<float>(rng.uniform(-1.0, 1.0)) * noise_amp;
                s.image.at(y, x, 0) = std::clamp(px.r + noise, 0.f, 1.f);
                s.image.at(y, x, 1) = std::clamp(px.g + noise, 0.f, 1.f);
                s.image.at(y, x, 2) = std::clamp(px.b + noise, 0.f, 1.f);
            }
        }
        corpus.push_back(std::move(s));
    }
    return corpus;
}

void write_corpus(const std::string& dir, const std::vector<SyntheticImage>& corpus) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");
    fs::create_directories(fs::path(dir) / "attr_gt");
    Manifest m;
    m.label_names = kSyntheticDiagnosisNames;
    for (const auto& s : corpus) {
        write_image_png((fs::path(dir) / "images" / (s.image_id + ".png")).string(), s.image);
        write_mask_png((fs::path(dir) / "masks" / (s.image_id + ".png")).string(), s.lesion_mask);
        for (int c = 1; c <= 5; ++c)
            write_mask_png((fs::path(dir) / "attr_gt" / attribute_mask_filename(s.image_id, c))
                               .string(),
                           s.attribute_masks[c - 1]);
        ImageRecord r;
        r.image_id = s.image_id;
        r.path = "images/" + s.image_id + ".png";
        r.label = s.diagnosis;
        r.group_id = s.group_id;
        r.width = s.image.width;
        r.height = s.image.height;
        m.records.push_back(std::move(r));
    }
    save_manifest((fs::path(dir) / "manifest.csv").string(), m);
}

std::vector<int> oracle_superpixel_labels(const SuperpixelMap& sp,
                                          const std::vector<BinaryMask>& attribute_masks) {
    if (attribute_masks.size() != 5)
        throw Error("oracle_superpixel_labels: expected 5 attribute masks");
    std::vector<std::array<std::int64_t, 6>> counts(sp.num_regions, {0, 0, 0, 0, 0, 0});
    std::vector<std::int64_t> sizes(sp.num_regions, 0);
    for (int y = 0; y < sp.height; ++y) {
        for (int x = 0; x < sp.width; ++x) {
            const int r = sp.label_at(y, x);
            ++sizes[r];
            for (int c = 1; c <= 5; ++c)
                if (attribute_masks[c - 1].at(y, x)) ++counts[r][c];
        }
    }
    std::vector<int> labels(sp.num_regions, 0);
    for (int r = 0; r < sp.num_regions; ++r) {
        int best = 0;
        for (int c = 1; c <= 5; ++c)
            if (counts[r][c] > counts[r][best]) best = c;
        if (best != 0 && counts[r][best] * 2 > sizes[r]) labels[r] = best;
    }
    return labels;
}

}  // namespace derm
