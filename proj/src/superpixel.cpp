#include "derm/superpixel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "derm/error.hpp"

namespace derm {

const std::array<std::string, kNumAttributeClasses> kAttributeClassNames = {
    "absent", "pigment_network", "negative_network", "streaks", "milia_like_cyst", "globules"};

namespace {

struct LabPixel {
    float l, a, b;
};

float srgb_to_linear(float v) {
    return v <= 0.04045f ? v / 12.92f : std::pow((v + 0.055f) / 1.055f, 2.4f);
}

LabPixel rgb_to_lab(float r, float g, float b) {
    const float rl = srgb_to_linear(r), gl = srgb_to_linear(g), bl = srgb_to_linear(b);
    // D65 reference white
    float x = (0.4124564f * rl + 0.3575761f * gl + 0.1804375f * bl) / 0.95047f;
    float y = 0.2126729f * rl + 0.7151522f * gl + 0.0721750f * bl;
    float z = (0.0193339f * rl + 0.1191920f * gl + 0.9503041f * bl) / 1.08883f;
    auto f = [](float t) {
        return t > 0.008856f ? std::cbrt(t) : (7.787f * t + 16.f / 116.f);
    };
    const float fx = f(x), fy = f(y), fz = f(z);
    return {116.f * fy - 16.f, 500.f * (fx - fy), 200.f * (fy - fz)};
}

struct Cluster {
    double l = 0, a = 0, b = 0, x = 0, y = 0;
};

}  // namespace

SuperpixelMap slic_segment(const RasterImage& img, int target_k, double compactness, int iters) {
    const int w = img.width, h = img.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (w < 1 || h < 1) throw Error("slic_segment: empty image");
    if (target_k < 1 || static_cast<std::size_t>(target_k) > n)
        throw Error("slic_segment: target_k must be in [1, pixel count]");

    std::vector<LabPixel> lab(n);
    for (std::size_t i = 0; i < n; ++i)
        lab[i] = rgb_to_lab(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);

    const double grid_step = std::sqrt(static_cast<double>(n) / target_k);
    const int kx = std::max(1, static_cast<int>(std::lround(w / grid_step)));
    const int ky = std::max(1, static_cast<int>(std::lround(h / grid_step)));
    std::vector<Cluster> clusters;
    clusters.reserve(static_cast<std::size_t>(kx) * ky);
    for (int j = 0; j < ky; ++j) {
        for (int i = 0; i < kx; ++i) {
            const int cx = std::min(w - 1, static_cast<int>((i + 0.5) * w / kx));
            const int cy = std::min(h - 1, static_cast<int>((j + 0.5) * h / ky));
            const LabPixel& p = lab[static_cast<std::size_t>(cy) * w + cx];
            clusters.push_back({p.l, p.a, p.b, static_cast<double>(cx), static_cast<double>(cy)});
        }
    }
    const int k0 = static_cast<int>(clusters.size());
    const double search = std::max(grid_step, 1.0);
    const double spatial_w = (compactness * compactness) / (search * search);

    std::vector<int> labels(n, 0);
    std::vector<double> dist(n);
    for (int it = 0; it < iters; ++it) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::max());
        for (int c = 0; c < k0; ++c) {
            const Cluster& cl = clusters[c];
            const int x0 = std::max(0, static_cast<int>(cl.x - search));
            const int x1 = std::min(w - 1, static_cast<int>(cl.x + search));
            const int y0 = std::max(0, static_cast<int>(cl.y - search));
            const int y1 = std::min(h - 1, static_cast<int>(cl.y + search));
            for (int y = y0; y <= y1; ++y) {
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    const LabPixel& p = lab[i];
                    const double dl = p.l - cl.l, da = p.a - cl.a, db = p.b - cl.b;
                    const double dx = x - cl.x, dy = y - cl.y;
                    const double d = dl * dl + da * da + db * db +
                                     (dx * dx + dy * dy) * spatial_w;
                    if (d < dist[i]) {
                        dist[i] = d;
                        labels[i] = c;
                    }
                }
            }
        }
        // update step
        std::vector<Cluster> sums(k0);
        std::vector<std::int64_t> counts(k0, 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                Cluster& s = sums[labels[i]];
                s.l += lab[i].l;
                s.a += lab[i].a;
                s.b += lab[i].b;
                s.x += x;
                s.y += y;
                ++counts[labels[i]];
            }
        }
        for (int c = 0; c < k0; ++c) {
            if (counts[c] == 0) continue;  // empty cluster keeps its old center
            clusters[c] = {sums[c].l / counts[c], sums[c].a / counts[c], sums[c].b / counts[c],
                           sums[c].x / counts[c], sums[c].y / counts[c]};
        }
    }

    // Connectivity: relabel 4-connected components in scan order; fragments
    // smaller than a quarter cell merge into the adjacent previous region.
    const std::int64_t min_size = std::max<std::int64_t>(1, static_cast<std::int64_t>(n) / k0 / 4);
    std::vector<int> final_labels(n, -1);
    std::vector<int> component;
    component.reserve(n);
    int next_label = 0;
    for (std::size_t start = 0; start < n; ++start) {
        if (final_labels[start] >= 0) continue;
        const int old = labels[start];
        int adj = -1;
        {
            const int sx = static_cast<int>(start % w), sy = static_cast<int>(start / w);
            if (sx > 0 && final_labels[start - 1] >= 0) adj = final_labels[start - 1];
            else if (sy > 0 && final_labels[start - w] >= 0) adj = final_labels[start - w];
        }
        component.clear();
        component.push_back(static_cast<int>(start));
        final_labels[start] = next_label;
        for (std::size_t qi = 0; qi < component.size(); ++qi) {
            const int i = component[qi];
            const int x = i % w, y = i / w;
            const int nb[4] = {x > 0 ? i - 1 : -1, x + 1 < w ? i + 1 : -1,
                               y > 0 ? i - w : -1, y + 1 < h ? i + w : -1};
            for (int j : nb) {
                if (j >= 0 && final_labels[j] < 0 && labels[j] == old) {
                    final_labels[j] = next_label;
                    component.push_back(j);
                }
            }
        }
        if (static_cast<std::int64_t>(component.size()) < min_size && adj >= 0) {
            for (int i : component) final_labels[i] = adj;
        } else {
            ++next_label;
        }
    }

    SuperpixelMap map;
    map.width = w;
    map.height = h;
    map.num_regions = next_label;
    map.labels = std::move(final_labels);
    map.centroids.assign(next_label, {0.0, 0.0});
    std::vector<std::int64_t> counts(next_label, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const int r = map.labels[static_cast<std::size_t>(y) * w + x];
            map.centroids[r][0] += y;
            map.centroids[r][1] += x;
            ++counts[r];
        }
    }
    for (int r = 0; r < next_label; ++r) {
        map.centroids[r][0] /= counts[r];
        map.centroids[r][1] /= counts[r];
    }
    return map;
}

namespace {

// Symmetric reflection (edge repeated) of an index into [0, n).
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - 1 - i;
}

int round_half_down(double v) { return static_cast<int>(std::ceil(v - 0.5)); }

}  // namespace

RasterImage extract_patch(const RasterImage& img, const SuperpixelMap& sp, int region, int size) {
    if (region < 0 || region >= sp.num_regions)
        throw Error("extract_patch: invalid region index " + std::to_string(region));
    if (size < 1) throw Error("extract_patch: size must be >= 1");
    const int cr = round_half_down(sp.centroids[region][0]);
    const int cc = round_half_down(sp.centroids[region][1]);
    const int r0 = cr - size / 2;
    const int c0 = cc - size / 2;
    RasterImage patch(size, size);
    for (int y = 0; y < size; ++y) {
        const int sy = reflect_index(r0 + y, img.height);
        for (int x = 0; x < size; ++x) {
            const int sx = reflect_index(c0 + x, img.width);
            for (int c = 0; c < 3; ++c) patch.at(y, x, c) = img.at(sy, sx, c);
        }
    }
    return patch;
}

AttributePrediction attribute_prediction_from_scores(
    const std::vector<std::array<double, kNumAttributeClasses>>& scores) {
    AttributePrediction pred;
    pred.scores = scores;
    pred.classes.reserve(scores.size());
    for (const auto& row : scores) {
        int best = 0;
        for (int c = 1; c < kNumAttributeClasses; ++c)
            if (row[c] > row[best]) best = c;  // ties keep the lower index
        pred.classes.push_back(best);
    }
    return pred;
}

std::vector<BinaryMask> compose_attribute_masks(const SuperpixelMap& sp,
                                                const AttributePrediction& pred) {
    if (static_cast<int>(pred.classes.size()) != sp.num_regions)
        throw Error("compose_attribute_masks: prediction covers " +
                    std::to_string(pred.classes.size()) + " regions, map has " +
                    std::to_string(sp.num_regions));
    std::vector<BinaryMask> masks(kNumAttributeClasses - 1, BinaryMask(sp.width, sp.height));
    for (std::size_t i = 0; i < sp.labels.size(); ++i) {
        const int cls = pred.classes[sp.labels[i]];
        if (cls > 0) masks[cls - 1].data[i] = 1;
    }
    return masks;
}

AttributePrediction prune_sparse_positives(const AttributePrediction& pred, int min_count) {
    if (min_count < 0) throw Error("prune_sparse_positives: min_count must be >= 0");
    std::array<int, kNumAttributeClasses> counts{};
    for (int c : pred.classes) {
        if (c < 0 || c >= kNumAttributeClasses)
            throw Error("prune_sparse_positives: class index out of range");
        ++counts[c];
    }
    AttributePrediction out = pred;
    for (auto& c : out.classes)
        if (c > 0 && counts[c] < min_count) c = 0;
    return out;
}

std::string attribute_mask_filename(const std::string& image_id, int cls) {
    if (cls < 1 || cls >= kNumAttributeClasses)
        throw Error("attribute_mask_filename: class must be 1..5");
    return image_id + "_attribute_" + kAttributeClassNames[cls] + ".png";
}

}  // namespace derm
