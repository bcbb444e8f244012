// Independent brute-force oracles for the metric and image operations.
// Everything here is deliberately written as plain scalar loops or fixpoint
// sweeps, sharing no code path with the library implementations it checks.
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "derm/image.hpp"

namespace oracle {

// Set Jaccard by explicit pixel counting.
inline double jaccard(const derm::BinaryMask& a, const derm::BinaryMask& b) {
    long long inter = 0, uni = 0;
    for (int y = 0; y < a.height; ++y) {
        for (int x = 0; x < a.width; ++x) {
            const bool av = a.at(y, x) != 0, bv = b.at(y, x) != 0;
            if (av && bv) ++inter;
            if (av || bv) ++uni;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

inline double threshold_jaccard(const derm::BinaryMask& a, const derm::BinaryMask& b,
                                double tau) {
    const double j = jaccard(a, b);
    return j >= tau ? j : 0.0;
}

// BCE + soft Jaccard via a scalar loop.
inline double bce_soft_jaccard(const derm::ProbMask& p, const derm::BinaryMask& g,
                               double jaccard_weight, double eps) {
    double bce = 0.0;
    double sp = 0.0, sg = 0.0, spg = 0.0;
    const std::size_t n = p.data.size();
    for (std::size_t i = 0; i < n; ++i) {
        double pi = p.data[i];
        if (pi < eps) pi = eps;
        if (pi > 1.0 - eps) pi = 1.0 - eps;
        const double gi = g.data[i] ? 1.0 : 0.0;
        bce += -(gi * std::log(pi) + (1.0 - gi) * std::log(1.0 - pi));
        sp += pi;
        sg += gi;
        spg += pi * gi;
    }
    bce /= static_cast<double>(n);
    const double soft = spg / (sp + sg - spg + eps);
    return bce - jaccard_weight * std::log(soft + eps);
}

inline double weighted_ce(const std::vector<std::vector<double>>& probs,
                          const std::vector<int>& labels, const std::vector<double>& w,
                          double eps) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        double p = probs[i][labels[i]];
        if (p < eps) p = eps;
        if (p > 1.0 - eps) p = 1.0 - eps;
        total += w[labels[i]] * -std::log(p);
    }
    return total / static_cast<double>(probs.size());
}

inline double balanced_accuracy(const std::vector<std::vector<long long>>& cm) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cm.size(); ++c) {
        long long row = 0;
        for (long long v : cm[c]) row += v;
        acc += static_cast<double>(cm[c][c]) / static_cast<double>(row);
    }
    return acc / static_cast<double>(cm.size());
}

// Pixel-pooled attribute Jaccard over an image set.
inline double attribute_score(const std::vector<std::vector<derm::BinaryMask>>& pred,
                              const std::vector<std::vector<derm::BinaryMask>>& gt) {
    double total = 0.0;
    const std::size_t classes = gt[0].size();
    for (std::size_t c = 0; c < classes; ++c) {
        long long inter = 0, uni = 0;
        for (std::size_t i = 0; i < gt.size(); ++i) {
            for (int y = 0; y < gt[i][c].height; ++y) {
                for (int x = 0; x < gt[i][c].width; ++x) {
                    const bool pv = pred[i][c].at(y, x) != 0, gv = gt[i][c].at(y, x) != 0;
                    if (pv && gv) ++inter;
                    if (pv || gv) ++uni;
                }
            }
        }
        total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    return total / static_cast<double>(classes);
}

// Hole filling by fixpoint propagation of "outside" from the border, a
// different algorithm family than the library's stack-based flood fill.
inline derm::BinaryMask fill_holes(const derm::BinaryMask& m) {
    const int w = m.width, h = m.height;
    std::vector<std::uint8_t> outside(m.data.size(), 0);
    auto is_border_zero = [&](int y, int x) {
        return m.at(y, x) == 0 && (y == 0 || y == h - 1 || x == 0 || x == w - 1);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (is_border_zero(y, x)) outside[static_cast<std::size_t>(y) * w + x] = 1;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (outside[i] || m.data[i] != 0) continue;
                const bool touch = (y > 0 && outside[i - w]) || (y < h - 1 && outside[i + w]) ||
                                   (x > 0 && outside[i - 1]) || (x < w - 1 && outside[i + 1]);
                if (touch) {
                    outside[i] = 1;
                    changed = true;
                }
            }
        }
    }
    derm::BinaryMask out = m;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        if (out.data[i] == 0 && !outside[i]) out.data[i] = 1;
    return out;
}

// Reference bilinear interpolation at half-pixel centers, evaluated per
// output pixel straight from the definition.
inline float bilinear_at(const std::vector<float>& src, int sw, int sh, double x, double y) {
    if (x < 0) x = 0;
    if (y < 0) y = 0;
    if (x > sw - 1) x = sw - 1;
    if (y > sh - 1) y = sh - 1;
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = x0 + 1 < sw ? x0 + 1 : sw - 1;
    const int y1 = y0 + 1 < sh ? y0 + 1 : sh - 1;
    const double fx = x - x0, fy = y - y0;
    const double top = src[y0 * sw + x0] * (1 - fx) + src[y0 * sw + x1] * fx;
    const double bot = src[y1 * sw + x0] * (1 - fx) + src[y1 * sw + x1] * fx;
    return static_cast<float>(top * (1 - fy) + bot * fy);
}

}  // namespace oracle
