#include "derm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "derm/error.hpp"

namespace derm {

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.num_classes != num_classes) throw Error("confusion matrix merge: class mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

namespace {

void check_same_shape(int aw, int ah, int bw, int bh, const char* what) {
    if (aw != bw || ah != bh) throw Error(std::string(what) + ": shape mismatch");
}

double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }

}  // namespace

double jaccard(const BinaryMask& a, const BinaryMask& b) {
    check_same_shape(a.width, a.height, b.width, b.height, "jaccard");
    std::int64_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        inter += a.data[i] & b.data[i];
        uni += a.data[i] | b.data[i];
    }
    if (uni == 0) return 1.0;  // empty vs empty
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double threshold_jaccard(const BinaryMask& a, const BinaryMask& b, double tau) {
    if (tau < 0.0 || tau > 1.0) throw Error("threshold_jaccard: tau must be in [0,1]");
    const double j = jaccard(a, b);
    return j >= tau ? j : 0.0;
}

double bce_soft_jaccard_loss(const ProbMask& p, const BinaryMask& g, double jaccard_weight,
                             double eps) {
    check_same_shape(p.width, p.height, g.width, g.height, "bce_soft_jaccard_loss");
    const std::size_t n = p.data.size();
    if (n == 0) throw Error("bce_soft_jaccard_loss: empty mask");
    double bce = 0.0, sum_p = 0.0, sum_g = 0.0, sum_pg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = clamp_prob(p.data[i], eps);
        const double gi = g.data[i];
        bce -= gi * std::log(pi) + (1.0 - gi) * std::log(1.0 - pi);
        sum_p += pi;
        sum_g += gi;
        sum_pg += pi * gi;
    }
    bce /= static_cast<double>(n);
    const double soft_j = sum_pg / (sum_p + sum_g - sum_pg + eps);
    return bce - jaccard_weight * std::log(soft_j + eps);
}

ClassWeights class_weights(const std::vector<std::int64_t>& counts) {
    if (counts.empty()) throw Error("class_weights: no classes");
    std::int64_t max_count = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < 1)
            throw Error("class_weights: class " + std::to_string(c) +
                        " has zero count; merge or drop it explicitly");
        max_count = std::max(max_count, counts[c]);
    }
    ClassWeights w;
    for (auto c : counts) w.w.push_back(static_cast<double>(max_count) / static_cast<double>(c));
    return w;
}

double weighted_cross_entropy(const std::vector<PredictionVector>& probs,
                              const std::vector<int>& labels, const ClassWeights& w, double eps) {
    if (probs.size() != labels.size()) throw Error("weighted_cross_entropy: batch size mismatch");
    if (probs.empty()) throw Error("weighted_cross_entropy: empty batch");
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= static_cast<int>(probs[i].size()) ||
            y >= static_cast<int>(w.w.size()))
            throw Error("weighted_cross_entropy: label out of range: " + std::to_string(y));
        total += w.w[y] * -std::log(clamp_prob(probs[i][y], eps));
    }
    return total / static_cast<double>(probs.size());
}

double balanced_accuracy(const ConfusionMatrix& cm) {
    if (cm.num_classes == 0) throw Error("balanced_accuracy: empty matrix");
    double sum = 0.0;
    for (int c = 0; c < cm.num_classes; ++c) {
        std::int64_t row = 0;
        for (int k = 0; k < cm.num_classes; ++k) row += cm.at(c, k);
        if (row == 0)
            throw Error("balanced_accuracy: class " + std::to_string(c) + " has no samples");
        sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
    }
    return sum / cm.num_classes;
}

double attribute_score(const std::vector<std::vector<BinaryMask>>& pred_masks,
                       const std::vector<std::vector<BinaryMask>>& gt_masks, bool per_image) {
    if (pred_masks.size() != gt_masks.size())
        throw Error("attribute_score: image sets not aligned");
    if (pred_masks.empty()) throw Error("attribute_score: empty image set");
    std::size_t num_attrs = gt_masks[0].size();
    double total = 0.0;
    for (std::size_t c = 0; c < num_attrs; ++c) {
        if (per_image) {
            double img_sum = 0.0;
            for (std::size_t i = 0; i < pred_masks.size(); ++i)
                img_sum += jaccard(pred_masks[i][c], gt_masks[i][c]);
            total += img_sum / static_cast<double>(pred_masks.size());
        } else {
            std::int64_t inter = 0, uni = 0;
            for (std::size_t i = 0; i < pred_masks.size(); ++i) {
                const auto& a = pred_masks[i][c];
                const auto& b = gt_masks[i][c];
                check_same_shape(a.width, a.height, b.width, b.height, "attribute_score");
                for (std::size_t k = 0; k < a.data.size(); ++k) {
                    inter += a.data[k] & b.data[k];
                    uni += a.data[k] | b.data[k];
                }
            }
            total += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
        }
    }
    return total / static_cast<double>(num_attrs);
}

}  // namespace derm
