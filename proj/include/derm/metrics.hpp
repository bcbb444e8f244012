#pragma once

#include <cstdint>
#include <vector>

#include "derm/image.hpp"

namespace derm {

using PredictionVector = std::vector<double>;

constexpr double kMetricEps = 1e-7;  // log/denominator clamping everywhere

// Rows = true class, columns = predicted. Mergeable by elementwise add.
struct ConfusionMatrix {
    int num_classes = 0;
    std::vector<std::int64_t> counts;  // num_classes * num_classes

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c) : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::int64_t& at(int true_c, int pred_c) {
        return counts[static_cast<std::size_t>(true_c) * num_classes + pred_c];
    }
    std::int64_t at(int true_c, int pred_c) const {
        return counts[static_cast<std::size_t>(true_c) * num_classes + pred_c];
    }
    void add(int true_c, int pred_c) { ++at(true_c, pred_c); }
    void merge(const ConfusionMatrix& other);
};

struct ClassWeights {
    std::vector<double> w;  // w >= 1, w == 1 for the most frequent class
};

// |a∩b| / |a∪b|; 1.0 when both masks are empty.
double jaccard(const BinaryMask& a, const BinaryMask& b);

// jaccard(a,b) if >= tau, else 0. tau in [0,1].
double threshold_jaccard(const BinaryMask& a, const BinaryMask& b, double tau);

// mean BCE - jaccard_weight * log(softJ + eps) with p clamped to [eps, 1-eps]
// and softJ = sum(p*g) / (sum(p) + sum(g) - sum(p*g) + eps).
double bce_soft_jaccard_loss(const ProbMask& p, const BinaryMask& g, double jaccard_weight,
                             double eps = kMetricEps);

// w_c = max_k(count_k) / count_c. All counts must be >= 1.
ClassWeights class_weights(const std::vector<std::int64_t>& counts);

// (1/N) * sum_i w[y_i] * -log(p_i[y_i]), probabilities clamped by eps.
double weighted_cross_entropy(const std::vector<PredictionVector>& probs,
                              const std::vector<int>& labels, const ClassWeights& w,
                              double eps = kMetricEps);

// Mean over classes of diagonal / row sum. Every row sum must be > 0.
double balanced_accuracy(const ConfusionMatrix& cm);

// Task-2 score: per attribute class, Jaccard over pixels pooled across the
// image set; averaged over the 5 classes. per_image=true instead averages
// per-image-per-class Jaccards.
double attribute_score(const std::vector<std::vector<BinaryMask>>& pred_masks,
                       const std::vector<std::vector<BinaryMask>>& gt_masks,
                       bool per_image = false);

}  // namespace derm
