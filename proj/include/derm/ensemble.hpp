#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "derm/image.hpp"
#include "derm/metrics.hpp"

namespace derm {

// Per-image stacked features: one probability block of length num_classes per
// model, concatenated in ascending model_id order.
struct ModelOutputRow {
    std::string image_id;
    int label = -1;  // -1 when unknown
    std::vector<double> features;
};

struct ModelOutputMatrix {
    std::vector<std::string> model_ids;  // sorted; block m covers columns [m*C, (m+1)*C)
    int num_classes = 0;
    std::vector<ModelOutputRow> rows;
};

// Axis-aligned regression tree with exact greedy splits.
struct StackerTreeNode {
    int feature = -1;         // -1 for leaves
    double threshold = 0.0;   // go left if value <= threshold
    double leaf_value = 0.0;
    int left = -1;
    int right = -1;
};

struct StackerTree {
    std::vector<StackerTreeNode> nodes;  // node 0 is the root
    double eval(const std::vector<double>& row) const;
};

// Gradient-boosted softmax classifier over stacked model probabilities:
// per round, one regression tree per class fit to the residual
// y_onehot - p, leaf values Newton steps clipped to +-4.
struct StackerModel {
    int num_classes = 0;
    int num_features = 0;
    double shrinkage = 0.1;
    std::uint64_t seed = 0;
    std::vector<double> base_probs;             // empirical class priors
    std::vector<std::vector<StackerTree>> rounds;  // rounds[r][c]

    // log(max(prior, eps)); the boosting start point.
    std::vector<double> base_scores() const;
};

struct StackerConfig {
    int rounds = 100;
    int depth = 3;
    double shrinkage = 0.1;
    std::uint64_t seed = 0;
};

// Per-class arithmetic mean across models.
PredictionVector mean_ensemble_probs(const std::vector<PredictionVector>& rows);

// Pixelwise mean of probability masks.
ProbMask mean_ensemble_masks(const std::vector<ProbMask>& masks);

// Ids of the k highest-scoring models; ties break lexicographically by id.
std::vector<std::string> select_top_models(const std::map<std::string, double>& holdout_scores,
                                           int k);

// Deterministic exact-greedy boosting; rounds = 0 yields class log-priors.
StackerModel fit_stacker(const ModelOutputMatrix& train, const StackerConfig& cfg);

// Softmax over accumulated per-class scores.
PredictionVector predict_stacker(const StackerModel& m, const std::vector<double>& row);

// Training-set softmax cross-entropy under the model (used by the
// non-increasing-loss property).
double stacker_train_loss(const StackerModel& m, const ModelOutputMatrix& data);

// Versioned JSON round-trip.
std::string stacker_to_json(const StackerModel& m);
StackerModel stacker_from_json(const std::string& text);

// Exchange CSV `image_id,model_id,p_0,...,p_{C-1}`; assembled with models in
// ascending id order. Labels, when given, come from the map (image_id ->
// class).
void save_model_outputs(const std::string& path,
                        const std::vector<std::tuple<std::string, std::string, PredictionVector>>&
                            rows);
ModelOutputMatrix load_model_outputs(const std::string& path, int num_classes,
                                     const std::map<std::string, int>& labels = {});

}  // namespace derm
