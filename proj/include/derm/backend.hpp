#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "derm/image.hpp"
#include "derm/metrics.hpp"
#include "derm/trainsched.hpp"

namespace derm {

// 30 dims: per channel mean, std, and an 8-bin histogram (bins [i/8,(i+1)/8),
// last bin closed), normalized by pixel count.
constexpr int kColorFeatureDim = 30;
std::vector<double> extract_color_features(const RasterImage& img);

// The pluggable predictor boundary. file_import bridges to models trained
// elsewhere; the built-in kinds make desk-scale end-to-end runs possible.
struct PredictorSpec {
    enum class Kind { file_import, constant, color_threshold_segmenter, linear_softmax };
    Kind kind = Kind::constant;
    std::string checkpoint_tag;

    // constant
    PredictionVector constant_probs;
    // color_threshold_segmenter: sigmoid((threshold - luminance) / softness)
    double threshold = 0.5;
    double softness = 0.1;
    // linear_softmax: row-major C x (kColorFeatureDim + 1), bias last
    int num_classes = 0;
    std::vector<double> weights;
    // file_import
    std::string import_path;                       // CSV of class predictions
    std::map<std::string, PredictionVector> table; // loaded rows
    std::string mask_dir;                          // 16-bit PNG masks per image_id

    void validate() const;
};

// Simplex vector of length C; deterministic in (spec, image). file_import
// looks the image up by id and errors when missing.
PredictionVector predict_class(const PredictorSpec& p, const RasterImage& img,
                               const std::string& image_id = "");

// ProbMask at image resolution.
ProbMask predict_mask(const PredictorSpec& p, const RasterImage& img,
                      const std::string& image_id = "");

struct LinearSoftmaxConfig {
    PlateauConfig plateau;     // schedule on the validation loss
    double momentum = 0.9;
    int max_epochs = 200;
    int early_stop_patience = 22;
};

// Multinomial logistic regression on color features, trained full-batch by
// gradient descent with momentum under the plateau schedule and weighted
// cross-entropy. Returns the spec checkpointed at the best validation epoch.
// max_epochs = 0 returns zero weights (uniform predictions).
PredictorSpec train_linear_softmax(const std::vector<std::vector<double>>& train_features,
                                   const std::vector<int>& train_labels,
                                   const std::vector<std::vector<double>>& val_features,
                                   const std::vector<int>& val_labels, int num_classes,
                                   const ClassWeights& weights, const LinearSoftmaxConfig& cfg,
                                   TrainingLog* log_out = nullptr);

// Spec JSON round-trip. Loading a file_import spec reads its CSV table.
std::string predictor_to_json(const PredictorSpec& p);
PredictorSpec predictor_from_json(const std::string& text);
void save_predictor(const std::string& path, const PredictorSpec& p);
PredictorSpec load_predictor(const std::string& path);

// Prediction import CSV (`image_id,model_id,p_0..`) filtered to one model id;
// empty model_id takes every row.
std::map<std::string, PredictionVector> load_prediction_table(const std::string& path,
                                                              int num_classes,
                                                              const std::string& model_id = "");

}  // namespace derm
