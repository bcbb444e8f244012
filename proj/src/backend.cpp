#include "derm/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "derm/csv.hpp"
#include "derm/error.hpp"
#include "derm/png_io.hpp"

namespace derm {

using nlohmann::json;

std::vector<double> extract_color_features(const RasterImage& img) {
    if (img.pixel_count() == 0) throw Error("extract_color_features: empty image");
    std::vector<double> feat;
    feat.reserve(kColorFeatureDim);
    const std::size_t n = img.pixel_count();
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0, sum_sq = 0.0;
        std::array<double, 8> hist{};
        for (std::size_t i = 0; i < n; ++i) {
            const double v = img.data[i * 3 + c];
            sum += v;
            sum_sq += v * v;
            const int bin = std::min(7, static_cast<int>(v * 8.0));
            hist[bin] += 1.0;
        }
        const double mean = sum / static_cast<double>(n);
        const double var = std::max(0.0, sum_sq / static_cast<double>(n) - mean * mean);
        feat.push_back(mean);
        feat.push_back(std::sqrt(var));
        for (double b : hist) feat.push_back(b / static_cast<double>(n));
    }
    return feat;
}

void PredictorSpec::validate() const {
    switch (kind) {
        case Kind::constant: {
            if (constant_probs.empty()) throw Error("constant predictor needs probabilities");
            double sum = 0.0;
            for (double v : constant_probs) {
                if (v < 0.0) throw Error("constant predictor probabilities must be >= 0");
                sum += v;
            }
            if (std::fabs(sum - 1.0) > 1e-6)
                throw Error("constant predictor probabilities must sum to 1");
            break;
        }
        case Kind::color_threshold_segmenter:
            if (!(softness > 0.0)) throw Error("segmenter softness must be > 0");
            break;
        case Kind::linear_softmax:
            if (num_classes < 2) throw Error("linear_softmax needs >= 2 classes");
            if (weights.size() !=
                static_cast<std::size_t>(num_classes) * (kColorFeatureDim + 1))
                throw Error("linear_softmax weight matrix has wrong shape");
            break;
        case Kind::file_import:
            if (table.empty() && import_path.empty() && mask_dir.empty())
                throw Error("file_import predictor needs a prediction table or mask directory");
            break;
    }
}

namespace {

PredictionVector linear_softmax_eval(const PredictorSpec& p, const std::vector<double>& feat) {
    const int c_count = p.num_classes;
    std::vector<double> z(c_count, 0.0);
    for (int c = 0; c < c_count; ++c) {
        const double* row = &p.weights[static_cast<std::size_t>(c) * (kColorFeatureDim + 1)];
        double acc = row[kColorFeatureDim];  // bias
        for (int f = 0; f < kColorFeatureDim; ++f) acc += row[f] * feat[f];
        z[c] = acc;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (auto& v : z) v /= sum;
    return z;
}

}  // namespace

PredictionVector predict_class(const PredictorSpec& p, const RasterImage& img,
                               const std::string& image_id) {
    p.validate();
    switch (p.kind) {
        case PredictorSpec::Kind::constant: return p.constant_probs;
        case PredictorSpec::Kind::linear_softmax:
            return linear_softmax_eval(p, extract_color_features(img));
        case PredictorSpec::Kind::file_import: {
            auto it = p.table.find(image_id);
            if (it == p.table.end())
                throw Error("file_import has no prediction for image \"" + image_id + "\"");
            return it->second;
        }
        case PredictorSpec::Kind::color_threshold_segmenter:
            throw Error("color_threshold_segmenter is a mask predictor, not a classifier");
    }
    throw Error("predict_class: unreachable");
}

ProbMask predict_mask(const PredictorSpec& p, const RasterImage& img,
                      const std::string& image_id) {
    p.validate();
    if (p.kind == PredictorSpec::Kind::color_threshold_segmenter) {
        ProbMask out(img.width, img.height);
        for (std::size_t i = 0; i < img.pixel_count(); ++i) {
            const float lum =
                luminance(img.data[i * 3], img.data[i * 3 + 1], img.data[i * 3 + 2]);
            out.data[i] = static_cast<float>(
                1.0 / (1.0 + std::exp(-(p.threshold - lum) / p.softness)));
        }
        return out;
    }
    if (p.kind == PredictorSpec::Kind::file_import) {
        if (p.mask_dir.empty()) throw Error("file_import mask predictor needs mask_dir");
        if (image_id.empty()) throw Error("file_import mask predictor needs an image_id");
        return read_prob_png(p.mask_dir + "/" + image_id + ".png");
    }
    throw Error("predictor kind cannot produce masks");
}

PredictorSpec train_linear_softmax(const std::vector<std::vector<double>>& train_features,
                                   const std::vector<int>& train_labels,
                                   const std::vector<std::vector<double>>& val_features,
                                   const std::vector<int>& val_labels, int num_classes,
                                   const ClassWeights& weights, const LinearSoftmaxConfig& cfg,
                                   TrainingLog* log_out) {
    if (num_classes < 2) throw Error("train_linear_softmax: need >= 2 classes");
    if (train_features.size() != train_labels.size() ||
        val_features.size() != val_labels.size())
        throw Error("train_linear_softmax: feature/label size mismatch");
    if (train_features.empty()) throw Error("train_linear_softmax: empty training set");

    const int dim = kColorFeatureDim + 1;
    PredictorSpec spec;
    spec.kind = PredictorSpec::Kind::linear_softmax;
    spec.num_classes = num_classes;
    spec.weights.assign(static_cast<std::size_t>(num_classes) * dim, 0.0);
    if (cfg.max_epochs == 0) {
        spec.checkpoint_tag = "untrained";
        return spec;
    }

    struct Model : TrainableModel {
        const std::vector<std::vector<double>>& tx;
        const std::vector<int>& ty;
        const std::vector<std::vector<double>>& vx;
        const std::vector<int>& vy;
        const ClassWeights& w;
        int classes;
        double momentum;
        std::vector<double> weights, velocity, best_weights;

        Model(const std::vector<std::vector<double>>& tx_, const std::vector<int>& ty_,
              const std::vector<std::vector<double>>& vx_, const std::vector<int>& vy_,
              const ClassWeights& w_, int classes_, double momentum_)
            : tx(tx_), ty(ty_), vx(vx_), vy(vy_), w(w_), classes(classes_), momentum(momentum_) {
            weights.assign(static_cast<std::size_t>(classes) * (kColorFeatureDim + 1), 0.0);
            velocity.assign(weights.size(), 0.0);
            best_weights = weights;
        }

        std::vector<double> eval_probs(const std::vector<double>& feat) const {
            PredictorSpec tmp;
            tmp.kind = PredictorSpec::Kind::linear_softmax;
            tmp.num_classes = classes;
            tmp.weights = weights;
            return linear_softmax_eval(tmp, feat);
        }

        double loss_on(const std::vector<std::vector<double>>& xs,
                       const std::vector<int>& ys) const {
            std::vector<PredictionVector> probs;
            probs.reserve(xs.size());
            for (const auto& x : xs) probs.push_back(eval_probs(x));
            return weighted_cross_entropy(probs, ys, w);
        }

        double train_step(int, double lr) override {
            const int dim = kColorFeatureDim + 1;
            std::vector<double> grad(weights.size(), 0.0);
            double loss = 0.0;
            const double n = static_cast<double>(tx.size());
            for (std::size_t i = 0; i < tx.size(); ++i) {
                const auto p = eval_probs(tx[i]);
                const double wi = w.w[ty[i]];
                loss += wi * -std::log(std::max(p[ty[i]], kMetricEps));
                for (int c = 0; c < classes; ++c) {
                    const double delta = wi * (p[c] - (ty[i] == c ? 1.0 : 0.0)) / n;
                    double* g = &grad[static_cast<std::size_t>(c) * dim];
                    for (int f = 0; f < kColorFeatureDim; ++f) g[f] += delta * tx[i][f];
                    g[dim - 1] += delta;
                }
            }
            for (std::size_t k = 0; k < weights.size(); ++k) {
                velocity[k] = momentum * velocity[k] - lr * grad[k];
                weights[k] += velocity[k];
            }
            if (std::isnan(loss)) throw Error("train_linear_softmax: loss diverged to NaN");
            return loss / n;
        }

        double validate() override { return vy.empty() ? 0.0 : loss_on(vx, vy); }
        void checkpoint(const std::string&) override { best_weights = weights; }
    };

    Model model(train_features, train_labels, val_features, val_labels, weights, num_classes,
                cfg.momentum);
    EarlyStopState stop;
    stop.patience = cfg.early_stop_patience;
    TrainingLog log = run_training_loop(model, 1, cfg.plateau, stop, cfg.max_epochs);
    if (log_out) *log_out = log;

    spec.weights = model.best_weights;
    spec.checkpoint_tag = log.best_tag;
    return spec;
}

std::string predictor_to_json(const PredictorSpec& p) {
    json j;
    j["format"] = "predictor";
    j["version"] = 1;
    j["checkpoint_tag"] = p.checkpoint_tag;
    switch (p.kind) {
        case PredictorSpec::Kind::constant:
            j["kind"] = "constant";
            j["probs"] = p.constant_probs;
            break;
        case PredictorSpec::Kind::color_threshold_segmenter:
            j["kind"] = "color_threshold_segmenter";
            j["threshold"] = p.threshold;
            j["softness"] = p.softness;
            break;
        case PredictorSpec::Kind::linear_softmax:
            j["kind"] = "linear_softmax";
            j["num_classes"] = p.num_classes;
            j["weights"] = p.weights;
            break;
        case PredictorSpec::Kind::file_import:
            j["kind"] = "file_import";
            j["import_path"] = p.import_path;
            j["mask_dir"] = p.mask_dir;
            j["num_classes"] = p.num_classes;
            break;
    }
    return j.dump(2);
}

PredictorSpec predictor_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("format", "") != "predictor" || j.value("version", 0) != 1)
        throw Error("predictor_from_json: unsupported format/version");
    PredictorSpec p;
    p.checkpoint_tag = j.value("checkpoint_tag", "");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
        p.kind = PredictorSpec::Kind::constant;
        p.constant_probs = j.at("probs").get<PredictionVector>();
    } else if (kind == "color_threshold_segmenter") {
        p.kind = PredictorSpec::Kind::color_threshold_segmenter;
        p.threshold = j.at("threshold").get<double>();
        p.softness = j.at("softness").get<double>();
    } else if (kind == "linear_softmax") {
        p.kind = PredictorSpec::Kind::linear_softmax;
        p.num_classes = j.at("num_classes").get<int>();
        p.weights = j.at("weights").get<std::vector<double>>();
    } else if (kind == "file_import") {
        p.kind = PredictorSpec::Kind::file_import;
        p.import_path = j.value("import_path", "");
        p.mask_dir = j.value("mask_dir", "");
        p.num_classes = j.value("num_classes", 0);
        if (!p.import_path.empty())
            p.table = load_prediction_table(p.import_path, p.num_classes);
    } else {
        throw Error("predictor_from_json: unknown kind \"" + kind + "\"");
    }
    p.validate();
    return p;
}

void save_predictor(const std::string& path, const PredictorSpec& p) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write predictor: " + path);
    out << predictor_to_json(p) << '\n';
}

PredictorSpec load_predictor(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open predictor: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return predictor_from_json(ss.str());
}

std::map<std::string, PredictionVector> load_prediction_table(const std::string& path,
                                                              int num_classes,
                                                              const std::string& model_id) {
    CsvFile f = read_csv(path);
    if (f.header.size() != static_cast<std::size_t>(num_classes) + 2 ||
        f.header[0] != "image_id" || f.header[1] != "model_id")
        throw Error("prediction CSV must have header image_id,model_id,p_0..p_" +
                    std::to_string(num_classes - 1) + ": " + path);
    std::map<std::string, PredictionVector> table;
    for (const auto& row : f.rows) {
        if (!model_id.empty() && row[1] != model_id) continue;
        PredictionVector p;
        for (int c = 0; c < num_classes; ++c) p.push_back(std::stod(row[2 + c]));
        table[row[0]] = std::move(p);
    }
    return table;
}

}  // namespace derm
