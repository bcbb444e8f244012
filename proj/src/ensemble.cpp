#include "derm/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "derm/csv.hpp"
#include "derm/error.hpp"

namespace derm {

using nlohmann::json;

PredictionVector mean_ensemble_probs(const std::vector<PredictionVector>& rows) {
    if (rows.empty()) throw Error("mean_ensemble_probs: no models");
    const std::size_t c = rows[0].size();
    PredictionVector mean(c, 0.0);
    for (const auto& r : rows) {
        if (r.size() != c) throw Error("mean_ensemble_probs: class count mismatch");
        for (std::size_t i = 0; i < c; ++i) mean[i] += r[i];
    }
    for (auto& v : mean) v /= static_cast<double>(rows.size());
    return mean;
}

ProbMask mean_ensemble_masks(const std::vector<ProbMask>& masks) {
    if (masks.empty()) throw Error("mean_ensemble_masks: no masks");
    const int w = masks[0].width, h = masks[0].height;
    ProbMask mean(w, h, 0.f);
    for (const auto& m : masks) {
        if (m.width != w || m.height != h) throw Error("mean_ensemble_masks: shape mismatch");
        for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += m.data[i];
    }
    for (auto& v : mean.data) v /= static_cast<float>(masks.size());
    return mean;
}

std::vector<std::string> select_top_models(const std::map<std::string, double>& holdout_scores,
                                           int k) {
    if (k < 0 || k > static_cast<int>(holdout_scores.size()))
        throw Error("select_top_models: k out of range");
    std::vector<std::pair<std::string, double>> items(holdout_scores.begin(),
                                                      holdout_scores.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> out;
    for (int i = 0; i < k; ++i) out.push_back(items[i].first);
    return out;
}

std::vector<double> StackerModel::base_scores() const {
    std::vector<double> s;
    s.reserve(base_probs.size());
    for (double p : base_probs) s.push_back(std::log(std::max(p, kMetricEps)));
    return s;
}

double StackerTree::eval(const std::vector<double>& row) const {
    int i = 0;
    while (nodes[i].feature >= 0)
        i = row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
    return nodes[i].leaf_value;
}

namespace {

constexpr double kLeafClip = 4.0;
constexpr double kHessianEps = 1e-12;

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Exact greedy split: best SSE reduction of the residuals over all features
// and midpoint thresholds; ties keep the lowest feature index, then the
// lowest threshold (first encountered in ascending scan).
SplitChoice best_split(const ModelOutputMatrix& data, const std::vector<int>& idx,
                       const std::vector<double>& residual) {
    SplitChoice best;
    const int nf = static_cast<int>(data.rows[idx[0]].features.size());
    double total = 0.0, total_sq = 0.0;
    for (int i : idx) {
        total += residual[i];
        total_sq += residual[i] * residual[i];
    }
    const double n = static_cast<double>(idx.size());
    const double parent_sse = total_sq - total * total / n;

    std::vector<std::pair<double, double>> vals(idx.size());  // (feature value, residual)
    for (int f = 0; f < nf; ++f) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            vals[i] = {data.rows[idx[i]].features[f], residual[idx[i]]};
        std::sort(vals.begin(), vals.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double left_sum = 0.0, left_sq = 0.0;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            left_sum += vals[i].second;
            left_sq += vals[i].second * vals[i].second;
            if (vals[i].first == vals[i + 1].first) continue;
            const double nl = static_cast<double>(i + 1);
            const double nr = n - nl;
            const double right_sum = total - left_sum;
            const double right_sq = total_sq - left_sq;
            const double sse = (left_sq - left_sum * left_sum / nl) +
                               (right_sq - right_sum * right_sum / nr);
            const double gain = parent_sse - sse;
            if (gain > best.gain) {
                best.feature = f;
                best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
                best.gain = gain;
            }
        }
    }
    return best;
}

int build_tree(StackerTree& tree, const ModelOutputMatrix& data, std::vector<int> idx,
               const std::vector<double>& residual, const std::vector<double>& hessian,
               int depth_left) {
    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    SplitChoice split;
    if (depth_left > 0 && idx.size() >= 2) split = best_split(data, idx, residual);

    if (split.feature < 0 || split.gain <= 0.0) {
        double g = 0.0, hsum = 0.0;
        for (int i : idx) {
            g += residual[i];
            hsum += hessian[i];
        }
        tree.nodes[node_id].leaf_value = std::clamp(g / (hsum + kHessianEps), -kLeafClip, kLeafClip);
        return node_id;
    }

    std::vector<int> left, right;
    for (int i : idx) {
        (data.rows[i].features[split.feature] <= split.threshold ? left : right).push_back(i);
    }
    tree.nodes[node_id].feature = split.feature;
    tree.nodes[node_id].threshold = split.threshold;
    const int l = build_tree(tree, data, std::move(left), residual, hessian, depth_left - 1);
    tree.nodes[node_id].left = l;
    const int r = build_tree(tree, data, std::move(right), residual, hessian, depth_left - 1);
    tree.nodes[node_id].right = r;
    return node_id;
}

std::vector<double> softmax(const std::vector<double>& scores) {
    const double mx = *std::max_element(scores.begin(), scores.end());
    std::vector<double> p(scores.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < scores.size(); ++c) {
        p[c] = std::exp(scores[c] - mx);
        sum += p[c];
    }
    for (auto& v : p) v /= sum;
    return p;
}

}  // namespace

StackerModel fit_stacker(const ModelOutputMatrix& train, const StackerConfig& cfg) {
    if (train.rows.empty()) throw Error("fit_stacker: empty training set");
    if (cfg.rounds < 0) throw Error("fit_stacker: rounds must be >= 0");
    const int num_classes = train.num_classes;
    const int n = static_cast<int>(train.rows.size());

    std::vector<std::int64_t> counts(num_classes, 0);
    for (const auto& r : train.rows) {
        if (r.label < 0 || r.label >= num_classes)
            throw Error("fit_stacker: row without a valid label: " + r.image_id);
        ++counts[r.label];
    }
    if (std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) < 2)
        throw Error("fit_stacker: training set must contain at least 2 classes");

    StackerModel m;
    m.num_classes = num_classes;
    m.num_features = static_cast<int>(train.rows[0].features.size());
    m.shrinkage = cfg.shrinkage;
    m.seed = cfg.seed;
    for (int c = 0; c < num_classes; ++c)
        m.base_probs.push_back(static_cast<double>(counts[c]) / n);

    // scores[i][c] accumulated over rounds
    std::vector<std::vector<double>> scores(n, m.base_scores());
    std::vector<double> residual(n), hessian(n);
    std::vector<int> all_idx(n);
    std::iota(all_idx.begin(), all_idx.end(), 0);

    for (int round = 0; round < cfg.rounds; ++round) {
        std::vector<StackerTree> trees(num_classes);
        std::vector<std::vector<double>> probs(n);
        for (int i = 0; i < n; ++i) probs[i] = softmax(scores[i]);
        for (int c = 0; c < num_classes; ++c) {
            for (int i = 0; i < n; ++i) {
                const double p = probs[i][c];
                residual[i] = (train.rows[i].label == c ? 1.0 : 0.0) - p;
                hessian[i] = p * (1.0 - p);
            }
            build_tree(trees[c], train, all_idx, residual, hessian, cfg.depth);
            for (int i = 0; i < n; ++i)
                scores[i][c] += cfg.shrinkage * trees[c].eval(train.rows[i].features);
        }
        m.rounds.push_back(std::move(trees));
    }
    return m;
}

PredictionVector predict_stacker(const StackerModel& m, const std::vector<double>& row) {
    if (static_cast<int>(row.size()) != m.num_features)
        throw Error("predict_stacker: feature row has " + std::to_string(row.size()) +
                    " values, model expects " + std::to_string(m.num_features));
    if (m.rounds.empty()) return m.base_probs;  // softmax(log p) = p, kept bit-exact
    std::vector<double> scores = m.base_scores();
    for (const auto& trees : m.rounds)
        for (int c = 0; c < m.num_classes; ++c) scores[c] += m.shrinkage * trees[c].eval(row);
    return softmax(scores);
}

double stacker_train_loss(const StackerModel& m, const ModelOutputMatrix& data) {
    double loss = 0.0;
    for (const auto& r : data.rows) {
        const auto p = predict_stacker(m, r.features);
        loss -= std::log(std::max(p[r.label], kMetricEps));
    }
    return loss / static_cast<double>(data.rows.size());
}

std::string stacker_to_json(const StackerModel& m) {
    json j;
    j["format"] = "stacker";
    j["version"] = 1;
    j["num_classes"] = m.num_classes;
    j["num_features"] = m.num_features;
    j["shrinkage"] = m.shrinkage;
    j["seed"] = m.seed;
    j["base_probs"] = m.base_probs;
    json rounds = json::array();
    for (const auto& trees : m.rounds) {
        json round = json::array();
        for (const auto& t : trees) {
            json nodes = json::array();
            for (const auto& nd : t.nodes)
                nodes.push_back({{"f", nd.feature},
                                 {"t", nd.threshold},
                                 {"v", nd.leaf_value},
                                 {"l", nd.left},
                                 {"r", nd.right}});
            round.push_back(nodes);
        }
        rounds.push_back(round);
    }
    j["rounds"] = rounds;
    return j.dump();
}

StackerModel stacker_from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("format", "") != "stacker" || j.value("version", 0) != 1)
        throw Error("stacker_from_json: unsupported format/version");
    StackerModel m;
    m.num_classes = j.at("num_classes").get<int>();
    m.num_features = j.at("num_features").get<int>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.base_probs = j.at("base_probs").get<std::vector<double>>();
    for (const auto& round : j.at("rounds")) {
        std::vector<StackerTree> trees;
        for (const auto& tj : round) {
            StackerTree t;
            for (const auto& nj : tj)
                t.nodes.push_back({nj.at("f").get<int>(), nj.at("t").get<double>(),
                                   nj.at("v").get<double>(), nj.at("l").get<int>(),
                                   nj.at("r").get<int>()});
            trees.push_back(std::move(t));
        }
        m.rounds.push_back(std::move(trees));
    }
    return m;
}

void save_model_outputs(
    const std::string& path,
    const std::vector<std::tuple<std::string, std::string, PredictionVector>>& rows) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model outputs: " + path);
    out.precision(17);
    if (rows.empty()) throw Error("save_model_outputs: no rows");
    const std::size_t c = std::get<2>(rows[0]).size();
    out << "image_id,model_id";
    for (std::size_t i = 0; i < c; ++i) out << ",p_" << i;
    out << '\n';
    for (const auto& [image_id, model_id, p] : rows) {
        if (p.size() != c) throw Error("save_model_outputs: class count mismatch");
        out << image_id << ',' << model_id;
        for (double v : p) out << ',' << v;
        out << '\n';
    }
}

ModelOutputMatrix load_model_outputs(const std::string& path, int num_classes,
                                     const std::map<std::string, int>& labels) {
    CsvFile f = read_csv(path);
    if (f.header.size() != static_cast<std::size_t>(num_classes) + 2 ||
        f.header[0] != "image_id" || f.header[1] != "model_id")
        throw Error("model output CSV must have header image_id,model_id,p_0..p_" +
                    std::to_string(num_classes - 1) + ": " + path);

    std::set<std::string> model_set;
    std::map<std::string, std::map<std::string, PredictionVector>> by_image;
    for (const auto& row : f.rows) {
        if (row.size() != static_cast<std::size_t>(num_classes) + 2)
            throw Error("model output row with wrong field count in " + path);
        PredictionVector p;
        for (int c = 0; c < num_classes; ++c) p.push_back(std::stod(row[2 + c]));
        model_set.insert(row[1]);
        by_image[row[0]][row[1]] = std::move(p);
    }

    ModelOutputMatrix mat;
    mat.num_classes = num_classes;
    mat.model_ids.assign(model_set.begin(), model_set.end());
    for (auto& [image_id, per_model] : by_image) {
        ModelOutputRow r;
        r.image_id = image_id;
        if (auto it = labels.find(image_id); it != labels.end()) r.label = it->second;
        for (const auto& mid : mat.model_ids) {
            auto it = per_model.find(mid);
            if (it == per_model.end())
                throw Error("model " + mid + " has no prediction for image " + image_id);
            r.features.insert(r.features.end(), it->second.begin(), it->second.end());
        }
        mat.rows.push_back(std::move(r));
    }
    return mat;
}

}  // namespace derm
