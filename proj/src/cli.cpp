#include "derm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "derm/augment.hpp"
#include "derm/backend.hpp"
#include "derm/csv.hpp"
#include "derm/ensemble.hpp"
#include "derm/error.hpp"
#include "derm/imgops.hpp"
#include "derm/manifest.hpp"
#include "derm/metrics.hpp"
#include "derm/parallel.hpp"
#include "derm/png_io.hpp"
#include "derm/rng.hpp"
#include "derm/superpixel.hpp"
#include "derm/synthetic.hpp"
#include "derm/trainsched.hpp"

namespace derm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Hash of the expanded invocation; stamped into every artifact so runs can
// be audited for reproducibility.
std::string config_hash(const std::vector<std::string>& args) {
    std::string joined;
    for (const auto& a : args) {
        joined += a;
        joined.push_back('\x1f');
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(joined)));
    return buf;
}

struct RunContext {
    std::uint64_t seed = 0;
    std::string hash;

    void report(json j) const {
        j["seed"] = seed;
        j["config_hash"] = hash;
        std::cout << j.dump() << std::endl;
    }

    void write_run_report(const std::string& dir, const std::string& command,
                          json extra = {}) const {
        json j;
        j["command"] = command;
        j["seed"] = seed;
        j["config_hash"] = hash;
        if (!extra.is_null()) j["details"] = extra;
        std::ofstream out(fs::path(dir) / "run_report.json");
        out << j.dump(2) << '\n';
    }

    void write_json_artifact(const std::string& path, const std::string& body) const {
        json j = json::parse(body);
        j["seed"] = seed;
        j["config_hash"] = hash;
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path);
        out << j.dump(2) << '\n';
    }
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<std::string> png_ids_in(const std::string& dir) {
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".png") ids.push_back(e.path().stem().string());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

// Manifest records sorted by id; output order never depends on file order.
std::vector<ImageRecord> sorted_records(const Manifest& m) {
    std::vector<ImageRecord> recs = m.records;
    std::sort(recs.begin(), recs.end(),
              [](const ImageRecord& a, const ImageRecord& b) { return a.image_id < b.image_id; });
    return recs;
}

void write_prediction_csv(const std::string& path, const RunContext& ctx,
                          const std::vector<std::tuple<std::string, std::string,
                                                       PredictionVector>>& rows) {
    if (rows.empty()) throw Error("no prediction rows to write");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out.precision(17);
    out << "# seed=" << ctx.seed << "\n# config_hash=" << ctx.hash << '\n';
    out << "image_id,model_id";
    for (std::size_t i = 0; i < std::get<2>(rows[0]).size(); ++i) out << ",p_" << i;
    out << '\n';
    for (const auto& [id, mid, p] : rows) {
        out << id << ',' << mid;
        for (double v : p) out << ',' << v;
        out << '\n';
    }
}

AugmentSpec spec_from_options(int out_size, const std::string& spec_file) {
    AugmentSpec spec;
    if (!spec_file.empty()) {
        std::ifstream in(spec_file);
        if (!in) throw Error("cannot open augment spec: " + spec_file);
        std::stringstream ss;
        ss << in.rdbuf();
        spec = parse_augment_spec(ss.str());
    }
    spec.out_size = out_size;
    return spec;
}

// Every (image, model) row of a prediction CSV, for averaging.
std::vector<std::tuple<std::string, std::string, PredictionVector>> load_prediction_rows(
    const std::string& path, int num_classes) {
    CsvFile f = read_csv(path);
    if (f.header.size() != static_cast<std::size_t>(num_classes) + 2 ||
        f.header[0] != "image_id" || f.header[1] != "model_id")
        throw Error("prediction CSV must have header image_id,model_id,p_0..p_" +
                    std::to_string(num_classes - 1) + ": " + path);
    std::vector<std::tuple<std::string, std::string, PredictionVector>> rows;
    for (const auto& row : f.rows) {
        PredictionVector p;
        for (int c = 0; c < num_classes; ++c) p.push_back(std::stod(row[2 + c]));
        rows.emplace_back(row[0], row[1], std::move(p));
    }
    return rows;
}

std::map<std::string, int> manifest_labels(const Manifest& m) {
    std::map<std::string, int> labels;
    for (const auto& r : m.records)
        if (r.label != kUnlabeled) labels[r.image_id] = r.label;
    return labels;
}

}  // namespace

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"dermpipe: skin-lesion segmentation / attribute / diagnosis pipeline"};
    app.set_config("--config")->configurable(false);

    RunContext ctx;
    ctx.hash = config_hash(args);
    std::uint64_t seed = 0;
    double tau = 0.65;
    int min_count = 30;
    int replicas = 16;
    double threshold = 0.5;
    app.add_option("--seed", seed, "root RNG seed")->capture_default_str();
    app.add_option("--tau", tau, "threshold Jaccard cutoff")->capture_default_str();
    app.add_option("--min-count", min_count, "superpixel pruning threshold")
        ->capture_default_str();
    app.add_option("--replicas", replicas, "test-time augmentation replicas")
        ->capture_default_str();
    app.add_option("--threshold", threshold, "mask binarization threshold")
        ->capture_default_str();

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate the synthetic benchmark corpus");
    std::string synth_out;
    int synth_count = 200, synth_size = 96;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--count", synth_count)->capture_default_str();
    synth->add_option("--size", synth_size)->capture_default_str();

    // --- split ---
    auto* split = app.add_subcommand("split", "contamination-aware holdout/fold split");
    std::string split_manifest, split_labels, split_out;
    double holdout_frac = 0.1, val_frac = 0.1;
    int n_folds = 5;
    split->add_option("--manifest", split_manifest)->required();
    split->add_option("--labels", split_labels, "comma-separated label names")->required();
    split->add_option("--out", split_out)->required();
    split->add_option("--holdout-frac", holdout_frac)->capture_default_str();
    split->add_option("--folds", n_folds)->capture_default_str();
    split->add_option("--val-frac", val_frac)->capture_default_str();

    // --- stats ---
    auto* stats = app.add_subcommand("stats", "per-class counts for one split role");
    std::string stats_manifest, stats_labels, stats_splits, stats_role = "train_1";
    stats->add_option("--manifest", stats_manifest)->required();
    stats->add_option("--labels", stats_labels)->required();
    stats->add_option("--splits", stats_splits)->required();
    stats->add_option("--role", stats_role)->capture_default_str();

    // --- augment-preview ---
    auto* aprev = app.add_subcommand("augment-preview", "write augmented training samples");
    std::string aprev_image, aprev_out, aprev_spec;
    int aprev_n = 8, aprev_size = 224;
    aprev->add_option("--image", aprev_image)->required();
    aprev->add_option("--out", aprev_out)->required();
    aprev->add_option("--n", aprev_n)->capture_default_str();
    aprev->add_option("--out-size", aprev_size)->capture_default_str();
    aprev->add_option("--augment-spec", aprev_spec, "key=value spec file");

    // --- tta ---
    auto* tta = app.add_subcommand("tta", "write test-time augmentation replicas");
    std::string tta_image, tta_out, tta_mode = "full", tta_spec;
    int tta_size = 224;
    tta->add_option("--image", tta_image)->required();
    tta->add_option("--out", tta_out)->required();
    tta->add_option("--mode", tta_mode, "full | flips_color")->capture_default_str();
    tta->add_option("--out-size", tta_size)->capture_default_str();
    tta->add_option("--augment-spec", tta_spec);

    // --- train-baseline ---
    auto* train = app.add_subcommand("train-baseline", "train the linear softmax baseline");
    std::string tr_manifest, tr_labels, tr_images, tr_splits, tr_out, tr_log, tr_spec;
    int tr_fold = 1, tr_epochs = 200, tr_train_replicas = 0;
    train->add_option("--manifest", tr_manifest)->required();
    train->add_option("--labels", tr_labels)->required();
    train->add_option("--images-root", tr_images)->required();
    train->add_option("--splits", tr_splits)->required();
    train->add_option("--fold", tr_fold)->capture_default_str();
    train->add_option("--out", tr_out)->required();
    train->add_option("--log", tr_log, "training log CSV");
    train->add_option("--max-epochs", tr_epochs)->capture_default_str();
    train->add_option("--train-replicas", tr_train_replicas,
                      "augmented copies per training image")
        ->capture_default_str();
    train->add_option("--augment-spec", tr_spec);

    // --- predict ---
    auto* predict = app.add_subcommand("predict", "run a predictor over a split");
    std::string pr_model, pr_manifest, pr_labels, pr_images, pr_splits, pr_role, pr_out;
    std::string pr_mask_out, pr_model_id = "model", pr_tta_mode = "full", pr_spec;
    int pr_size = 96;
    bool pr_no_tta = false;
    predict->add_option("--model", pr_model)->required();
    predict->add_option("--manifest", pr_manifest)->required();
    predict->add_option("--labels", pr_labels)->required();
    predict->add_option("--images-root", pr_images)->required();
    predict->add_option("--splits", pr_splits, "restrict to a split role");
    predict->add_option("--role", pr_role);
    predict->add_option("--out", pr_out, "prediction CSV (classifier mode)");
    predict->add_option("--mask-out", pr_mask_out, "mask directory (segmenter mode)");
    predict->add_option("--model-id", pr_model_id)->capture_default_str();
    predict->add_option("--tta-mode", pr_tta_mode, "full | flips_color")->capture_default_str();
    predict->add_option("--out-size", pr_size, "replica size for TTA")->capture_default_str();
    predict->add_flag("--no-tta", pr_no_tta, "single identity pass");
    predict->add_option("--augment-spec", pr_spec);
    int pr_model_size = 0;
    predict->add_option("--model-size", pr_model_size,
                        "downscale input to this edge before mask prediction (0 = native)")
        ->capture_default_str();

    // --- ensemble ---
    auto* ens = app.add_subcommand("ensemble", "average predictions or masks");
    std::vector<std::string> ens_preds;
    std::string ens_out, ens_mask_dirs, ens_mask_out, ens_labelset;
    ens->add_option("--pred", ens_preds, "prediction CSV (repeatable)");
    ens->add_option("--out", ens_out, "output CSV");
    ens->add_option("--mask-dirs", ens_mask_dirs, "comma-separated prob mask dirs");
    ens->add_option("--mask-out", ens_mask_out);
    ens->add_option("--labels", ens_labelset, "label names (class count)");

    // --- stack ---
    auto* stack = app.add_subcommand("stack", "fit or apply the boosted-tree stacker");
    std::string st_pred, st_manifest, st_labels, st_model, st_out;
    int st_rounds = 100, st_depth = 3;
    double st_shrinkage = 0.1;
    bool st_fit = false;
    stack->add_flag("--fit", st_fit, "fit a stacker (otherwise predict)");
    stack->add_option("--pred", st_pred, "model output CSV")->required();
    stack->add_option("--manifest", st_manifest, "labels source (fit mode)");
    stack->add_option("--labels", st_labels)->required();
    stack->add_option("--model", st_model, "stacker JSON (predict mode)");
    stack->add_option("--out", st_out)->required();
    stack->add_option("--rounds", st_rounds)->capture_default_str();
    stack->add_option("--depth", st_depth)->capture_default_str();
    stack->add_option("--shrinkage", st_shrinkage)->capture_default_str();

    // --- postprocess-seg ---
    auto* post = app.add_subcommand("postprocess-seg",
                                    "average, binarize, fill holes, upsample");
    std::string po_pred_dirs, po_images, po_out, po_order = "late_upsample";
    post->add_option("--pred-dirs", po_pred_dirs, "comma-separated prob mask dirs")->required();
    post->add_option("--images-root", po_images, "originals (for output size)")->required();
    post->add_option("--out", po_out)->required();
    post->add_option("--order", po_order, "late_upsample | early_upsample")
        ->capture_default_str();

    // --- compose-attr ---
    auto* compose = app.add_subcommand("compose-attr",
                                       "superpixel classify, prune, compose masks");
    std::string co_manifest, co_labels, co_images, co_pred, co_model, co_out;
    int co_target_k = 150, co_iters = 10, co_patch = 33;
    double co_compactness = 10.0;
    compose->add_option("--manifest", co_manifest)->required();
    compose->add_option("--labels", co_labels)->required();
    compose->add_option("--images-root", co_images)->required();
    compose->add_option("--pred", co_pred, "per-patch prediction CSV (ids <image_id>#<region>)");
    compose->add_option("--model", co_model, "classifier spec for patches");
    compose->add_option("--out", co_out)->required();
    compose->add_option("--target-k", co_target_k)->capture_default_str();
    compose->add_option("--compactness", co_compactness)->capture_default_str();
    compose->add_option("--iters", co_iters)->capture_default_str();
    compose->add_option("--patch-size", co_patch)->capture_default_str();

    // --- eval-seg ---
    auto* eseg = app.add_subcommand("eval-seg", "segmentation Jaccard metrics");
    std::string es_pred, es_gt;
    eseg->add_option("--pred", es_pred)->required();
    eseg->add_option("--gt", es_gt)->required();

    // --- eval-attr ---
    auto* eattr = app.add_subcommand("eval-attr", "attribute Jaccard (pooled pixels)");
    std::string ea_pred, ea_gt;
    bool ea_per_image = false;
    eattr->add_option("--pred", ea_pred)->required();
    eattr->add_option("--gt", ea_gt)->required();
    eattr->add_flag("--per-image", ea_per_image);

    // --- eval-cls ---
    auto* ecls = app.add_subcommand("eval-cls", "balanced multi-class accuracy");
    std::string ec_pred, ec_manifest, ec_labels, ec_splits, ec_role;
    ecls->add_option("--pred", ec_pred)->required();
    ecls->add_option("--manifest", ec_manifest)->required();
    ecls->add_option("--labels", ec_labels)->required();
    ecls->add_option("--splits", ec_splits);
    ecls->add_option("--role", ec_role);

    app.require_subcommand(1);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    ctx.seed = seed;
    try {
        if (*synth) {
            SyntheticCorpusConfig cfg;
            cfg.count = synth_count;
            cfg.width = cfg.height = synth_size;
            cfg.seed = seed;
            const auto corpus = generate_corpus(cfg);
            write_corpus(synth_out, corpus);
            ctx.write_run_report(synth_out, "synth",
                                 {{"count", synth_count}, {"size", synth_size}});
            ctx.report({{"command", "synth"}, {"out", synth_out}, {"count", synth_count}});
        } else if (*split) {
            const Manifest m = load_manifest(split_manifest, split_list(split_labels));
            const SplitAssignment s = make_splits(m, seed, holdout_frac, n_folds, val_frac);
            save_splits(split_out, s);
            ctx.report({{"command", "split"},
                        {"out", split_out},
                        {"holdout", s.holdout.size()},
                        {"pool", s.pool.size()},
                        {"achieved_holdout_frac", s.achieved_holdout_frac}});
        } else if (*stats) {
            const Manifest m = load_manifest(stats_manifest, split_list(stats_labels));
            const SplitAssignment s = load_splits(stats_splits);
            const ClassStats st = class_stats(m, s, SplitRole::parse(stats_role));
            json counts = json::object(), freqs = json::object();
            for (int c = 0; c < m.num_classes(); ++c) {
                counts[m.label_names[c]] = st.counts[c];
                freqs[m.label_names[c]] = st.frequencies[c];
            }
            ctx.report({{"command", "stats"},
                        {"role", stats_role},
                        {"total", st.total},
                        {"counts", counts},
                        {"frequencies", freqs}});
        } else if (*aprev) {
            const RasterImage img = read_image_png(aprev_image);
            const AugmentSpec spec = spec_from_options(aprev_size, aprev_spec);
            fs::create_directories(aprev_out);
            for (int i = 0; i < aprev_n; ++i) {
                const auto a = sample_augmentation(spec, seed + static_cast<std::uint64_t>(i));
                char name[32];
                std::snprintf(name, sizeof(name), "aug_%03d.png", i);
                write_image_png((fs::path(aprev_out) / name).string(),
                                apply_augmentation(img, a));
            }
            ctx.write_run_report(aprev_out, "augment-preview", {{"n", aprev_n}});
            ctx.report({{"command", "augment-preview"}, {"out", aprev_out}, {"n", aprev_n}});
        } else if (*tta) {
            const RasterImage img = read_image_png(tta_image);
            const AugmentSpec spec = spec_from_options(tta_size, tta_spec);
            const TtaMode mode = tta_mode == "flips_color" ? TtaMode::flips_color_only
                                                           : TtaMode::full_scenario_j;
            const auto reps = make_tta_replicas(img, replicas, mode, spec, seed);
            fs::create_directories(tta_out);
            for (std::size_t i = 0; i < reps.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof(name), "replica_%03zu.png", i);
                write_image_png((fs::path(tta_out) / name).string(), reps[i]);
            }
            ctx.write_run_report(tta_out, "tta", {{"replicas", replicas}, {"mode", tta_mode}});
            ctx.report({{"command", "tta"}, {"out", tta_out}, {"replicas", replicas}});
        } else if (*train) {
            const Manifest m = load_manifest(tr_manifest, split_list(tr_labels));
            const SplitAssignment s = load_splits(tr_splits);
            const AugmentSpec spec = spec_from_options(96, tr_spec);
            const auto train_ids = s.members({SplitRole::Kind::train, tr_fold});
            const auto val_ids = s.members({SplitRole::Kind::val, tr_fold});

            std::vector<std::vector<double>> tx, vx;
            std::vector<int> ty, vy;
            for (const auto& r : sorted_records(m)) {
                if (r.label == kUnlabeled) continue;
                const bool in_train = train_ids.count(r.image_id) > 0;
                const bool in_val = val_ids.count(r.image_id) > 0;
                if (!in_train && !in_val) continue;
                const RasterImage img =
                    read_image_png((fs::path(tr_images) / r.path).string());
                if (in_train) {
                    tx.push_back(extract_color_features(img));
                    ty.push_back(r.label);
                    for (int i = 0; i < tr_train_replicas; ++i) {
                        const auto a = sample_augmentation(
                            spec, seed ^ (fnv1a(r.image_id) + static_cast<std::uint64_t>(i)));
                        tx.push_back(extract_color_features(apply_augmentation(img, a)));
                        ty.push_back(r.label);
                    }
                } else {
                    vx.push_back(extract_color_features(img));
                    vy.push_back(r.label);
                }
            }
            ClassStats st = class_stats(m, s, {SplitRole::Kind::train, tr_fold});
            const ClassWeights w = class_weights(st.counts);
            LinearSoftmaxConfig cfg;
            cfg.max_epochs = tr_epochs;
            cfg.plateau.start_lr = 1.0;  // color features are unit-scale
            cfg.plateau.floor_lr = 1e-3;
            TrainingLog log;
            const PredictorSpec model = train_linear_softmax(tx, ty, vx, vy, m.num_classes(),
                                                             w, cfg, &log);
            ctx.write_json_artifact(tr_out, predictor_to_json(model));
            if (!tr_log.empty()) save_training_log(tr_log, log);
            ctx.report({{"command", "train-baseline"},
                        {"out", tr_out},
                        {"epochs", log.epochs.size()},
                        {"best_epoch", log.best_epoch},
                        {"best_tag", log.best_tag}});
        } else if (*predict) {
            const Manifest m = load_manifest(pr_manifest, split_list(pr_labels));
            const PredictorSpec model = load_predictor(pr_model);
            std::set<std::string> keep;
            if (!pr_splits.empty() && !pr_role.empty())
                keep = load_splits(pr_splits).members(SplitRole::parse(pr_role));
            std::vector<ImageRecord> recs;
            for (const auto& r : sorted_records(m))
                if (keep.empty() || keep.count(r.image_id)) recs.push_back(r);

            if (!pr_mask_out.empty()) {
                fs::create_directories(pr_mask_out);
                parallel_for(recs.size(), [&](std::size_t i) {
                    const auto& r = recs[i];
                    RasterImage img = read_image_png((fs::path(pr_images) / r.path).string());
                    if (pr_model_size > 0)
                        img = resize(img, pr_model_size, pr_model_size, ResizeMode::bilinear);
                    const ProbMask mask = predict_mask(model, img, r.image_id);
                    write_prob_png((fs::path(pr_mask_out) / (r.image_id + ".png")).string(),
                                   mask);
                });
                ctx.write_run_report(pr_mask_out, "predict", {{"images", recs.size()}});
                ctx.report({{"command", "predict"},
                            {"mask_out", pr_mask_out},
                            {"images", recs.size()}});
            } else {
                if (pr_out.empty()) throw Error("predict: need --out or --mask-out");
                const AugmentSpec spec = spec_from_options(pr_size, pr_spec);
                const TtaMode mode = pr_tta_mode == "flips_color" ? TtaMode::flips_color_only
                                                                  : TtaMode::full_scenario_j;
                std::vector<std::tuple<std::string, std::string, PredictionVector>> rows(
                    recs.size());
                parallel_for(recs.size(), [&](std::size_t i) {
                    const auto& r = recs[i];
                    const RasterImage img =
                        read_image_png((fs::path(pr_images) / r.path).string());
                    PredictionVector p;
                    if (pr_no_tta || replicas == 1) {
                        p = predict_class(model, img, r.image_id);
                    } else {
                        const auto reps = make_tta_replicas(img, replicas, mode, spec,
                                                            seed + fnv1a(r.image_id));
                        std::vector<PredictionVector> preds;
                        preds.reserve(reps.size());
                        for (const auto& rep : reps)
                            preds.push_back(predict_class(model, rep, r.image_id));
                        p = average_replica_predictions(preds);
                    }
                    rows[i] = {r.image_id, pr_model_id, std::move(p)};
                });
                write_prediction_csv(pr_out, ctx, rows);
                ctx.report({{"command", "predict"}, {"out", pr_out}, {"images", recs.size()}});
            }
        } else if (*ens) {
            if (!ens_preds.empty()) {
                if (ens_out.empty() || ens_labelset.empty())
                    throw Error("ensemble: need --out and --labels with --pred");
                const int c = static_cast<int>(split_list(ens_labelset).size());
                std::map<std::string, std::vector<PredictionVector>> by_image;
                for (const auto& path : ens_preds) {
                    for (auto& [id, mid, p] : load_prediction_rows(path, c))
                        by_image[id].push_back(std::move(p));
                }
                std::vector<std::tuple<std::string, std::string, PredictionVector>> rows;
                for (const auto& [id, preds] : by_image)
                    rows.emplace_back(id, "ensemble", mean_ensemble_probs(preds));
                write_prediction_csv(ens_out, ctx, rows);
                ctx.report({{"command", "ensemble"},
                            {"out", ens_out},
                            {"models", ens_preds.size()},
                            {"images", rows.size()}});
            } else if (!ens_mask_dirs.empty()) {
                if (ens_mask_out.empty()) throw Error("ensemble: need --mask-out");
                const auto dirs = split_list(ens_mask_dirs);
                const auto ids = png_ids_in(dirs[0]);
                fs::create_directories(ens_mask_out);
                parallel_for(ids.size(), [&](std::size_t i) {
                    std::vector<ProbMask> masks;
                    for (const auto& d : dirs)
                        masks.push_back(read_prob_png((fs::path(d) / (ids[i] + ".png")).string()));
                    write_prob_png((fs::path(ens_mask_out) / (ids[i] + ".png")).string(),
                                   mean_ensemble_masks(masks));
                });
                ctx.write_run_report(ens_mask_out, "ensemble",
                                     {{"dirs", dirs.size()}, {"images", ids.size()}});
                ctx.report({{"command", "ensemble"},
                            {"mask_out", ens_mask_out},
                            {"images", ids.size()}});
            } else {
                throw Error("ensemble: need --pred or --mask-dirs");
            }
        } else if (*stack) {
            const auto label_names = split_list(st_labels);
            const int c = static_cast<int>(label_names.size());
            if (st_fit) {
                if (st_manifest.empty()) throw Error("stack --fit: need --manifest for labels");
                const Manifest m = load_manifest(st_manifest, label_names);
                const ModelOutputMatrix mat =
                    load_model_outputs(st_pred, c, manifest_labels(m));
                StackerConfig cfg;
                cfg.rounds = st_rounds;
                cfg.depth = st_depth;
                cfg.shrinkage = st_shrinkage;
                cfg.seed = seed;
                const StackerModel model = fit_stacker(mat, cfg);
                ctx.write_json_artifact(st_out, stacker_to_json(model));
                ctx.report({{"command", "stack"},
                            {"fit", true},
                            {"out", st_out},
                            {"rows", mat.rows.size()},
                            {"train_loss", stacker_train_loss(model, mat)}});
            } else {
                if (st_model.empty()) throw Error("stack: need --model to predict");
                std::ifstream in(st_model);
                if (!in) throw Error("cannot open stacker: " + st_model);
                std::stringstream ss;
                ss << in.rdbuf();
                const StackerModel model = stacker_from_json(ss.str());
                const ModelOutputMatrix mat = load_model_outputs(st_pred, c);
                std::vector<std::tuple<std::string, std::string, PredictionVector>> rows;
                for (const auto& r : mat.rows)
                    rows.emplace_back(r.image_id, "stacker", predict_stacker(model, r.features));
                write_prediction_csv(st_out, ctx, rows);
                ctx.report({{"command", "stack"},
                            {"fit", false},
                            {"out", st_out},
                            {"images", rows.size()}});
            }
        } else if (*post) {
            const auto dirs = split_list(po_pred_dirs);
            if (dirs.empty()) throw Error("postprocess-seg: no prediction dirs");
            if (po_order != "late_upsample" && po_order != "early_upsample")
                throw Error("postprocess-seg: unknown --order " + po_order);
            const auto ids = png_ids_in(dirs[0]);
            fs::create_directories(po_out);
            parallel_for(ids.size(), [&](std::size_t i) {
                std::vector<ProbMask> masks;
                for (const auto& d : dirs)
                    masks.push_back(read_prob_png((fs::path(d) / (ids[i] + ".png")).string()));
                const ProbMask mean = mean_ensemble_masks(masks);
                int ow = 0, oh = 0;
                read_png_size((fs::path(po_images) / (ids[i] + ".png")).string(), ow, oh);
                BinaryMask final_mask;
                if (po_order == "late_upsample") {
                    const BinaryMask filled = fill_holes(binarize(mean, threshold));
                    final_mask = resize(filled, ow, oh, ResizeMode::nearest);
                } else {
                    const ProbMask up = resize(mean, ow, oh, ResizeMode::bilinear);
                    final_mask = fill_holes(binarize(up, threshold));
                }
                write_mask_png((fs::path(po_out) / (ids[i] + ".png")).string(), final_mask);
            });
            ctx.write_run_report(po_out, "postprocess-seg",
                                 {{"order", po_order},
                                  {"threshold", threshold},
                                  {"images", ids.size()}});
            ctx.report({{"command", "postprocess-seg"},
                        {"out", po_out},
                        {"order", po_order},
                        {"images", ids.size()}});
        } else if (*compose) {
            const Manifest m = load_manifest(co_manifest, split_list(co_labels));
            if (co_pred.empty() == co_model.empty())
                throw Error("compose-attr: need exactly one of --pred or --model");
            std::map<std::string, PredictionVector> patch_table;
            PredictorSpec patch_model;
            if (!co_pred.empty()) {
                patch_table = load_prediction_table(co_pred, kNumAttributeClasses);
            } else {
                patch_model = load_predictor(co_model);
            }
            fs::create_directories(co_out);
            const auto recs = sorted_records(m);
            parallel_for(recs.size(), [&](std::size_t i) {
                const auto& r = recs[i];
                const RasterImage img = read_image_png((fs::path(co_images) / r.path).string());
                const SuperpixelMap sp = slic_segment(img, co_target_k, co_compactness, co_iters);
                std::vector<std::array<double, kNumAttributeClasses>> scores(sp.num_regions);
                for (int region = 0; region < sp.num_regions; ++region) {
                    PredictionVector p;
                    if (!co_pred.empty()) {
                        const std::string key =
                            r.image_id + "#" + std::to_string(region);
                        auto it = patch_table.find(key);
                        if (it == patch_table.end())
                            throw Error("compose-attr: no prediction for patch " + key);
                        p = it->second;
                    } else {
                        const RasterImage patch = extract_patch(img, sp, region, co_patch);
                        p = predict_class(patch_model, patch,
                                          r.image_id + "#" + std::to_string(region));
                    }
                    if (p.size() != kNumAttributeClasses)
                        throw Error("compose-attr: patch prediction must have 6 classes");
                    std::copy_n(p.begin(), kNumAttributeClasses, scores[region].begin());
                }
                const AttributePrediction pred = prune_sparse_positives(
                    attribute_prediction_from_scores(scores), min_count);
                const auto masks = compose_attribute_masks(sp, pred);
                for (int cls = 1; cls <= 5; ++cls)
                    write_mask_png(
                        (fs::path(co_out) / attribute_mask_filename(r.image_id, cls)).string(),
                        masks[cls - 1]);
            });
            ctx.write_run_report(co_out, "compose-attr",
                                 {{"min_count", min_count},
                                  {"target_k", co_target_k},
                                  {"images", recs.size()}});
            ctx.report({{"command", "compose-attr"},
                        {"out", co_out},
                        {"images", recs.size()},
                        {"min_count", min_count}});
        } else if (*eseg) {
            const auto ids = png_ids_in(es_gt);
            if (ids.empty()) throw Error("eval-seg: no ground-truth masks in " + es_gt);
            double sum_j = 0.0, sum_tj = 0.0;
            for (const auto& id : ids) {
                const BinaryMask pred =
                    read_mask_png((fs::path(es_pred) / (id + ".png")).string());
                const BinaryMask gt = read_mask_png((fs::path(es_gt) / (id + ".png")).string());
                sum_j += jaccard(pred, gt);
                sum_tj += threshold_jaccard(pred, gt, tau);
            }
            ctx.report({{"command", "eval-seg"},
                        {"metric", "threshold_jaccard"},
                        {"value", sum_tj / ids.size()},
                        {"mean_jaccard", sum_j / ids.size()},
                        {"n", ids.size()},
                        {"tau", tau}});
        } else if (*eattr) {
            std::set<std::string> id_set;
            for (const auto& e : fs::directory_iterator(ea_gt)) {
                const std::string stem = e.path().stem().string();
                const auto pos = stem.find("_attribute_");
                if (pos != std::string::npos) id_set.insert(stem.substr(0, pos));
            }
            if (id_set.empty()) throw Error("eval-attr: no attribute masks in " + ea_gt);
            std::vector<std::vector<BinaryMask>> pred, gt;
            for (const auto& id : id_set) {
                std::vector<BinaryMask> p, g;
                for (int cls = 1; cls <= 5; ++cls) {
                    p.push_back(read_mask_png(
                        (fs::path(ea_pred) / attribute_mask_filename(id, cls)).string()));
                    g.push_back(read_mask_png(
                        (fs::path(ea_gt) / attribute_mask_filename(id, cls)).string()));
                }
                pred.push_back(std::move(p));
                gt.push_back(std::move(g));
            }
            ctx.report({{"command", "eval-attr"},
                        {"metric", "attribute_jaccard"},
                        {"value", attribute_score(pred, gt, ea_per_image)},
                        {"n", id_set.size()},
                        {"per_image", ea_per_image}});
        } else if (*ecls) {
            const Manifest m = load_manifest(ec_manifest, split_list(ec_labels));
            std::set<std::string> keep;
            if (!ec_splits.empty() && !ec_role.empty())
                keep = load_splits(ec_splits).members(SplitRole::parse(ec_role));
            const auto table = load_prediction_table(ec_pred, m.num_classes());
            ConfusionMatrix cm(m.num_classes());
            std::size_t n = 0;
            for (const auto& r : m.records) {
                if (r.label == kUnlabeled) continue;
                if (!keep.empty() && !keep.count(r.image_id)) continue;
                auto it = table.find(r.image_id);
                if (it == table.end())
                    throw Error("eval-cls: no prediction for image " + r.image_id);
                const auto& p = it->second;
                const int pred_c = static_cast<int>(
                    std::max_element(p.begin(), p.end()) - p.begin());
                cm.add(r.label, pred_c);
                ++n;
            }
            ctx.report({{"command", "eval-cls"},
                        {"metric", "balanced_accuracy"},
                        {"value", balanced_accuracy(cm)},
                        {"n", n}});
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fatal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace derm
