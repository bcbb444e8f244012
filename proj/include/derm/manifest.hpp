#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace derm {

constexpr int kUnlabeled = -1;

struct ImageRecord {
    std::string image_id;
    std::string path;
    int label = kUnlabeled;  // class index, kUnlabeled when absent
    std::string group_id;    // lesion/case identity for contamination control
    int width = 0;           // optional, filled on image load
    int height = 0;
};

struct Manifest {
    std::vector<ImageRecord> records;
    std::vector<std::string> label_names;  // configured label set; index = class

    int num_classes() const { return static_cast<int>(label_names.size()); }
    const ImageRecord* find(const std::string& image_id) const;
};

// Role of one image in one split: "holdout", or "train_k"/"val_k" per fold.
struct SplitRole {
    enum class Kind { holdout, train, val };
    Kind kind = Kind::holdout;
    int fold = 0;  // 1-based, unused for holdout

    static SplitRole parse(const std::string& text);
    std::string str() const;
    bool operator==(const SplitRole&) const = default;
};

// Group-atomic holdout/pool split plus n independent validation draws over
// the pool. train_k is pool minus val_k.
struct SplitAssignment {
    std::uint64_t seed = 0;
    int n_folds = 0;
    double achieved_holdout_frac = 0.0;
    std::vector<double> achieved_val_frac;      // per fold
    std::set<std::string> holdout;
    std::set<std::string> pool;
    std::vector<std::set<std::string>> fold_val;  // val_k, k = index + 1

    bool in_train(int fold, const std::string& id) const {
        return pool.count(id) && !fold_val[fold - 1].count(id);
    }
    std::set<std::string> members(const SplitRole& role) const;
};

struct BatchPlan {
    int batch_size = 0;
    int batches_per_epoch = 0;
    // batches[b] = sequence of (image_id, label)
    std::vector<std::vector<std::pair<std::string, int>>> batches;
};

struct ClassStats {
    std::vector<std::int64_t> counts;  // per class
    std::vector<double> frequencies;   // counts / labeled total, 0 when empty
    std::int64_t total = 0;            // labeled images in the split
};

// CSV manifest loader. Header must be exactly `image_id,path,label,group_id`;
// empty label field = unlabeled. Duplicate ids and labels outside
// `label_names` are errors.
Manifest load_manifest(const std::string& path, const std::vector<std::string>& label_names);
void save_manifest(const std::string& path, const Manifest& m);

// Shuffles groups by seed and greedily fills the holdout, then each fold's
// validation set, until the target image count is reached. Never splits a
// group. Folds are drawn independently, not as cross-validation partitions.
SplitAssignment make_splits(const Manifest& m, std::uint64_t seed, double holdout_frac,
                            int n_folds, double val_frac);

// Split file round-trip: `image_id,role` rows preceded by `# seed=<n>` and
// `# achieved_holdout_frac=<f>` comment lines.
void save_splits(const std::string& path, const SplitAssignment& s);
SplitAssignment load_splits(const std::string& path);

// Per-class counts over the labeled images of one split role.
ClassStats class_stats(const Manifest& m, const SplitAssignment& s, const SplitRole& role);

// Round-robin over classes, uniform with replacement within class. Each batch
// has exactly batch_size entries and per-class counts differing by at most 1.
BatchPlan balanced_batches(const Manifest& m, const SplitAssignment& s, const SplitRole& role,
                           int batch_size, int batches_per_epoch, std::uint64_t seed);

}  // namespace derm
