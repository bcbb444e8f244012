#include "derm/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "derm/csv.hpp"
#include "derm/error.hpp"
#include "derm/rng.hpp"

namespace derm {

const ImageRecord* Manifest::find(const std::string& image_id) const {
    for (const auto& r : records)
        if (r.image_id == image_id) return &r;
    return nullptr;
}

SplitRole SplitRole::parse(const std::string& text) {
    if (text == "holdout") return {Kind::holdout, 0};
    auto parse_fold = [&](const std::string& prefix, Kind kind) -> std::optional<SplitRole> {
        if (text.rfind(prefix, 0) != 0) return std::nullopt;
        const std::string num = text.substr(prefix.size());
        if (num.empty() || num.find_first_not_of("0123456789") != std::string::npos)
            return std::nullopt;
        return SplitRole{kind, std::stoi(num)};
    };
    if (auto r = parse_fold("train_", Kind::train)) return *r;
    if (auto r = parse_fold("val_", Kind::val)) return *r;
    throw Error("unknown split role: " + text);
}

std::string SplitRole::str() const {
    switch (kind) {
        case Kind::holdout: return "holdout";
        case Kind::train: return "train_" + std::to_string(fold);
        case Kind::val: return "val_" + std::to_string(fold);
    }
    return {};
}

std::set<std::string> SplitAssignment::members(const SplitRole& role) const {
    if (role.kind == SplitRole::Kind::holdout) return holdout;
    if (role.fold < 1 || role.fold > n_folds)
        throw Error("split role references fold " + std::to_string(role.fold) + " but only " +
                    std::to_string(n_folds) + " folds exist");
    const auto& val = fold_val[role.fold - 1];
    if (role.kind == SplitRole::Kind::val) return val;
    std::set<std::string> train;
    for (const auto& id : pool)
        if (!val.count(id)) train.insert(id);
    return train;
}

Manifest load_manifest(const std::string& path, const std::vector<std::string>& label_names) {
    CsvFile f = read_csv(path);
    const std::vector<std::string> expect = {"image_id", "path", "label", "group_id"};
    if (f.header != expect)
        throw Error("manifest header must be exactly `image_id,path,label,group_id`: " + path);

    Manifest m;
    m.label_names = label_names;
    std::unordered_map<std::string, int> label_index;
    for (std::size_t i = 0; i < label_names.size(); ++i)
        label_index[label_names[i]] = static_cast<int>(i);

    std::unordered_set<std::string> seen;
    for (const auto& row : f.rows) {
        if (row.size() != 4)
            throw Error("manifest row has " + std::to_string(row.size()) + " fields, expected 4");
        ImageRecord r;
        r.image_id = row[0];
        r.path = row[1];
        r.group_id = row[3];
        if (r.image_id.empty()) throw Error("manifest row with empty image_id");
        if (r.group_id.empty()) throw Error("empty group_id for image " + r.image_id);
        if (!seen.insert(r.image_id).second)
            throw Error("duplicate image_id in manifest: " + r.image_id);
        if (!row[2].empty()) {
            auto it = label_index.find(row[2]);
            if (it == label_index.end()) {
                std::string valid;
                for (const auto& n : label_names) valid += (valid.empty() ? "" : ", ") + n;
                throw Error("unknown label \"" + row[2] + "\" for image " + r.image_id +
                            "; valid labels: " + valid);
            }
            r.label = it->second;
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write manifest: " + path);
    out << "image_id,path,label,group_id\n";
    for (const auto& r : m.records)
        out << r.image_id << ',' << r.path << ','
            << (r.label == kUnlabeled ? "" : m.label_names[r.label]) << ',' << r.group_id << '\n';
}

namespace {

struct Group {
    std::string id;
    std::vector<std::string> images;
};

// Greedy group filler: take shuffled groups until `target` images are in.
// Overshoot is bounded by the size of the last-added group.
std::set<std::string> fill_by_group(std::vector<Group> groups, Rng& rng, std::size_t target,
                                    const char* what) {
    for (const auto& g : groups)
        if (g.images.size() > target && target > 0)
            throw Error(std::string("group \"") + g.id + "\" has " +
                        std::to_string(g.images.size()) + " images, larger than the " + what +
                        " target of " + std::to_string(target) +
                        "; use a larger fraction");
    rng.shuffle(groups);
    std::set<std::string> out;
    for (const auto& g : groups) {
        if (out.size() >= target) break;
        out.insert(g.images.begin(), g.images.end());
    }
    return out;
}

std::vector<Group> collect_groups(const std::vector<std::string>& ids,
                                  const std::unordered_map<std::string, std::string>& group_of) {
    std::map<std::string, Group> by_id;  // ordered for determinism
    for (const auto& id : ids) {
        auto& g = by_id[group_of.at(id)];
        g.id = group_of.at(id);
        g.images.push_back(id);
    }
    std::vector<Group> out;
    out.reserve(by_id.size());
    for (auto& [_, g] : by_id) out.push_back(std::move(g));
    return out;
}

}  // namespace

SplitAssignment make_splits(const Manifest& m, std::uint64_t seed, double holdout_frac,
                            int n_folds, double val_frac) {
    if (!(holdout_frac > 0.0 && holdout_frac < 1.0) || !(val_frac > 0.0 && val_frac < 1.0))
        throw Error("make_splits: fractions must be in (0,1)");
    if (n_folds < 1) throw Error("make_splits: n_folds must be >= 1");
    if (m.records.empty()) throw Error("make_splits: empty manifest");

    std::unordered_map<std::string, std::string> group_of;
    std::vector<std::string> all_ids;
    for (const auto& r : m.records) {
        group_of[r.image_id] = r.group_id;
        all_ids.push_back(r.image_id);
    }

    Rng rng(seed);
    SplitAssignment s;
    s.seed = seed;
    s.n_folds = n_folds;

    const auto holdout_target =
        static_cast<std::size_t>(std::llround(holdout_frac * static_cast<double>(all_ids.size())));
    s.holdout = fill_by_group(collect_groups(all_ids, group_of), rng, holdout_target, "holdout");
    for (const auto& id : all_ids)
        if (!s.holdout.count(id)) s.pool.insert(id);
    s.achieved_holdout_frac = static_cast<double>(s.holdout.size()) / all_ids.size();

    std::vector<std::string> pool_ids(s.pool.begin(), s.pool.end());
    const auto val_target =
        static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(pool_ids.size())));
    for (int k = 0; k < n_folds; ++k) {
        auto val = fill_by_group(collect_groups(pool_ids, group_of), rng, val_target, "validation");
        s.achieved_val_frac.push_back(pool_ids.empty()
                                          ? 0.0
                                          : static_cast<double>(val.size()) / pool_ids.size());
        s.fold_val.push_back(std::move(val));
    }
    return s;
}

void save_splits(const std::string& path, const SplitAssignment& s) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write split file: " + path);
    out.precision(17);
    out << "# seed=" << s.seed << '\n';
    out << "# achieved_holdout_frac=" << s.achieved_holdout_frac << '\n';
    for (int k = 1; k <= s.n_folds; ++k)
        out << "# achieved_val_frac_" << k << '=' << s.achieved_val_frac[k - 1] << '\n';
    out << "image_id,role\n";
    for (const auto& id : s.holdout) out << id << ",holdout\n";
    for (const auto& id : s.pool)
        for (int k = 1; k <= s.n_folds; ++k)
            out << id << ',' << (s.fold_val[k - 1].count(id) ? "val_" : "train_") << k << '\n';
}

SplitAssignment load_splits(const std::string& path) {
    CsvFile f = read_csv(path);
    if (f.header != std::vector<std::string>{"image_id", "role"})
        throw Error("split file header must be `image_id,role`: " + path);
    SplitAssignment s;
    for (const auto& c : f.comments) {
        const auto eq = c.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = c.substr(0, eq), value = c.substr(eq + 1);
        if (key == "seed") s.seed = std::stoull(value);
        if (key == "achieved_holdout_frac") s.achieved_holdout_frac = std::stod(value);
    }
    std::map<int, std::set<std::string>> vals;
    for (const auto& row : f.rows) {
        if (row.size() != 2) throw Error("split row must be `image_id,role`");
        const SplitRole role = SplitRole::parse(row[1]);
        switch (role.kind) {
            case SplitRole::Kind::holdout: s.holdout.insert(row[0]); break;
            case SplitRole::Kind::val: vals[role.fold].insert(row[0]); [[fallthrough]];
            case SplitRole::Kind::train: s.pool.insert(row[0]); break;
        }
        if (role.kind != SplitRole::Kind::holdout) s.n_folds = std::max(s.n_folds, role.fold);
    }
    s.fold_val.resize(s.n_folds);
    for (auto& [k, v] : vals) s.fold_val[k - 1] = std::move(v);
    for (int k = 1; k <= s.n_folds; ++k)
        s.achieved_val_frac.push_back(
            s.pool.empty() ? 0.0 : static_cast<double>(s.fold_val[k - 1].size()) / s.pool.size());
    return s;
}

ClassStats class_stats(const Manifest& m, const SplitAssignment& s, const SplitRole& role) {
    const auto ids = s.members(role);
    ClassStats st;
    st.counts.assign(m.num_classes(), 0);
    for (const auto& r : m.records) {
        if (r.label == kUnlabeled || !ids.count(r.image_id)) continue;
        ++st.counts[r.label];
        ++st.total;
    }
    st.frequencies.assign(m.num_classes(), 0.0);
    if (st.total > 0)
        for (int c = 0; c < m.num_classes(); ++c)
            st.frequencies[c] = static_cast<double>(st.counts[c]) / static_cast<double>(st.total);
    return st;
}

BatchPlan balanced_batches(const Manifest& m, const SplitAssignment& s, const SplitRole& role,
                           int batch_size, int batches_per_epoch, std::uint64_t seed) {
    if (batch_size < 1 || batches_per_epoch < 1)
        throw Error("balanced_batches: batch_size and batches_per_epoch must be >= 1");
    const auto ids = s.members(role);
    std::vector<std::vector<std::pair<std::string, int>>> per_class(m.num_classes());
    for (const auto& r : m.records)
        if (r.label != kUnlabeled && ids.count(r.image_id))
            per_class[r.label].emplace_back(r.image_id, r.label);
    for (int c = 0; c < m.num_classes(); ++c)
        if (per_class[c].empty())
            throw Error("balanced_batches: class \"" + m.label_names[c] +
                        "\" has no examples in split " + role.str());

    Rng rng(seed);
    BatchPlan plan;
    plan.batch_size = batch_size;
    plan.batches_per_epoch = batches_per_epoch;
    plan.batches.reserve(batches_per_epoch);
    const int num_classes = m.num_classes();
    std::int64_t slot = 0;  // class cursor carried across batches
    for (int b = 0; b < batches_per_epoch; ++b) {
        std::vector<std::pair<std::string, int>> batch;
        batch.reserve(batch_size);
        for (int i = 0; i < batch_size; ++i, ++slot) {
            const auto& cls = per_class[slot % num_classes];
            batch.push_back(cls[rng.below(cls.size())]);
        }
        plan.batches.push_back(std::move(batch));
    }
    return plan;
}

}  // namespace derm
