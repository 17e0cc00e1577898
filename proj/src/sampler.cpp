// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>

#include "csv_util.hpp"
#include "patchsampler/errors.hpp"
#include "patchsampler/rng.hpp"

namespace patchsampler {

BucketTree build_bucket_tree(const Bucket& bucket) {
    if (bucket.entries.empty())
        throw ContractError("build_bucket_tree: empty bucket");

    // Breadth-first construction over sorted sub-slices; the node at index
    // floor((len-1)/2) of each slice becomes the subtree root, so the layout
    // is balanced and the array order is level order.
    BucketTree tree;
    struct Slice {
        std::size_t lo, hi;      // [lo, hi)
        std::uint32_t depth;
        std::int32_t parent;     // node index, -1 for root
        bool is_left;
    };
    std::deque<Slice> queue;
    queue.push_back({0, bucket.entries.size(), 1, -1, false});
    while (!queue.empty()) {
        Slice s = queue.front();
        queue.pop_front();
        const std::size_t mid = s.lo + (s.hi - s.lo - 1) / 2;
        const std::int32_t idx = static_cast<std::int32_t>(tree.nodes_.size());
        tree.nodes_.push_back({bucket.entries[mid], s.depth, -1, -1});
        tree.height_ = std::max(tree.height_, s.depth);
        if (s.parent >= 0) {
            if (s.is_left) tree.nodes_[s.parent].left = idx;
            else tree.nodes_[s.parent].right = idx;
        }
        if (mid > s.lo) queue.push_back({s.lo, mid, s.depth + 1, idx, true});
        if (mid + 1 < s.hi) queue.push_back({mid + 1, s.hi, s.depth + 1, idx, false});
    }
    return tree;
}

std::vector<BucketEntry> level_order(const BucketTree& tree, std::uint32_t level) {
    if (level < 1 || level > tree.height())
        throw ContractError("level_order: level " + std::to_string(level) +
                            " out of range [1, " + std::to_string(tree.height()) + "]");
    std::vector<BucketEntry> out;
    for (const auto& node : tree.nodes()) {
        if (node.depth > level) break;  // nodes are stored in level order
        out.push_back(node.entry);
    }
    return out;
}

namespace {

// Total population variance (trace of the 1/n-normalized covariance) of the
// feature rows for the given patch ids.
double total_variance(const std::vector<std::uint32_t>& ids, const FeatureMatrix& features) {
    const std::size_t n = ids.size();
    const std::size_t d = features.cols;
    if (n == 0) return 0.0;
    double total = 0.0;
    std::vector<double> mean(d, 0.0);
    std::vector<double> lo(d), hi(d);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t id = ids[k];
        if (id >= features.rows)
            throw ContractError("patch_id " + std::to_string(id) + " outside feature matrix");
        const double* row = features.row(id);
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] += row[j];
            if (k == 0 || row[j] < lo[j]) lo[j] = row[j];
            if (k == 0 || row[j] > hi[j]) hi[j] = row[j];
        }
    }
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    for (std::uint32_t id : ids) {
        const double* row = features.row(id);
        for (std::size_t j = 0; j < d; ++j) {
            if (lo[j] == hi[j]) continue;  // constant column: exactly zero variance
            const double t = row[j] - mean[j];
            total += t * t;
        }
    }
    return total / static_cast<double>(n);
}

std::vector<std::uint32_t> ids_up_to_level(const BucketTree& tree, std::uint32_t level) {
    std::vector<std::uint32_t> ids;
    for (const auto& node : tree.nodes()) {
        if (node.depth > level) break;
        ids.push_back(node.entry.patch_id);
    }
    return ids;
}

}  // namespace

double variance_ratio(const BucketTree& tree, std::uint32_t level,
                      const FeatureMatrix& features) {
    if (level < 1 || level > tree.height())
        throw ContractError("variance_ratio: level out of range");
    const double den = total_variance(ids_up_to_level(tree, tree.height()), features);
    if (den == 0.0) return 1.0;
    const double num = total_variance(ids_up_to_level(tree, level), features);
    return num / den;
}

SampleResult bst_sample(const HashTable& table, const FeatureMatrix& features,
                        double epsilon) {
    if (!(epsilon > 0.0) || epsilon > 1.0)
        throw ConfigError("epsilon must be in (0, 1]");

    SampleResult result;
    result.mode = SampleMode::epsilon;
    result.epsilon = epsilon;

    std::vector<std::pair<std::uint32_t, std::uint32_t>> picked;  // (patch_id, level)
    for (const auto& [key, bucket] : table.buckets()) {
        const BucketTree tree = build_bucket_tree(bucket);
        const std::uint32_t L = tree.height();
        const double den = total_variance(ids_up_to_level(tree, L), features);

        std::uint32_t chosen = L;
        double ratio_at_chosen = 1.0;
        for (std::uint32_t level = 1; level <= L; ++level) {
            const double ratio =
                den == 0.0 ? 1.0 : total_variance(ids_up_to_level(tree, level), features) / den;
            if (ratio >= epsilon) {
                chosen = level;
                ratio_at_chosen = ratio;
                break;
            }
        }

        std::size_t count = 0;
        for (const auto& node : tree.nodes()) {
            if (node.depth > chosen) break;
            picked.emplace_back(node.entry.patch_id, node.depth);
            ++count;
        }
        result.per_bucket.push_back({key, bucket.entries.size(), chosen, ratio_at_chosen, count});
    }

    std::sort(picked.begin(), picked.end());
    result.selected.reserve(picked.size());
    result.selected_level.reserve(picked.size());
    for (const auto& [id, level] : picked) {
        result.selected.push_back(id);
        result.selected_level.push_back(level);
    }
    return result;
}

SampleResult cap_sample(const HashTable& table, std::uint32_t cap, std::uint64_t seed) {
    if (cap < 1) throw ConfigError("cap must be >= 1");

    SampleResult result;
    result.mode = SampleMode::cap;
    result.cap = cap;
    result.seed = seed;

    std::vector<std::uint32_t> picked;
    for (const auto& [key, bucket] : table.buckets()) {
        const std::size_t size = bucket.entries.size();
        std::size_t count;
        if (size <= cap) {
            for (const BucketEntry& e : bucket.entries) picked.push_back(e.patch_id);
            count = size;
        } else {
            SplitMix64 rng(SplitMix64::substream(seed, key));
            auto chosen = sample_without_replacement(
                rng, static_cast<std::uint32_t>(size), cap);
            for (std::uint32_t i : chosen) picked.push_back(bucket.entries[i].patch_id);
            count = cap;
        }
        result.per_bucket.push_back({key, size, 0, 1.0, count});
    }

    std::sort(picked.begin(), picked.end());
    result.selected = std::move(picked);
    result.selected_level.assign(result.selected.size(), 0);
    return result;
}

SampleResult target_sample(const HashTable& table, const FeatureMatrix& features,
                           std::size_t target) {
    const std::size_t n = table.total_entries();
    const std::size_t min_achievable = table.bucket_count();
    if (target < min_achievable || target > n)
        throw ConfigError("target " + std::to_string(target) + " outside achievable range [" +
                          std::to_string(min_achievable) + ", " + std::to_string(n) + "]");

    auto better = [&](const SampleResult& a, const SampleResult& b) {
        const auto da = a.selected.size() > target ? a.selected.size() - target
                                                   : target - a.selected.size();
        const auto db = b.selected.size() > target ? b.selected.size() - target
                                                   : target - b.selected.size();
        if (da != db) return da < db;
        return a.selected.size() < b.selected.size();
    };

    // |D| is monotone non-decreasing in epsilon, so bisect.
    SampleResult best = bst_sample(table, features, 1.0);
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 30; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (!(mid > 0.0)) break;
        SampleResult r = bst_sample(table, features, mid);
        const std::size_t got = r.selected.size();
        if (better(r, best)) best = std::move(r);
        if (got > target) hi = mid;
        else lo = mid;
    }
    best.mode = SampleMode::target;
    return best;
}

void write_selection_manifest(const SampleResult& result, const HashTable& table,
                              const std::filesystem::path& path) {
    // depth of every entry in its bucket tree (0 in cap mode)
    std::map<std::uint32_t, std::uint32_t> depth;
    if (result.mode != SampleMode::cap) {
        for (const auto& [key, bucket] : table.buckets()) {
            const BucketTree tree = build_bucket_tree(bucket);
            for (const auto& node : tree.nodes()) depth[node.entry.patch_id] = node.depth;
        }
    }
    std::vector<bool> selected_mask;
    {
        std::uint32_t max_id = 0;
        for (const auto& [key, bucket] : table.buckets())
            for (const auto& e : bucket.entries) max_id = std::max(max_id, e.patch_id);
        selected_mask.assign(static_cast<std::size_t>(max_id) + 1, false);
        for (std::uint32_t id : result.selected) selected_mask[id] = true;
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write selection manifest: " + path.string());
    out << "patch_id,bucket_key_hex,level,selected\n";
    std::vector<std::tuple<std::uint32_t, std::uint64_t>> rows;
    for (const auto& [key, bucket] : table.buckets())
        for (const auto& e : bucket.entries) rows.emplace_back(e.patch_id, key);
    std::sort(rows.begin(), rows.end());
    for (const auto& [id, key] : rows) {
        const std::uint32_t lvl = result.mode == SampleMode::cap ? 0 : depth[id];
        out << id << ',' << detail::fmt_hex(key) << ',' << lvl << ','
            << (selected_mask[id] ? 1 : 0) << '\n';
    }
}

void write_bucket_summary(const SampleResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write bucket summary: " + path.string());
    out << "bucket_key_hex,size,level,variance_ratio,selected\n";
    for (const PerBucketRow& row : result.per_bucket)
        out << detail::fmt_hex(row.bucket_key) << ',' << row.bucket_size << ','
            << row.chosen_level << ',' << detail::fmt_double(row.variance_ratio) << ','
            << row.selected_count << '\n';
}

}  // namespace patchsampler
