// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "patchsampler/dataset.hpp"
#include "patchsampler/hashindex.hpp"

namespace patchsampler {

// Balanced BST over a bucket's sorted entries, array-backed.
// In-order traversal reproduces the sorted entry order; depth of the root is 1.
class BucketTree {
public:
    struct Node {
        BucketEntry entry;
        std::uint32_t depth;         // 1-based
        std::int32_t left = -1;      // node indices, -1 = none
        std::int32_t right = -1;
    };

    const std::vector<Node>& nodes() const { return nodes_; }
    std::uint32_t height() const { return height_; }        // L
    std::int32_t root() const { return nodes_.empty() ? -1 : 0; }

    friend BucketTree build_bucket_tree(const Bucket& bucket);

private:
    std::vector<Node> nodes_;        // breadth-first layout: depth 1 first
    std::uint32_t height_ = 0;
};

BucketTree build_bucket_tree(const Bucket& bucket);

// All nodes at depths 1..level, breadth-first order.
std::vector<BucketEntry> level_order(const BucketTree& tree, std::uint32_t level);

// Ratio of total population variance (feature rows) of levels 1..level to the
// whole tree. Zero denominator reports 1.
double variance_ratio(const BucketTree& tree, std::uint32_t level,
                      const FeatureMatrix& features);

enum class SampleMode { epsilon, target, cap };

struct PerBucketRow {
    std::uint64_t bucket_key;
    std::size_t bucket_size;
    std::uint32_t chosen_level;      // 0 for cap sampling (no tree level)
    double variance_ratio;           // ratio at the chosen level; 1.0 for cap
    std::size_t selected_count;
};

struct SampleResult {
    std::vector<std::uint32_t> selected;           // patch ids, ascending
    std::vector<PerBucketRow> per_bucket;          // ascending bucket key
    SampleMode mode = SampleMode::epsilon;
    double epsilon = 0.0;                          // used / resolved epsilon
    std::uint32_t cap = 0;
    std::uint64_t seed = 0;
    // depth of each selected patch in its bucket tree, aligned with `selected`
    std::vector<std::uint32_t> selected_level;
};

SampleResult bst_sample(const HashTable& table, const FeatureMatrix& features,
                        double epsilon);

SampleResult cap_sample(const HashTable& table, std::uint32_t cap, std::uint64_t seed);

// Bisection over epsilon to land |selected| as close to `target` as achievable.
SampleResult target_sample(const HashTable& table, const FeatureMatrix& features,
                           std::size_t target);

// Exports: `patch_id,bucket_key_hex,level,selected` for every table entry, and
// `bucket_key_hex,size,level,variance_ratio,selected` per bucket.
void write_selection_manifest(const SampleResult& result, const HashTable& table,
                              const std::filesystem::path& path);
void write_bucket_summary(const SampleResult& result, const std::filesystem::path& path);

}  // namespace patchsampler
