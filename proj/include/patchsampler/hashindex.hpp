// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "patchsampler/klsh.hpp"

namespace patchsampler {

struct BucketEntry {
    std::uint32_t patch_id;
    HashCode code;
};

// Entries sorted ascending by (code, patch_id).
struct Bucket {
    std::uint64_t key = 0;                  // b-bit prefix
    std::vector<BucketEntry> entries;
};

class HashTable {
public:
    HashTable() = default;
    HashTable(std::uint32_t prefix_len, std::uint32_t code_bits,
              std::map<std::uint64_t, Bucket> buckets, std::size_t total);

    std::uint32_t prefix_len() const { return prefix_len_; }
    std::uint32_t code_bits() const { return code_bits_; }
    std::size_t total_entries() const { return total_entries_; }
    std::size_t bucket_count() const { return buckets_.size(); }

    // Ascending key order (Algorithm traversal order).
    const std::map<std::uint64_t, Bucket>& buckets() const { return buckets_; }

private:
    std::uint32_t prefix_len_ = 0;
    std::uint32_t code_bits_ = 0;
    std::size_t total_entries_ = 0;
    std::map<std::uint64_t, Bucket> buckets_;
};

HashTable build_table(const std::vector<HashCode>& codes, std::uint32_t code_bits,
                      std::uint32_t prefix_len);

struct BucketStats {
    std::size_t bucket_count = 0;
    std::size_t min_size = 0;
    std::size_t max_size = 0;
    double mean_size = 0.0;
    double median_size = 0.0;
    std::map<std::size_t, std::size_t> histogram;  // size -> #buckets
};

BucketStats bucket_stats(const HashTable& table);

// Audit dump: `bucket_key_hex,patch_id,code_hex`.
void dump_table_csv(const HashTable& table, const std::filesystem::path& path);

}  // namespace patchsampler
