// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/hashindex.hpp"

#include <algorithm>
#include <fstream>

#include "csv_util.hpp"
#include "patchsampler/errors.hpp"

namespace patchsampler {

HashTable::HashTable(std::uint32_t prefix_len, std::uint32_t code_bits,
                     std::map<std::uint64_t, Bucket> buckets, std::size_t total)
    : prefix_len_(prefix_len),
      code_bits_(code_bits),
      total_entries_(total),
      buckets_(std::move(buckets)) {}

HashTable build_table(const std::vector<HashCode>& codes, std::uint32_t code_bits,
                      std::uint32_t prefix_len) {
    if (prefix_len < 1 || prefix_len > code_bits)
        throw ConfigError("prefix_len " + std::to_string(prefix_len) +
                          " out of range [1, " + std::to_string(code_bits) + "]");
    std::map<std::uint64_t, Bucket> buckets;
    for (std::size_t n = 0; n < codes.size(); ++n) {
        const std::uint64_t key = codes[n].bits >> (code_bits - prefix_len);
        Bucket& b = buckets[key];
        b.key = key;
        b.entries.push_back({static_cast<std::uint32_t>(n), codes[n]});
    }
    for (auto& [key, bucket] : buckets) {
        std::sort(bucket.entries.begin(), bucket.entries.end(),
                  [](const BucketEntry& a, const BucketEntry& b) {
                      if (a.code.bits != b.code.bits) return a.code.bits < b.code.bits;
                      return a.patch_id < b.patch_id;
                  });
    }
    return HashTable(prefix_len, code_bits, std::move(buckets), codes.size());
}

BucketStats bucket_stats(const HashTable& table) {
    BucketStats stats;
    stats.bucket_count = table.bucket_count();
    if (stats.bucket_count == 0) return stats;

    std::vector<std::size_t> sizes;
    sizes.reserve(stats.bucket_count);
    for (const auto& [key, bucket] : table.buckets()) sizes.push_back(bucket.entries.size());
    std::sort(sizes.begin(), sizes.end());

    stats.min_size = sizes.front();
    stats.max_size = sizes.back();
    double sum = 0.0;
    for (std::size_t s : sizes) {
        sum += static_cast<double>(s);
        ++stats.histogram[s];
    }
    stats.mean_size = sum / static_cast<double>(sizes.size());
    const std::size_t mid = sizes.size() / 2;
    stats.median_size = sizes.size() % 2 == 1
                            ? static_cast<double>(sizes[mid])
                            : 0.5 * static_cast<double>(sizes[mid - 1] + sizes[mid]);
    return stats;
}

void dump_table_csv(const HashTable& table, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write table dump: " + path.string());
    out << "bucket_key_hex,patch_id,code_hex\n";
    for (const auto& [key, bucket] : table.buckets())
        for (const BucketEntry& e : bucket.entries)
            out << detail::fmt_hex(key) << ',' << e.patch_id << ','
                << detail::fmt_hex(e.code.bits) << '\n';
}

}  // namespace patchsampler
