// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "patchsampler/dataset.hpp"
#include "patchsampler/hashindex.hpp"
#include "patchsampler/sampler.hpp"

namespace patchsampler {

struct VarianceReport {
    double global_ratio = 1.0;           // var(selected) / var(all)
    std::map<Label, double> per_class_ratio;
    double retention = 0.0;              // |selected| / N
    bool zero_variance_flag = false;     // corpus had zero total variance
};

VarianceReport variance_report(const SampleResult& result, const FeatureMatrix& features,
                               const std::vector<Label>& labels);

struct SeparationStats {
    double intra_mean = 0.0;
    double intra_stddev = 0.0;
    std::optional<double> inter_mean;    // absent for single-class input
    std::optional<double> inter_stddev;
    bool exhaustive = true;              // false when pairs were sampled
};

// Exhaustive for N <= 2000, else 100k seeded uniformly sampled pairs.
SeparationStats hamming_separation(const std::vector<HashCode>& codes,
                                   const std::vector<Label>& labels,
                                   std::uint64_t seed = 0);

// Plot-ready CSVs; floats printed with 17 significant digits.
void emit_variance_csv(const VarianceReport& report, const std::filesystem::path& path);
void emit_separation_csv(const SeparationStats& stats, const std::filesystem::path& path);
void emit_occupancy_csv(const BucketStats& stats, const std::filesystem::path& path);
void emit_per_bucket_csv(const SampleResult& result, const std::filesystem::path& path);

}  // namespace patchsampler
