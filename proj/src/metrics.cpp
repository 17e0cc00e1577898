// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "csv_util.hpp"
#include "patchsampler/errors.hpp"
#include "patchsampler/rng.hpp"

namespace patchsampler {

namespace {

double total_variance_rows(const std::vector<std::uint32_t>& ids,
                           const FeatureMatrix& features) {
    const std::size_t n = ids.size();
    const std::size_t d = features.cols;
    if (n == 0) return 0.0;
    std::vector<double> mean(d, 0.0);
    std::vector<double> lo(d), hi(d);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint32_t id = ids[k];
        if (id >= features.rows)
            throw ContractError("variance_report: unknown patch_id " + std::to_string(id));
        const double* row = features.row(id);
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] += row[j];
            if (k == 0 || row[j] < lo[j]) lo[j] = row[j];
            if (k == 0 || row[j] > hi[j]) hi[j] = row[j];
        }
    }
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    double total = 0.0;
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

}  // namespace

VarianceReport variance_report(const SampleResult& result, const FeatureMatrix& features,
                               const std::vector<Label>& labels) {
    if (labels.size() != features.rows)
        throw ContractError("variance_report: labels/features size mismatch");

    VarianceReport report;
    report.retention = features.rows == 0
                           ? 0.0
                           : static_cast<double>(result.selected.size()) /
                                 static_cast<double>(features.rows);

    std::vector<std::uint32_t> all(features.rows);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);

    const double var_all = total_variance_rows(all, features);
    const double var_sel = total_variance_rows(result.selected, features);
    if (var_all == 0.0) {
        report.global_ratio = 1.0;
        report.zero_variance_flag = true;
    } else {
        report.global_ratio = var_sel / var_all;
    }

    for (Label cls : {Label::settle, Label::non_settle, Label::unlabeled}) {
        std::vector<std::uint32_t> cls_all, cls_sel;
        for (std::uint32_t id : all)
            if (labels[id] == cls) cls_all.push_back(id);
        if (cls_all.empty()) continue;
        for (std::uint32_t id : result.selected)
            if (labels[id] == cls) cls_sel.push_back(id);
        const double va = total_variance_rows(cls_all, features);
        report.per_class_ratio[cls] = va == 0.0 ? 1.0 : total_variance_rows(cls_sel, features) / va;
    }
    return report;
}

SeparationStats hamming_separation(const std::vector<HashCode>& codes,
                                   const std::vector<Label>& labels,
                                   std::uint64_t seed) {
    if (labels.size() != codes.size())
        throw ContractError("hamming_separation: labels/codes size mismatch");

    const std::size_t n = codes.size();
    double intra_sum = 0.0, intra_sq = 0.0, inter_sum = 0.0, inter_sq = 0.0;
    std::size_t intra_n = 0, inter_n = 0;
    auto account = [&](std::size_t i, std::size_t j) {
        const double d = static_cast<double>(hamming_distance(codes[i], codes[j]));
        if (labels[i] == labels[j]) {
            intra_sum += d;
            intra_sq += d * d;
            ++intra_n;
        } else {
            inter_sum += d;
            inter_sq += d * d;
            ++inter_n;
        }
    };

    SeparationStats stats;
    if (n <= 2000) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) account(i, j);
    } else {
        stats.exhaustive = false;
        SplitMix64 rng(SplitMix64::substream(seed, 0x48414d));
        for (int k = 0; k < 100000; ++k) {
            const std::size_t i = rng.uniform_below(n);
            std::size_t j = rng.uniform_below(n - 1);
            if (j >= i) ++j;
            account(i, j);
        }
    }

    if (intra_n > 0) {
        stats.intra_mean = intra_sum / static_cast<double>(intra_n);
        stats.intra_stddev =
            std::sqrt(std::max(0.0, intra_sq / static_cast<double>(intra_n) -
                                        stats.intra_mean * stats.intra_mean));
    }
    if (inter_n > 0) {
        const double mean = inter_sum / static_cast<double>(inter_n);
        stats.inter_mean = mean;
        stats.inter_stddev = std::sqrt(
            std::max(0.0, inter_sq / static_cast<double>(inter_n) - mean * mean));
    }
    return stats;
}

void emit_variance_csv(const VarianceReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write variance report: " + path.string());
    out << "metric,value\n";
    out << "global_ratio," << detail::fmt_double(report.global_ratio) << '\n';
    out << "retention," << detail::fmt_double(report.retention) << '\n';
    out << "zero_variance_flag," << (report.zero_variance_flag ? 1 : 0) << '\n';
    for (const auto& [cls, ratio] : report.per_class_ratio)
        out << "class_ratio_" << label_name(cls) << ',' << detail::fmt_double(ratio) << '\n';
}

void emit_separation_csv(const SeparationStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write separation stats: " + path.string());
    out << "metric,value\n";
    out << "intra_mean," << detail::fmt_double(stats.intra_mean) << '\n';
    out << "intra_stddev," << detail::fmt_double(stats.intra_stddev) << '\n';
    if (stats.inter_mean) {
        out << "inter_mean," << detail::fmt_double(*stats.inter_mean) << '\n';
        out << "inter_stddev," << detail::fmt_double(*stats.inter_stddev) << '\n';
    }
    out << "exhaustive," << (stats.exhaustive ? 1 : 0) << '\n';
}

void emit_occupancy_csv(const BucketStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write occupancy histogram: " + path.string());
    out << "size,count\n";
    for (const auto& [size, count] : stats.histogram) out << size << ',' << count << '\n';
}

void emit_per_bucket_csv(const SampleResult& result, const std::filesystem::path& path) {
    write_bucket_summary(result, path);
}

}  // namespace patchsampler
