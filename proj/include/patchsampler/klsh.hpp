// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "patchsampler/dataset.hpp"
#include "patchsampler/kernels.hpp"

namespace patchsampler {

enum class AnchorMode { resample_per_bit, shared_anchors };

struct KlshConfig {
    std::uint32_t num_bits = 32;          // I
    std::uint32_t anchors_per_bit = 256;  // M (clamped to N at build time when defaulted)
    std::uint32_t subset_size = 30;       // t, ones in the indexing vector e
    AnchorMode anchor_mode = AnchorMode::resample_per_bit;
    KernelSpec kernel;
    bool gamma_auto = false;              // resolve gamma from the data at build time
    std::uint64_t seed = 0;
    double eig_tol = 1e-10;
    bool center_kernel = true;            // without it hash scores share a common sign

    void validate(std::size_t dataset_size) const;  // throws ConfigError
};

// I-bit code; bit for hash function 1 is the most significant of the I bits.
// Unsigned integer order of `bits` is the comparison order.
struct HashCode {
    std::uint64_t bits = 0;

    bool get(std::uint32_t i, std::uint32_t num_bits) const {  // i in [0, I)
        return (bits >> (num_bits - 1 - i)) & 1u;
    }
    auto operator<=>(const HashCode&) const = default;
};

std::uint32_t hamming_distance(HashCode a, HashCode b);

// One hash function: its anchor rows and weight vector.
struct HashBit {
    std::vector<std::uint32_t> anchor_ids;  // length M, indices into build dataset
    std::vector<double> omega;              // length M
};

struct HashFamily {
    KlshConfig config;                      // with gamma resolved (gamma_auto cleared)
    std::uint64_t dataset_fingerprint = 0;
    std::uint32_t feature_dim = 0;
    std::vector<HashBit> bits;              // length I
};

HashFamily build_hash_family(const FeatureMatrix& features, const KlshConfig& cfg);

HashCode hash_code(const HashFamily& family, const FeatureMatrix& features,
                   std::span<const double> x);

std::vector<HashCode> hash_all(const HashFamily& family, const FeatureMatrix& build_features,
                               const FeatureMatrix& features, unsigned threads = 1);

// Sidecar file, magic "KLF1", little-endian.
void save_hash_family(const HashFamily& family, const std::filesystem::path& path);
HashFamily load_hash_family(const std::filesystem::path& path);

}  // namespace patchsampler
