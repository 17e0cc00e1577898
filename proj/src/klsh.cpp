// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/klsh.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>

#include "patchsampler/errors.hpp"
#include "patchsampler/linalg.hpp"
#include "patchsampler/parallel.hpp"
#include "patchsampler/rng.hpp"

namespace fs = std::filesystem;

namespace patchsampler {

void KlshConfig::validate(std::size_t dataset_size) const {
    if (num_bits < 1) throw ConfigError("num_bits must be >= 1");
    if (num_bits > 64) throw ConfigError("num_bits must be <= 64");
    if (anchors_per_bit < 1) throw ConfigError("anchors_per_bit must be >= 1");
    if (anchors_per_bit > dataset_size)
        throw ConfigError("anchors_per_bit " + std::to_string(anchors_per_bit) +
                          " exceeds dataset size " + std::to_string(dataset_size));
    if (subset_size < 1 || subset_size > anchors_per_bit)
        throw ConfigError("subset_size must be in [1, anchors_per_bit]");
    if (!(eig_tol > 0.0)) throw ConfigError("eig_tol must be > 0");
    if (!gamma_auto) kernel.validate();
    else if (kernel.degree < 1) throw ConfigError("kernel degree must be >= 1");
}

std::uint32_t hamming_distance(HashCode a, HashCode b) {
    return static_cast<std::uint32_t>(std::popcount(a.bits ^ b.bits));
}

namespace {

// Substream tags: per-bit anchor draw, per-bit indexing vector, shared anchor draw.
constexpr std::uint64_t kTagAnchors = 0x1000000000000000ULL;
constexpr std::uint64_t kTagIndexing = 0x2000000000000000ULL;
constexpr std::uint64_t kTagShared = 0x3000000000000000ULL;

double auto_gamma(const FeatureMatrix& features) {
    // 1 / (d * mean per-dimension variance over the dataset)
    const std::size_t n = features.rows, d = features.cols;
    if (n == 0 || d == 0) return 1.0;
    double total_var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += features.row(i)[j];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = features.row(i)[j] - mean;
            var += t * t;
        }
        total_var += var / static_cast<double>(n);
    }
    const double mean_var = total_var / static_cast<double>(d);
    if (mean_var <= 0.0) return 1.0;
    return 1.0 / (static_cast<double>(d) * mean_var);
}

std::vector<double> centered(std::vector<double> k, std::size_t m) {
    // double centering: K <- K - 1K/m - K1/m + 1K1/m^2
    std::vector<double> row_mean(m, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) row_mean[i] += k[i * m + j];
        total += row_mean[i];
        row_mean[i] /= static_cast<double>(m);
    }
    total /= static_cast<double>(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            k[i * m + j] += total - row_mean[i] - row_mean[j];
    return k;
}

// Inverse square root of the (optionally centered) anchor kernel matrix. A
// centered matrix can vanish entirely when all anchors coincide in feature
// space; fall back to the raw matrix so the bit degrades to a constant instead
// of failing the build.
std::vector<double> anchor_inv_sqrt(const std::vector<double>& km, std::size_t m,
                                    bool center, double eig_tol) {
    if (center) {
        try {
            return inv_sqrt_psd(centered(km, m), m, eig_tol);
        } catch (const NumericError&) {
        }
    }
    return inv_sqrt_psd(km, m, eig_tol);
}

}  // namespace

HashFamily build_hash_family(const FeatureMatrix& features, const KlshConfig& cfg) {
    cfg.validate(features.rows);

    HashFamily family;
    family.config = cfg;
    if (cfg.gamma_auto) {
        family.config.kernel.gamma = auto_gamma(features);
        family.config.gamma_auto = false;
    }
    family.config.kernel.validate();
    family.dataset_fingerprint = feature_fingerprint(features);
    family.feature_dim = static_cast<std::uint32_t>(features.cols);

    const std::uint32_t I = cfg.num_bits;
    const std::uint32_t M = cfg.anchors_per_bit;
    const std::uint32_t t = cfg.subset_size;
    const std::uint32_t n = static_cast<std::uint32_t>(features.rows);

    std::vector<std::uint32_t> shared_ids;
    std::vector<double> shared_w;  // inv sqrt of the shared kernel matrix
    if (cfg.anchor_mode == AnchorMode::shared_anchors) {
        SplitMix64 rng(SplitMix64::substream(cfg.seed, kTagShared));
        shared_ids = sample_without_replacement(rng, n, M);
        std::vector<std::span<const double>> pts;
        pts.reserve(M);
        for (std::uint32_t id : shared_ids)
            pts.emplace_back(features.row(id), features.cols);
        std::vector<double> km = kernel_matrix(family.config.kernel, pts);
        try {
            shared_w = anchor_inv_sqrt(km, M, cfg.center_kernel, cfg.eig_tol);
        } catch (const NumericError& e) {
            throw NumericError(std::string("shared anchor kernel matrix: ") + e.what());
        }
    }

    family.bits.resize(I);
    for (std::uint32_t i = 0; i < I; ++i) {
        HashBit& bit = family.bits[i];
        std::vector<double> w;
        if (cfg.anchor_mode == AnchorMode::shared_anchors) {
            bit.anchor_ids = shared_ids;
            w = shared_w;
        } else {
            SplitMix64 rng(SplitMix64::substream(cfg.seed, kTagAnchors | i));
            bit.anchor_ids = sample_without_replacement(rng, n, M);
            std::vector<std::span<const double>> pts;
            pts.reserve(M);
            for (std::uint32_t id : bit.anchor_ids)
                pts.emplace_back(features.row(id), features.cols);
            std::vector<double> km = kernel_matrix(family.config.kernel, pts);
            try {
                w = anchor_inv_sqrt(km, M, cfg.center_kernel, cfg.eig_tol);
            } catch (const NumericError& e) {
                throw NumericError("hash bit " + std::to_string(i + 1) +
                                   ": " + e.what());
            }
        }

        // indexing vector e: exactly t ones; omega = K_M^{-1/2} e, i.e. the sum
        // of the selected columns of the inverse square root
        SplitMix64 erng(SplitMix64::substream(cfg.seed, kTagIndexing | i));
        std::vector<std::uint32_t> ones = sample_without_replacement(erng, M, t);
        bit.omega.assign(M, 0.0);
        for (std::uint32_t col : ones)
            for (std::uint32_t r = 0; r < M; ++r)
                bit.omega[r] += w[static_cast<std::size_t>(r) * M + col];

        bool all_zero = true;
        for (double v : bit.omega) {
            if (!std::isfinite(v))
                throw NumericError("hash bit " + std::to_string(i + 1) + ": non-finite omega");
            if (v != 0.0) all_zero = false;
        }
        if (all_zero)
            throw NumericError("hash bit " + std::to_string(i + 1) + ": all-zero omega");
    }

    if (cfg.anchor_mode == AnchorMode::shared_anchors && t < M) {
        // distinct-e sanity check; collisions logged, not fatal
        std::set<std::vector<double>> distinct;
        for (const HashBit& b : family.bits) distinct.insert(b.omega);
        if (distinct.size() < family.bits.size())
            std::cerr << "warning: shared-anchor indexing vectors collided ("
                      << distinct.size() << " distinct of " << family.bits.size() << ")\n";
    }
    return family;
}

HashCode hash_code(const HashFamily& family, const FeatureMatrix& build_features,
                   std::span<const double> x) {
    if (x.size() != family.feature_dim)
        throw ContractError("hash_code: feature dimension " + std::to_string(x.size()) +
                            " != family dimension " + std::to_string(family.feature_dim));
    const std::uint32_t I = family.config.num_bits;
    HashCode code;
    for (std::uint32_t i = 0; i < I; ++i) {
        const HashBit& bit = family.bits[i];
        double score = 0.0;
        for (std::size_t m = 0; m < bit.anchor_ids.size(); ++m) {
            std::span<const double> anchor(build_features.row(bit.anchor_ids[m]),
                                           build_features.cols);
            score += bit.omega[m] * kernel_eval(family.config.kernel, anchor, x);
        }
        if (score > 0.0)  // sign(0) -> bit 0
            code.bits |= 1ULL << (I - 1 - i);
    }
    return code;
}

std::vector<HashCode> hash_all(const HashFamily& family, const FeatureMatrix& build_features,
                               const FeatureMatrix& features, unsigned threads) {
    std::vector<HashCode> codes(features.rows);
    parallel_for(features.rows, threads, [&](std::size_t n) {
        codes[n] = hash_code(family, build_features,
                             std::span<const double>(features.row(n), features.cols));
    });
    return codes;
}

namespace {

constexpr char kFamilyMagic[4] = {'K', 'L', 'F', '1'};

template <typename T>
void put_raw(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(std::ifstream& in) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw CorruptionError("hash family file truncated",
                                   static_cast<std::uint64_t>(in.tellg()));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void save_hash_family(const HashFamily& family, const fs::path& path) {
    const KlshConfig& c = family.config;
    std::string bytes;
    bytes.append(kFamilyMagic, 4);
    put_raw<std::uint32_t>(bytes, c.num_bits);
    put_raw<std::uint32_t>(bytes, c.anchors_per_bit);
    put_raw<std::uint32_t>(bytes, c.subset_size);
    put_raw<std::uint32_t>(bytes, c.anchor_mode == AnchorMode::shared_anchors ? 1 : 0);
    put_raw<std::uint32_t>(bytes, static_cast<std::uint32_t>(c.kernel.kind));
    put_raw<std::uint32_t>(bytes, c.kernel.degree);
    put_raw<double>(bytes, c.kernel.gamma);
    put_raw<double>(bytes, c.kernel.coef0);
    put_raw<std::uint64_t>(bytes, c.seed);
    put_raw<double>(bytes, c.eig_tol);
    put_raw<std::uint32_t>(bytes, c.center_kernel ? 1 : 0);
    put_raw<std::uint32_t>(bytes, family.feature_dim);
    put_raw<std::uint64_t>(bytes, family.dataset_fingerprint);
    for (const HashBit& bit : family.bits) {
        for (std::uint32_t id : bit.anchor_ids) put_raw<std::uint32_t>(bytes, id);
        for (double w : bit.omega) put_raw<double>(bytes, w);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write hash family: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

HashFamily load_hash_family(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open hash family: " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kFamilyMagic, 4) != 0)
        throw FormatError("bad hash family magic, expected KLF1");

    HashFamily family;
    KlshConfig& c = family.config;
    c.num_bits = get_raw<std::uint32_t>(in);
    c.anchors_per_bit = get_raw<std::uint32_t>(in);
    c.subset_size = get_raw<std::uint32_t>(in);
    c.anchor_mode = get_raw<std::uint32_t>(in) == 1 ? AnchorMode::shared_anchors
                                                    : AnchorMode::resample_per_bit;
    c.kernel.kind = static_cast<KernelKind>(get_raw<std::uint32_t>(in));
    c.kernel.degree = get_raw<std::uint32_t>(in);
    c.kernel.gamma = get_raw<double>(in);
    c.kernel.coef0 = get_raw<double>(in);
    c.seed = get_raw<std::uint64_t>(in);
    c.eig_tol = get_raw<double>(in);
    c.center_kernel = get_raw<std::uint32_t>(in) == 1;
    family.feature_dim = get_raw<std::uint32_t>(in);
    family.dataset_fingerprint = get_raw<std::uint64_t>(in);

    family.bits.resize(c.num_bits);
    for (HashBit& bit : family.bits) {
        bit.anchor_ids.resize(c.anchors_per_bit);
        for (auto& id : bit.anchor_ids) id = get_raw<std::uint32_t>(in);
        bit.omega.resize(c.anchors_per_bit);
        for (auto& w : bit.omega) w = get_raw<double>(in);
    }
    return family;
}

}  // namespace patchsampler
