// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace patchsampler {

enum class Label : std::uint8_t { settle, non_settle, unlabeled };

Label parse_label(const std::string& s);          // exact strings, case sensitive
std::string label_name(Label l);

enum class PixelType : std::uint32_t { u8 = 0, f32 = 1 };

// One image patch: raw samples plus identity and source-tile origin.
struct Patch {
    std::uint32_t patch_id = 0;
    std::vector<float> pixels;                    // H*W*C, row-major; u8 data kept as 0..255
    Label label = Label::unlabeled;
    std::string tile_id;
    std::int32_t origin_x = 0;
    std::int32_t origin_y = 0;
};

struct PatchSetHeader {
    std::uint32_t version = 1;
    std::uint32_t count = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    PixelType dtype = PixelType::u8;
};

// Ordered patch collection. Iteration order is ascending patch_id.
class PatchSet {
public:
    PatchSet() = default;
    PatchSet(PatchSetHeader header, std::vector<Patch> patches);

    const PatchSetHeader& header() const { return header_; }
    const std::vector<Patch>& patches() const { return patches_; }
    std::size_t size() const { return patches_.size(); }

    bool operator==(const PatchSet& other) const;

private:
    PatchSetHeader header_;
    std::vector<Patch> patches_;
};

enum class Normalize { none, per_patch_zscore, global_unit };
enum class BandMode { all_bands, luminance };

struct FeatureConfig {
    Normalize normalize = Normalize::none;
    std::uint32_t downsample_factor = 1;          // block-mean pooling
    BandMode band_mode = BandMode::all_bands;
};

// N rows of d features, 64-bit, row i = i-th smallest patch_id.
struct FeatureMatrix {
    std::vector<double> data;                     // row-major, N*d
    std::size_t rows = 0;
    std::size_t cols = 0;
    FeatureConfig source_config;

    const double* row(std::size_t i) const { return data.data() + i * cols; }
};

// Patch Pack container (magic "PPK1", see write_patch_pack).
PatchSet load_patch_pack(const std::filesystem::path& path);
void write_patch_pack(const PatchSet& set, const std::filesystem::path& path);

// Reads binary PGM/PPM files (one patch each, ascending filename order) with
// labels from the manifest CSV (`patch_id,label,tile_id,x,y`).
PatchSet ingest_image_dir(const std::filesystem::path& dir,
                          const std::filesystem::path& manifest_csv);

void write_manifest_csv(const PatchSet& set, const std::filesystem::path& path);

FeatureMatrix extract_features(const PatchSet& set, const FeatureConfig& cfg);

// FNV-1a over the feature bytes; identifies the dataset a hash family was built on.
std::uint64_t feature_fingerprint(const FeatureMatrix& features);

}  // namespace patchsampler
