// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "csv_util.hpp"
#include "patchsampler/errors.hpp"

namespace fs = std::filesystem;

namespace patchsampler {

Label parse_label(const std::string& s) {
    if (s == "settle") return Label::settle;
    if (s == "non_settle") return Label::non_settle;
    if (s == "unlabeled") return Label::unlabeled;
    throw FormatError("unknown label string: '" + s + "'");
}

std::string label_name(Label l) {
    switch (l) {
        case Label::settle: return "settle";
        case Label::non_settle: return "non_settle";
        case Label::unlabeled: return "unlabeled";
    }
    return "?";
}

PatchSet::PatchSet(PatchSetHeader header, std::vector<Patch> patches)
    : header_(header), patches_(std::move(patches)) {
    if (patches_.size() != header_.count)
        throw ContractError("PatchSet: header count " + std::to_string(header_.count) +
                            " != patch count " + std::to_string(patches_.size()));
    const std::size_t samples =
        static_cast<std::size_t>(header_.height) * header_.width * header_.channels;
    std::uint32_t prev = 0;
    bool first = true;
    for (const Patch& p : patches_) {
        if (p.pixels.size() != samples)
            throw ContractError("PatchSet: patch " + std::to_string(p.patch_id) +
                                " has wrong sample count");
        if (!first && p.patch_id <= prev)
            throw ContractError("PatchSet: patch ids not unique/ascending at " +
                                std::to_string(p.patch_id));
        prev = p.patch_id;
        first = false;
    }
}

bool PatchSet::operator==(const PatchSet& other) const {
    const auto& h = header_;
    const auto& g = other.header_;
    if (h.version != g.version || h.count != g.count || h.height != g.height ||
        h.width != g.width || h.channels != g.channels || h.dtype != g.dtype)
        return false;
    for (std::size_t i = 0; i < patches_.size(); ++i) {
        const Patch& a = patches_[i];
        const Patch& b = other.patches_[i];
        if (a.patch_id != b.patch_id || a.label != b.label || a.tile_id != b.tile_id ||
            a.origin_x != b.origin_x || a.origin_y != b.origin_y || a.pixels != b.pixels)
            return false;
    }
    return true;
}

namespace {

// Patch Pack header, 24 bytes little-endian:
//   magic "PPK1" | u32 version=1 | u32 N | u32 H | u32 W | u16 C | u16 dtype
// then N*H*W*C samples, row-major, patch-major (u8: 1 byte, f32: 4 bytes LE).
constexpr char kMagic[4] = {'P', 'P', 'K', '1'};
constexpr std::size_t kHeaderSize = 24;

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u16(const char* p) {
    return static_cast<std::uint8_t>(p[0]) |
           (static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[1])) << 8);
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

fs::path sibling_manifest(const fs::path& pack_path) {
    fs::path p = pack_path;
    p.replace_extension(".csv");
    return p;
}

struct ManifestRow {
    Label label = Label::unlabeled;
    std::string tile_id;
    std::int32_t x = 0;
    std::int32_t y = 0;
};

// Keyed by the first column: patch_id for pack sidecars, filename for ingest.
std::map<std::string, ManifestRow> read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError("manifest is empty: " + path.string());
    std::map<std::string, ManifestRow> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto cols = detail::split_csv(line);
        if (cols.size() != 5)
            throw FormatError("manifest row needs 5 columns, got " +
                              std::to_string(cols.size()) + ": " + line);
        ManifestRow row;
        row.label = parse_label(cols[1]);
        row.tile_id = cols[2];
        row.x = cols[3].empty() ? 0 : std::stoi(cols[3]);
        row.y = cols[4].empty() ? 0 : std::stoi(cols[4]);
        rows[cols[0]] = row;
    }
    return rows;
}

}  // namespace

PatchSet load_patch_pack(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open patch pack: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (bytes.size() < kHeaderSize)
        throw CorruptionError("patch pack shorter than 24-byte header", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("bad patch pack magic '" + bytes.substr(0, 4) + "', expected PPK1");

    PatchSetHeader header;
    header.version = get_u32(bytes.data() + 4);
    if (header.version != 1)
        throw FormatError("unsupported patch pack version " + std::to_string(header.version) +
                          " (supported: 1)");
    header.count = get_u32(bytes.data() + 8);
    header.height = get_u32(bytes.data() + 12);
    header.width = get_u32(bytes.data() + 16);
    header.channels = get_u16(bytes.data() + 20);
    const std::uint32_t dtype_raw = get_u16(bytes.data() + 22);
    if (dtype_raw > 1)
        throw FormatError("unknown patch pack dtype " + std::to_string(dtype_raw));
    header.dtype = static_cast<PixelType>(dtype_raw);

    const std::size_t per_patch =
        static_cast<std::size_t>(header.height) * header.width * header.channels;
    const std::size_t sample_bytes = header.dtype == PixelType::u8 ? 1 : 4;
    const std::size_t expected = kHeaderSize + header.count * per_patch * sample_bytes;
    if (bytes.size() != expected)
        throw CorruptionError("patch pack payload truncated, expected " +
                                  std::to_string(expected) + " bytes",
                              bytes.size());

    std::vector<Patch> patches(header.count);
    const char* p = bytes.data() + kHeaderSize;
    for (std::uint32_t n = 0; n < header.count; ++n) {
        Patch& patch = patches[n];
        patch.patch_id = n;
        patch.pixels.resize(per_patch);
        if (header.dtype == PixelType::u8) {
            for (std::size_t i = 0; i < per_patch; ++i)
                patch.pixels[i] = static_cast<float>(static_cast<std::uint8_t>(p[i]));
            p += per_patch;
        } else {
            for (std::size_t i = 0; i < per_patch; ++i) {
                std::uint32_t raw = get_u32(p + 4 * i);
                patch.pixels[i] = std::bit_cast<float>(raw);
            }
            p += 4 * per_patch;
        }
    }

    const fs::path manifest = sibling_manifest(path);
    if (fs::exists(manifest)) {
        auto rows = read_manifest(manifest);
        for (Patch& patch : patches) {
            auto it = rows.find(std::to_string(patch.patch_id));
            if (it == rows.end()) continue;
            patch.label = it->second.label;
            patch.tile_id = it->second.tile_id;
            patch.origin_x = it->second.x;
            patch.origin_y = it->second.y;
        }
    }
    return PatchSet(header, std::move(patches));
}

void write_patch_pack(const PatchSet& set, const fs::path& path) {
    const PatchSetHeader& h = set.header();
    std::string bytes;
    const std::size_t per_patch = static_cast<std::size_t>(h.height) * h.width * h.channels;
    const std::size_t sample_bytes = h.dtype == PixelType::u8 ? 1 : 4;
    bytes.reserve(kHeaderSize + set.size() * per_patch * sample_bytes);
    bytes.append(kMagic, 4);
    put_u32(bytes, h.version);
    put_u32(bytes, h.count);
    put_u32(bytes, h.height);
    put_u32(bytes, h.width);
    put_u16(bytes, static_cast<std::uint16_t>(h.channels));
    put_u16(bytes, static_cast<std::uint16_t>(h.dtype));

    for (const Patch& patch : set.patches()) {
        if (h.dtype == PixelType::u8) {
            for (float v : patch.pixels)
                bytes.push_back(static_cast<char>(static_cast<std::uint8_t>(v)));
        } else {
            for (float v : patch.pixels) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write patch pack: " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
    out.close();

    write_manifest_csv(set, sibling_manifest(path));
}

void write_manifest_csv(const PatchSet& set, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << "patch_id,label,tile_id,x,y\n";
    for (const Patch& p : set.patches())
        out << p.patch_id << ',' << label_name(p.label) << ',' << p.tile_id << ','
            << p.origin_x << ',' << p.origin_y << '\n';
}

namespace {

// Binary PGM (P5) / PPM (P6), maxval 255.
struct PnmImage {
    std::uint32_t height = 0, width = 0, channels = 0;
    std::vector<float> pixels;
};

PnmImage read_pnm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open image: " + path.string());
    std::string magic;
    in >> magic;
    std::uint32_t channels = 0;
    if (magic == "P5") channels = 1;
    else if (magic == "P6") channels = 3;
    else throw FormatError(path.string() + ": unsupported image magic '" + magic +
                           "' (binary PGM/PPM only)");

    auto next_token = [&]() -> std::string {
        std::string tok;
        for (;;) {
            in >> tok;
            if (!in) throw FormatError(path.string() + ": truncated PNM header");
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
    };
    const std::uint32_t width = static_cast<std::uint32_t>(std::stoul(next_token()));
    const std::uint32_t height = static_cast<std::uint32_t>(std::stoul(next_token()));
    const std::uint32_t maxval = static_cast<std::uint32_t>(std::stoul(next_token()));
    if (maxval != 255)
        throw FormatError(path.string() + ": maxval must be 255, got " + std::to_string(maxval));
    in.get();  // single whitespace after maxval

    PnmImage img;
    img.height = height;
    img.width = width;
    img.channels = channels;
    const std::size_t count = static_cast<std::size_t>(height) * width * channels;
    std::vector<char> raw(count);
    in.read(raw.data(), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count)
        throw CorruptionError(path.string() + ": truncated pixel data",
                              static_cast<std::uint64_t>(in.gcount()));
    img.pixels.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        img.pixels[i] = static_cast<float>(static_cast<std::uint8_t>(raw[i]));
    return img;
}

}  // namespace

PatchSet ingest_image_dir(const fs::path& dir, const fs::path& manifest_csv) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());

    std::map<std::string, ManifestRow> rows;
    if (!manifest_csv.empty()) {
        if (!fs::exists(manifest_csv))
            throw IoError("manifest not found: " + manifest_csv.string());
        rows = read_manifest(manifest_csv);
    }
    for (const auto& [name, row] : rows)
        if (!fs::exists(dir / name))
            throw FormatError("manifest references missing file: " + name);

    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file()) names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());

    PatchSetHeader header;
    std::vector<Patch> patches;
    std::vector<std::string> offenders;
    std::uint32_t id = 0;
    for (const std::string& name : names) {
        PnmImage img = read_pnm(dir / name);
        if (patches.empty()) {
            header.height = img.height;
            header.width = img.width;
            header.channels = img.channels;
        } else if (img.height != header.height || img.width != header.width ||
                   img.channels != header.channels) {
            offenders.push_back(name + " (" + std::to_string(img.width) + "x" +
                                std::to_string(img.height) + "x" +
                                std::to_string(img.channels) + ")");
            continue;
        }
        Patch p;
        p.patch_id = id++;
        p.pixels = std::move(img.pixels);
        if (auto it = rows.find(name); it != rows.end()) {
            p.label = it->second.label;
            p.tile_id = it->second.tile_id;
            p.origin_x = it->second.x;
            p.origin_y = it->second.y;
        }
        patches.push_back(std::move(p));
    }
    if (!offenders.empty()) {
        std::string msg = "image dimension mismatch:";
        for (const auto& o : offenders) msg += " " + o;
        throw FormatError(msg);
    }
    header.count = static_cast<std::uint32_t>(patches.size());
    header.dtype = PixelType::u8;
    return PatchSet(header, std::move(patches));
}

FeatureMatrix extract_features(const PatchSet& set, const FeatureConfig& cfg) {
    const PatchSetHeader& h = set.header();
    if (cfg.downsample_factor == 0)
        throw ConfigError("downsample_factor must be positive");
    const std::uint32_t f = cfg.downsample_factor;
    // crop the bottom/right remainder, then pool
    const std::uint32_t ph = h.height / f;
    const std::uint32_t pw = h.width / f;
    if (set.size() > 0 && (ph == 0 || pw == 0))
        throw ConfigError("downsample_factor " + std::to_string(f) +
                          " larger than patch dimensions " + std::to_string(h.height) + "x" +
                          std::to_string(h.width));
    const std::uint32_t out_c = cfg.band_mode == BandMode::luminance ? 1 : h.channels;
    const std::size_t d = static_cast<std::size_t>(ph) * pw * out_c;

    FeatureMatrix out;
    out.rows = set.size();
    out.cols = d;
    out.source_config = cfg;
    out.data.assign(out.rows * d, 0.0);

    const double scale = h.dtype == PixelType::u8 ? 1.0 / 255.0 : 1.0;
    for (std::size_t n = 0; n < set.size(); ++n) {
        const Patch& patch = set.patches()[n];
        double* row = out.data.data() + n * d;
        for (std::uint32_t by = 0; by < ph; ++by) {
            for (std::uint32_t bx = 0; bx < pw; ++bx) {
                for (std::uint32_t c = 0; c < out_c; ++c) {
                    double sum = 0.0;
                    std::size_t count = 0;
                    for (std::uint32_t dy = 0; dy < f; ++dy) {
                        for (std::uint32_t dx = 0; dx < f; ++dx) {
                            const std::size_t px =
                                ((static_cast<std::size_t>(by) * f + dy) * h.width +
                                 (static_cast<std::size_t>(bx) * f + dx)) *
                                h.channels;
                            if (cfg.band_mode == BandMode::luminance) {
                                for (std::uint32_t ch = 0; ch < h.channels; ++ch)
                                    sum += patch.pixels[px + ch];
                                count += h.channels;
                            } else {
                                sum += patch.pixels[px + c];
                                ++count;
                            }
                        }
                    }
                    row[(static_cast<std::size_t>(by) * pw + bx) * out_c + c] =
                        scale * sum / static_cast<double>(count);
                }
            }
        }
    }

    if (cfg.normalize == Normalize::per_patch_zscore) {
        for (std::size_t n = 0; n < out.rows; ++n) {
            double* row = out.data.data() + n * d;
            double mean = 0.0;
            for (std::size_t j = 0; j < d; ++j) mean += row[j];
            mean /= static_cast<double>(d);
            double var = 0.0;
            for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
            var /= static_cast<double>(d);
            if (var == 0.0) {
                // constant patch: all-zeros row
                for (std::size_t j = 0; j < d; ++j) row[j] = 0.0;
            } else {
                const double inv = 1.0 / std::sqrt(var);
                for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mean) * inv;
            }
        }
    } else if (cfg.normalize == Normalize::global_unit && !out.data.empty()) {
        double lo = out.data[0], hi = out.data[0];
        for (double v : out.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi > lo) {
            const double inv = 1.0 / (hi - lo);
            for (double& v : out.data) v = (v - lo) * inv;
        } else {
            for (double& v : out.data) v = 0.0;
        }
    }

    for (double v : out.data)
        if (!std::isfinite(v)) throw NumericError("extract_features: non-finite feature value");
    return out;
}

std::uint64_t feature_fingerprint(const FeatureMatrix& features) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](const void* data, std::size_t len) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    std::uint64_t dims[2] = {features.rows, features.cols};
    mix(dims, sizeof dims);
    mix(features.data.data(), features.data.size() * sizeof(double));
    return h;
}

}  // namespace patchsampler
