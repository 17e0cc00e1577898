// SPDX-License-Identifier: Apache-2.0
//
// psample: ingest -> hash -> sample -> report pipeline driver.
// Exit codes: 0 success, 2 config/usage error, 3 numeric/contract failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "csv_util.hpp"
#include "patchsampler/dataset.hpp"
#include "patchsampler/errors.hpp"
#include "patchsampler/hashindex.hpp"
#include "patchsampler/klsh.hpp"
#include "patchsampler/metrics.hpp"
#include "patchsampler/sampler.hpp"

namespace fs = std::filesystem;
using namespace patchsampler;

namespace {

// Flat `key = value` config file; '#' starts a comment line.
std::map<std::string, std::string> read_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    auto trim = [](std::string s) {
        const char* ws = " \t\r";
        s.erase(0, s.find_first_not_of(ws));
        const auto end = s.find_last_not_of(ws);
        s.erase(end == std::string::npos ? 0 : end + 1);
        return s;
    };
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line is not `key = value`: " + line);
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

struct CommonOpts {
    std::string config_path;
    std::string normalize = "none";
    std::string band_mode = "all_bands";
    std::uint32_t downsample = 1;
    unsigned threads = 1;

    std::string kernel = "rbf";
    std::string gamma = "auto";
    std::uint32_t degree = 2;
    double coef0 = 1.0;
    std::uint32_t bits = 32;
    std::uint32_t anchors = 0;      // 0 = min(256, N)
    std::uint32_t subset = 0;       // 0 = min(30, ceil(M/4))
    std::string anchor_mode = "resample";
    std::uint64_t seed = 0;
    double eig_tol = 1e-10;
    bool center_kernel = true;
    std::uint32_t prefix_bits = 0;  // 0 = min(16, bits)
};

FeatureConfig make_feature_config(const CommonOpts& o) {
    FeatureConfig cfg;
    if (o.normalize == "none") cfg.normalize = Normalize::none;
    else if (o.normalize == "per_patch_zscore") cfg.normalize = Normalize::per_patch_zscore;
    else if (o.normalize == "global_unit") cfg.normalize = Normalize::global_unit;
    else throw ConfigError("unknown normalize mode: " + o.normalize);
    if (o.band_mode == "all_bands") cfg.band_mode = BandMode::all_bands;
    else if (o.band_mode == "luminance") cfg.band_mode = BandMode::luminance;
    else throw ConfigError("unknown band mode: " + o.band_mode);
    if (o.downsample == 0) throw ConfigError("downsample must be positive");
    cfg.downsample_factor = o.downsample;
    return cfg;
}

KlshConfig make_klsh_config(const CommonOpts& o, std::size_t n) {
    KlshConfig cfg;
    cfg.num_bits = o.bits;
    cfg.anchors_per_bit =
        o.anchors ? o.anchors : static_cast<std::uint32_t>(std::min<std::size_t>(256, n));
    cfg.subset_size =
        o.subset ? o.subset
                 : std::min<std::uint32_t>(30, (cfg.anchors_per_bit + 3) / 4);
    if (o.anchor_mode == "resample") cfg.anchor_mode = AnchorMode::resample_per_bit;
    else if (o.anchor_mode == "shared") cfg.anchor_mode = AnchorMode::shared_anchors;
    else throw ConfigError("unknown anchor mode: " + o.anchor_mode);
    cfg.kernel.kind = parse_kernel_kind(o.kernel);
    if (o.gamma == "auto") cfg.gamma_auto = true;
    else cfg.kernel.gamma = std::stod(o.gamma);
    cfg.kernel.degree = o.degree;
    cfg.kernel.coef0 = o.coef0;
    cfg.seed = o.seed;
    cfg.eig_tol = o.eig_tol;
    cfg.center_kernel = o.center_kernel;
    return cfg;
}

std::uint32_t resolve_prefix(const CommonOpts& o, std::uint32_t code_bits) {
    return o.prefix_bits ? o.prefix_bits : std::min<std::uint32_t>(16, code_bits);
}

void add_common_flags(CLI::App* cmd, CommonOpts& o, bool with_klsh) {
    cmd->add_option("--config", o.config_path, "flat key=value config file");
    cmd->add_option("--normalize", o.normalize, "none|per_patch_zscore|global_unit");
    cmd->add_option("--band-mode", o.band_mode, "all_bands|luminance");
    cmd->add_option("--downsample", o.downsample, "block-mean pooling factor");
    cmd->add_option("--threads", o.threads, "worker thread cap");
    if (with_klsh) {
        cmd->add_option("--kernel", o.kernel, "rbf|laplacian|polynomial");
        cmd->add_option("--gamma", o.gamma, "bandwidth, or 'auto'");
        cmd->add_option("--degree", o.degree, "polynomial degree");
        cmd->add_option("--coef0", o.coef0, "polynomial additive constant");
        cmd->add_option("--bits", o.bits, "hash code length I");
        cmd->add_option("--anchors", o.anchors, "anchors per bit M (0 = auto)");
        cmd->add_option("--subset", o.subset, "indexing vector ones t (0 = auto)");
        cmd->add_option("--anchor-mode", o.anchor_mode, "resample|shared");
        cmd->add_option("--seed", o.seed, "RNG seed");
        cmd->add_option("--eig-tol", o.eig_tol, "eigenvalue cutoff (relative)");
        cmd->add_flag("--center-kernel,!--no-center-kernel", o.center_kernel,
                      "center the kernel matrix (default on)");
    }
    cmd->add_option("--prefix-bits", o.prefix_bits, "bucket key prefix length b (0 = auto)");
}

// Applies config-file values to options the command line did not set.
void apply_config_file(CLI::App* cmd, CommonOpts& o) {
    if (o.config_path.empty()) return;
    auto kv = read_config_file(o.config_path);
    auto take = [&](const char* key, auto& slot, const char* flag) {
        auto it = kv.find(key);
        if (it == kv.end()) return;
        auto* opt = cmd->get_option_no_throw(flag);
        if (opt && opt->count() > 0) return;  // flags override file values
        std::istringstream ss(it->second);
        ss >> slot;
        if (ss.fail()) throw ConfigError(std::string("bad config value for ") + key);
    };
    take("normalize", o.normalize, "--normalize");
    take("band_mode", o.band_mode, "--band-mode");
    take("downsample", o.downsample, "--downsample");
    take("threads", o.threads, "--threads");
    take("kernel", o.kernel, "--kernel");
    take("gamma", o.gamma, "--gamma");
    take("degree", o.degree, "--degree");
    take("coef0", o.coef0, "--coef0");
    take("bits", o.bits, "--bits");
    take("anchors", o.anchors, "--anchors");
    take("subset", o.subset, "--subset");
    take("anchor_mode", o.anchor_mode, "--anchor-mode");
    take("seed", o.seed, "--seed");
    take("eig_tol", o.eig_tol, "--eig-tol");
    take("prefix_bits", o.prefix_bits, "--prefix-bits");
    if (auto it = kv.find("center_kernel"); it != kv.end()) {
        auto* opt = cmd->get_option_no_throw("--center-kernel");
        if (!(opt && opt->count() > 0)) o.center_kernel = it->second == "1" || it->second == "true";
    }
}

std::vector<HashCode> read_codes_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open codes file: " + path.string());
    std::string line;
    if (!std::getline(in, line) || detail::split_csv(line).size() != 2)
        throw FormatError("codes file missing `patch_id,code_hex` header: " + path.string());
    std::vector<HashCode> codes;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cols = detail::split_csv(line);
        if (cols.size() != 2) throw FormatError("bad codes row: " + line);
        const std::size_t id = std::stoull(cols[0]);
        if (codes.size() != id)
            throw FormatError("codes file rows must be dense ascending patch ids");
        codes.push_back({std::stoull(cols[1], nullptr, 16)});
    }
    return codes;
}

void write_codes_csv(const std::vector<HashCode>& codes, const fs::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write codes file: " + path.string());
    out << "patch_id,code_hex\n";
    for (std::size_t i = 0; i < codes.size(); ++i)
        out << i << ',' << detail::fmt_hex(codes[i].bits) << '\n';
}

std::vector<Label> labels_of(const PatchSet& set) {
    std::vector<Label> labels;
    labels.reserve(set.size());
    for (const Patch& p : set.patches()) labels.push_back(p.label);
    return labels;
}

int run_ingest(const std::string& images, const std::string& manifest,
               const std::string& pack_in, const std::string& out) {
    PatchSet set = pack_in.empty()
                       ? ingest_image_dir(images, manifest.empty() ? fs::path() : fs::path(manifest))
                       : load_patch_pack(pack_in);
    write_patch_pack(set, out);
    const auto& h = set.header();
    std::cout << "N=" << h.count << " H=" << h.height << " W=" << h.width
              << " C=" << h.channels << '\n';
    return 0;
}

int run_hash(const std::string& pack, const std::string& out_dir, const CommonOpts& o) {
    const PatchSet set = load_patch_pack(pack);
    const FeatureMatrix features = extract_features(set, make_feature_config(o));
    const KlshConfig cfg = make_klsh_config(o, features.rows);
    cfg.validate(features.rows);  // fail before creating any output

    const HashFamily family = build_hash_family(features, cfg);
    const std::vector<HashCode> codes = hash_all(family, features, features, o.threads);

    fs::create_directories(out_dir);
    save_hash_family(family, fs::path(out_dir) / "family.klf");
    write_codes_csv(codes, fs::path(out_dir) / "codes.csv");

    const HashTable table = build_table(codes, cfg.num_bits, resolve_prefix(o, cfg.num_bits));
    const BucketStats stats = bucket_stats(table);
    std::cout << "buckets=" << stats.bucket_count << " min=" << stats.min_size
              << " median=" << stats.median_size << " mean=" << stats.mean_size
              << " max=" << stats.max_size << '\n';
    return 0;
}

int run_sample(const std::string& pack, const std::string& hash_dir, const std::string& out_dir,
               const CommonOpts& o, std::optional<double> epsilon,
               std::optional<std::size_t> target, std::optional<std::uint32_t> cap,
               std::uint64_t cap_seed) {
    const int modes = (epsilon ? 1 : 0) + (target ? 1 : 0) + (cap ? 1 : 0);
    if (modes != 1)
        throw ConfigError("exactly one of --epsilon, --target, --cap must be given");
    if (epsilon && (!(*epsilon > 0.0) || *epsilon > 1.0))
        throw ConfigError("epsilon must be in (0, 1]");

    const PatchSet set = load_patch_pack(pack);
    const FeatureMatrix features = extract_features(set, make_feature_config(o));
    const HashFamily family = load_hash_family(fs::path(hash_dir) / "family.klf");
    const std::vector<HashCode> codes = read_codes_csv(fs::path(hash_dir) / "codes.csv");
    if (codes.size() != features.rows)
        throw ContractError("codes count does not match pack size");

    const HashTable table =
        build_table(codes, family.config.num_bits, resolve_prefix(o, family.config.num_bits));

    SampleResult result;
    if (epsilon) result = bst_sample(table, features, *epsilon);
    else if (target) result = target_sample(table, features, *target);
    else result = cap_sample(table, *cap, cap_seed);

    fs::create_directories(out_dir);
    write_selection_manifest(result, table, fs::path(out_dir) / "selection.csv");
    write_bucket_summary(result, fs::path(out_dir) / "buckets.csv");
    emit_variance_csv(variance_report(result, features, labels_of(set)),
                      fs::path(out_dir) / "variance.csv");

    std::cout << "selected=" << result.selected.size() << '/' << features.rows;
    if (result.mode != SampleMode::cap) std::cout << " epsilon=" << result.epsilon;
    std::cout << '\n';
    return 0;
}

int run_report(const std::string& pack, const std::string& hash_dir,
               const std::string& out_dir, const CommonOpts& o) {
    const PatchSet set = load_patch_pack(pack);
    const HashFamily family = load_hash_family(fs::path(hash_dir) / "family.klf");
    const std::vector<HashCode> codes = read_codes_csv(fs::path(hash_dir) / "codes.csv");
    if (codes.size() != set.size())
        throw ContractError("codes count does not match pack size");

    const HashTable table =
        build_table(codes, family.config.num_bits, resolve_prefix(o, family.config.num_bits));

    fs::create_directories(out_dir);
    const SeparationStats sep = hamming_separation(codes, labels_of(set), family.config.seed);
    emit_separation_csv(sep, fs::path(out_dir) / "separation.csv");
    emit_occupancy_csv(bucket_stats(table), fs::path(out_dir) / "occupancy.csv");
    dump_table_csv(table, fs::path(out_dir) / "table.csv");

    std::cout << "intra_mean=" << sep.intra_mean;
    if (sep.inter_mean) std::cout << " inter_mean=" << *sep.inter_mean;
    std::cout << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"image patch corpus curation: hash, bucket, and sample"};
    app.require_subcommand(1);

    // ingest
    auto* ingest = app.add_subcommand("ingest", "build a patch pack from images");
    std::string images, manifest, pack_in, ingest_out;
    ingest->add_option("--images", images, "directory of PGM/PPM patches");
    ingest->add_option("--manifest", manifest, "filename,label,tile_id,x,y CSV");
    ingest->add_option("--pack", pack_in, "existing patch pack to re-write");
    ingest->add_option("--out", ingest_out, "output pack path")->required();

    // hash
    auto* hash = app.add_subcommand("hash", "build the hash family and code every patch");
    std::string hash_pack, hash_out;
    CommonOpts hash_opts;
    hash->add_option("--pack", hash_pack, "input patch pack")->required();
    hash->add_option("--out", hash_out, "output directory")->required();
    add_common_flags(hash, hash_opts, true);

    // sample
    auto* sample = app.add_subcommand("sample", "select a subset from the hash table");
    std::string sample_pack, sample_hash_dir, sample_out;
    CommonOpts sample_opts;
    double eps_val = 0.0;
    std::size_t target_val = 0;
    std::uint32_t cap_val = 0;
    std::uint64_t cap_seed = 0;
    sample->add_option("--pack", sample_pack, "input patch pack")->required();
    sample->add_option("--hash-dir", sample_hash_dir, "directory with family.klf + codes.csv")
        ->required();
    sample->add_option("--out", sample_out, "output directory")->required();
    auto* eps_opt = sample->add_option("--epsilon", eps_val, "variance ratio threshold");
    auto* target_opt = sample->add_option("--target", target_val, "target subset size");
    auto* cap_opt = sample->add_option("--cap", cap_val, "max patches per bucket");
    sample->add_option("--seed", cap_seed, "seed for cap sampling");
    add_common_flags(sample, sample_opts, false);

    // report
    auto* report = app.add_subcommand("report", "hash quality and occupancy reports");
    std::string report_pack, report_hash_dir, report_out;
    CommonOpts report_opts;
    report->add_option("--pack", report_pack, "input patch pack")->required();
    report->add_option("--hash-dir", report_hash_dir, "directory with family.klf + codes.csv")
        ->required();
    report->add_option("--out", report_out, "output directory")->required();
    add_common_flags(report, report_opts, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        app.exit(e);
        return 2;
    }

    try {
        if (ingest->parsed()) {
            if (images.empty() == pack_in.empty())
                throw ConfigError("ingest needs exactly one of --images or --pack");
            return run_ingest(images, manifest, pack_in, ingest_out);
        }
        if (hash->parsed()) {
            apply_config_file(hash, hash_opts);
            return run_hash(hash_pack, hash_out, hash_opts);
        }
        if (sample->parsed()) {
            apply_config_file(sample, sample_opts);
            return run_sample(sample_pack, sample_hash_dir, sample_out, sample_opts,
                              eps_opt->count() ? std::optional<double>(eps_val) : std::nullopt,
                              target_opt->count() ? std::optional<std::size_t>(target_val)
                                                  : std::nullopt,
                              cap_opt->count() ? std::optional<std::uint32_t>(cap_val)
                                               : std::nullopt,
                              cap_seed);
        }
        if (report->parsed()) {
            apply_config_file(report, report_opts);
            return run_report(report_pack, report_hash_dir, report_out, report_opts);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
