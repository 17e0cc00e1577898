// SPDX-License-Identifier: Apache-2.0
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "patchsampler/dataset.hpp"
#include "patchsampler/errors.hpp"
#include "patchsampler/hashindex.hpp"
#include "patchsampler/klsh.hpp"
#include "patchsampler/metrics.hpp"
#include "patchsampler/sampler.hpp"

namespace py = pybind11;
using namespace patchsampler;

namespace {

using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureMatrix to_features(const DoubleArray& arr) {
    if (arr.ndim() != 2) throw ContractError("features must be a 2-D array");
    FeatureMatrix f;
    f.rows = static_cast<std::size_t>(arr.shape(0));
    f.cols = static_cast<std::size_t>(arr.shape(1));
    const double* p = arr.data();
    f.data.assign(p, p + f.rows * f.cols);
    return f;
}

py::array_t<double> from_features(const FeatureMatrix& f) {
    py::array_t<double> arr({f.rows, f.cols});
    std::copy(f.data.begin(), f.data.end(), arr.mutable_data());
    return arr;
}

std::vector<HashCode> to_codes(const py::array_t<std::uint64_t,
                                                 py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 1) throw ContractError("codes must be a 1-D array");
    std::vector<HashCode> codes(static_cast<std::size_t>(arr.shape(0)));
    const std::uint64_t* p = arr.data();
    for (std::size_t i = 0; i < codes.size(); ++i) codes[i].bits = p[i];
    return codes;
}

py::array_t<std::uint64_t> from_codes(const std::vector<HashCode>& codes) {
    py::array_t<std::uint64_t> arr(static_cast<py::ssize_t>(codes.size()));
    std::uint64_t* p = arr.mutable_data();
    for (std::size_t i = 0; i < codes.size(); ++i) p[i] = codes[i].bits;
    return arr;
}

std::vector<Label> to_labels(const std::optional<std::vector<std::string>>& names,
                             std::size_t n) {
    if (!names) return std::vector<Label>(n, Label::unlabeled);
    std::vector<Label> labels;
    labels.reserve(names->size());
    for (const auto& s : *names) labels.push_back(parse_label(s));
    return labels;
}

FeatureConfig make_feature_config(const std::string& normalize, std::uint32_t downsample,
                                  const std::string& band_mode) {
    FeatureConfig cfg;
    if (normalize == "none") cfg.normalize = Normalize::none;
    else if (normalize == "per_patch_zscore") cfg.normalize = Normalize::per_patch_zscore;
    else if (normalize == "global_unit") cfg.normalize = Normalize::global_unit;
    else throw ConfigError("unknown normalize mode: " + normalize);
    if (band_mode == "all_bands") cfg.band_mode = BandMode::all_bands;
    else if (band_mode == "luminance") cfg.band_mode = BandMode::luminance;
    else throw ConfigError("unknown band mode: " + band_mode);
    if (downsample == 0) throw ConfigError("downsample must be positive");
    cfg.downsample_factor = downsample;
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "KLSH patch hashing and variance-preserving bucket sampling";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<CorruptionError>(m, "CorruptionError", PyExc_ValueError);
    py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "NumericError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    py::class_<PatchSet>(m, "PatchSet")
        .def("__len__", &PatchSet::size)
        .def_property_readonly("height", [](const PatchSet& s) { return s.header().height; })
        .def_property_readonly("width", [](const PatchSet& s) { return s.header().width; })
        .def_property_readonly("channels",
                               [](const PatchSet& s) { return s.header().channels; })
        .def_property_readonly("labels", [](const PatchSet& s) {
            std::vector<std::string> out;
            out.reserve(s.size());
            for (const auto& p : s.patches()) out.push_back(label_name(p.label));
            return out;
        });

    m.def("ingest_image_dir", &ingest_image_dir, py::arg("directory"), py::arg("manifest"),
          "Read binary PGM/PPM patches with a labels manifest CSV");
    m.def("load_patch_pack", &load_patch_pack, py::arg("path"));
    m.def("write_patch_pack", &write_patch_pack, py::arg("patch_set"), py::arg("path"));

    m.def(
        "extract_features",
        [](const PatchSet& set, const std::string& normalize, std::uint32_t downsample,
           const std::string& band_mode) {
            return from_features(
                extract_features(set, make_feature_config(normalize, downsample, band_mode)));
        },
        py::arg("patch_set"), py::arg("normalize") = "none", py::arg("downsample") = 1,
        py::arg("band_mode") = "all_bands", "Feature matrix (N, d) as float64");

    py::class_<HashFamily>(m, "HashFamily")
        .def_property_readonly("num_bits",
                               [](const HashFamily& f) { return f.config.num_bits; })
        .def_property_readonly("anchors_per_bit",
                               [](const HashFamily& f) { return f.config.anchors_per_bit; })
        .def_property_readonly("subset_size",
                               [](const HashFamily& f) { return f.config.subset_size; })
        .def_property_readonly("kernel",
                               [](const HashFamily& f) {
                                   return kernel_kind_name(f.config.kernel.kind);
                               })
        .def_property_readonly("gamma", [](const HashFamily& f) { return f.config.kernel.gamma; })
        .def_property_readonly("seed", [](const HashFamily& f) { return f.config.seed; })
        .def_property_readonly("feature_dim", [](const HashFamily& f) { return f.feature_dim; })
        .def_property_readonly("dataset_fingerprint",
                               [](const HashFamily& f) { return f.dataset_fingerprint; })
        .def("save", &save_hash_family, py::arg("path"));

    m.def(
        "build_hash_family",
        [](const DoubleArray& features, std::uint32_t bits, std::uint32_t anchors,
           std::uint32_t subset, const std::string& kernel, std::optional<double> gamma,
           std::uint32_t degree, double coef0, const std::string& anchor_mode,
           std::uint64_t seed, double eig_tol, bool center_kernel) {
            const FeatureMatrix f = to_features(features);
            KlshConfig cfg;
            cfg.num_bits = bits;
            cfg.anchors_per_bit =
                anchors ? anchors
                        : static_cast<std::uint32_t>(std::min<std::size_t>(256, f.rows));
            cfg.subset_size =
                subset ? subset : std::min<std::uint32_t>(30, (cfg.anchors_per_bit + 3) / 4);
            cfg.kernel.kind = parse_kernel_kind(kernel);
            if (gamma) cfg.kernel.gamma = *gamma;
            else cfg.gamma_auto = true;
            cfg.kernel.degree = degree;
            cfg.kernel.coef0 = coef0;
            if (anchor_mode == "resample") cfg.anchor_mode = AnchorMode::resample_per_bit;
            else if (anchor_mode == "shared") cfg.anchor_mode = AnchorMode::shared_anchors;
            else throw ConfigError("unknown anchor mode: " + anchor_mode);
            cfg.seed = seed;
            cfg.eig_tol = eig_tol;
            cfg.center_kernel = center_kernel;
            return build_hash_family(f, cfg);
        },
        py::arg("features"), py::arg("bits") = 32, py::arg("anchors") = 0,
        py::arg("subset") = 0, py::arg("kernel") = "rbf", py::arg("gamma") = std::nullopt,
        py::arg("degree") = 2, py::arg("coef0") = 1.0, py::arg("anchor_mode") = "resample",
        py::arg("seed") = 0, py::arg("eig_tol") = 1e-10, py::arg("center_kernel") = true,
        "Draw anchors and weights for each hash bit (gamma=None resolves it from the data)");

    m.def("load_hash_family", &load_hash_family, py::arg("path"));

    m.def(
        "hash_codes",
        [](const HashFamily& family, const DoubleArray& build_features,
           const std::optional<DoubleArray>& features, unsigned threads) {
            const FeatureMatrix build = to_features(build_features);
            if (!features) return from_codes(hash_all(family, build, build, threads));
            return from_codes(hash_all(family, build, to_features(*features), threads));
        },
        py::arg("family"), py::arg("build_features"), py::arg("features") = std::nullopt,
        py::arg("threads") = 1, "Codes as uint64, one per feature row");

    py::class_<HashTable>(m, "HashTable")
        .def_property_readonly("prefix_len", &HashTable::prefix_len)
        .def_property_readonly("code_bits", &HashTable::code_bits)
        .def_property_readonly("total_entries", &HashTable::total_entries)
        .def_property_readonly("bucket_count", &HashTable::bucket_count)
        .def("bucket_sizes", [](const HashTable& t) {
            std::map<std::uint64_t, std::size_t> out;
            for (const auto& [key, bucket] : t.buckets()) out[key] = bucket.entries.size();
            return out;
        });

    m.def(
        "build_table",
        [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& codes,
           std::uint32_t code_bits, std::uint32_t prefix_len) {
            return build_table(to_codes(codes), code_bits, prefix_len);
        },
        py::arg("codes"), py::arg("code_bits"), py::arg("prefix_len"));

    py::class_<SampleResult>(m, "SampleResult")
        .def_property_readonly("selected",
                               [](const SampleResult& r) {
                                   py::array_t<std::uint32_t> arr(
                                       static_cast<py::ssize_t>(r.selected.size()));
                                   std::copy(r.selected.begin(), r.selected.end(),
                                             arr.mutable_data());
                                   return arr;
                               })
        .def_property_readonly("selected_level",
                               [](const SampleResult& r) { return r.selected_level; })
        .def_property_readonly("mode",
                               [](const SampleResult& r) {
                                   switch (r.mode) {
                                       case SampleMode::epsilon: return "epsilon";
                                       case SampleMode::target: return "target";
                                       case SampleMode::cap: return "cap";
                                   }
                                   return "epsilon";
                               })
        .def_property_readonly("epsilon", [](const SampleResult& r) { return r.epsilon; })
        .def_property_readonly("cap", [](const SampleResult& r) { return r.cap; })
        .def_property_readonly("seed", [](const SampleResult& r) { return r.seed; })
        .def_property_readonly("per_bucket", [](const SampleResult& r) {
            py::list rows;
            for (const auto& row : r.per_bucket)
                rows.append(py::make_tuple(row.bucket_key, row.bucket_size, row.chosen_level,
                                           row.variance_ratio, row.selected_count));
            return rows;
        });

    m.def(
        "bst_sample",
        [](const HashTable& table, const DoubleArray& features, double epsilon) {
            return bst_sample(table, to_features(features), epsilon);
        },
        py::arg("table"), py::arg("features"), py::arg("epsilon"),
        "Level-order tree sampling per bucket until the variance ratio clears epsilon");
    m.def("cap_sample", &cap_sample, py::arg("table"), py::arg("cap"), py::arg("seed"),
          "At most `cap` uniformly drawn entries per bucket");
    m.def(
        "target_sample",
        [](const HashTable& table, const DoubleArray& features, std::size_t target) {
            return target_sample(table, to_features(features), target);
        },
        py::arg("table"), py::arg("features"), py::arg("target"),
        "Bisect epsilon until |selected| is as close to target as achievable");

    m.def(
        "variance_report",
        [](const SampleResult& result, const DoubleArray& features,
           const std::optional<std::vector<std::string>>& labels) {
            const FeatureMatrix f = to_features(features);
            auto report = variance_report(result, f, to_labels(labels, f.rows));
            py::dict per_class;
            for (const auto& [label, ratio] : report.per_class_ratio)
                per_class[py::str(label_name(label))] = ratio;
            py::dict out;
            out["global_ratio"] = report.global_ratio;
            out["retention"] = report.retention;
            out["zero_variance_flag"] = report.zero_variance_flag;
            out["per_class_ratio"] = per_class;
            return out;
        },
        py::arg("result"), py::arg("features"), py::arg("labels") = std::nullopt);

    m.def(
        "hamming_separation",
        [](const py::array_t<std::uint64_t, py::array::c_style | py::array::forcecast>& codes,
           const std::vector<std::string>& labels, std::uint64_t seed) {
            auto code_vec = to_codes(codes);
            std::vector<Label> parsed;
            parsed.reserve(labels.size());
            for (const auto& s : labels) parsed.push_back(parse_label(s));
            auto stats = hamming_separation(code_vec, parsed, seed);
            py::dict out;
            out["intra_mean"] = stats.intra_mean;
            out["intra_stddev"] = stats.intra_stddev;
            out["inter_mean"] = stats.inter_mean ? py::object(py::float_(*stats.inter_mean))
                                                 : py::object(py::none());
            out["inter_stddev"] = stats.inter_stddev
                                      ? py::object(py::float_(*stats.inter_stddev))
                                      : py::object(py::none());
            out["exhaustive"] = stats.exhaustive;
            return out;
        },
        py::arg("codes"), py::arg("labels"), py::arg("seed") = 0);

    m.def(
        "hamming_distance",
        [](std::uint64_t a, std::uint64_t b) {
            return hamming_distance(HashCode{a}, HashCode{b});
        },
        py::arg("a"), py::arg("b"));
}
