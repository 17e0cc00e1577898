# SPDX-License-Identifier: Apache-2.0
"""Kernelized LSH patch hashing with variance-preserving bucket sampling."""

from ._core import (
    ConfigError,
    ContractError,
    CorruptionError,
    FormatError,
    HashFamily,
    HashTable,
    IoError,
    NumericError,
    PatchSet,
    SampleResult,
    bst_sample,
    build_hash_family,
    build_table,
    cap_sample,
    extract_features,
    hamming_distance,
    hamming_separation,
    hash_codes,
    ingest_image_dir,
    load_hash_family,
    load_patch_pack,
    target_sample,
    variance_report,
    write_patch_pack,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "CorruptionError",
    "FormatError",
    "HashFamily",
    "HashTable",
    "IoError",
    "NumericError",
    "PatchSet",
    "SampleResult",
    "bst_sample",
    "build_hash_family",
    "build_table",
    "cap_sample",
    "extract_features",
    "hamming_distance",
    "hamming_separation",
    "hash_codes",
    "ingest_image_dir",
    "load_hash_family",
    "load_patch_pack",
    "target_sample",
    "variance_report",
    "write_patch_pack",
]

__version__ = "0.1.0"
