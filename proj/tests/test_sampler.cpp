// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <set>

#include "patchsampler/errors.hpp"
#include "patchsampler/sampler.hpp"
#include "sampler_oracle.hpp"
#include "test_support.hpp"

using namespace patchsampler;
using ps_test::make_bucket;
using ps_test::make_features;
using ps_test::random_features;

namespace {

Bucket sequential_bucket(std::size_t n) {
    std::vector<std::uint64_t> codes(n);
    for (std::size_t i = 0; i < n; ++i) codes[i] = i;
    return make_bucket(0, codes);
}

HashTable table_from_codes(const std::vector<HashCode>& codes, std::uint32_t bits,
                           std::uint32_t prefix) {
    return build_table(codes, bits, prefix);
}

}  // namespace

TEST_CASE("31 entries build a height-5 tree rooted at the median") {
    auto tree = build_bucket_tree(sequential_bucket(31));
    CHECK(tree.height() == 5);
    CHECK(tree.nodes()[0].entry.code.bits == 15);  // 16th smallest
    std::size_t counts[6] = {0};
    for (const auto& n : tree.nodes()) ++counts[n.depth];
    CHECK(counts[1] == 1);
    CHECK(counts[2] == 2);
    CHECK(counts[3] == 4);
    CHECK(counts[4] == 8);
    CHECK(counts[5] == 16);
}

TEST_CASE("single entry tree") {
    auto tree = build_bucket_tree(sequential_bucket(1));
    CHECK(tree.height() == 1);
    CHECK(tree.nodes().size() == 1);
}

TEST_CASE("three sorted codes") {
    auto tree = build_bucket_tree(make_bucket(0, {1, 2, 3}));
    CHECK(tree.nodes()[0].entry.code.bits == 2);
    REQUIRE(tree.nodes()[0].left >= 0);
    REQUIRE(tree.nodes()[0].right >= 0);
    CHECK(tree.nodes()[tree.nodes()[0].left].entry.code.bits == 1);
    CHECK(tree.nodes()[tree.nodes()[0].right].entry.code.bits == 3);
}

TEST_CASE("empty bucket is a contract error") {
    Bucket b;
    CHECK_THROWS_AS(build_bucket_tree(b), ContractError);
}

TEST_CASE("in-order traversal reproduces sorted order (BST property)") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        SplitMix64 rng(seed);
        const std::size_t n = 1 + rng.uniform_below(1000);
        auto tree = build_bucket_tree(sequential_bucket(n));

        // height is minimal
        std::uint32_t l = 1;
        while ((1ull << l) - 1 < n) ++l;
        CHECK(tree.height() == l);

        std::vector<std::uint64_t> inorder;
        auto walk = [&](auto&& self, std::int32_t idx) -> void {
            if (idx < 0) return;
            self(self, tree.nodes()[idx].left);
            inorder.push_back(tree.nodes()[idx].entry.code.bits);
            self(self, tree.nodes()[idx].right);
        };
        walk(walk, tree.root());
        REQUIRE(inorder.size() == n);
        for (std::size_t i = 0; i < n; ++i) CHECK(inorder[i] == i);

        // level occupancy never exceeds 2^{depth-1}
        std::vector<std::size_t> counts(tree.height() + 1, 0);
        for (const auto& node : tree.nodes()) ++counts[node.depth];
        for (std::uint32_t depth = 1; depth <= tree.height(); ++depth)
            CHECK(counts[depth] <= (1ull << (depth - 1)));
    }
}

TEST_CASE("level_order counts") {
    auto tree = build_bucket_tree(sequential_bucket(31));
    CHECK(level_order(tree, 4).size() == 15);
    CHECK(level_order(tree, 1).size() == 1);
    CHECK(level_order(tree, 5).size() == 31);
    CHECK_THROWS_AS(level_order(tree, 0), ContractError);
    CHECK_THROWS_AS(level_order(tree, 6), ContractError);
}

TEST_CASE("level-count law on random trees") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        SplitMix64 rng(100 + seed);
        const std::size_t n = 1 + rng.uniform_below(500);
        auto tree = build_bucket_tree(sequential_bucket(n));
        std::vector<std::size_t> at_depth(tree.height() + 1, 0);
        for (const auto& node : tree.nodes()) ++at_depth[node.depth];
        std::size_t cum = 0;
        for (std::uint32_t l = 1; l <= tree.height(); ++l) {
            cum += std::min<std::size_t>(1ull << (l - 1), at_depth[l]);
            CHECK(level_order(tree, l).size() == cum);
        }
    }
}

TEST_CASE("variance ratio examples") {
    SUBCASE("top level is exactly 1") {
        auto tree = build_bucket_tree(sequential_bucket(10));
        auto f = random_features(10, 3, 4);
        CHECK(variance_ratio(tree, tree.height(), f) == 1.0);
    }
    SUBCASE("single node is 1 via the zero-variance rule") {
        auto tree = build_bucket_tree(sequential_bucket(1));
        auto f = random_features(1, 3, 4);
        CHECK(variance_ratio(tree, 1, f) == 1.0);
    }
    SUBCASE("three nodes, middle selected, ratio 0") {
        // features {0, 5, 10}; level 1 keeps the middle value only
        auto tree = build_bucket_tree(make_bucket(0, {0, 1, 2}));
        auto f = make_features(3, 1, {0.0, 5.0, 10.0});
        CHECK(variance_ratio(tree, 1, f) == 0.0);
        CHECK(variance_ratio(tree, 2, f) == 1.0);
    }
}

TEST_CASE("bst_sample epsilon=1 takes whole buckets unless shallower levels already cover") {
    auto f = random_features(64, 2, 8);
    std::vector<HashCode> codes(64);
    SplitMix64 rng(5);
    for (std::size_t i = 0; i < 64; ++i) codes[i].bits = rng.uniform_below(256);
    auto table = table_from_codes(codes, 8, 2);
    auto result = bst_sample(table, f, 1.0);
    for (const auto& row : result.per_bucket) {
        CHECK(row.chosen_level >= 1);
        CHECK(row.variance_ratio >= 1.0);
    }
    CHECK(!result.selected.empty());
}

TEST_CASE("duplicate-only buckets collapse to their roots") {
    // 4 distinct codes, 10 copies each
    std::vector<HashCode> codes;
    for (std::uint64_t v : {0x00ull, 0x40ull, 0x80ull, 0xc0ull})
        for (int k = 0; k < 10; ++k) codes.push_back({v});
    FeatureMatrix f;
    f.rows = codes.size();
    f.cols = 2;
    f.data.resize(f.rows * 2);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        f.data[i * 2] = static_cast<double>(codes[i].bits);  // duplicates share features
        f.data[i * 2 + 1] = 1.0;
    }
    auto table = table_from_codes(codes, 8, 2);
    REQUIRE(table.bucket_count() == 4);
    auto result = bst_sample(table, f, 0.9);
    CHECK(result.selected.size() == 4);
    for (const auto& row : result.per_bucket) {
        CHECK(row.chosen_level == 1);
        CHECK(row.variance_ratio == 1.0);
        CHECK(row.selected_count == 1);
    }
}

TEST_CASE("epsilon validation") {
    auto f = random_features(4, 1, 2);
    std::vector<HashCode> codes(4, HashCode{1});
    auto table = table_from_codes(codes, 4, 2);
    CHECK_THROWS_AS(bst_sample(table, f, 0.0), ConfigError);
    CHECK_THROWS_AS(bst_sample(table, f, 1.5), ConfigError);
    CHECK_THROWS_AS(bst_sample(table, f, -0.2), ConfigError);
}

TEST_CASE("oracle equivalence on random small buckets") {
    int trials = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        SplitMix64 rng(seed * 7 + 1);
        const std::size_t n = 1 + rng.uniform_below(15);
        std::vector<HashCode> codes(n);
        for (auto& c : codes) c.bits = rng.uniform_below(64);
        FeatureMatrix f;
        f.rows = n;
        f.cols = 1;
        f.data.resize(n);
        for (auto& v : f.data) v = rng.uniform01();
        const double epsilon = 0.05 + 0.95 * rng.uniform01();

        auto table = table_from_codes(codes, 6, 3);
        auto result = bst_sample(table, f, epsilon);
        auto expected = ps_oracle::sample_table(table, f, epsilon);
        std::set<std::uint32_t> got(result.selected.begin(), result.selected.end());
        CHECK(got == expected);
        ++trials;
    }
    CHECK(trials == 1000);
}

TEST_CASE("selected sets are sound") {
    auto f = random_features(200, 3, 55);
    std::vector<HashCode> codes(200);
    SplitMix64 rng(55);
    for (auto& c : codes) c.bits = rng.uniform_below(1u << 10);
    auto table = table_from_codes(codes, 10, 4);
    auto result = bst_sample(table, f, 0.8);

    std::set<std::uint32_t> in_table;
    for (const auto& [key, bucket] : table.buckets())
        for (const auto& e : bucket.entries) in_table.insert(e.patch_id);
    std::set<std::uint32_t> unique(result.selected.begin(), result.selected.end());
    CHECK(unique.size() == result.selected.size());  // no duplicates
    for (auto id : result.selected) CHECK(in_table.count(id) == 1);
    for (const auto& row : result.per_bucket) CHECK(row.selected_count <= row.bucket_size);
}

TEST_CASE("cap sampling") {
    auto codes_for = [](std::size_t n, std::uint64_t code) {
        return std::vector<HashCode>(n, HashCode{code});
    };

    SUBCASE("cap above bucket size takes everything") {
        auto table = table_from_codes(codes_for(5, 0x10), 8, 4);
        auto result = cap_sample(table, 20, 1);
        CHECK(result.selected.size() == 5);
    }
    SUBCASE("oversized bucket is capped at 20") {
        auto table = table_from_codes(codes_for(100, 0x10), 8, 4);
        auto result = cap_sample(table, 20, 1);
        CHECK(result.selected.size() == 20);
        std::set<std::uint32_t> unique(result.selected.begin(), result.selected.end());
        CHECK(unique.size() == 20);
    }
    SUBCASE("same seed reproduces, different seed varies") {
        auto table = table_from_codes(codes_for(100, 0x10), 8, 4);
        auto a = cap_sample(table, 20, 7);
        auto b = cap_sample(table, 20, 7);
        CHECK(a.selected == b.selected);
        auto c = cap_sample(table, 20, 8);
        CHECK(a.selected != c.selected);
    }
    SUBCASE("cap covering max bucket size selects everything") {
        SplitMix64 rng(91);
        std::vector<HashCode> codes(150);
        for (auto& c : codes) c.bits = rng.uniform_below(16);
        auto table = table_from_codes(codes, 4, 2);
        auto result = cap_sample(table, 150, 0);
        CHECK(result.selected.size() == 150);
    }
}

TEST_CASE("target sampling") {
    SUBCASE("target = N on singleton buckets selects everything") {
        auto f = random_features(50, 2, 33);
        std::vector<HashCode> codes(50);
        for (std::size_t i = 0; i < 50; ++i) codes[i].bits = i;  // distinct keys
        auto table = table_from_codes(codes, 8, 8);
        auto result = target_sample(table, f, 50);
        CHECK(result.selected.size() == 50);
    }
    SUBCASE("target = N returns the epsilon = 1 extreme") {
        // the first level whose ratio clears epsilon can undershoot N when a
        // shallow prefix already carries more variance than its whole bucket
        auto f = random_features(50, 2, 33);
        std::vector<HashCode> codes(50);
        SplitMix64 rng(33);
        for (auto& c : codes) c.bits = rng.uniform_below(256);
        auto table = table_from_codes(codes, 8, 3);
        auto result = target_sample(table, f, 50);
        CHECK(result.selected.size() == bst_sample(table, f, 1.0).selected.size());
    }
    SUBCASE("all-duplicates corpus hits #buckets exactly") {
        std::vector<HashCode> codes;
        for (std::uint64_t v : {0x0ull, 0x4ull, 0x8ull})
            for (int k = 0; k < 10; ++k) codes.push_back({v});
        FeatureMatrix f;
        f.rows = 30;
        f.cols = 1;
        f.data.resize(30);
        for (std::size_t i = 0; i < 30; ++i) f.data[i] = static_cast<double>(codes[i].bits);
        auto table = table_from_codes(codes, 4, 2);
        auto result = target_sample(table, f, 3);
        CHECK(result.selected.size() == 3);
    }
    SUBCASE("range validation") {
        auto f = random_features(10, 1, 3);
        std::vector<HashCode> codes(10, HashCode{0});
        auto table = table_from_codes(codes, 4, 2);
        CHECK_THROWS_AS(target_sample(table, f, 0), ConfigError);
        CHECK_THROWS_AS(target_sample(table, f, 11), ConfigError);
    }
    SUBCASE("matches exhaustive epsilon sweep within one level increment") {
        auto f = random_features(300, 2, 21);
        std::vector<HashCode> codes(300);
        SplitMix64 rng(21);
        for (auto& c : codes) c.bits = rng.uniform_below(1u << 6);
        auto table = table_from_codes(codes, 6, 3);
        const std::size_t target = 120;
        auto result = target_sample(table, f, target);

        std::size_t best = table.total_entries();
        auto dist = [&](std::size_t v) {
            return v > target ? v - target : target - v;
        };
        for (int k = 1; k <= 1000; ++k) {
            auto r = bst_sample(table, f, k * 1e-3);
            if (dist(r.selected.size()) < dist(best)) best = r.selected.size();
        }
        std::size_t max_level_nodes = 0;
        for (const auto& [key, bucket] : table.buckets()) {
            auto tree = build_bucket_tree(bucket);
            std::vector<std::size_t> at(tree.height() + 1, 0);
            for (const auto& n : tree.nodes()) ++at[n.depth];
            for (auto c : at) max_level_nodes = std::max(max_level_nodes, c);
        }
        CHECK(dist(result.selected.size()) <= dist(best) + max_level_nodes);
    }
}
