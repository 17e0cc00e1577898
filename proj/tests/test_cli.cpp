// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(PSAMPLE_BIN) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path temp_dir(const std::string& tag) {
    fs::path dir = fs::temp_directory_path() / ("ps_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_pgm(const fs::path& p, std::uint32_t w, std::uint32_t h, std::uint8_t base) {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n" << w << " " << h << "\n255\n";
    for (std::uint32_t i = 0; i < w * h; ++i)
        out.put(static_cast<char>((base + i * 13) % 256));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// a small labeled corpus plus pack, shared across cases
struct Corpus {
    fs::path dir;
    fs::path pack;
    Corpus() {
        dir = temp_dir("corpus");
        fs::create_directories(dir / "img");
        std::ofstream manifest(dir / "m.csv");
        manifest << "filename,label,tile_id,x,y\n";
        char name[16];
        for (int i = 0; i < 24; ++i) {
            std::snprintf(name, sizeof(name), "p%02d.pgm", i);
            write_pgm(dir / "img" / name, 4, 4, static_cast<std::uint8_t>(i * 11));
            manifest << name << (i % 2 ? ",settle,t0," : ",non_settle,t1,") << i << ",0\n";
        }
        manifest.close();
        pack = dir / "d.ppk";
        REQUIRE(run("ingest --images " + (dir / "img").string() + " --manifest " +
                    (dir / "m.csv").string() + " --out " + pack.string()) == 0);
    }
};

}  // namespace

TEST_CASE("cli pipeline") {
    Corpus corpus;
    const std::string common = " --bits 8 --anchors 6 --subset 2 --seed 7 --prefix-bits 4";

    SUBCASE("missing manifest exits 2 and writes nothing") {
        auto dir = temp_dir("missing_manifest");
        CHECK(run("ingest --images " + (corpus.dir / "img").string() +
                  " --manifest /nonexistent/m.csv --out " + (dir / "x.ppk").string()) == 2);
        CHECK(!fs::exists(dir / "x.ppk"));
    }

    SUBCASE("mixed-size images exit 2") {
        auto dir = temp_dir("mixed");
        fs::create_directories(dir / "img");
        write_pgm(dir / "img" / "a.pgm", 4, 4, 0);
        write_pgm(dir / "img" / "b.pgm", 8, 8, 0);
        CHECK(run("ingest --images " + (dir / "img").string() + " --out " +
                  (dir / "x.ppk").string()) == 2);
    }

    SUBCASE("hash is deterministic and bad config exits 2") {
        auto out1 = temp_dir("hash1");
        auto out2 = temp_dir("hash2");
        REQUIRE(run("hash --pack " + corpus.pack.string() + " --out " + out1.string() +
                    common) == 0);
        REQUIRE(run("hash --pack " + corpus.pack.string() + " --out " + out2.string() +
                    common) == 0);
        CHECK(slurp(out1 / "codes.csv") == slurp(out2 / "codes.csv"));
        CHECK(slurp(out1 / "family.klf") == slurp(out2 / "family.klf"));

        CHECK(run("hash --pack " + corpus.pack.string() + " --out " + out1.string() +
                  " --bits 0") == 2);
    }

    SUBCASE("polynomial kernel flags flow through") {
        auto out = temp_dir("hash_poly");
        REQUIRE(run("hash --pack " + corpus.pack.string() + " --out " + out.string() +
                    " --kernel polynomial --degree 2 --gamma 1.0" + common) == 0);
        CHECK(fs::exists(out / "codes.csv"));
        CHECK(fs::exists(out / "family.klf"));
    }

    SUBCASE("sample modes and reports") {
        auto hash_out = temp_dir("hash_for_sample");
        REQUIRE(run("hash --pack " + corpus.pack.string() + " --out " + hash_out.string() +
                    common) == 0);

        auto eps_out = temp_dir("sample_eps");
        CHECK(run("sample --pack " + corpus.pack.string() + " --hash-dir " +
                  hash_out.string() + " --out " + eps_out.string() +
                  " --epsilon 0.9 --prefix-bits 4") == 0);
        CHECK(fs::exists(eps_out / "selection.csv"));
        CHECK(fs::exists(eps_out / "buckets.csv"));
        CHECK(fs::exists(eps_out / "variance.csv"));

        auto cap_out = temp_dir("sample_cap");
        CHECK(run("sample --pack " + corpus.pack.string() + " --hash-dir " +
                  hash_out.string() + " --out " + cap_out.string() +
                  " --cap 20 --seed 1 --prefix-bits 4") == 0);

        // exactly one mode must be chosen
        CHECK(run("sample --pack " + corpus.pack.string() + " --hash-dir " +
                  hash_out.string() + " --out " + cap_out.string() +
                  " --epsilon 0.5 --cap 3 --prefix-bits 4") == 2);
        CHECK(run("sample --pack " + corpus.pack.string() + " --hash-dir " +
                  hash_out.string() + " --out " + cap_out.string() +
                  " --prefix-bits 4") == 2);
        CHECK(run("sample --pack " + corpus.pack.string() + " --hash-dir " +
                  hash_out.string() + " --out " + cap_out.string() +
                  " --epsilon 1.5 --prefix-bits 4") == 2);

        auto rep_out = temp_dir("report");
        CHECK(run("report --pack " + corpus.pack.string() + " --hash-dir " +
                  hash_out.string() + " --out " + rep_out.string() + " --prefix-bits 4") == 0);
        CHECK(fs::exists(rep_out / "separation.csv"));
        CHECK(fs::exists(rep_out / "occupancy.csv"));

        // missing codes file exits 2
        auto empty = temp_dir("empty_hash");
        CHECK(run("report --pack " + corpus.pack.string() + " --hash-dir " + empty.string() +
                  " --out " + rep_out.string()) == 2);
    }

    SUBCASE("config file values with flag overrides") {
        auto out = temp_dir("cfg");
        std::ofstream cfg(out / "run.cfg");
        cfg << "# pipeline config\nbits = 8\nanchors = 6\nsubset = 2\nseed = 9\n"
            << "prefix_bits = 4\nkernel = laplacian\ngamma = 2.0\n";
        cfg.close();
        REQUIRE(run("hash --pack " + corpus.pack.string() + " --out " + (out / "a").string() +
                    " --config " + (out / "run.cfg").string()) == 0);
        // flag wins over file
        REQUIRE(run("hash --pack " + corpus.pack.string() + " --out " + (out / "b").string() +
                    " --config " + (out / "run.cfg").string() + " --seed 10") == 0);
        CHECK(slurp(out / "a" / "codes.csv") != slurp(out / "b" / "codes.csv"));
    }
}
