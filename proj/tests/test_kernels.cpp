// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "patchsampler/errors.hpp"
#include "patchsampler/kernels.hpp"
#include "patchsampler/linalg.hpp"
#include "patchsampler/rng.hpp"

using namespace patchsampler;

namespace {
std::span<const double> sp(const std::vector<double>& v) { return {v.data(), v.size()}; }
}

TEST_CASE("rbf of identical vectors is 1") {
    KernelSpec spec{KernelKind::rbf, 3.7, 2, 1.0};
    std::vector<double> x{0.2, -1.5, 4.0};
    CHECK(kernel_eval(spec, sp(x), sp(x)) == 1.0);
}

TEST_CASE("laplacian closed form") {
    KernelSpec spec{KernelKind::laplacian, 1.0, 2, 1.0};
    std::vector<double> x{0.0}, y{2.0};
    CHECK(kernel_eval(spec, sp(x), sp(y)) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("polynomial on orthogonal vectors") {
    KernelSpec spec{KernelKind::polynomial, 1.0, 2, 1.0};
    std::vector<double> x{1.0, 0.0}, y{0.0, 1.0};
    CHECK(kernel_eval(spec, sp(x), sp(y)) == 1.0);
}

TEST_CASE("length mismatch throws") {
    KernelSpec spec;
    std::vector<double> x{1.0}, y{1.0, 2.0};
    CHECK_THROWS_AS(kernel_eval(spec, sp(x), sp(y)), ContractError);
}

TEST_CASE("kernel_matrix examples") {
    KernelSpec rbf{KernelKind::rbf, 0.5, 2, 1.0};
    std::vector<double> v{1.0, 2.0};
    std::vector<std::span<const double>> same{sp(v), sp(v), sp(v)};
    auto k = kernel_matrix(rbf, same);
    for (double e : k) CHECK(e == 1.0);

    std::vector<std::span<const double>> one{sp(v)};
    auto k1 = kernel_matrix(rbf, one);
    REQUIRE(k1.size() == 1);
    CHECK(k1[0] == kernel_eval(rbf, sp(v), sp(v)));

    KernelSpec lap{KernelKind::laplacian, 1.0, 2, 1.0};
    std::vector<double> a{0.0}, b{1.0};
    auto k2 = kernel_matrix(lap, {sp(a), sp(b)});
    CHECK(k2[0] == 1.0);
    CHECK(k2[3] == 1.0);
    CHECK(k2[1] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(k2[1] == k2[2]);
}

TEST_CASE("kernel_cross examples") {
    KernelSpec rbf{KernelKind::rbf, 1.0, 2, 1.0};
    std::vector<double> a{0.0}, b{1.0};
    auto cross = kernel_cross(rbf, {sp(a), sp(b)}, sp(a));
    CHECK(cross[0] == 1.0);

    CHECK(kernel_cross(rbf, {}, sp(a)).empty());

    KernelSpec lap{KernelKind::laplacian, 2.0, 2, 1.0};
    std::vector<double> x{0.5};
    auto c2 = kernel_cross(lap, {sp(a), sp(b)}, sp(x));
    CHECK(c2[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(c2[1] == c2[0]);
}

TEST_CASE("symmetry is exact for random pairs") {
    SplitMix64 rng(11);
    for (KernelKind kind : {KernelKind::rbf, KernelKind::laplacian, KernelKind::polynomial}) {
        KernelSpec spec{kind, 0.3, 3, 0.7};
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> x(5), y(5);
            for (auto& v : x) v = rng.normal();
            for (auto& v : y) v = rng.normal();
            CHECK(kernel_eval(spec, sp(x), sp(y)) == kernel_eval(spec, sp(y), sp(x)));
        }
    }
}

TEST_CASE("rbf/laplacian gram matrices are PSD within 1e-8") {
    SplitMix64 rng(42);
    for (KernelKind kind : {KernelKind::rbf, KernelKind::laplacian}) {
        KernelSpec spec{kind, 0.8, 2, 1.0};
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t m = 2 + rng.uniform_below(7);  // M <= 8
            std::vector<std::vector<double>> pts(m, std::vector<double>(3));
            std::vector<std::span<const double>> view;
            for (auto& p : pts) {
                for (auto& v : p) v = rng.normal();
                view.push_back(sp(p));
            }
            auto k = kernel_matrix(spec, view);
            auto eig = sym_eigen(k, m);
            for (double l : eig.lambdas) CHECK(l >= -1e-8);
        }
    }
}

TEST_CASE("cross vector equals gram column") {
    SplitMix64 rng(7);
    KernelSpec spec{KernelKind::rbf, 1.3, 2, 1.0};
    const std::size_t m = 6;
    std::vector<std::vector<double>> pts(m, std::vector<double>(4));
    std::vector<std::span<const double>> view;
    for (auto& p : pts) {
        for (auto& v : p) v = rng.normal();
        view.push_back(sp(p));
    }
    auto k = kernel_matrix(spec, view);
    for (std::size_t j = 0; j < m; ++j) {
        auto cross = kernel_cross(spec, view, view[j]);
        for (std::size_t i = 0; i < m; ++i)
            CHECK(std::abs(cross[i] - k[i * m + j]) <= 1e-12);
    }
}

TEST_CASE("spec validation") {
    KernelSpec bad{KernelKind::rbf, 0.0, 2, 1.0};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    KernelSpec bad2{KernelKind::polynomial, 1.0, 0, 1.0};
    CHECK_THROWS_AS(bad2.validate(), ConfigError);
}
