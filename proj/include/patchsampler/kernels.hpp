// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace patchsampler {

enum class KernelKind { rbf, laplacian, polynomial };

KernelKind parse_kernel_kind(const std::string& s);
std::string kernel_kind_name(KernelKind k);

struct KernelSpec {
    KernelKind kind = KernelKind::rbf;
    double gamma = 1.0;          // rbf/laplacian bandwidth, > 0
    std::uint32_t degree = 2;    // polynomial, >= 1
    double coef0 = 1.0;          // polynomial additive constant

    void validate() const;       // throws ConfigError
};

// rbf: exp(-gamma*||x-y||^2); laplacian: exp(-gamma*||x-y||_1);
// polynomial: (x.y + coef0)^degree. Symmetric by construction.
double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> y);

// M x M Gram matrix, row-major; each unordered pair evaluated once.
std::vector<double> kernel_matrix(const KernelSpec& spec,
                                  const std::vector<std::span<const double>>& points);

// Length-M vector of kernel values against x.
std::vector<double> kernel_cross(const KernelSpec& spec,
                                 const std::vector<std::span<const double>>& anchors,
                                 std::span<const double> x);

}  // namespace patchsampler
