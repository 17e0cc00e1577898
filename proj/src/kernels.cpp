// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/kernels.hpp"

#include <cmath>

#include "patchsampler/errors.hpp"

namespace patchsampler {

KernelKind parse_kernel_kind(const std::string& s) {
    if (s == "rbf") return KernelKind::rbf;
    if (s == "laplacian") return KernelKind::laplacian;
    if (s == "polynomial") return KernelKind::polynomial;
    throw ConfigError("unknown kernel kind: " + s);
}

std::string kernel_kind_name(KernelKind k) {
    switch (k) {
        case KernelKind::rbf: return "rbf";
        case KernelKind::laplacian: return "laplacian";
        case KernelKind::polynomial: return "polynomial";
    }
    return "?";
}

void KernelSpec::validate() const {
    if (!(gamma > 0.0)) throw ConfigError("kernel gamma must be > 0");
    if (degree < 1) throw ConfigError("kernel degree must be >= 1");
}

// Per-element operations are commutative in IEEE arithmetic and the
// accumulation order does not depend on argument order, so
// kernel_eval(x,y) == kernel_eval(y,x) bit-exactly.
double kernel_eval(const KernelSpec& spec, std::span<const double> x,
                   std::span<const double> y) {
    if (x.size() != y.size())
        throw ContractError("kernel_eval: dimension mismatch (" +
                            std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
    const std::size_t d = x.size();
    switch (spec.kind) {
        case KernelKind::rbf: {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double t = x[j] - y[j];
                s += t * t;
            }
            return std::exp(-spec.gamma * s);
        }
        case KernelKind::laplacian: {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += std::abs(x[j] - y[j]);
            return std::exp(-spec.gamma * s);
        }
        case KernelKind::polynomial: {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += x[j] * y[j];
            return std::pow(s + spec.coef0, static_cast<double>(spec.degree));
        }
    }
    throw ContractError("kernel_eval: unreachable kind");
}

std::vector<double> kernel_matrix(const KernelSpec& spec,
                                  const std::vector<std::span<const double>>& points) {
    const std::size_t m = points.size();
    if (m == 0) throw ContractError("kernel_matrix: empty point list");
    std::vector<double> out(m * m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double v = kernel_eval(spec, points[i], points[j]);
            out[i * m + j] = v;
            out[j * m + i] = v;
        }
    }
    return out;
}

std::vector<double> kernel_cross(const KernelSpec& spec,
                                 const std::vector<std::span<const double>>& anchors,
                                 std::span<const double> x) {
    std::vector<double> out(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i)
        out[i] = kernel_eval(spec, anchors[i], x);
    return out;
}

}  // namespace patchsampler
