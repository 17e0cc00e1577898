// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "patchsampler/errors.hpp"

namespace patchsampler {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kConvergence = 1e-12;

double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

double max_offdiag(const std::vector<double>& a, std::size_t m) {
    double r = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            r = std::max(r, std::abs(a[i * m + j]));
    return r;
}

}  // namespace

EigenDecomposition sym_eigen(const std::vector<double>& S, std::size_t m) {
    if (m == 0 || S.size() != m * m)
        throw ContractError("sym_eigen: matrix size mismatch");
    const double scale = max_abs(S);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            if (std::abs(S[i * m + j] - S[j * m + i]) > 1e-12 * std::max(1.0, scale))
                throw ContractError("sym_eigen: input not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");

    std::vector<double> a = S;
    std::vector<double> v(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) v[i * m + i] = 1.0;

    // Cyclic Jacobi: rotate away (p,q) pairs in fixed row-major order.
    if (scale > 0.0) {
        int sweep = 0;
        while (max_offdiag(a, m) > kConvergence * scale) {
            if (++sweep > kMaxSweeps)
                throw NumericError("sym_eigen: no convergence after " +
                                   std::to_string(kMaxSweeps) + " sweeps, off-diagonal residual " +
                                   std::to_string(max_offdiag(a, m)));
            for (std::size_t p = 0; p < m; ++p) {
                for (std::size_t q = p + 1; q < m; ++q) {
                    const double apq = a[p * m + q];
                    if (std::abs(apq) <= kConvergence * scale) continue;
                    const double app = a[p * m + p];
                    const double aqq = a[q * m + q];
                    const double theta = (aqq - app) / (2.0 * apq);
                    const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                     (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    for (std::size_t k = 0; k < m; ++k) {
                        const double akp = a[k * m + p];
                        const double akq = a[k * m + q];
                        a[k * m + p] = c * akp - s * akq;
                        a[k * m + q] = s * akp + c * akq;
                    }
                    for (std::size_t k = 0; k < m; ++k) {
                        const double apk = a[p * m + k];
                        const double aqk = a[q * m + k];
                        a[p * m + k] = c * apk - s * aqk;
                        a[q * m + k] = s * apk + c * aqk;
                    }
                    for (std::size_t k = 0; k < m; ++k) {
                        const double vkp = v[k * m + p];
                        const double vkq = v[k * m + q];
                        v[k * m + p] = c * vkp - s * vkq;
                        v[k * m + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    // Sort eigenpairs descending; stable so equal eigenvalues keep sweep order.
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return a[i * m + i] > a[j * m + j];
    });

    EigenDecomposition out;
    out.dim = m;
    out.lambdas.resize(m);
    out.V.assign(m * m, 0.0);
    for (std::size_t c = 0; c < m; ++c) {
        const std::size_t src = order[c];
        out.lambdas[c] = a[src * m + src];
        // sign convention: largest-magnitude entry positive (first on ties)
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t r = 0; r < m; ++r) {
            const double mag = std::abs(v[r * m + src]);
            if (mag > best) {
                best = mag;
                arg = r;
            }
        }
        const double sign = v[arg * m + src] < 0.0 ? -1.0 : 1.0;
        for (std::size_t r = 0; r < m; ++r) out.V[r * m + c] = sign * v[r * m + src];
    }
    return out;
}

std::vector<double> inv_sqrt_psd(const std::vector<double>& S, std::size_t m, double tol) {
    EigenDecomposition eig = sym_eigen(S, m);
    const double lambda_max = eig.lambdas.empty() ? 0.0 : eig.lambdas.front();
    const double threshold = tol * lambda_max;

    std::vector<double> g(m, 0.0);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (eig.lambdas[i] > threshold && eig.lambdas[i] > 0.0) {
            g[i] = 1.0 / std::sqrt(eig.lambdas[i]);
            ++kept;
        }
    }
    if (kept == 0)
        throw NumericError("inv_sqrt_psd: all eigenvalues below tolerance, nothing to invert");

    // R = V diag(g) V^T, filled for i <= j and mirrored: exactly symmetric.
    std::vector<double> r(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < m; ++k)
                s += eig.V[i * m + k] * g[k] * eig.V[j * m + k];
            r[i * m + j] = s;
            r[j * m + i] = s;
        }
    }
    return r;
}

}  // namespace patchsampler
