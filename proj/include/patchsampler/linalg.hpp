// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

namespace patchsampler {

// Columns of V are eigenvectors; lambdas descending. Sign convention: the
// largest-magnitude entry of each eigenvector is positive.
struct EigenDecomposition {
    std::vector<double> V;        // M x M, row-major
    std::vector<double> lambdas;  // length M, descending
    std::size_t dim = 0;
};

// Cyclic Jacobi eigensolver for dense symmetric matrices. Deterministic sweep
// order; converges when max off-diagonal <= 1e-12 * max|S|, capped at 100 sweeps.
EigenDecomposition sym_eigen(const std::vector<double>& S, std::size_t m);

// Pseudo-inverse square root: V diag(g(lambda)) V^T with g(l) = l^{-1/2} for
// l > tol * lambda_max, else 0. Output exactly symmetric.
std::vector<double> inv_sqrt_psd(const std::vector<double>& S, std::size_t m,
                                 double tol = 1e-10);

}  // namespace patchsampler
