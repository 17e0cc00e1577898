// SPDX-License-Identifier: Apache-2.0
#include "patchsampler/rng.hpp"

#include <numeric>

namespace patchsampler {

std::vector<std::uint32_t> sample_without_replacement(SplitMix64& rng,
                                                      std::uint32_t n,
                                                      std::uint32_t k) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::uint32_t i = 0; i < k; ++i) {
        std::uint32_t j = i + static_cast<std::uint32_t>(rng.uniform_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace patchsampler
