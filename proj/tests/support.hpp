#pragma once

// Spec builders and seeded random architectures shared by the tests.

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "deepframe/archspec.hpp"
#include "deepframe/frame.hpp"
#include "deepframe/rng.hpp"

namespace support {

using deepframe::ArchitectureSpec;
using deepframe::Index;
using deepframe::LayerKind;
using deepframe::LayerSpec;
using deepframe::Pattern;

inline ArchitectureSpec fc(Index input_dim, std::vector<Index> widths, Pattern pattern = Pattern::chain,
                           std::string name = "") {
    ArchitectureSpec s;
    s.name = name.empty() ? std::string(deepframe::to_string(pattern)) : name;
    s.input_dim = input_dim;
    for (Index w : widths) s.layers.push_back({LayerKind::fully_connected, w, std::nullopt});
    s.connectivity.pattern = pattern;
    return s;
}

inline ArchitectureSpec conv1(Index channels, Index spatial, Index filter, Index stride, Index filters, int dims = 2) {
    deepframe::ConvGeometry g{channels, spatial, filter, stride, dims};
    ArchitectureSpec s;
    s.name = "conv";
    s.input_dim = g.channels * g.positions_in();
    s.layers.push_back({LayerKind::convolutional, filters, g});
    return s;
}

inline Index draw(deepframe::Rng& rng, Index lo, Index hi) {
    return lo + static_cast<Index>(rng.uniform() * static_cast<double>(hi - lo + 1));
}

// Random fully connected spec: depth <= max_depth, widths and input <= max_width.
// Residual specs get an odd depth and matching skip widths.
inline ArchitectureSpec random_spec(std::uint64_t seed, Pattern pattern, Index max_depth = 4, Index max_width = 16) {
    deepframe::Rng rng(seed);
    Index depth = draw(rng, 1, max_depth);
    if (pattern == Pattern::residual && depth % 2 == 0) depth -= 1;
    const Index k0 = draw(rng, 1, max_width);
    std::vector<Index> widths;
    for (Index j = 0; j < depth; ++j) widths.push_back(draw(rng, 1, max_width));
    if (pattern == Pattern::residual)
        for (Index j = 1; j < depth; j += 2) widths[static_cast<std::size_t>(j)] = widths[static_cast<std::size_t>(j - 1)];
    return fc(k0, widths, pattern, "random");
}

inline const std::vector<Pattern>& all_patterns() {
    static const std::vector<Pattern> p{Pattern::chain, Pattern::residual, Pattern::dense};
    return p;
}

}  // namespace support

namespace support {

// Most uniform width vector in [2, m]^l whose dense-connectivity parameter
// count is within `tolerance` (relative) of the chain budget k0, [m]*l.
// Uniformity is ranked by (max - min, sum of squared deviations from the
// mean, |param gap|, lexicographic).
inline std::vector<Index> matched_dense_widths(Index k0, Index m, Index depth, double tolerance = 0.02) {
    const auto budget = deepframe::param_count(fc(k0, std::vector<Index>(static_cast<std::size_t>(depth), m)));
    std::vector<Index> w(static_cast<std::size_t>(depth), 2), best;
    std::tuple<Index, double, std::int64_t, std::vector<Index>> best_key;
    for (;;) {
        const auto pc = deepframe::param_count(fc(k0, w, Pattern::dense));
        const auto gap = pc > budget ? pc - budget : budget - pc;
        if (static_cast<double>(gap) <= tolerance * static_cast<double>(budget)) {
            const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
            double mean = 0.0;
            for (Index v : w) mean += static_cast<double>(v);
            mean /= static_cast<double>(depth);
            double dev = 0.0;
            for (Index v : w) dev += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
            auto key = std::make_tuple(*hi - *lo, dev, gap, w);
            if (best.empty() || key < best_key) {
                best_key = key;
                best = w;
            }
        }
        std::size_t i = 0;
        while (i < w.size() && w[i] == m) w[i++] = 2;
        if (i == w.size()) break;
        ++w[i];
    }
    return best;
}

}  // namespace support
