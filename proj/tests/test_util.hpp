#pragma once

// Shared builders for randomized test inputs.

#include <algorithm>
#include <utility>
#include <vector>

#include "rpnet/graph.hpp"
#include "rpnet/rng.hpp"

namespace testutil {

inline rpnet::Graph random_graph(rpnet::Rng& rng, int max_n, int max_m) {
    int n = static_cast<int>(rng.uniform_int(1, max_n));
    std::vector<std::pair<int, int>> pool;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) pool.emplace_back(u, v);
    rng.shuffle(pool);
    int cap = std::min(static_cast<int>(pool.size()), max_m);
    int m = cap > 0 ? static_cast<int>(rng.uniform_int(0, cap)) : 0;
    pool.resize(static_cast<size_t>(m));
    return rpnet::Graph(n, std::move(pool));
}

// Descriptor values with deliberate ties: small integers, continuous draws,
// or an all-constant vector.
inline std::vector<double> random_values(rpnet::Rng& rng, int n) {
    std::vector<double> vals(static_cast<size_t>(n));
    int style = static_cast<int>(rng.uniform_int(0, 2));
    for (auto& v : vals) {
        if (style == 0) {
            v = static_cast<double>(rng.uniform_int(0, 4));
        } else if (style == 1) {
            v = rng.uniform(0.0, 1.0);
        } else {
            v = 0.25;
        }
    }
    return vals;
}

}  // namespace testutil
