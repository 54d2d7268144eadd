#pragma once

#include <vector>

#include "rpnet/graph.hpp"

namespace rpnet {

// Sublevel filtration of a graph under a per-vertex descriptor: vertices
// enter at their own value, edges at the max of their endpoint values.
struct FiltrationOrder {
    std::vector<int> vertex_order;     // sorted by (value, vertex index)
    std::vector<double> vertex_value;  // omega(v)
    std::vector<double> edge_value;    // aligned with Graph::edges()
};

FiltrationOrder build_filtration(const Graph& g, const std::vector<double>& values);

struct PersistencePoint {
    double birth = 0.0;
    double death = 0.0;  // +inf for essential points
    int dim = 0;         // 0 or 1
    bool essential = false;
};

struct PersistenceDiagram {
    std::vector<PersistencePoint> points;

    int count_dim0_essential() const;
    int count_dim0_nonessential() const;
    int count_dim1() const;
};

// Union-find sweep in filtration order under the elder rule. Zero-persistence
// points are discarded. Dim-1 points are all essential (no 2-simplices).
PersistenceDiagram compute_diagram(const Graph& g, const std::vector<double>& values);

// Independent verification oracle: recomputes connected components of every
// sublevel graph by fresh traversal and matches them across thresholds by
// vertex-set inclusion. Small instances only (n <= 64).
PersistenceDiagram compute_diagram_oracle(const Graph& g,
                                          const std::vector<double>& values);

// Exact multiset equality of (birth, death, dim, essential) points.
bool same_multiset(const PersistenceDiagram& a, const PersistenceDiagram& b);

}  // namespace rpnet
