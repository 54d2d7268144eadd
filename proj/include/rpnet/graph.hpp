#pragma once

#include <utility>
#include <vector>

namespace rpnet {

// Undirected simple graph with 0-based vertex indices. Edges are stored once
// as (u, v) with u < v, sorted lexicographically. Immutable after
// construction.
class Graph {
public:
    // Validates: n >= 1, endpoints in [0, n), no self-loops, no duplicates.
    // Edges are canonicalized and sorted.
    Graph(int n, std::vector<std::pair<int, int>> edges);

    int num_vertices() const { return n_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    const std::vector<std::pair<int, int>>& edges() const { return edges_; }
    const std::vector<int>& degrees() const { return degree_; }
    int degree(int v) const { return degree_[static_cast<size_t>(v)]; }

    // Neighbor lists, ascending within each vertex.
    std::vector<std::vector<int>> adjacency() const;

    bool operator==(const Graph& other) const {
        return n_ == other.n_ && edges_ == other.edges_;
    }

private:
    int n_ = 0;
    std::vector<std::pair<int, int>> edges_;
    std::vector<int> degree_;
};

struct LabeledDataset {
    std::vector<Graph> graphs;
    std::vector<int> labels;  // class index in [0, num_classes)
    int num_classes = 0;
};

// Validates label range and C >= 2. `require_two_classes` additionally
// demands that at least two distinct classes actually appear (parsers and
// generators enforce it; hand-built fixtures may not).
LabeledDataset make_dataset(std::vector<Graph> graphs, std::vector<int> labels,
                            int num_classes, bool require_two_classes = false);

// Per-vertex node degree as a real-valued descriptor.
std::vector<double> degree_signature(const Graph& g);

int connected_components(const Graph& g);

// m - n + c, the number of independent cycles.
int cycle_rank(const Graph& g);

}  // namespace rpnet
