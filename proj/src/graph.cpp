#include "rpnet/graph.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "rpnet/errors.hpp"

namespace rpnet {

Graph::Graph(int n, std::vector<std::pair<int, int>> edges) : n_(n) {
    if (n < 1) throw ArgumentError("graph must have at least one vertex");
    for (auto& [u, v] : edges) {
        if (u < 0 || u >= n || v < 0 || v >= n)
            throw ArgumentError("edge endpoint out of range: (" + std::to_string(u) + ", " +
                                std::to_string(v) + ") with n=" + std::to_string(n));
        if (u == v) throw ArgumentError("self-loop at vertex " + std::to_string(u));
        if (u > v) std::swap(u, v);
    }
    std::sort(edges.begin(), edges.end());
    if (std::adjacent_find(edges.begin(), edges.end()) != edges.end())
        throw ArgumentError("duplicate edge");
    edges_ = std::move(edges);
    degree_.assign(static_cast<size_t>(n), 0);
    for (const auto& [u, v] : edges_) {
        ++degree_[static_cast<size_t>(u)];
        ++degree_[static_cast<size_t>(v)];
    }
}

std::vector<std::vector<int>> Graph::adjacency() const {
    std::vector<std::vector<int>> adj(static_cast<size_t>(n_));
    for (const auto& [u, v] : edges_) {
        adj[static_cast<size_t>(u)].push_back(v);
        adj[static_cast<size_t>(v)].push_back(u);
    }
    for (auto& nbrs : adj) std::sort(nbrs.begin(), nbrs.end());
    return adj;
}

LabeledDataset make_dataset(std::vector<Graph> graphs, std::vector<int> labels,
                            int num_classes, bool require_two_classes) {
    if (graphs.size() != labels.size())
        throw ArgumentError("labels length does not match graph count");
    if (num_classes < 2) throw ArgumentError("a dataset needs at least 2 classes");
    std::set<int> seen;
    for (int y : labels) {
        if (y < 0 || y >= num_classes)
            throw ArgumentError("label " + std::to_string(y) + " outside [0, " +
                                std::to_string(num_classes) + ")");
        seen.insert(y);
    }
    if (require_two_classes && seen.size() < 2)
        throw FormatError("dataset contains fewer than 2 distinct classes");
    return LabeledDataset{std::move(graphs), std::move(labels), num_classes};
}

std::vector<double> degree_signature(const Graph& g) {
    std::vector<double> out;
    out.reserve(static_cast<size_t>(g.num_vertices()));
    for (int d : g.degrees()) out.push_back(static_cast<double>(d));
    return out;
}

int connected_components(const Graph& g) {
    const int n = g.num_vertices();
    auto adj = g.adjacency();
    std::vector<char> seen(static_cast<size_t>(n), 0);
    std::vector<int> stack;
    int components = 0;
    for (int s = 0; s < n; ++s) {
        if (seen[static_cast<size_t>(s)]) continue;
        ++components;
        stack.push_back(s);
        seen[static_cast<size_t>(s)] = 1;
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int v : adj[static_cast<size_t>(u)]) {
                if (!seen[static_cast<size_t>(v)]) {
                    seen[static_cast<size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
        }
    }
    return components;
}

int cycle_rank(const Graph& g) {
    return g.num_edges() - g.num_vertices() + connected_components(g);
}

}  // namespace rpnet
