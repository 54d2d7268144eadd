#pragma once

#include <vector>

#include "rpnet/graph.hpp"

namespace rpnet {

// Per-vertex return probabilities of a simple random walk, one column per
// scale. Scale k (1-based) uses walk length hop_of_scale[k-1] = k + 1, so K
// scales cover hops 2..K+1. Entries for isolated vertices are 0.
struct SignatureMatrix {
    int n = 0;
    int num_scales = 0;
    std::vector<double> values;      // n x K, row-major
    std::vector<int> hop_of_scale;   // size K

    double at(int vertex, int scale) const {
        return values[static_cast<size_t>(vertex) * static_cast<size_t>(num_scales) +
                      static_cast<size_t>(scale)];
    }
    std::vector<double> column(int scale) const;
};

// Row-stochastic transition matrix P = D^{-1} A, n x n row-major. Rows of
// isolated vertices are all zero.
std::vector<double> transition_matrix(const Graph& g);

// Oracle path: diag(P^h) by repeated full matrix multiplication.
SignatureMatrix return_probabilities_naive(const Graph& g, int K);

// Fast path: one symmetric eigendecomposition of D^{-1/2} A D^{-1/2} on the
// non-isolated vertices, then diag(P^h)_i = sum_j lambda_j^h U(i,j)^2 per hop.
SignatureMatrix return_probabilities_spectral(const Graph& g, int K);

}  // namespace rpnet
