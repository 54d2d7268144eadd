#include "rpnet/signature.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "rpnet/errors.hpp"

namespace rpnet {

std::vector<double> SignatureMatrix::column(int scale) const {
    std::vector<double> out(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) out[static_cast<size_t>(v)] = at(v, scale);
    return out;
}

std::vector<double> transition_matrix(const Graph& g) {
    const size_t n = static_cast<size_t>(g.num_vertices());
    std::vector<double> p(n * n, 0.0);
    for (const auto& [u, v] : g.edges()) {
        p[static_cast<size_t>(u) * n + static_cast<size_t>(v)] =
            1.0 / static_cast<double>(g.degree(u));
        p[static_cast<size_t>(v) * n + static_cast<size_t>(u)] =
            1.0 / static_cast<double>(g.degree(v));
    }
    return p;
}

namespace {

// c = a * b for n x n row-major matrices.
void square_matmul(const std::vector<double>& a, const std::vector<double>& b,
                   std::vector<double>& c, size_t n) {
    std::fill(c.begin(), c.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
        for (size_t k = 0; k < n; ++k) {
            double aik = a[i * n + k];
            if (aik == 0.0) continue;
            const double* brow = &b[k * n];
            double* crow = &c[i * n];
            for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
}

void check_scales(int K) {
    if (K < 1) throw ArgumentError("number of scales K must be >= 1");
}

std::vector<int> hops_for(int K) {
    std::vector<int> hops(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) hops[static_cast<size_t>(k)] = k + 2;
    return hops;
}

}  // namespace

SignatureMatrix return_probabilities_naive(const Graph& g, int K) {
    check_scales(K);
    const size_t n = static_cast<size_t>(g.num_vertices());
    SignatureMatrix sig;
    sig.n = static_cast<int>(n);
    sig.num_scales = K;
    sig.hop_of_scale = hops_for(K);
    sig.values.assign(n * static_cast<size_t>(K), 0.0);

    const std::vector<double> p = transition_matrix(g);
    std::vector<double> power = p;  // P^1
    std::vector<double> next(n * n);
    for (int k = 0; k < K; ++k) {
        square_matmul(power, p, next, n);  // P^(k+2)
        power.swap(next);
        for (size_t i = 0; i < n; ++i)
            sig.values[i * static_cast<size_t>(K) + static_cast<size_t>(k)] =
                power[i * n + i];
    }
    return sig;
}

SignatureMatrix return_probabilities_spectral(const Graph& g, int K) {
    check_scales(K);
    const int n = g.num_vertices();
    SignatureMatrix sig;
    sig.n = n;
    sig.num_scales = K;
    sig.hop_of_scale = hops_for(K);
    sig.values.assign(static_cast<size_t>(n) * static_cast<size_t>(K), 0.0);

    // Restrict to non-isolated vertices; isolated ones keep value 0.
    std::vector<int> active;
    active.reserve(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v)
        if (g.degree(v) > 0) active.push_back(v);
    const size_t na = active.size();
    if (na == 0) return sig;

    std::vector<int> pos(static_cast<size_t>(n), -1);
    for (size_t i = 0; i < na; ++i) pos[static_cast<size_t>(active[i])] = static_cast<int>(i);

    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(na),
                                              static_cast<Eigen::Index>(na));
    for (const auto& [u, v] : g.edges()) {
        double w = 1.0 / std::sqrt(static_cast<double>(g.degree(u)) *
                                   static_cast<double>(g.degree(v)));
        s(pos[static_cast<size_t>(u)], pos[static_cast<size_t>(v)]) = w;
        s(pos[static_cast<size_t>(v)], pos[static_cast<size_t>(u)]) = w;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s);
    if (solver.info() != Eigen::Success)
        throw NumericError("eigendecomposition failed");
    const Eigen::VectorXd& lambda = solver.eigenvalues();
    const Eigen::MatrixXd& u = solver.eigenvectors();

    // diag(P^h)_i = sum_j lambda_j^h U(i,j)^2; one O(n^2) pass per hop.
    std::vector<double> lambda_pow(na);
    for (size_t j = 0; j < na; ++j) {
        double l = lambda(static_cast<Eigen::Index>(j));
        lambda_pow[j] = l;  // lambda^1
    }
    for (int k = 0; k < K; ++k) {
        const int hop = sig.hop_of_scale[static_cast<size_t>(k)];
        for (size_t j = 0; j < na; ++j)
            lambda_pow[j] *= lambda(static_cast<Eigen::Index>(j));
        (void)hop;  // lambda_pow now holds lambda^(k+2)
        for (size_t i = 0; i < na; ++i) {
            double acc = 0.0;
            for (size_t j = 0; j < na; ++j) {
                double uij = u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                acc += lambda_pow[j] * uij * uij;
            }
            // Clamp rounding residue; true values are probabilities.
            acc = std::min(1.0, std::max(0.0, acc));
            sig.values[static_cast<size_t>(active[i]) * static_cast<size_t>(K) +
                       static_cast<size_t>(k)] = acc;
        }
    }
    return sig;
}

}  // namespace rpnet
