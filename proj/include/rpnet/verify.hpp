#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rpnet {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

// Persistence sweep vs. the independent threshold-rescan oracle, as exact
// point multisets, on random graphs with tie-heavy vertex values.
CheckResult verify_persistence_oracle(int graphs, uint64_t seed);

// Diagram counting identities against traversal-based component and cycle
// counts: #dim0-essential = components, #dim1 = m - n + c.
CheckResult verify_betti(int graphs, uint64_t seed);

// Spectral vs. naive return probabilities, elementwise within `tolerance`.
CheckResult verify_signature_agreement(int graphs, uint64_t seed, double tolerance = 1e-8);

// On bipartite graphs the naive path must give exactly 0.0 at every odd hop.
CheckResult verify_bipartite_parity(int graphs, uint64_t seed);

// Central finite differences (h = 1e-5) against the tape's gradients on a
// small smooth model (ELU, layer norm, no dropout), every parameter
// including the diagram-pool logits; relative error < 1e-4.
CheckResult verify_gradients(uint64_t seed);

// Bitwise output equality under point-slot shuffles and masked padding
// extension; zero-logit softmax pooling vs. average pooling within 1e-12.
CheckResult verify_invariance(int inputs, uint64_t seed);

// The full battery; `quick` shrinks the sample counts.
std::vector<CheckResult> run_verification(bool quick, uint64_t seed);

}  // namespace rpnet
