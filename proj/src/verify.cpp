#include "rpnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "rpnet/featurize.hpp"
#include "rpnet/graph.hpp"
#include "rpnet/persistence.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/rpnet_model.hpp"
#include "rpnet/signature.hpp"

namespace rpnet {

namespace {

Graph random_graph(Rng& rng, int max_n, int max_m) {
    int n = static_cast<int>(rng.uniform_int(1, max_n));
    std::vector<std::pair<int, int>> pool;
    for (int u = 0; u < n; ++u) {
        for (int v = u + 1; v < n; ++v) pool.emplace_back(u, v);
    }
    rng.shuffle(pool);
    int m = static_cast<int>(
        rng.uniform_int(0, std::min<int64_t>(max_m, static_cast<int64_t>(pool.size()))));
    pool.resize(static_cast<size_t>(m));
    return Graph(n, std::move(pool));
}

Graph random_bipartite(Rng& rng, int max_n) {
    int a = static_cast<int>(rng.uniform_int(1, max_n - 1));
    int b = static_cast<int>(rng.uniform_int(1, max_n - a));
    std::vector<std::pair<int, int>> pool;
    for (int u = 0; u < a; ++u) {
        for (int v = 0; v < b; ++v) pool.emplace_back(u, a + v);
    }
    rng.shuffle(pool);
    int m = static_cast<int>(rng.uniform_int(0, static_cast<int64_t>(pool.size())));
    pool.resize(static_cast<size_t>(m));
    return Graph(a + b, std::move(pool));
}

// Tie-heavy descriptor values: integer plateaus on most graphs, continuous
// draws otherwise, occasionally all-constant.
std::vector<double> random_values(Rng& rng, int n) {
    std::vector<double> values(static_cast<size_t>(n));
    const double style = rng.uniform();
    for (double& v : values) {
        if (style < 0.5) {
            v = static_cast<double>(rng.uniform_int(0, 4));
        } else if (style < 0.9) {
            v = rng.uniform();
        } else {
            v = 0.25;
        }
    }
    return values;
}

std::string counted(const char* what, int count) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s on %d graphs", what, count);
    return buf;
}

FeatureTensor random_feature_tensor(Rng& rng, int K, int L, int num_classes) {
    FeatureTensor t;
    t.K = K;
    t.L = L;
    t.label = static_cast<int>(rng.uniform_int(0, num_classes - 1));
    t.mask.assign(static_cast<size_t>(K) * static_cast<size_t>(L), 0);
    t.data.assign(static_cast<size_t>(K) * static_cast<size_t>(L) * 5, 0.0);
    for (int k = 0; k < K; ++k) {
        // Each diagram gets 1..L real points; the all-masked case is covered
        // separately where the zero-row contract is tested.
        int valid = static_cast<int>(rng.uniform_int(1, L));
        for (int l = 0; l < valid; ++l) {
            size_t slot = static_cast<size_t>(k) * static_cast<size_t>(L) +
                          static_cast<size_t>(l);
            t.mask[slot] = 1;
            double birth = rng.uniform();
            double death = std::min(1.0, birth + rng.uniform());
            int group = static_cast<int>(rng.uniform_int(0, 2));
            t.data[slot * 5 + 0] = birth;
            t.data[slot * 5 + 1] = death;
            t.data[slot * 5 + 2 + static_cast<size_t>(group)] = 1.0;
        }
    }
    return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

CheckResult verify_persistence_oracle(int graphs, uint64_t seed) {
    Rng rng(seed);
    for (int i = 0; i < graphs; ++i) {
        Graph g = random_graph(rng, 12, 20);
        std::vector<double> values = random_values(rng, g.num_vertices());
        PersistenceDiagram fast = compute_diagram(g, values);
        PersistenceDiagram slow = compute_diagram_oracle(g, values);
        if (!same_multiset(fast, slow)) {
            char buf[128];
            std::snprintf(buf, sizeof(buf),
                          "diagram mismatch on graph %d (n=%d, m=%d)", i, g.num_vertices(),
                          g.num_edges());
            return {"persistence_oracle", false, buf};
        }
    }
    return {"persistence_oracle", true, counted("sweep equals rescan oracle", graphs)};
}

CheckResult verify_betti(int graphs, uint64_t seed) {
    Rng rng(seed);
    for (int i = 0; i < graphs; ++i) {
        Graph g = random_graph(rng, 16, 32);
        std::vector<double> values = random_values(rng, g.num_vertices());
        PersistenceDiagram d = compute_diagram(g, values);
        int components = connected_components(g);
        int cycles = cycle_rank(g);
        if (d.count_dim0_essential() != components || d.count_dim1() != cycles) {
            char buf[160];
            std::snprintf(buf, sizeof(buf),
                          "graph %d: dim0-ess %d vs %d components, dim1 %d vs cycle rank %d", i,
                          d.count_dim0_essential(), components, d.count_dim1(), cycles);
            return {"betti_consistency", false, buf};
        }
    }
    return {"betti_consistency", true, counted("diagram counts match traversal", graphs)};
}

CheckResult verify_signature_agreement(int graphs, uint64_t seed, double tolerance) {
    Rng rng(seed);
    double worst = 0.0;
    for (int i = 0; i < graphs; ++i) {
        Graph g = random_graph(rng, 25, 80);
        int K = static_cast<int>(rng.uniform_int(1, 8));
        SignatureMatrix naive = return_probabilities_naive(g, K);
        SignatureMatrix spectral = return_probabilities_spectral(g, K);
        for (size_t j = 0; j < naive.values.size(); ++j) {
            worst = std::max(worst, std::abs(naive.values[j] - spectral.values[j]));
        }
        if (worst > tolerance) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "graph %d: max |naive - spectral| = %.3e", i, worst);
            return {"signature_agreement", false, buf};
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |naive - spectral| = %.3e over %d graphs", worst,
                  graphs);
    return {"signature_agreement", true, buf};
}

CheckResult verify_bipartite_parity(int graphs, uint64_t seed) {
    Rng rng(seed);
    for (int i = 0; i < graphs; ++i) {
        Graph g = random_bipartite(rng, 20);
        int K = static_cast<int>(rng.uniform_int(1, 8));
        SignatureMatrix naive = return_probabilities_naive(g, K);
        for (int k = 0; k < K; ++k) {
            if (naive.hop_of_scale[static_cast<size_t>(k)] % 2 == 0) continue;
            for (int v = 0; v < g.num_vertices(); ++v) {
                if (naive.at(v, k) != 0.0) {
                    char buf[128];
                    std::snprintf(buf, sizeof(buf),
                                  "graph %d vertex %d hop %d: expected exact 0, got %.3e", i, v,
                                  naive.hop_of_scale[static_cast<size_t>(k)], naive.at(v, k));
                    return {"bipartite_parity", false, buf};
                }
            }
        }
    }
    return {"bipartite_parity", true, counted("odd hops exactly zero", graphs)};
}

CheckResult verify_gradients(uint64_t seed) {
    RpnetConfig cfg;
    cfg.K = 2;
    cfg.num_classes = 2;
    cfg.encoder_width = 6;
    cfg.decoder_width = 6;
    cfg.encoder_depth = 2;
    cfg.decoder_depth = 2;
    cfg.head_hidden = {6};
    cfg.norm = NormKind::layer;
    cfg.dropout_rate = 0.0;  // dropout would break differentiability checks
    cfg.activation = ActivationKind::elu;
    cfg.diagram_pool = DiagramPool::softmax_weighted;

    Rng data_rng(derive_seed(seed, 1));
    const int L = 4;
    std::vector<FeatureTensor> batch_store;
    for (int i = 0; i < 3; ++i) {
        batch_store.push_back(random_feature_tensor(data_rng, cfg.K, L, cfg.num_classes));
    }
    // One all-masked diagram exercises the zero-row contract.
    std::fill(batch_store[0].mask.begin(), batch_store[0].mask.begin() + L, uint8_t{0});
    for (int c = 0; c < L * 5; ++c) batch_store[0].data[static_cast<size_t>(c)] = 0.0;

    std::vector<const FeatureTensor*> batch;
    std::vector<int> labels;
    for (const FeatureTensor& t : batch_store) {
        batch.push_back(&t);
        labels.push_back(t.label);
    }

    Rng init_rng(derive_seed(seed, 2));
    RpnetParams params = init_params(cfg, init_rng);

    auto loss_value = [&]() {
        Rng r(0);
        ForwardResult fwd = rpnet_forward(params, cfg, batch, true, r);
        Tape::Id loss = fwd.tape.softmax_cross_entropy(fwd.logits, labels, cfg.num_classes);
        return fwd.tape.value(loss)[0];
    };

    Rng fwd_rng(0);
    ForwardResult fwd = rpnet_forward(params, cfg, batch, true, fwd_rng);
    Tape::Id loss = fwd.tape.softmax_cross_entropy(fwd.logits, labels, cfg.num_classes);
    fwd.tape.backward(loss);

    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    for (size_t p = 0; p < fwd.params.size(); ++p) {
        Tensor& tensor = *fwd.params[p].tensor;
        const Tensor& grad = fwd.tape.grad(fwd.leaves[p]);
        for (size_t j = 0; j < tensor.size(); ++j) {
            const double keep = tensor[j];
            tensor[j] = keep + h;
            const double hi = loss_value();
            tensor[j] = keep - h;
            const double lo = loss_value();
            tensor[j] = keep;
            const double fd = (hi - lo) / (2.0 * h);
            const double an = grad[j];
            const double rel =
                std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4});
            if (rel > worst) {
                worst = rel;
                worst_name = fwd.params[p].name + "[" + std::to_string(j) + "]";
            }
        }
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "worst relative error %.3e at %s", worst,
                  worst_name.c_str());
    return {"gradient_check", worst < 1e-4, buf};
}

CheckResult verify_invariance(int inputs, uint64_t seed) {
    Rng rng(seed);
    for (int i = 0; i < inputs; ++i) {
        RpnetConfig cfg;
        cfg.K = static_cast<int>(rng.uniform_int(1, 4));
        cfg.num_classes = 2;
        cfg.encoder_width = 5;
        cfg.decoder_width = 5;
        cfg.encoder_depth = 2;
        cfg.decoder_depth = 1;
        cfg.head_hidden = {5};
        cfg.norm = (i % 3 == 0)   ? NormKind::none
                   : (i % 3 == 1) ? NormKind::layer
                                  : NormKind::batch;
        cfg.activation = (i % 2 == 0) ? ActivationKind::relu : ActivationKind::elu;
        const int L = static_cast<int>(rng.uniform_int(2, 6));
        const int B = static_cast<int>(rng.uniform_int(1, 4));

        std::vector<FeatureTensor> base;
        for (int b = 0; b < B; ++b) {
            base.push_back(random_feature_tensor(rng, cfg.K, L, cfg.num_classes));
        }
        Rng init_rng(rng.next_u64());
        RpnetParams params = init_params(cfg, init_rng);

        auto probs_of = [&](const std::vector<FeatureTensor>& tensors) {
            std::vector<const FeatureTensor*> ptrs;
            for (const FeatureTensor& t : tensors) ptrs.push_back(&t);
            return rpnet_probabilities(params, cfg, ptrs);
        };
        const Tensor reference = probs_of(base);

        // Shuffle the point slots of every diagram, data and mask together.
        std::vector<FeatureTensor> shuffled = base;
        for (FeatureTensor& t : shuffled) {
            for (int k = 0; k < t.K; ++k) {
                std::vector<size_t> perm(static_cast<size_t>(L));
                for (size_t l = 0; l < perm.size(); ++l) perm[l] = l;
                rng.shuffle(perm);
                FeatureTensor copy = t;
                for (int l = 0; l < L; ++l) {
                    size_t src = static_cast<size_t>(k) * static_cast<size_t>(L) +
                                 perm[static_cast<size_t>(l)];
                    size_t dst = static_cast<size_t>(k) * static_cast<size_t>(L) +
                                 static_cast<size_t>(l);
                    copy.mask[dst] = t.mask[src];
                    for (size_t c = 0; c < 5; ++c) {
                        copy.data[dst * 5 + c] = t.data[src * 5 + c];
                    }
                }
                t = copy;
            }
        }
        if (!bitwise_equal(reference, probs_of(shuffled))) {
            return {"invariance", false, "slot permutation changed the output bits (input " +
                                             std::to_string(i) + ")"};
        }

        // Extend every diagram with masked zero slots.
        std::vector<FeatureTensor> padded;
        for (const FeatureTensor& t : base) {
            FeatureTensor p;
            p.K = t.K;
            p.L = t.L + 7;
            p.label = t.label;
            p.mask.assign(static_cast<size_t>(p.K) * static_cast<size_t>(p.L), 0);
            p.data.assign(static_cast<size_t>(p.K) * static_cast<size_t>(p.L) * 5, 0.0);
            for (int k = 0; k < t.K; ++k) {
                for (int l = 0; l < t.L; ++l) {
                    size_t src = static_cast<size_t>(k) * static_cast<size_t>(t.L) +
                                 static_cast<size_t>(l);
                    size_t dst = static_cast<size_t>(k) * static_cast<size_t>(p.L) +
                                 static_cast<size_t>(l);
                    p.mask[dst] = t.mask[src];
                    for (size_t c = 0; c < 5; ++c) p.data[dst * 5 + c] = t.data[src * 5 + c];
                }
            }
            padded.push_back(std::move(p));
        }
        if (!bitwise_equal(reference, probs_of(padded))) {
            return {"invariance", false, "masked padding changed the output bits (input " +
                                             std::to_string(i) + ")"};
        }

        // Zero pooling logits: softmax weighting must equal the plain average.
        params.diagram_logits.fill(0.0);
        RpnetConfig avg_cfg = ablation_variant(cfg, AblationKind::avg_pool);
        std::vector<const FeatureTensor*> ptrs;
        for (const FeatureTensor& t : base) ptrs.push_back(&t);
        Tensor soft = rpnet_probabilities(params, cfg, ptrs);
        Tensor avg = rpnet_probabilities(params, avg_cfg, ptrs);
        for (size_t j = 0; j < soft.size(); ++j) {
            if (std::abs(soft[j] - avg[j]) > 1e-12) {
                return {"invariance", false,
                        "zero-logit softmax pooling deviates from averaging (input " +
                            std::to_string(i) + ")"};
            }
        }
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "bitwise stable on %d random inputs", inputs);
    return {"invariance", true, buf};
}

std::vector<CheckResult> run_verification(bool quick, uint64_t seed) {
    const int scale = quick ? 5 : 1;
    std::vector<CheckResult> results;
    results.push_back(verify_persistence_oracle(500 / scale, derive_seed(seed, 11)));
    results.push_back(verify_betti(200 / scale, derive_seed(seed, 12)));
    results.push_back(verify_signature_agreement(200 / scale, derive_seed(seed, 13)));
    results.push_back(verify_bipartite_parity(100 / scale, derive_seed(seed, 14)));
    results.push_back(verify_gradients(derive_seed(seed, 15)));
    results.push_back(verify_invariance(100 / scale, derive_seed(seed, 16)));
    return results;
}

}  // namespace rpnet
