#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "rpnet/rng.hpp"
#include "rpnet/tensor.hpp"

namespace rpnet {

// Reverse-mode tape. Nodes are created in topological order by construction;
// backward() walks them in reverse. One tape records one forward pass and can
// be differentiated once.
//
// The op set is the smallest sufficient one for the model: fused linear,
// elementwise arithmetic, activations, the two norm layers, dropout,
// masked/sorted segment sum, weighted mixing, softmax and the fused
// softmax-cross-entropy loss.
class Tape {
public:
    using Id = int;

    // Leaf holding a constant or a parameter.
    Id input(Tensor value, bool requires_grad);

    // y = x * W^T + b with W of shape (out, in), b of shape (out).
    Id linear(Id x, Id weight, Id bias);
    Id add(Id a, Id b);
    Id mul(Id a, Id b);
    Id scale(Id x, double c);
    Id relu(Id x);
    Id elu(Id x);  // alpha = 1
    // Per-row normalization with learned scale/shift.
    Id layer_norm(Id x, Id gamma, Id beta);
    // Per-column normalization over the batch; updates running stats when
    // training, uses them when not.
    Id batch_norm(Id x, Id gamma, Id beta, Tensor& running_mean, Tensor& running_var,
                  bool training, double momentum = 0.1);
    // Inverted dropout; mask is drawn from `rng` at record time.
    Id dropout(Id x, double rate, Rng& rng);
    Id concat_cols(Id a, Id b);
    // Sums rows within each [offsets[s], offsets[s+1]) segment. Values are
    // accumulated in ascending order per column, so the result is invariant
    // to row permutations within a segment, bit for bit. Empty segments give
    // zero rows.
    Id masked_segment_sum(Id x, std::vector<size_t> offsets);
    // out[b, :] = sum_k weights[k] * x[b*K + k, :], with x of (B*K) rows.
    Id weighted_mix(Id x, Id weights, size_t num_groups);
    Id softmax_vec(Id w);
    // Mean negative log-likelihood over rows; numerically stable fused form.
    Id softmax_cross_entropy(Id logits, std::vector<int> labels, int num_classes);
    Id sum_all(Id x);

    const Tensor& value(Id id) const;
    // Valid after backward(); zero tensor for untouched nodes.
    const Tensor& grad(Id id) const;
    bool requires_grad(Id id) const;

    // Reverse sweep from a scalar root. Can be called once per tape.
    void backward(Id root);
    bool differentiated() const { return differentiated_; }
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;  // null for leaves
    };

    Id emit(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Node& node(Id id);
    const Node& node(Id id) const;
    Tensor& grad_buffer(Id id);
    void accumulate(Id id, size_t index, double amount);

    std::vector<Node> nodes_;
    bool differentiated_ = false;
};

// Softmax over each row, as a plain tensor op (used to expose probabilities).
Tensor row_softmax(const Tensor& logits);

}  // namespace rpnet
