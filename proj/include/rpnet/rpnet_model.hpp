#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rpnet/autodiff.hpp"
#include "rpnet/featurize.hpp"
#include "rpnet/nn.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/tensor.hpp"

namespace rpnet {

enum class DiagramPool { softmax_weighted, average };

// Architecture knobs. Block specs are derived on demand so that flipping an
// ablation switch re-derives every affected width.
struct RpnetConfig {
    int K = 4;
    int num_classes = 2;
    size_t encoder_width = 64;  // per-point embedding width
    size_t decoder_width = 64;  // per-diagram embedding width
    size_t encoder_depth = 2;   // 2..5
    size_t decoder_depth = 2;
    std::vector<size_t> head_hidden = {64};  // widths before the final linear
    NormKind norm = NormKind::layer;
    double dropout_rate = 0.1;
    ActivationKind activation = ActivationKind::relu;
    DiagramPool diagram_pool = DiagramPool::softmax_weighted;
    bool use_onehot_input = true;   // encoder reads the full 5-vector vs (birth, death)
    bool use_onehot_concat = true;  // re-concatenate the one-hot after the encoder

    size_t encoder_input_width() const { return use_onehot_input ? 5 : 2; }
    size_t decoder_input_width() const {
        return encoder_width + (use_onehot_concat ? 3 : 0);
    }
    std::vector<BlockSpec> encoder_blocks() const;
    std::vector<BlockSpec> decoder_blocks() const;
    std::vector<BlockSpec> head_blocks() const;
    size_t head_final_input_width() const {
        return head_hidden.empty() ? decoder_width : head_hidden.back();
    }
    void validate() const;
};

RpnetConfig default_config(int K, int num_classes);

enum class AblationKind { no_onehot_1, no_onehot_2, avg_pool };

// no_onehot_1 drops the one-hot from the encoder input, no_onehot_2 drops the
// post-encoder concatenation, avg_pool replaces the learned diagram weighting
// with a uniform average.
RpnetConfig ablation_variant(RpnetConfig base, AblationKind which);
const char* ablation_name(AblationKind which);

struct RpnetParams {
    std::vector<BlockParams> encoder;
    std::vector<BlockParams> decoder;
    std::vector<BlockParams> head;
    Tensor head_weight;     // (C, last head width)
    Tensor head_bias;       // (C)
    Tensor diagram_logits;  // (K)
};

RpnetParams init_params(const RpnetConfig& config, Rng& rng);

struct ParamRef {
    std::string name;
    Tensor* tensor;
};

// Learnable tensors in a fixed order (the binding/optimizer order).
std::vector<ParamRef> param_refs(RpnetParams& params);
// Learnable tensors plus batch-norm running stats, for checkpoints.
std::vector<NamedTensor> snapshot_state(const RpnetParams& params);
void restore_state(RpnetParams& params, const std::vector<NamedTensor>& state);

// Valid points of a batch, packed densely. Row ranges [offsets[i],
// offsets[i+1]) hold diagram i of the flattened (graph, scale) sequence;
// padded slots are never materialized.
struct PackedBatch {
    Tensor points;  // (R, 5): birth, death, one-hot tag
    std::vector<size_t> offsets;
    std::vector<int> labels;
};

PackedBatch pack_batch(const std::vector<const FeatureTensor*>& batch, int K);

struct ForwardResult {
    Tape tape;
    Tape::Id logits = -1;
    std::vector<ParamRef> params;
    std::vector<Tape::Id> leaves;  // aligned with params
};

ForwardResult rpnet_forward(RpnetParams& params, const RpnetConfig& config,
                            const std::vector<const FeatureTensor*>& batch, bool training,
                            Rng& rng);

// Evaluation-mode class probabilities, one row per graph.
Tensor rpnet_probabilities(RpnetParams& params, const RpnetConfig& config,
                           const std::vector<const FeatureTensor*>& batch);

// Mean negative log-probability of the true class.
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);

}  // namespace rpnet
