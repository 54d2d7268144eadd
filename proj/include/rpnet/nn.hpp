#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rpnet/autodiff.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/tensor.hpp"

namespace rpnet {

enum class NormKind { none, layer, batch };
enum class ActivationKind { relu, elu };

// One network block: linear, then normalization, then dropout (training
// only), then activation.
struct BlockSpec {
    size_t in = 0;
    size_t out = 0;
    NormKind norm = NormKind::layer;
    double dropout_rate = 0.1;
    ActivationKind activation = ActivationKind::relu;
};

struct BlockParams {
    Tensor weight;  // (out, in)
    Tensor bias;    // (out)
    // Present unless norm == none.
    Tensor norm_scale;
    Tensor norm_shift;
    // Present only for batch norm.
    Tensor running_mean;
    Tensor running_var;
};

// Uniform init in +-sqrt(6 / (fan_in + fan_out)) for the weight; zero bias;
// norm scale 1, shift 0; running stats at (0, 1).
BlockParams init_block(const BlockSpec& spec, Rng& rng);

// Tape leaf ids for one block's learnable tensors.
struct BlockIds {
    Tape::Id weight = -1;
    Tape::Id bias = -1;
    Tape::Id norm_scale = -1;
    Tape::Id norm_shift = -1;
};

BlockIds bind_block(Tape& tape, const BlockParams& params, bool requires_grad);

// Records the block onto the tape. `params` is mutable only for the batch
// norm running stats; dropout consumes `rng` only when training with a
// positive rate.
Tape::Id block_forward(Tape& tape, const BlockSpec& spec, BlockParams& params,
                       const BlockIds& ids, Tape::Id x, bool training, Rng& rng);

// Convenience wrapper running one block on a scratch tape.
Tensor block_apply(const BlockSpec& spec, BlockParams& params, const Tensor& x, bool training,
                   Rng& rng);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    size_t step = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
};

AdamState adam_init(const std::vector<const Tensor*>& params, AdamConfig cfg = {});

// Bias-corrected Adam update in place. `names` is used for error messages; a
// non-finite gradient raises NumericError naming the offending parameter.
void adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, double lr,
               const std::vector<std::string>& names);

struct NamedTensor {
    std::string name;
    Tensor value;
};

// Binary model checkpoint ("RPCKPT01"): named float64 tensors with shapes and
// a trailing CRC-32 over everything after the magic.
void write_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(const std::string& path);

}  // namespace rpnet
