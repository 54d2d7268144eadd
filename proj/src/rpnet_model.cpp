#include "rpnet/rpnet_model.hpp"

#include <cmath>
#include <map>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

std::vector<BlockSpec> chain_blocks(size_t in, size_t width, size_t depth, NormKind norm,
                                    double dropout, ActivationKind act) {
    std::vector<BlockSpec> specs;
    specs.reserve(depth);
    size_t cur = in;
    for (size_t i = 0; i < depth; ++i) {
        specs.push_back(BlockSpec{cur, width, norm, dropout, act});
        cur = width;
    }
    return specs;
}

}  // namespace

std::vector<BlockSpec> RpnetConfig::encoder_blocks() const {
    return chain_blocks(encoder_input_width(), encoder_width, encoder_depth, norm, dropout_rate,
                        activation);
}

std::vector<BlockSpec> RpnetConfig::decoder_blocks() const {
    return chain_blocks(decoder_input_width(), decoder_width, decoder_depth, norm, dropout_rate,
                        activation);
}

std::vector<BlockSpec> RpnetConfig::head_blocks() const {
    std::vector<BlockSpec> specs;
    size_t cur = decoder_width;
    for (size_t w : head_hidden) {
        specs.push_back(BlockSpec{cur, w, norm, dropout_rate, activation});
        cur = w;
    }
    return specs;
}

void RpnetConfig::validate() const {
    if (K < 1) throw ArgumentError("config: K must be at least 1");
    if (num_classes < 2) throw ArgumentError("config: need at least 2 classes");
    if (encoder_depth < 2 || encoder_depth > 5) {
        throw ArgumentError("config: encoder depth must lie in [2, 5]");
    }
    if (decoder_depth < 1) throw ArgumentError("config: decoder depth must be at least 1");
    if (encoder_width < 1 || decoder_width < 1) {
        throw ArgumentError("config: embedding widths must be positive");
    }
    for (size_t w : head_hidden) {
        if (w < 1) throw ArgumentError("config: head widths must be positive");
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ArgumentError("config: dropout rate must lie in [0, 1)");
    }
}

RpnetConfig default_config(int K, int num_classes) {
    RpnetConfig c;
    c.K = K;
    c.num_classes = num_classes;
    c.validate();
    return c;
}

RpnetConfig ablation_variant(RpnetConfig base, AblationKind which) {
    switch (which) {
        case AblationKind::no_onehot_1:
            base.use_onehot_input = false;
            break;
        case AblationKind::no_onehot_2:
            base.use_onehot_concat = false;
            break;
        case AblationKind::avg_pool:
            base.diagram_pool = DiagramPool::average;
            break;
    }
    return base;
}

const char* ablation_name(AblationKind which) {
    switch (which) {
        case AblationKind::no_onehot_1:
            return "no_onehot_1";
        case AblationKind::no_onehot_2:
            return "no_onehot_2";
        case AblationKind::avg_pool:
            return "avg_pool";
    }
    return "?";
}

RpnetParams init_params(const RpnetConfig& config, Rng& rng) {
    config.validate();
    RpnetParams p;
    for (const BlockSpec& s : config.encoder_blocks()) p.encoder.push_back(init_block(s, rng));
    for (const BlockSpec& s : config.decoder_blocks()) p.decoder.push_back(init_block(s, rng));
    for (const BlockSpec& s : config.head_blocks()) p.head.push_back(init_block(s, rng));

    const size_t fan_in = config.head_final_input_width();
    const size_t fan_out = static_cast<size_t>(config.num_classes);
    p.head_weight = Tensor::matrix(fan_out, fan_in);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (size_t i = 0; i < p.head_weight.size(); ++i) {
        p.head_weight[i] = rng.uniform(-limit, limit);
    }
    p.head_bias = Tensor::vector(fan_out);
    // Zero logits start diagram pooling at the uniform average.
    p.diagram_logits = Tensor::vector(static_cast<size_t>(config.K));
    return p;
}

namespace {

void collect_block_refs(std::vector<ParamRef>& out, std::vector<BlockParams>& blocks,
                        const std::string& prefix) {
    for (size_t i = 0; i < blocks.size(); ++i) {
        const std::string base = prefix + "." + std::to_string(i) + ".";
        out.push_back({base + "weight", &blocks[i].weight});
        out.push_back({base + "bias", &blocks[i].bias});
        if (blocks[i].norm_scale.size() > 0) {
            out.push_back({base + "norm_scale", &blocks[i].norm_scale});
            out.push_back({base + "norm_shift", &blocks[i].norm_shift});
        }
    }
}

}  // namespace

std::vector<ParamRef> param_refs(RpnetParams& params) {
    std::vector<ParamRef> refs;
    collect_block_refs(refs, params.encoder, "encoder");
    collect_block_refs(refs, params.decoder, "decoder");
    collect_block_refs(refs, params.head, "head");
    refs.push_back({"head.out.weight", &params.head_weight});
    refs.push_back({"head.out.bias", &params.head_bias});
    refs.push_back({"diagram_logits", &params.diagram_logits});
    return refs;
}

std::vector<NamedTensor> snapshot_state(const RpnetParams& params) {
    std::vector<NamedTensor> out;
    auto& mut = const_cast<RpnetParams&>(params);
    for (const ParamRef& r : param_refs(mut)) {
        out.push_back({r.name, *r.tensor});
    }
    auto add_running = [&out](const std::vector<BlockParams>& blocks, const std::string& prefix) {
        for (size_t i = 0; i < blocks.size(); ++i) {
            if (blocks[i].running_mean.size() == 0) continue;
            const std::string base = prefix + "." + std::to_string(i) + ".";
            out.push_back({base + "running_mean", blocks[i].running_mean});
            out.push_back({base + "running_var", blocks[i].running_var});
        }
    };
    add_running(params.encoder, "encoder");
    add_running(params.decoder, "decoder");
    add_running(params.head, "head");
    return out;
}

void restore_state(RpnetParams& params, const std::vector<NamedTensor>& state) {
    std::map<std::string, Tensor*> slots;
    for (const ParamRef& r : param_refs(params)) {
        slots[r.name] = r.tensor;
    }
    auto map_running = [&slots](std::vector<BlockParams>& blocks, const std::string& prefix) {
        for (size_t i = 0; i < blocks.size(); ++i) {
            if (blocks[i].running_mean.size() == 0) continue;
            const std::string base = prefix + "." + std::to_string(i) + ".";
            slots[base + "running_mean"] = &blocks[i].running_mean;
            slots[base + "running_var"] = &blocks[i].running_var;
        }
    };
    map_running(params.encoder, "encoder");
    map_running(params.decoder, "decoder");
    map_running(params.head, "head");

    size_t assigned = 0;
    for (const NamedTensor& nt : state) {
        auto it = slots.find(nt.name);
        if (it == slots.end()) {
            throw FormatError("checkpoint holds unknown tensor: " + nt.name);
        }
        if (!it->second->same_shape(nt.value)) {
            throw FormatError("checkpoint tensor " + nt.name + " has the wrong shape");
        }
        *it->second = nt.value;
        ++assigned;
    }
    if (assigned != slots.size()) {
        throw FormatError("checkpoint is missing model tensors");
    }
}

PackedBatch pack_batch(const std::vector<const FeatureTensor*>& batch, int K) {
    if (batch.empty()) {
        throw ArgumentError("empty batch");
    }
    const int L = batch[0]->L;
    size_t valid_total = 0;
    for (const FeatureTensor* t : batch) {
        if (t->K != K) {
            throw ArgumentError("feature tensor scale count does not match the model");
        }
        if (t->L != L) {
            throw ArgumentError("feature tensors in one batch must share a slot count");
        }
        for (uint8_t m : t->mask) valid_total += m ? 1 : 0;
    }

    PackedBatch packed;
    packed.points = Tensor::matrix(valid_total, 5);
    packed.offsets.reserve(batch.size() * static_cast<size_t>(K) + 1);
    packed.offsets.push_back(0);
    packed.labels.reserve(batch.size());
    size_t row = 0;
    for (const FeatureTensor* t : batch) {
        packed.labels.push_back(t->label);
        for (int k = 0; k < K; ++k) {
            for (int l = 0; l < L; ++l) {
                const size_t slot = static_cast<size_t>(k) * static_cast<size_t>(L) +
                                    static_cast<size_t>(l);
                if (!t->mask[slot]) continue;
                for (size_t c = 0; c < 5; ++c) {
                    packed.points(row, c) = t->data[slot * 5 + c];
                }
                ++row;
            }
            packed.offsets.push_back(row);
        }
    }
    return packed;
}

ForwardResult rpnet_forward(RpnetParams& params, const RpnetConfig& config,
                            const std::vector<const FeatureTensor*>& batch, bool training,
                            Rng& rng) {
    config.validate();
    PackedBatch packed = pack_batch(batch, config.K);
    const size_t rows = packed.points.rows();

    ForwardResult res;
    Tape& tape = res.tape;

    res.params = param_refs(params);
    std::vector<BlockIds> encoder_ids, decoder_ids, head_ids;
    Tape::Id head_w = -1, head_b = -1, logits_w = -1;
    {
        // Bind leaves in param_refs order so gradients line up by index.
        auto bind_all = [&tape, &res](std::vector<BlockParams>& blocks,
                                      std::vector<BlockIds>& ids) {
            for (BlockParams& bp : blocks) {
                BlockIds bi = bind_block(tape, bp, true);
                ids.push_back(bi);
                res.leaves.push_back(bi.weight);
                res.leaves.push_back(bi.bias);
                if (bi.norm_scale >= 0) {
                    res.leaves.push_back(bi.norm_scale);
                    res.leaves.push_back(bi.norm_shift);
                }
            }
        };
        bind_all(params.encoder, encoder_ids);
        bind_all(params.decoder, decoder_ids);
        bind_all(params.head, head_ids);
        head_w = tape.input(params.head_weight, true);
        head_b = tape.input(params.head_bias, true);
        logits_w = tape.input(params.diagram_logits, true);
        res.leaves.push_back(head_w);
        res.leaves.push_back(head_b);
        res.leaves.push_back(logits_w);
    }

    // Encoder input: the full tagged point or just its coordinates.
    Tape::Id h;
    if (config.use_onehot_input) {
        h = tape.input(packed.points, false);
    } else {
        Tensor coords = Tensor::matrix(rows, 2);
        for (size_t r = 0; r < rows; ++r) {
            coords(r, 0) = packed.points(r, 0);
            coords(r, 1) = packed.points(r, 1);
        }
        h = tape.input(std::move(coords), false);
    }

    const auto encoder_specs = config.encoder_blocks();
    for (size_t i = 0; i < encoder_specs.size(); ++i) {
        h = block_forward(tape, encoder_specs[i], params.encoder[i], encoder_ids[i], h, training,
                          rng);
    }

    if (config.use_onehot_concat) {
        Tensor onehot = Tensor::matrix(rows, 3);
        for (size_t r = 0; r < rows; ++r) {
            for (size_t c = 0; c < 3; ++c) onehot(r, c) = packed.points(r, 2 + c);
        }
        h = tape.concat_cols(h, tape.input(std::move(onehot), false));
    }

    const auto decoder_specs = config.decoder_blocks();
    for (size_t i = 0; i < decoder_specs.size(); ++i) {
        h = block_forward(tape, decoder_specs[i], params.decoder[i], decoder_ids[i], h, training,
                          rng);
    }

    // Point pooling (masked sum per diagram), then diagram pooling.
    Tape::Id diagrams = tape.masked_segment_sum(h, packed.offsets);
    Tape::Id weights;
    if (config.diagram_pool == DiagramPool::softmax_weighted) {
        weights = tape.softmax_vec(logits_w);
    } else {
        Tensor uniform = Tensor::vector(static_cast<size_t>(config.K));
        uniform.fill(1.0 / static_cast<double>(config.K));
        weights = tape.input(std::move(uniform), false);
    }
    Tape::Id graphs = tape.weighted_mix(diagrams, weights, static_cast<size_t>(config.K));

    h = graphs;
    const auto head_specs = config.head_blocks();
    for (size_t i = 0; i < head_specs.size(); ++i) {
        h = block_forward(tape, head_specs[i], params.head[i], head_ids[i], h, training, rng);
    }
    res.logits = tape.linear(h, head_w, head_b);
    return res;
}

Tensor rpnet_probabilities(RpnetParams& params, const RpnetConfig& config,
                           const std::vector<const FeatureTensor*>& batch) {
    Rng rng(0);
    ForwardResult res = rpnet_forward(params, config, batch, false, rng);
    return row_softmax(res.tape.value(res.logits));
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    if (probs.shape().size() != 2 || probs.rows() == 0) {
        throw ArgumentError("cross_entropy expects a non-empty probability matrix");
    }
    if (labels.size() != probs.rows()) {
        throw ArgumentError("cross_entropy: need one label per row");
    }
    const int classes = static_cast<int>(probs.cols());
    double total = 0.0;
    for (size_t r = 0; r < probs.rows(); ++r) {
        if (labels[r] < 0 || labels[r] >= classes) {
            throw ArgumentError("cross_entropy: label " + std::to_string(labels[r]) +
                                " out of range [0, " + std::to_string(classes) + ")");
        }
        total += -std::log(probs(r, static_cast<size_t>(labels[r])));
    }
    return total / static_cast<double>(probs.rows());
}

}  // namespace rpnet
