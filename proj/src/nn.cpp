#include "rpnet/nn.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

void check_block_shapes(const BlockSpec& spec, const BlockParams& p) {
    if (spec.in == 0 || spec.out == 0) {
        throw ArgumentError("block widths must be positive");
    }
    if (p.weight.shape() != std::vector<size_t>{spec.out, spec.in} || p.bias.size() != spec.out) {
        throw ArgumentError("block parameters do not match declared widths");
    }
    if (spec.norm != NormKind::none &&
        (p.norm_scale.size() != spec.out || p.norm_shift.size() != spec.out)) {
        throw ArgumentError("norm parameters do not match block output width");
    }
}

}  // namespace

BlockParams init_block(const BlockSpec& spec, Rng& rng) {
    if (spec.in == 0 || spec.out == 0) {
        throw ArgumentError("block widths must be positive");
    }
    if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) {
        throw ArgumentError("block dropout rate must lie in [0, 1)");
    }
    BlockParams p;
    p.weight = Tensor::matrix(spec.out, spec.in);
    const double limit = std::sqrt(6.0 / static_cast<double>(spec.in + spec.out));
    for (size_t i = 0; i < p.weight.size(); ++i) {
        p.weight[i] = rng.uniform(-limit, limit);
    }
    p.bias = Tensor::vector(spec.out);
    if (spec.norm != NormKind::none) {
        p.norm_scale = Tensor::vector(spec.out);
        p.norm_scale.fill(1.0);
        p.norm_shift = Tensor::vector(spec.out);
    }
    if (spec.norm == NormKind::batch) {
        p.running_mean = Tensor::vector(spec.out);
        p.running_var = Tensor::vector(spec.out);
        p.running_var.fill(1.0);
    }
    return p;
}

BlockIds bind_block(Tape& tape, const BlockParams& params, bool requires_grad) {
    BlockIds ids;
    ids.weight = tape.input(params.weight, requires_grad);
    ids.bias = tape.input(params.bias, requires_grad);
    if (params.norm_scale.size() > 0) {
        ids.norm_scale = tape.input(params.norm_scale, requires_grad);
        ids.norm_shift = tape.input(params.norm_shift, requires_grad);
    }
    return ids;
}

Tape::Id block_forward(Tape& tape, const BlockSpec& spec, BlockParams& params,
                       const BlockIds& ids, Tape::Id x, bool training, Rng& rng) {
    check_block_shapes(spec, params);
    Tape::Id h = tape.linear(x, ids.weight, ids.bias);
    switch (spec.norm) {
        case NormKind::none:
            break;
        case NormKind::layer:
            h = tape.layer_norm(h, ids.norm_scale, ids.norm_shift);
            break;
        case NormKind::batch:
            h = tape.batch_norm(h, ids.norm_scale, ids.norm_shift, params.running_mean,
                                params.running_var, training);
            break;
    }
    if (training && spec.dropout_rate > 0.0) {
        h = tape.dropout(h, spec.dropout_rate, rng);
    }
    switch (spec.activation) {
        case ActivationKind::relu:
            h = tape.relu(h);
            break;
        case ActivationKind::elu:
            h = tape.elu(h);
            break;
    }
    return h;
}

Tensor block_apply(const BlockSpec& spec, BlockParams& params, const Tensor& x, bool training,
                   Rng& rng) {
    Tape tape;
    Tape::Id in = tape.input(x, false);
    BlockIds ids = bind_block(tape, params, false);
    Tape::Id out = block_forward(tape, spec, params, ids, in, training, rng);
    return tape.value(out);
}

AdamState adam_init(const std::vector<const Tensor*>& params, AdamConfig cfg) {
    AdamState st;
    st.cfg = cfg;
    st.m.reserve(params.size());
    st.v.reserve(params.size());
    for (const Tensor* p : params) {
        st.m.emplace_back(p->shape());
        st.v.emplace_back(p->shape());
    }
    return st;
}

void adam_step(AdamState& state, const std::vector<Tensor*>& params,
               const std::vector<const Tensor*>& grads, double lr,
               const std::vector<std::string>& names) {
    if (params.size() != state.m.size() || grads.size() != params.size() ||
        names.size() != params.size()) {
        throw ArgumentError("adam_step: parameter/gradient/name counts must match the state");
    }
    state.step += 1;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (!p.same_shape(g) || !p.same_shape(state.m[i])) {
            throw ArgumentError("adam_step: shape mismatch for parameter " + names[i]);
        }
        for (size_t j = 0; j < g.size(); ++j) {
            if (!std::isfinite(g[j])) {
                throw NumericError("non-finite gradient for parameter " + names[i]);
            }
        }
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            double mhat = m[j] / c1;
            double vhat = v[j] / c2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.cfg.eps);
        }
    }
}

namespace {

constexpr char kCkptMagic[8] = {'R', 'P', 'C', 'K', 'P', 'T', '0', '1'};
constexpr uint32_t kCkptVersion = 1;

void put_u32(std::string& buf, uint32_t v) {
    buf.append(reinterpret_cast<const char*>(&v), 4);
}

uint32_t payload_crc(const std::string& payload) {
    return static_cast<uint32_t>(::crc32(
        0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size())));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw PersistTruncatedError("checkpoint file is truncated");
    }
    uint32_t u32() {
        need(4);
        uint32_t v;
        std::memcpy(&v, buf.data() + pos, 4);
        pos += 4;
        return v;
    }
    void bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, buf.data() + pos, n);
        pos += n;
    }
};

}  // namespace

void write_checkpoint(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::string payload;
    put_u32(payload, kCkptVersion);
    put_u32(payload, static_cast<uint32_t>(tensors.size()));
    for (const auto& nt : tensors) {
        put_u32(payload, static_cast<uint32_t>(nt.name.size()));
        payload.append(nt.name);
        put_u32(payload, static_cast<uint32_t>(nt.value.shape().size()));
        for (size_t d : nt.value.shape()) {
            put_u32(payload, static_cast<uint32_t>(d));
        }
        payload.append(reinterpret_cast<const char*>(nt.value.data()),
                       nt.value.size() * sizeof(double));
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.is_open()) throw IngestionError("cannot create file: " + path);
    out.write(kCkptMagic, sizeof(kCkptMagic));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    uint32_t crc = payload_crc(payload);
    out.write(reinterpret_cast<const char*>(&crc), 4);
    if (!out) throw IngestionError("write failed: " + path);
}

std::vector<NamedTensor> read_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.is_open()) throw IngestionError("cannot open file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < sizeof(kCkptMagic) + 4) {
        throw PersistTruncatedError("checkpoint file is too small");
    }
    if (std::memcmp(buf.data(), kCkptMagic, sizeof(kCkptMagic)) != 0) {
        throw PersistVersionError("not an RPCKPT01 file");
    }
    const std::string payload =
        buf.substr(sizeof(kCkptMagic), buf.size() - sizeof(kCkptMagic) - 4);
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    if (payload_crc(payload) != stored_crc) {
        throw PersistChecksumError("checkpoint file checksum mismatch");
    }

    Reader r{payload};
    uint32_t version = r.u32();
    if (version != kCkptVersion) {
        throw PersistVersionError("unsupported checkpoint version " + std::to_string(version));
    }
    uint32_t count = r.u32();
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor nt;
        uint32_t name_len = r.u32();
        nt.name.resize(name_len);
        r.bytes(nt.name.data(), name_len);
        uint32_t rank = r.u32();
        std::vector<size_t> shape(rank);
        size_t total = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = r.u32();
            total *= shape[d];
        }
        Tensor t(shape);
        if (t.size() != total) {
            throw FormatError("checkpoint tensor shape is inconsistent");
        }
        r.bytes(t.data(), total * sizeof(double));
        nt.value = std::move(t);
        tensors.push_back(std::move(nt));
    }
    if (r.pos != payload.size()) {
        throw PersistTruncatedError("checkpoint file has trailing bytes");
    }
    return tensors;
}

}  // namespace rpnet
