#include "rpnet/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "rpnet/errors.hpp"

namespace rpnet {

namespace {

void check_matrix(const Tensor& t, const char* what) {
    if (t.shape().size() != 2) {
        throw ArgumentError(std::string(what) + ": expected a rank-2 tensor");
    }
}

}  // namespace

Tape::Id Tape::emit(Tensor value, bool requires_grad, std::function<void(Tape&)> back) {
    if (differentiated_) {
        throw StateError("tape already differentiated; record a fresh tape");
    }
    ensure_finite(value, "tape op output");
    Node n;
    n.grad = Tensor(value.shape());
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(Id id) {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
        throw ArgumentError("unknown tape node id " + std::to_string(id));
    }
    return nodes_[static_cast<size_t>(id)];
}

const Tape::Node& Tape::node(Id id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
        throw ArgumentError("unknown tape node id " + std::to_string(id));
    }
    return nodes_[static_cast<size_t>(id)];
}

const Tensor& Tape::value(Id id) const { return node(id).value; }
const Tensor& Tape::grad(Id id) const { return node(id).grad; }
bool Tape::requires_grad(Id id) const { return node(id).requires_grad; }

Tape::Id Tape::input(Tensor value, bool requires_grad) {
    return emit(std::move(value), requires_grad, nullptr);
}

Tape::Id Tape::linear(Id x, Id weight, Id bias) {
    const Tensor& xv = node(x).value;
    const Tensor& wv = node(weight).value;
    const Tensor& bv = node(bias).value;
    check_matrix(xv, "linear input");
    check_matrix(wv, "linear weight");
    const size_t rows = xv.rows(), in = xv.cols(), out = wv.rows();
    if (wv.cols() != in) {
        throw ArgumentError("linear: weight has " + std::to_string(wv.cols()) +
                            " input columns, input has " + std::to_string(in));
    }
    if (bv.size() != out) {
        throw ArgumentError("linear: bias size does not match output width");
    }

    // Fixed loop order keeps each output row a pure function of its input
    // row, so row permutations of the batch permute the output bitwise.
    Tensor y = Tensor::matrix(rows, out);
    for (size_t r = 0; r < rows; ++r) {
        for (size_t o = 0; o < out; ++o) {
            double acc = bv[o];
            for (size_t i = 0; i < in; ++i) {
                acc += xv(r, i) * wv(o, i);
            }
            y(r, o) = acc;
        }
    }

    bool req = node(x).requires_grad || node(weight).requires_grad || node(bias).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [x, weight, bias, y_id, rows, in, out](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& xv2 = t.node(x).value;
        const Tensor& wv2 = t.node(weight).value;
        if (t.node(x).requires_grad) {
            Tensor& dx = t.node(x).grad;
            for (size_t r = 0; r < rows; ++r) {
                for (size_t i = 0; i < in; ++i) {
                    double acc = 0.0;
                    for (size_t o = 0; o < out; ++o) {
                        acc += dy(r, o) * wv2(o, i);
                    }
                    dx(r, i) += acc;
                }
            }
        }
        if (t.node(weight).requires_grad) {
            Tensor& dw = t.node(weight).grad;
            for (size_t o = 0; o < out; ++o) {
                for (size_t i = 0; i < in; ++i) {
                    double acc = 0.0;
                    for (size_t r = 0; r < rows; ++r) {
                        acc += dy(r, o) * xv2(r, i);
                    }
                    dw(o, i) += acc;
                }
            }
        }
        if (t.node(bias).requires_grad) {
            Tensor& db = t.node(bias).grad;
            for (size_t o = 0; o < out; ++o) {
                double acc = 0.0;
                for (size_t r = 0; r < rows; ++r) {
                    acc += dy(r, o);
                }
                db[o] += acc;
            }
        }
    };
    return y_id;
}

Tape::Id Tape::add(Id a, Id b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (!av.same_shape(bv)) {
        throw ArgumentError("add: operand shapes differ");
    }
    Tensor y = av;
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] += bv[i];
    }
    bool req = node(a).requires_grad || node(b).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [a, b, y_id](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        for (Id p : {a, b}) {
            if (!t.node(p).requires_grad) continue;
            Tensor& dp = t.node(p).grad;
            for (size_t i = 0; i < dy.size(); ++i) {
                dp[i] += dy[i];
            }
        }
    };
    return y_id;
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (!av.same_shape(bv)) {
        throw ArgumentError("mul: operand shapes differ");
    }
    Tensor y = av;
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] *= bv[i];
    }
    bool req = node(a).requires_grad || node(b).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [a, b, y_id](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& av2 = t.node(a).value;
        const Tensor& bv2 = t.node(b).value;
        if (t.node(a).requires_grad) {
            Tensor& da = t.node(a).grad;
            for (size_t i = 0; i < dy.size(); ++i) {
                da[i] += dy[i] * bv2[i];
            }
        }
        if (t.node(b).requires_grad) {
            Tensor& db = t.node(b).grad;
            for (size_t i = 0; i < dy.size(); ++i) {
                db[i] += dy[i] * av2[i];
            }
        }
    };
    return y_id;
}

Tape::Id Tape::scale(Id x, double c) {
    Tensor y = node(x).value;
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] *= c;
    }
    Id y_id = emit(std::move(y), node(x).requires_grad, nullptr);
    node(y_id).back = [x, y_id, c](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& dy = t.node(y_id).grad;
        Tensor& dx = t.node(x).grad;
        for (size_t i = 0; i < dy.size(); ++i) {
            dx[i] += dy[i] * c;
        }
    };
    return y_id;
}

Tape::Id Tape::relu(Id x) {
    Tensor y = node(x).value;
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = y[i] > 0.0 ? y[i] : 0.0;
    }
    Id y_id = emit(std::move(y), node(x).requires_grad, nullptr);
    node(y_id).back = [x, y_id](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& xv = t.node(x).value;
        Tensor& dx = t.node(x).grad;
        for (size_t i = 0; i < dy.size(); ++i) {
            if (xv[i] > 0.0) dx[i] += dy[i];
        }
    };
    return y_id;
}

Tape::Id Tape::elu(Id x) {
    Tensor y = node(x).value;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] <= 0.0) y[i] = std::expm1(y[i]);
    }
    Id y_id = emit(std::move(y), node(x).requires_grad, nullptr);
    node(y_id).back = [x, y_id](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& xv = t.node(x).value;
        const Tensor& yv = t.node(y_id).value;
        Tensor& dx = t.node(x).grad;
        for (size_t i = 0; i < dy.size(); ++i) {
            dx[i] += dy[i] * (xv[i] > 0.0 ? 1.0 : yv[i] + 1.0);
        }
    };
    return y_id;
}

Tape::Id Tape::layer_norm(Id x, Id gamma, Id beta) {
    constexpr double kEps = 1e-5;
    const Tensor& xv = node(x).value;
    check_matrix(xv, "layer_norm input");
    const size_t rows = xv.rows(), dim = xv.cols();
    if (node(gamma).value.size() != dim || node(beta).value.size() != dim) {
        throw ArgumentError("layer_norm: scale/shift size does not match feature width");
    }
    const Tensor& gv = node(gamma).value;
    const Tensor& bv = node(beta).value;

    Tensor xhat = Tensor::matrix(rows, dim);
    Tensor inv_sigma = Tensor::vector(rows);
    Tensor y = Tensor::matrix(rows, dim);
    for (size_t r = 0; r < rows; ++r) {
        double mean = 0.0;
        for (size_t j = 0; j < dim; ++j) mean += xv(r, j);
        mean /= static_cast<double>(dim);
        double var = 0.0;
        for (size_t j = 0; j < dim; ++j) {
            double d = xv(r, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(dim);
        double inv = 1.0 / std::sqrt(var + kEps);
        inv_sigma[r] = inv;
        for (size_t j = 0; j < dim; ++j) {
            double h = (xv(r, j) - mean) * inv;
            xhat(r, j) = h;
            y(r, j) = gv[j] * h + bv[j];
        }
    }

    bool req = node(x).requires_grad || node(gamma).requires_grad || node(beta).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [x, gamma, beta, y_id, rows, dim, xhat = std::move(xhat),
                       inv_sigma = std::move(inv_sigma)](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& gv2 = t.node(gamma).value;
        if (t.node(gamma).requires_grad) {
            Tensor& dg = t.node(gamma).grad;
            for (size_t j = 0; j < dim; ++j) {
                double acc = 0.0;
                for (size_t r = 0; r < rows; ++r) acc += dy(r, j) * xhat(r, j);
                dg[j] += acc;
            }
        }
        if (t.node(beta).requires_grad) {
            Tensor& db = t.node(beta).grad;
            for (size_t j = 0; j < dim; ++j) {
                double acc = 0.0;
                for (size_t r = 0; r < rows; ++r) acc += dy(r, j);
                db[j] += acc;
            }
        }
        if (t.node(x).requires_grad) {
            Tensor& dx = t.node(x).grad;
            for (size_t r = 0; r < rows; ++r) {
                double m1 = 0.0, m2 = 0.0;
                for (size_t j = 0; j < dim; ++j) {
                    double dh = dy(r, j) * gv2[j];
                    m1 += dh;
                    m2 += dh * xhat(r, j);
                }
                m1 /= static_cast<double>(dim);
                m2 /= static_cast<double>(dim);
                for (size_t j = 0; j < dim; ++j) {
                    double dh = dy(r, j) * gv2[j];
                    dx(r, j) += inv_sigma[r] * (dh - m1 - xhat(r, j) * m2);
                }
            }
        }
    };
    return y_id;
}

Tape::Id Tape::batch_norm(Id x, Id gamma, Id beta, Tensor& running_mean, Tensor& running_var,
                          bool training, double momentum) {
    constexpr double kEps = 1e-5;
    const Tensor& xv = node(x).value;
    check_matrix(xv, "batch_norm input");
    const size_t rows = xv.rows(), dim = xv.cols();
    if (node(gamma).value.size() != dim || node(beta).value.size() != dim) {
        throw ArgumentError("batch_norm: scale/shift size does not match feature width");
    }
    if (running_mean.size() != dim || running_var.size() != dim) {
        throw ArgumentError("batch_norm: running stats size does not match feature width");
    }
    if (rows == 0) {
        throw ArgumentError("batch_norm: empty batch");
    }
    const Tensor& gv = node(gamma).value;
    const Tensor& bv = node(beta).value;

    Tensor xhat = Tensor::matrix(rows, dim);
    Tensor inv_sigma = Tensor::vector(dim);
    Tensor y = Tensor::matrix(rows, dim);
    std::vector<double> scratch(rows);
    for (size_t j = 0; j < dim; ++j) {
        double mean, var;
        if (training) {
            // Batch statistics are accumulated in sorted order so that row
            // permutations of the batch cannot perturb them.
            for (size_t r = 0; r < rows; ++r) scratch[r] = xv(r, j);
            std::sort(scratch.begin(), scratch.end());
            mean = 0.0;
            for (double v : scratch) mean += v;
            mean /= static_cast<double>(rows);
            for (size_t r = 0; r < rows; ++r) {
                double d = xv(r, j) - mean;
                scratch[r] = d * d;
            }
            std::sort(scratch.begin(), scratch.end());
            var = 0.0;
            for (double v : scratch) var += v;
            var /= static_cast<double>(rows);
            running_mean[j] = (1.0 - momentum) * running_mean[j] + momentum * mean;
            running_var[j] = (1.0 - momentum) * running_var[j] + momentum * var;
        } else {
            mean = running_mean[j];
            var = running_var[j];
        }
        double inv = 1.0 / std::sqrt(var + kEps);
        inv_sigma[j] = inv;
        for (size_t r = 0; r < rows; ++r) {
            double h = (xv(r, j) - mean) * inv;
            xhat(r, j) = h;
            y(r, j) = gv[j] * h + bv[j];
        }
    }

    bool req = node(x).requires_grad || node(gamma).requires_grad || node(beta).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [x, gamma, beta, y_id, rows, dim, training, xhat = std::move(xhat),
                       inv_sigma = std::move(inv_sigma)](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& gv2 = t.node(gamma).value;
        if (t.node(gamma).requires_grad) {
            Tensor& dg = t.node(gamma).grad;
            for (size_t j = 0; j < dim; ++j) {
                double acc = 0.0;
                for (size_t r = 0; r < rows; ++r) acc += dy(r, j) * xhat(r, j);
                dg[j] += acc;
            }
        }
        if (t.node(beta).requires_grad) {
            Tensor& db = t.node(beta).grad;
            for (size_t j = 0; j < dim; ++j) {
                double acc = 0.0;
                for (size_t r = 0; r < rows; ++r) acc += dy(r, j);
                db[j] += acc;
            }
        }
        if (t.node(x).requires_grad) {
            Tensor& dx = t.node(x).grad;
            for (size_t j = 0; j < dim; ++j) {
                if (training) {
                    double s1 = 0.0, s2 = 0.0;
                    for (size_t r = 0; r < rows; ++r) {
                        double dh = dy(r, j) * gv2[j];
                        s1 += dh;
                        s2 += dh * xhat(r, j);
                    }
                    s1 /= static_cast<double>(rows);
                    s2 /= static_cast<double>(rows);
                    for (size_t r = 0; r < rows; ++r) {
                        double dh = dy(r, j) * gv2[j];
                        dx(r, j) += inv_sigma[j] * (dh - s1 - xhat(r, j) * s2);
                    }
                } else {
                    for (size_t r = 0; r < rows; ++r) {
                        dx(r, j) += dy(r, j) * gv2[j] * inv_sigma[j];
                    }
                }
            }
        }
    };
    return y_id;
}

Tape::Id Tape::dropout(Id x, double rate, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ArgumentError("dropout rate must lie in [0, 1)");
    }
    if (rate == 0.0) {
        return x;
    }
    const Tensor& xv = node(x).value;
    const double keep_scale = 1.0 / (1.0 - rate);
    Tensor mask(xv.shape());
    Tensor y = xv;
    for (size_t i = 0; i < y.size(); ++i) {
        mask[i] = rng.bernoulli(1.0 - rate) ? keep_scale : 0.0;
        y[i] *= mask[i];
    }
    Id y_id = emit(std::move(y), node(x).requires_grad, nullptr);
    node(y_id).back = [x, y_id, mask = std::move(mask)](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& dy = t.node(y_id).grad;
        Tensor& dx = t.node(x).grad;
        for (size_t i = 0; i < dy.size(); ++i) {
            dx[i] += dy[i] * mask[i];
        }
    };
    return y_id;
}

Tape::Id Tape::concat_cols(Id a, Id b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    check_matrix(av, "concat_cols left");
    check_matrix(bv, "concat_cols right");
    if (av.rows() != bv.rows()) {
        throw ArgumentError("concat_cols: row counts differ");
    }
    const size_t rows = av.rows(), pa = av.cols(), pb = bv.cols();
    Tensor y = Tensor::matrix(rows, pa + pb);
    for (size_t r = 0; r < rows; ++r) {
        for (size_t j = 0; j < pa; ++j) y(r, j) = av(r, j);
        for (size_t j = 0; j < pb; ++j) y(r, pa + j) = bv(r, j);
    }
    bool req = node(a).requires_grad || node(b).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [a, b, y_id, rows, pa, pb](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        if (t.node(a).requires_grad) {
            Tensor& da = t.node(a).grad;
            for (size_t r = 0; r < rows; ++r) {
                for (size_t j = 0; j < pa; ++j) da(r, j) += dy(r, j);
            }
        }
        if (t.node(b).requires_grad) {
            Tensor& db = t.node(b).grad;
            for (size_t r = 0; r < rows; ++r) {
                for (size_t j = 0; j < pb; ++j) db(r, j) += dy(r, pa + j);
            }
        }
    };
    return y_id;
}

Tape::Id Tape::masked_segment_sum(Id x, std::vector<size_t> offsets) {
    const Tensor& xv = node(x).value;
    check_matrix(xv, "masked_segment_sum input");
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != xv.rows()) {
        throw ArgumentError("masked_segment_sum: offsets must start at 0 and end at the row count");
    }
    for (size_t s = 0; s + 1 < offsets.size(); ++s) {
        if (offsets[s] > offsets[s + 1]) {
            throw ArgumentError("masked_segment_sum: offsets must be non-decreasing");
        }
    }
    const size_t segments = offsets.size() - 1;
    const size_t dim = xv.cols();

    Tensor y = Tensor::matrix(segments, dim);
    std::vector<double> column;
    for (size_t s = 0; s < segments; ++s) {
        const size_t lo = offsets[s], hi = offsets[s + 1];
        for (size_t j = 0; j < dim; ++j) {
            column.clear();
            for (size_t r = lo; r < hi; ++r) {
                column.push_back(xv(r, j));
            }
            // Summing in sorted order makes the result independent of how the
            // segment's rows were ordered.
            std::sort(column.begin(), column.end());
            double acc = 0.0;
            if (!column.empty()) {
                acc = column[0];
                for (size_t i = 1; i < column.size(); ++i) acc += column[i];
            }
            y(s, j) = acc;
        }
    }

    Id y_id = emit(std::move(y), node(x).requires_grad, nullptr);
    node(y_id).back = [x, y_id, offsets = std::move(offsets), dim](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const Tensor& dy = t.node(y_id).grad;
        Tensor& dx = t.node(x).grad;
        for (size_t s = 0; s + 1 < offsets.size(); ++s) {
            for (size_t r = offsets[s]; r < offsets[s + 1]; ++r) {
                for (size_t j = 0; j < dim; ++j) {
                    dx(r, j) += dy(s, j);
                }
            }
        }
    };
    return y_id;
}

Tape::Id Tape::weighted_mix(Id x, Id weights, size_t num_groups) {
    const Tensor& xv = node(x).value;
    const Tensor& wv = node(weights).value;
    check_matrix(xv, "weighted_mix input");
    if (num_groups == 0 || xv.rows() % num_groups != 0) {
        throw ArgumentError("weighted_mix: row count must be a multiple of the group count");
    }
    if (wv.size() != num_groups) {
        throw ArgumentError("weighted_mix: weight vector length must equal the group count");
    }
    const size_t batch = xv.rows() / num_groups;
    const size_t dim = xv.cols();

    Tensor y = Tensor::matrix(batch, dim);
    for (size_t b = 0; b < batch; ++b) {
        for (size_t j = 0; j < dim; ++j) {
            double acc = 0.0;
            for (size_t k = 0; k < num_groups; ++k) {
                acc += wv[k] * xv(b * num_groups + k, j);
            }
            y(b, j) = acc;
        }
    }

    bool req = node(x).requires_grad || node(weights).requires_grad;
    Id y_id = emit(std::move(y), req, nullptr);
    node(y_id).back = [x, weights, y_id, batch, dim, num_groups](Tape& t) {
        const Tensor& dy = t.node(y_id).grad;
        const Tensor& xv2 = t.node(x).value;
        const Tensor& wv2 = t.node(weights).value;
        if (t.node(x).requires_grad) {
            Tensor& dx = t.node(x).grad;
            for (size_t b = 0; b < batch; ++b) {
                for (size_t k = 0; k < num_groups; ++k) {
                    for (size_t j = 0; j < dim; ++j) {
                        dx(b * num_groups + k, j) += wv2[k] * dy(b, j);
                    }
                }
            }
        }
        if (t.node(weights).requires_grad) {
            Tensor& dw = t.node(weights).grad;
            for (size_t k = 0; k < num_groups; ++k) {
                double acc = 0.0;
                for (size_t b = 0; b < batch; ++b) {
                    for (size_t j = 0; j < dim; ++j) {
                        acc += xv2(b * num_groups + k, j) * dy(b, j);
                    }
                }
                dw[k] += acc;
            }
        }
    };
    return y_id;
}

Tape::Id Tape::softmax_vec(Id w) {
    const Tensor& wv = node(w).value;
    if (wv.size() == 0) {
        throw ArgumentError("softmax_vec: empty input");
    }
    double mx = wv[0];
    for (size_t i = 1; i < wv.size(); ++i) mx = std::max(mx, wv[i]);
    Tensor s(wv.shape());
    double z = 0.0;
    for (size_t i = 0; i < wv.size(); ++i) {
        s[i] = std::exp(wv[i] - mx);
        z += s[i];
    }
    for (size_t i = 0; i < s.size(); ++i) s[i] /= z;

    Id y_id = emit(std::move(s), node(w).requires_grad, nullptr);
    node(y_id).back = [w, y_id](Tape& t) {
        if (!t.node(w).requires_grad) return;
        const Tensor& ds = t.node(y_id).grad;
        const Tensor& sv = t.node(y_id).value;
        Tensor& dw = t.node(w).grad;
        double dot = 0.0;
        for (size_t i = 0; i < sv.size(); ++i) dot += ds[i] * sv[i];
        for (size_t i = 0; i < sv.size(); ++i) {
            dw[i] += sv[i] * (ds[i] - dot);
        }
    };
    return y_id;
}

Tape::Id Tape::softmax_cross_entropy(Id logits, std::vector<int> labels, int num_classes) {
    const Tensor& lv = node(logits).value;
    check_matrix(lv, "softmax_cross_entropy logits");
    const size_t batch = lv.rows();
    const size_t classes = lv.cols();
    if (num_classes < 1 || static_cast<size_t>(num_classes) != classes) {
        throw ArgumentError("softmax_cross_entropy: class count does not match logit width");
    }
    if (labels.size() != batch || batch == 0) {
        throw ArgumentError("softmax_cross_entropy: need one label per logit row");
    }
    for (int lb : labels) {
        if (lb < 0 || lb >= num_classes) {
            throw ArgumentError("softmax_cross_entropy: label " + std::to_string(lb) +
                                " out of range [0, " + std::to_string(num_classes) + ")");
        }
    }

    Tensor probs = Tensor::matrix(batch, classes);
    double total = 0.0;
    for (size_t r = 0; r < batch; ++r) {
        double mx = lv(r, 0);
        for (size_t c = 1; c < classes; ++c) mx = std::max(mx, lv(r, c));
        double z = 0.0;
        for (size_t c = 0; c < classes; ++c) {
            double e = std::exp(lv(r, c) - mx);
            probs(r, c) = e;
            z += e;
        }
        for (size_t c = 0; c < classes; ++c) probs(r, c) /= z;
        double log_z = std::log(z) + mx;
        total += log_z - lv(r, static_cast<size_t>(labels[r]));
    }
    Tensor loss = Tensor::scalar(total / static_cast<double>(batch));

    Id y_id = emit(std::move(loss), node(logits).requires_grad, nullptr);
    node(y_id).back = [logits, y_id, labels = std::move(labels), probs = std::move(probs), batch,
                       classes](Tape& t) {
        if (!t.node(logits).requires_grad) return;
        const double g = t.node(y_id).grad[0] / static_cast<double>(batch);
        Tensor& dl = t.node(logits).grad;
        for (size_t r = 0; r < batch; ++r) {
            for (size_t c = 0; c < classes; ++c) {
                double ind = (static_cast<size_t>(labels[r]) == c) ? 1.0 : 0.0;
                dl(r, c) += g * (probs(r, c) - ind);
            }
        }
    };
    return y_id;
}

Tape::Id Tape::sum_all(Id x) {
    const Tensor& xv = node(x).value;
    double total = 0.0;
    for (size_t i = 0; i < xv.size(); ++i) total += xv[i];
    Id y_id = emit(Tensor::scalar(total), node(x).requires_grad, nullptr);
    node(y_id).back = [x, y_id](Tape& t) {
        if (!t.node(x).requires_grad) return;
        const double g = t.node(y_id).grad[0];
        Tensor& dx = t.node(x).grad;
        for (size_t i = 0; i < dx.size(); ++i) dx[i] += g;
    };
    return y_id;
}

void Tape::backward(Id root) {
    if (nodes_.empty()) {
        throw StateError("backward called on an empty tape");
    }
    if (differentiated_) {
        throw StateError("tape already differentiated");
    }
    Node& r = node(root);
    if (r.value.size() != 1) {
        throw ArgumentError("backward root must be a scalar");
    }
    differentiated_ = true;
    r.grad[0] = 1.0;
    for (Id id = root; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.requires_grad || !n.back) continue;
        ensure_finite(n.grad, "tape gradient");
        n.back(*this);
    }
}

Tensor row_softmax(const Tensor& logits) {
    if (logits.shape().size() != 2) {
        throw ArgumentError("row_softmax expects a rank-2 tensor");
    }
    Tensor out = Tensor::matrix(logits.rows(), logits.cols());
    for (size_t r = 0; r < logits.rows(); ++r) {
        double mx = logits(r, 0);
        for (size_t c = 1; c < logits.cols(); ++c) mx = std::max(mx, logits(r, c));
        double z = 0.0;
        for (size_t c = 0; c < logits.cols(); ++c) {
            double e = std::exp(logits(r, c) - mx);
            out(r, c) = e;
            z += e;
        }
        for (size_t c = 0; c < logits.cols(); ++c) out(r, c) /= z;
    }
    return out;
}

}  // namespace rpnet
