#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "rpnet/autodiff.hpp"
#include "rpnet/errors.hpp"
#include "rpnet/nn.hpp"
#include "rpnet/rng.hpp"
#include "rpnet/tensor.hpp"

using namespace rpnet;

namespace {

Tensor matrix_of(size_t rows, size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

// Central finite difference of `loss_of` with respect to one entry.
template <typename LossFn>
double fd_grad(Tensor& param, size_t index, LossFn loss_of, double h = 1e-5) {
    double saved = param[index];
    param[index] = saved + h;
    double up = loss_of();
    param[index] = saved - h;
    double down = loss_of();
    param[index] = saved;
    return (up - down) / (2.0 * h);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

std::filesystem::path tmp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("rpnet_test_" + name);
}

}  // namespace

TEST_CASE("tensor shapes and accessors") {
    Tensor s = Tensor::scalar(2.5);
    CHECK(s.rank() == 0);
    CHECK(s.size() == 1);
    CHECK(s[0] == 2.5);

    Tensor m = matrix_of(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(1, 2) == 6.0);

    CHECK_THROWS_AS(Tensor({2, 2}, {1.0}), ArgumentError);
    CHECK_THROWS_AS(ensure_finite(Tensor::scalar(std::nan("")), "probe"), NumericError);
    CHECK_NOTHROW(ensure_finite(m, "probe"));
}

TEST_CASE("linear layer forward and backward by hand") {
    Tape tape;
    Tape::Id x = tape.input(matrix_of(1, 2, {1.0, 2.0}), false);
    Tape::Id w = tape.input(matrix_of(2, 2, {1.0, 0.0, 0.0, 1.0}), true);
    Tape::Id b = tape.input(Tensor::vector({0.5, -0.5}), true);
    Tape::Id y = tape.linear(x, w, b);
    CHECK(tape.value(y).values() == std::vector<double>{1.5, 1.5});

    tape.backward(tape.sum_all(y));
    CHECK(tape.grad(w).values() == std::vector<double>{1.0, 2.0, 1.0, 2.0});
    CHECK(tape.grad(b).values() == std::vector<double>{1.0, 1.0});
}

TEST_CASE("activation values and gradients") {
    Tape tape;
    Tape::Id x = tape.input(Tensor::vector({-1.0, 0.0, 2.0}), true);

    SUBCASE("relu") {
        Tape::Id y = tape.relu(x);
        CHECK(tape.value(y).values() == std::vector<double>{0.0, 0.0, 2.0});
        tape.backward(tape.sum_all(y));
        CHECK(tape.grad(x)[0] == 0.0);
        CHECK(tape.grad(x)[2] == 1.0);
    }
    SUBCASE("elu") {
        Tape::Id y = tape.elu(x);
        CHECK(tape.value(y)[0] == doctest::Approx(std::expm1(-1.0)));
        CHECK(tape.value(y)[2] == 2.0);
        tape.backward(tape.sum_all(y));
        CHECK(tape.grad(x)[0] == doctest::Approx(std::exp(-1.0)));
        CHECK(tape.grad(x)[2] == 1.0);
    }
}

TEST_CASE("scalar square has gradient two w") {
    Tape tape;
    Tape::Id w = tape.input(Tensor::scalar(3.0), true);
    Tape::Id y = tape.mul(w, w);
    CHECK(tape.value(y)[0] == 9.0);
    tape.backward(y);
    CHECK(tape.grad(w)[0] == 6.0);
}

TEST_CASE("layer norm maps a constant row to its shift") {
    Tape tape;
    Tape::Id x = tape.input(matrix_of(2, 3, {4, 4, 4, -1, -1, -1}), false);
    Tape::Id gamma = tape.input(Tensor::vector({2.0, 2.0, 2.0}), false);
    Tape::Id beta = tape.input(Tensor::vector({0.25, -0.5, 1.0}), false);
    Tape::Id y = tape.layer_norm(x, gamma, beta);
    for (size_t r = 0; r < 2; ++r) {
        CHECK(tape.value(y)(r, 0) == 0.25);
        CHECK(tape.value(y)(r, 1) == -0.5);
        CHECK(tape.value(y)(r, 2) == 1.0);
    }
}

TEST_CASE("batch norm training statistics and running updates") {
    Tensor running_mean = Tensor::vector(std::vector<double>{0.0});
    Tensor running_var = Tensor::vector(std::vector<double>{1.0});

    Tape tape;
    Tape::Id x = tape.input(matrix_of(2, 1, {1.0, 3.0}), false);
    Tape::Id gamma = tape.input(Tensor::vector(std::vector<double>{1.0}), false);
    Tape::Id beta = tape.input(Tensor::vector(std::vector<double>{0.0}), false);
    Tape::Id y = tape.batch_norm(x, gamma, beta, running_mean, running_var, true);

    // Batch mean 2, population variance 1: rows normalize to -1 and +1.
    CHECK(tape.value(y)(0, 0) == doctest::Approx(-1.0).epsilon(1e-5));
    CHECK(tape.value(y)(1, 0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(running_mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * 2.0));
    CHECK(running_var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * 1.0));

    // Evaluation mode uses the running statistics, not the batch.
    Tape eval;
    Tape::Id xe = eval.input(matrix_of(1, 1, {0.2}), false);
    Tape::Id ge = eval.input(Tensor::vector(std::vector<double>{1.0}), false);
    Tape::Id be = eval.input(Tensor::vector(std::vector<double>{0.0}), false);
    Tape::Id ye = eval.batch_norm(xe, ge, be, running_mean, running_var, false);
    double expected = (0.2 - running_mean[0]) / std::sqrt(running_var[0] + 1e-5);
    CHECK(eval.value(ye)(0, 0) == doctest::Approx(expected));
}

TEST_CASE("dropout contracts") {
    Rng rng(7);

    SUBCASE("rate validation") {
        Tape tape;
        Tape::Id x = tape.input(Tensor::vector(std::vector<double>{1.0}), false);
        CHECK_THROWS_AS(tape.dropout(x, 1.0, rng), ArgumentError);
        CHECK_THROWS_AS(tape.dropout(x, -0.1, rng), ArgumentError);
    }
    SUBCASE("rate zero is the identity") {
        Tape tape;
        Tape::Id x = tape.input(Tensor::vector({1.0, -2.0}), false);
        Tape::Id y = tape.dropout(x, 0.0, rng);
        CHECK(tape.value(y).values() == std::vector<double>{1.0, -2.0});
    }
    SUBCASE("training expectation matches the evaluation output") {
        const double rate = 0.3;
        double sum = 0.0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i) {
            Rng r(static_cast<uint64_t>(i));
            Tape tape;
            Tape::Id x = tape.input(Tensor::vector(std::vector<double>{1.0}), false);
            sum += tape.value(tape.dropout(x, rate, r))[0];
        }
        CHECK(sum / trials == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("identity block configuration passes input through") {
    BlockSpec spec{2, 2, NormKind::none, 0.0, ActivationKind::relu};
    Rng rng(3);
    BlockParams params = init_block(spec, rng);
    params.weight = matrix_of(2, 2, {1.0, 0.0, 0.0, 1.0});
    params.bias = Tensor::vector({0.0, 0.0});

    Tensor x = matrix_of(2, 2, {0.5, 0.0, 3.0, 1.25});
    Rng fwd(11);
    Tensor y = block_apply(spec, params, x, true, fwd);
    CHECK(y.values() == x.values());

    Rng fwd2(12);
    Tensor y_eval = block_apply(spec, params, x, false, fwd2);
    CHECK(y_eval.values() == x.values());
}

TEST_CASE("block gradients match finite differences") {
    Rng rng(0xD1CE);
    for (NormKind norm : {NormKind::none, NormKind::layer, NormKind::batch}) {
        for (ActivationKind act : {ActivationKind::relu, ActivationKind::elu}) {
            BlockSpec s1{3, 5, norm, 0.0, act};
            BlockSpec s2{5, 4, norm, 0.0, act};
            BlockParams p1 = init_block(s1, rng);
            BlockParams p2 = init_block(s2, rng);
            Tensor x = Tensor({3, 3});
            for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(-1.0, 1.0);

            auto loss_of = [&]() {
                Tape tape;
                Rng unused(0);
                BlockIds i1 = bind_block(tape, p1, true);
                BlockIds i2 = bind_block(tape, p2, true);
                Tape::Id h = tape.input(x, false);
                h = block_forward(tape, s1, p1, i1, h, true, unused);
                h = block_forward(tape, s2, p2, i2, h, true, unused);
                return tape.value(tape.sum_all(h))[0];
            };

            // One taped pass for analytic gradients.
            Tape tape;
            Rng unused(0);
            BlockIds i1 = bind_block(tape, p1, true);
            BlockIds i2 = bind_block(tape, p2, true);
            Tape::Id h = tape.input(x, false);
            h = block_forward(tape, s1, p1, i1, h, true, unused);
            h = block_forward(tape, s2, p2, i2, h, true, unused);
            tape.backward(tape.sum_all(h));

            auto check_param = [&](Tensor& param, Tape::Id id) {
                if (id < 0) return;
                for (size_t i = 0; i < param.size(); ++i) {
                    double analytic = tape.grad(id)[i];
                    double numeric = fd_grad(param, i, loss_of);
                    CHECK(rel_err(analytic, numeric) < 1e-4);
                }
            };
            check_param(p1.weight, i1.weight);
            check_param(p1.bias, i1.bias);
            check_param(p1.norm_scale, i1.norm_scale);
            check_param(p1.norm_shift, i1.norm_shift);
            check_param(p2.weight, i2.weight);
            check_param(p2.bias, i2.bias);
            check_param(p2.norm_scale, i2.norm_scale);
            check_param(p2.norm_shift, i2.norm_shift);
        }
    }
}

TEST_CASE("segment sum pools rows and broadcasts gradients") {
    Tape tape;
    Tape::Id x = tape.input(matrix_of(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}), true);
    Tape::Id y = tape.masked_segment_sum(x, {0, 2, 2, 4});
    REQUIRE(tape.value(y).rows() == 3);
    CHECK(tape.value(y)(0, 0) == 4.0);
    CHECK(tape.value(y)(0, 1) == 6.0);
    CHECK(tape.value(y)(1, 0) == 0.0);  // empty segment
    CHECK(tape.value(y)(1, 1) == 0.0);
    CHECK(tape.value(y)(2, 0) == 12.0);
    CHECK(tape.value(y)(2, 1) == 14.0);

    tape.backward(tape.sum_all(y));
    CHECK(tape.grad(x).values() == std::vector<double>(8, 1.0));
}

TEST_CASE("segment sum validates offsets") {
    Tape tape;
    Tape::Id x = tape.input(Tensor({3, 2}), false);
    CHECK_THROWS_AS(tape.masked_segment_sum(x, {1, 3}), ArgumentError);
    CHECK_THROWS_AS(tape.masked_segment_sum(x, {0, 2}), ArgumentError);
    CHECK_THROWS_AS(tape.masked_segment_sum(x, {0, 2, 1, 3}), ArgumentError);
    CHECK_THROWS_AS(tape.masked_segment_sum(x, {}), ArgumentError);
}

TEST_CASE("weighted mix combines group rows") {
    Tape tape;
    Tape::Id x = tape.input(matrix_of(4, 2, {1, 2, 3, 4, 5, 6, 7, 8}), true);
    Tape::Id w = tape.input(Tensor::vector({0.25, 0.75}), true);
    Tape::Id y = tape.weighted_mix(x, w, 2);
    REQUIRE(tape.value(y).rows() == 2);
    CHECK(tape.value(y)(0, 0) == doctest::Approx(0.25 * 1 + 0.75 * 3));
    CHECK(tape.value(y)(0, 1) == doctest::Approx(0.25 * 2 + 0.75 * 4));
    CHECK(tape.value(y)(1, 0) == doctest::Approx(0.25 * 5 + 0.75 * 7));

    tape.backward(tape.sum_all(y));
    CHECK(tape.grad(w)[0] == doctest::Approx(1 + 2 + 5 + 6));
    CHECK(tape.grad(w)[1] == doctest::Approx(3 + 4 + 7 + 8));
}

TEST_CASE("softmax over a vector") {
    Tape tape;
    Tape::Id w = tape.input(Tensor::vector({0.0, 0.0, 0.0}), false);
    Tensor s = tape.value(tape.softmax_vec(w));
    for (size_t i = 0; i < 3; ++i) CHECK(s[i] == doctest::Approx(1.0 / 3.0));

    Tape t2;
    Tape::Id v = t2.input(Tensor::vector({100.0, 100.0, 90.0}), false);
    Tensor s2 = t2.value(t2.softmax_vec(v));  // shifted, no overflow
    CHECK(s2[0] + s2[1] + s2[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s2[0] > s2[2]);
}

TEST_CASE("cross entropy of uniform and hand-built batches") {
    SUBCASE("uniform logits give log of the class count") {
        for (int c : {2, 3, 5}) {
            Tape tape;
            Tape::Id logits = tape.input(Tensor({2, static_cast<size_t>(c)}), false);
            Tape::Id loss = tape.softmax_cross_entropy(logits, {0, c - 1}, c);
            CHECK(tape.value(loss)[0] ==
                  doctest::Approx(std::log(static_cast<double>(c))).epsilon(1e-12));
        }
    }
    SUBCASE("true-class probabilities one half and one quarter") {
        // Row 0: equal logits. Row 1: logits (0, ln 3) put 1/4 on class 0.
        Tape tape;
        Tape::Id logits =
            tape.input(matrix_of(2, 2, {0.0, 0.0, 0.0, std::log(3.0)}), false);
        Tape::Id loss = tape.softmax_cross_entropy(logits, {0, 0}, 2);
        CHECK(tape.value(loss)[0] ==
              doctest::Approx(-(std::log(0.5) + std::log(0.25)) / 2.0).epsilon(1e-12));
    }
    SUBCASE("confident correct prediction drives the loss to zero") {
        Tape tape;
        Tape::Id logits = tape.input(matrix_of(1, 2, {40.0, 0.0}), false);
        Tape::Id loss = tape.softmax_cross_entropy(logits, {0}, 2);
        CHECK(tape.value(loss)[0] < 1e-12);
    }
    SUBCASE("label range is enforced") {
        Tape tape;
        Tape::Id logits = tape.input(Tensor({1, 2}), false);
        CHECK_THROWS_AS(tape.softmax_cross_entropy(logits, {2}, 2), ArgumentError);
        CHECK_THROWS_AS(tape.softmax_cross_entropy(logits, {-1}, 2), ArgumentError);
    }
}

TEST_CASE("row softmax yields distributions") {
    Tensor p = row_softmax(matrix_of(2, 3, {1, 2, 3, -5, 0, 5}));
    for (size_t r = 0; r < 2; ++r) {
        double sum = 0.0;
        for (size_t c = 0; c < 3; ++c) {
            CHECK(p(r, c) > 0.0);
            sum += p(r, c);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("tape state machine") {
    SUBCASE("backward needs a recorded forward") {
        Tape tape;
        CHECK_THROWS_AS(tape.backward(0), StateError);
    }
    SUBCASE("backward runs once") {
        Tape tape;
        Tape::Id w = tape.input(Tensor::scalar(1.0), true);
        Tape::Id y = tape.mul(w, w);
        tape.backward(y);
        CHECK_THROWS_AS(tape.backward(y), StateError);
    }
    SUBCASE("backward requires a scalar root") {
        Tape tape;
        Tape::Id x = tape.input(Tensor::vector({1.0, 2.0}), true);
        CHECK_THROWS_AS(tape.backward(x), ArgumentError);
    }
    SUBCASE("node ids are checked") {
        Tape tape;
        CHECK_THROWS_AS(tape.value(5), ArgumentError);
    }
}

TEST_CASE("non-finite op results are rejected") {
    Tape tape;
    Tape::Id x = tape.input(Tensor::scalar(1e308), false);
    CHECK_THROWS_AS(tape.add(x, x), NumericError);
}

TEST_CASE("adam steps") {
    SUBCASE("zero gradient leaves parameters untouched") {
        Tensor w = Tensor::vector({1.0, -2.0});
        Tensor g = Tensor::vector({0.0, 0.0});
        AdamState state = adam_init({&w});
        adam_step(state, {&w}, {&g}, 0.01, {"w"});
        CHECK(state.step == 1);
        CHECK(w.values() == std::vector<double>{1.0, -2.0});
    }
    SUBCASE("first step moves by the learning rate times the sign") {
        Tensor w = Tensor::vector({1.0, -2.0, 0.5});
        Tensor g = Tensor::vector({0.5, -0.3, 2.0});
        AdamState state = adam_init({&w});
        adam_step(state, {&w}, {&g}, 0.01, {"w"});
        CHECK(w[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
        CHECK(w[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
        CHECK(w[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-6));
    }
    SUBCASE("a quadratic bowl is solved in a few hundred steps") {
        Tensor w = Tensor::vector({0.5, 0.5, 0.5, -0.5});
        AdamState state = adam_init({&w});
        for (int step = 0; step < 500; ++step) {
            Tensor g = w;
            for (size_t i = 0; i < g.size(); ++i) g[i] *= 2.0;
            adam_step(state, {&w}, {&g}, 0.01, {"w"});
        }
        double norm = 0.0;
        for (size_t i = 0; i < w.size(); ++i) norm += w[i] * w[i];
        CHECK(std::sqrt(norm) < 1e-3);
    }
    SUBCASE("non-finite gradients name the parameter") {
        Tensor w = Tensor::vector(std::vector<double>{1.0});
        Tensor g = Tensor::vector(std::vector<double>{std::nan("")});
        AdamState state = adam_init({&w});
        CHECK_THROWS_WITH_AS(adam_step(state, {&w}, {&g}, 0.01, {"decoder.0.weight"}),
                             doctest::Contains("decoder.0.weight"), NumericError);
    }
}

TEST_CASE("checkpoint files round-trip named tensors") {
    std::vector<NamedTensor> tensors;
    tensors.push_back({"alpha", matrix_of(2, 3, {1, 2, 3, 4, 5, 6})});
    tensors.push_back({"beta", Tensor::vector({-1.0, 0.25})});
    tensors.push_back({"gamma", Tensor::scalar(9.0)});

    auto path = tmp_file("ckpt.rpckpt");
    write_checkpoint(path.string(), tensors);
    std::vector<NamedTensor> back = read_checkpoint(path.string());

    REQUIRE(back.size() == tensors.size());
    for (size_t i = 0; i < tensors.size(); ++i) {
        CHECK(back[i].name == tensors[i].name);
        CHECK(back[i].value.shape() == tensors[i].value.shape());
        CHECK(back[i].value.values() == tensors[i].value.values());
    }

    SUBCASE("flipped byte fails the checksum") {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(20);
        char c;
        f.seekg(20);
        f.get(c);
        c = static_cast<char>(c ^ 0x40);
        f.seekp(20);
        f.put(c);
        f.close();
        CHECK_THROWS_AS(read_checkpoint(path.string()), PersistChecksumError);
    }
    SUBCASE("severed header") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "RPCK";
        out.close();
        CHECK_THROWS_AS(read_checkpoint(path.string()), PersistTruncatedError);
    }
    SUBCASE("foreign magic") {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "NOTACKPTxxxxxxxxxxxxxxxx";
        out.close();
        CHECK_THROWS_AS(read_checkpoint(path.string()), PersistVersionError);
    }
    std::filesystem::remove(path);
}
