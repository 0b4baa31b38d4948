#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mulab/error.hpp"
#include "mulab/nn/model.hpp"
#include "mulab/nn/model_io.hpp"
#include "support.hpp"

using namespace mulab;
using namespace mulab::nn;

namespace {

ArchSpec dense_only(std::size_t in, std::size_t out) {
    ArchSpec a;
    a.input_shape = {in};
    a.layers = {Dense{in, out}};
    a.output_dim = out;
    return a;
}

}  // namespace

TEST_CASE("layout of a small conv net") {
    ArchSpec a;
    a.input_shape = {1, 5, 5};
    a.layers = {Conv2D{1, 2, 3, 1}, BatchNorm{2}, ReLU{}, Flatten{}, Dense{18, 3}};
    a.output_dim = 3;
    const auto layout = build_layout(a);
    REQUIRE(layout.size() == 6);
    CHECK(layout[0] == ParamRecord{0, ParamRole::Weight, 0, 18});
    CHECK(layout[1] == ParamRecord{0, ParamRole::Bias, 18, 2});
    CHECK(layout[2] == ParamRecord{1, ParamRole::Scale, 20, 2});
    CHECK(layout[3] == ParamRecord{1, ParamRole::Shift, 22, 2});
    CHECK(layout[4] == ParamRecord{4, ParamRole::Weight, 24, 54});
    CHECK(layout[5] == ParamRecord{4, ParamRole::Bias, 78, 3});
    CHECK(init_model(a, 1).num_params() == 81);
}

TEST_CASE("Dense(4,3) spans 15 parameters") {
    const auto m = init_model(dense_only(4, 3), 0);
    CHECK(m.record(0, ParamRole::Weight).length + m.record(0, ParamRole::Bias).length == 15);
    CHECK(m.num_params() == 15);
    CHECK_THROWS_AS((void)m.record(0, ParamRole::Scale), Error);
}

TEST_CASE("init is deterministic, Kaiming-bounded, with identity BatchNorm") {
    ArchSpec a;
    a.input_shape = {3, 6, 6};
    a.layers = {Conv2D{3, 4, 3, 1}, BatchNorm{4}, ReLU{}, GlobalAvgPool{}, Dense{4, 16}, BatchNorm{16}, ReLU{},
                Dense{16, 2}};
    a.output_dim = 2;
    const auto m1 = init_model(a, 7);
    const auto m2 = init_model(a, 7);
    CHECK(m1 == m2);
    CHECK(m1.params != init_model(a, 8).params);

    const auto& bn = m1.record(5, ParamRole::Scale);
    for (std::size_t i = 0; i < bn.length; ++i) CHECK(m1.params[bn.offset + i] == 1.0);
    const auto& shift = m1.record(5, ParamRole::Shift);
    for (std::size_t i = 0; i < shift.length; ++i) CHECK(m1.params[shift.offset + i] == 0.0);
    for (const auto& s : m1.bn_stats) {
        for (double v : s.mean) CHECK(v == 0.0);
        for (double v : s.var) CHECK(v == 1.0);
    }
    const std::pair<std::size_t, double> fan_in[] = {{0, 27.0}, {4, 4.0}, {7, 16.0}};
    for (const auto& [layer, fan] : fan_in) {
        const auto& w = m1.record(layer, ParamRole::Weight);
        const double bound = std::sqrt(6.0 / fan);
        for (std::size_t i = 0; i < w.length; ++i) CHECK(std::abs(m1.params[w.offset + i]) <= bound);
        const auto& b = m1.record(layer, ParamRole::Bias);
        for (std::size_t i = 0; i < b.length; ++i) CHECK(m1.params[b.offset + i] == 0.0);
    }
}

TEST_CASE("forward shapes and zero weights") {
    ArchSpec a = dense_only(5, 8);
    const auto zero = clone_with_params(init_model(a, 1), std::vector<double>(48, 0.0));
    const auto logits = forward(zero, testsupport::random_batch(32, {5}, 2), Mode::Eval);
    CHECK(logits.shape() == std::vector<std::size_t>{32, 8});
    for (double v : logits.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(clone_with_params(zero, std::vector<double>(47, 0.0)), ShapeError);
    CHECK_THROWS_AS(forward(zero, testsupport::random_batch(4, {6}, 2), Mode::Eval), ShapeError);
}

TEST_CASE("eval mode is pure and independent of batch composition") {
    const auto arch = testsupport::small_arch(0);
    auto m = init_model(arch, 3);
    m.bn_stats[0].mean = {0.1, -0.2, 0.3};
    m.bn_stats[0].var = {0.5, 2.0, 1.5};
    const auto batch = testsupport::random_batch(6, arch.input_shape, 4);
    const auto a = forward(m, batch, Mode::Eval);
    CHECK(a == forward(m, batch, Mode::Eval));
    const std::size_t row = batch.row_size();
    for (std::size_t r = 0; r < 6; ++r) {
        Tensor one({1, 1, 5, 5}, std::vector<double>(batch.data() + r * row, batch.data() + (r + 1) * row));
        const auto single = forward(m, one, Mode::Eval);
        for (std::size_t k = 0; k < 3; ++k) CHECK(single[k] == doctest::Approx(a[r * 3 + k]).epsilon(1e-12));
    }
    const auto copy = m;
    (void)forward(m, batch, Mode::Train);
    CHECK(m == copy);
}

TEST_CASE("train-mode BatchNorm output has mean shift and variance scale^2") {
    ArchSpec a;
    a.input_shape = {3};
    a.layers = {BatchNorm{3, 0.1, 1e-12}};
    a.output_dim = 3;
    auto m = init_model(a, 0);
    m.params = {2.0, 0.5, 1.0, 0.3, -1.0, 4.0};
    auto batch = testsupport::random_batch(40, {3}, 5, 1000.0);
    const auto out = forward(m, batch, Mode::Train);
    for (std::size_t f = 0; f < 3; ++f) {
        double mean = 0.0;
        for (std::size_t r = 0; r < 40; ++r) mean += out[r * 3 + f];
        mean /= 40.0;
        double var = 0.0;
        for (std::size_t r = 0; r < 40; ++r) var += (out[r * 3 + f] - mean) * (out[r * 3 + f] - mean);
        var /= 40.0;
        CHECK(mean == doctest::Approx(m.params[3 + f]).epsilon(1e-6));
        CHECK(var == doctest::Approx(m.params[f] * m.params[f]).epsilon(1e-6));
    }
}

TEST_CASE("running statistics follow momentum 0.1 with the unbiased batch variance") {
    ArchSpec a;
    a.input_shape = {1};
    a.layers = {BatchNorm{1}};
    a.output_dim = 1;
    auto m = init_model(a, 0);
    Tensor batch({4, 1}, {1.0, 2.0, 3.0, 6.0});
    const auto lg = loss_and_grad(m, batch, Targets::multi({1, 0, 1, 0}, 1), LossKind::BinaryCrossEntropy);
    REQUIRE(lg.batch_stats.size() == 1);
    CHECK(lg.batch_stats[0].mean[0] == doctest::Approx(3.0));
    CHECK(lg.batch_stats[0].var[0] == doctest::Approx(14.0 / 3.0));
    apply_batch_stats(m, lg.batch_stats);
    CHECK(m.bn_stats[0].mean[0] == doctest::Approx(0.3));
    CHECK(m.bn_stats[0].var[0] == doctest::Approx(0.9 + 0.1 * 14.0 / 3.0));
}

TEST_CASE("loss values at uniform logits") {
    const auto zero = clone_with_params(init_model(dense_only(4, 8), 0), std::vector<double>(40, 0.0));
    const auto batch = testsupport::random_batch(5, {4}, 1);
    const double ce = loss_value(zero, batch, testsupport::random_targets(5, 8, LossKind::CrossEntropy, 2),
                                 LossKind::CrossEntropy);
    CHECK(ce == doctest::Approx(std::log(8.0)).epsilon(1e-12));
    const double bce = loss_value(zero, batch, testsupport::random_targets(5, 8, LossKind::BinaryCrossEntropy, 3),
                                  LossKind::BinaryCrossEntropy);
    CHECK(bce == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central differences") {
    for (std::size_t variant = 0; variant < 4; ++variant) {
        const auto arch = testsupport::small_arch(variant);
        for (auto kind : {LossKind::CrossEntropy, LossKind::BinaryCrossEntropy}) {
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const auto model = testsupport::jittered_model(arch, 100 + seed);
                const auto batch = testsupport::random_batch(6, arch.input_shape, 200 + seed);
                const auto targets = testsupport::random_targets(6, arch.output_dim, kind, 300 + seed);
                const auto gc = testsupport::check_gradient(model, batch, targets, kind);
                CAPTURE(variant);
                CAPTURE(seed);
                CHECK(gc.max_rel_error < 1e-4);
            }
        }
    }
}

TEST_CASE("eval-mode gradients match central differences") {
    const auto arch = testsupport::small_arch(2);
    auto model = init_model(arch, 1);
    model.bn_stats[0].mean.assign(8, 0.2);
    model.bn_stats[0].var.assign(8, 1.7);
    const auto batch = testsupport::random_batch(5, arch.input_shape, 2);
    const auto targets = testsupport::random_targets(5, 4, LossKind::CrossEntropy, 3);
    const auto lg = loss_and_grad(model, batch, targets, LossKind::CrossEntropy, Mode::Eval);
    CHECK(lg.batch_stats.empty());
    auto probe = model;
    for (std::size_t i = 0; i < model.params.size(); ++i) {
        probe.params[i] = model.params[i] + 1e-5;
        const double up = loss_value(probe, batch, targets, LossKind::CrossEntropy, Mode::Eval);
        probe.params[i] = model.params[i] - 1e-5;
        const double down = loss_value(probe, batch, targets, LossKind::CrossEntropy, Mode::Eval);
        probe.params[i] = model.params[i];
        const double numeric = (up - down) / 2e-5;
        CHECK(lg.grad.values[i] == doctest::Approx(numeric).epsilon(1e-4).scale(1e-2));
    }
}

TEST_CASE("non-finite activations are reported") {
    const auto m = init_model(dense_only(3, 2), 0);
    Tensor batch({1, 3}, {1.0, std::nan(""), 0.0});
    CHECK_THROWS_AS(forward(m, batch, Mode::Eval), NumericError);
}

TEST_CASE("model file round trip") {
    const auto arch = testsupport::small_arch(1);
    auto m = init_model(arch, 11);
    m.bn_stats[0].mean = {0.25, -1.5, 3.0, 0.0};
    std::stringstream ss;
    write_model(ss, m);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "UNFG");
    std::stringstream in(bytes);
    CHECK(read_model(in) == m);

    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream bad_in(bad);
    CHECK_THROWS_AS(read_model(bad_in), FormatError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS(read_model(cut), FormatError);
}

TEST_CASE("arch JSON round trip and validation") {
    for (std::size_t v = 0; v < 4; ++v) {
        const auto a = testsupport::small_arch(v);
        CHECK(arch_from_json_text(canonical_json(a)) == a);
    }
    ArchSpec bad;
    bad.input_shape = {4};
    bad.layers = {Dense{5, 2}};
    bad.output_dim = 2;
    CHECK_THROWS_AS(validate(bad), ShapeError);
}
