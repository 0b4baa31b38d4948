#include <cmath>

#include "doctest.h"
#include "mulab/error.hpp"
#include "mulab/optim/optim.hpp"
#include "support.hpp"

using namespace mulab;
using namespace mulab::optim;

namespace {

nn::GradientVector grad_of(std::vector<double> g) { return nn::GradientVector{std::move(g)}; }

nn::ArchSpec mlp(std::size_t in, std::size_t hidden, std::size_t out) {
    nn::ArchSpec a;
    a.input_shape = {in};
    a.layers = {nn::Dense{in, hidden}, nn::ReLU{}, nn::Dense{hidden, out}};
    a.output_dim = out;
    return a;
}

}  // namespace

TEST_CASE("first Adam step from a fresh state") {
    std::vector<double> p{1.0};
    auto st = AdamState::fresh(1);
    adam_step(p, grad_of({0.5}), st, 0.001);
    // m_hat = 0.5, v_hat = 0.25
    CHECK(p[0] == doctest::Approx(1.0 - 0.001 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(0.999).epsilon(1e-9));
    CHECK(st.step_count == 1);
    CHECK(st.m[0] == doctest::Approx(0.05));
    CHECK(st.v[0] == doctest::Approx(0.00025));
}

TEST_CASE("zero gradient leaves params unchanged") {
    std::vector<double> p{0.3, -2.0, 5.0};
    const auto p0 = p;
    auto st = AdamState::fresh(3);
    adam_step(p, grad_of({0.0, 0.0, 0.0}), st, 0.01);
    CHECK(p == p0);
}

TEST_CASE("masked parameters and moments stay frozen") {
    Rng rng(4);
    std::vector<double> p(50);
    for (auto& x : p) x = rng.normal();
    std::vector<std::uint8_t> mask(50);
    for (auto& b : mask) b = rng.bernoulli(0.5) ? 1 : 0;
    const auto p0 = p;
    auto st = AdamState::fresh(50);
    for (int step = 0; step < 25; ++step) {
        std::vector<double> g(50);
        for (auto& x : g) x = rng.normal();
        adam_step(p, grad_of(g), st, 0.01, mask);
    }
    CHECK(st.step_count == 25);
    for (std::size_t i = 0; i < 50; ++i) {
        if (mask[i] == 0) {
            CHECK(p[i] == p0[i]);
            CHECK(st.m[i] == 0.0);
            CHECK(st.v[i] == 0.0);
        } else {
            CHECK(p[i] != p0[i]);
        }
    }
    std::vector<std::uint8_t> none(50, 0);
    const auto before = p;
    adam_step(p, grad_of(std::vector<double>(50, 1.0)), st, 0.01, none);
    CHECK(p == before);
}

TEST_CASE("single-step update magnitude is bounded by lr") {
    for (double g : {1e-3, 1e-2, 0.5, 3.0, -40.0, 1e6}) {
        std::vector<double> p{0.0};
        auto st = AdamState::fresh(1);
        adam_step(p, grad_of({g}), st, 0.001);
        CHECK(std::abs(p[0]) <= 0.001 * 1.001);
        CHECK(std::signbit(p[0]) != std::signbit(g));
    }
}

TEST_CASE("adam_step rejects mismatched lengths") {
    std::vector<double> p{1.0, 2.0};
    auto st = AdamState::fresh(2);
    CHECK_THROWS_AS(adam_step(p, grad_of({1.0}), st, 0.1), ShapeError);
}

TEST_CASE("cosine schedule endpoints, midpoint and monotonicity") {
    const LrSchedule s{0.001, 0.0001, 600};
    CHECK(cosine_lr(s, 0) == doctest::Approx(0.001).epsilon(1e-15));
    CHECK(cosine_lr(s, 600) == doctest::Approx(0.0001).epsilon(1e-12));
    CHECK(cosine_lr(s, 300) == doctest::Approx(0.00055).epsilon(1e-12));
    double prev = cosine_lr(s, 0);
    for (std::uint64_t t = 1; t <= 600; ++t) {
        const double lr = cosine_lr(s, t);
        CHECK(lr <= prev);
        CHECK(lr >= 0.0001 - 1e-18);
        prev = lr;
    }
}

TEST_CASE("train with zero epochs returns the model unchanged") {
    const auto ds = testsupport::blob_dataset(20, 4, 1);
    const auto m = nn::init_model(mlp(4, 5, 2), 1);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train(m, ds, cfg);
    CHECK(r.model == m);
    CHECK(r.epoch_losses.empty());
}

TEST_CASE("training is deterministic") {
    const auto ds = testsupport::toy_dataset(45, data::TaskKind::single(3), {1, 5, 5}, 2);
    const auto arch = testsupport::small_arch(0);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 3;
    const auto a = train(nn::init_model(arch, 4), ds, cfg);
    const auto b = train(nn::init_model(arch, 4), ds, cfg);
    CHECK(a.model == b.model);
    CHECK(a.epoch_losses == b.epoch_losses);
    cfg.seed = 4;
    CHECK(train(nn::init_model(arch, 4), ds, cfg).model.params != a.model.params);
}

TEST_CASE("separable blobs are fit and the loss decreases") {
    const auto ds = testsupport::blob_dataset(200, 8, 5);
    TrainConfig cfg;
    cfg.seed = 6;
    cfg.epochs = 20;
    cfg.lr0 = 1e-2;
    const auto r = train(nn::init_model(mlp(8, 16, 2), 7), ds, cfg);
    REQUIRE(r.epoch_losses.size() == 20);
    CHECK(r.epoch_losses.back() < 0.1);
    CHECK(r.epoch_losses.back() < r.epoch_losses.front());
}

TEST_CASE("training mask freezes parameters through a whole run") {
    const auto ds = testsupport::toy_dataset(40, data::TaskKind::multi(3), {6}, 8);
    nn::ArchSpec a;
    a.input_shape = {6};
    a.layers = {nn::Dense{6, 8}, nn::BatchNorm{8}, nn::ReLU{}, nn::Dense{8, 3}};
    a.output_dim = 3;
    const auto m = nn::init_model(a, 9);
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 7;
    cfg.loss_kind = nn::LossKind::BinaryCrossEntropy;
    Rng rng(10);
    cfg.mask.resize(m.num_params());
    for (auto& b : cfg.mask) b = rng.bernoulli(0.3) ? 1 : 0;
    const auto r = train(m, ds, cfg);
    for (std::size_t i = 0; i < m.num_params(); ++i) {
        if (cfg.mask[i] == 0) CHECK(r.model.params[i] == m.params[i]);
    }
    CHECK(r.model.bn_stats != m.bn_stats);
}

TEST_CASE("train rejects incompatible loss and labels") {
    const auto ds = testsupport::blob_dataset(10, 3, 1);
    TrainConfig cfg;
    cfg.loss_kind = nn::LossKind::BinaryCrossEntropy;
    CHECK_THROWS_AS(train(nn::init_model(mlp(3, 4, 2), 0), ds, cfg), DataError);
}
