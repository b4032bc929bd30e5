#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "tsadapt/backbone.hpp"
#include "tsadapt/errors.hpp"

using namespace tsadapt;

namespace {

Tensor random_series(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(1.0, 3.0);
    Tensor t = Tensor::zeros(rows, cols);
    for (double& x : t.data) x = nd(rng);
    return t;
}

ModelConfig small_config() {
    ModelConfig c;
    c.layers = 2;
    c.heads = 4;
    c.hidden_dim = 32;
    c.patch_size = 8;
    c.input_length = 32;
    c.horizon = 8;
    c.n_vars = 3;
    c.rank = 4;
    return c;
}

}  // namespace

TEST_CASE("zscore hand examples") {
    // [1,2,3]: mean 2, population std sqrt(2/3); normalized = ±1.224744871...
    Tensor s = Tensor({{3, 1}}, {1, 2, 3});
    auto [z, stats] = zscore(s, 1e-8);
    const double want = std::sqrt(1.5);  // 1/sqrt(2/3)
    CHECK(z.data[0] == doctest::Approx(-want).epsilon(1e-12));
    CHECK(z.data[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(z.data[2] == doctest::Approx(want).epsilon(1e-12));
    CHECK(stats.mean[0] == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(stats.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

    // Constant window: std floored by eps, output exactly zero.
    Tensor c = Tensor({{3, 1}}, {5, 5, 5});
    auto [zc, sc] = zscore(c, 1e-8);
    for (double v : zc.data) CHECK(v == 0.0);
    CHECK(sc.divisor(0) == 1e-8);

    CHECK_THROWS_AS(zscore(Tensor({{1, 1}}, {1.0}), 1e-8), DomainError);
}

TEST_CASE("zscore roundtrip") {
    Tensor s = random_series(96, 7, 4);
    auto [z, stats] = zscore(s, 1e-8);
    Tensor back = denormalize(z, stats);
    CHECK(max_abs_diff(back, s) < 1e-10);
    // Normalized columns: mean 0, population variance 1.
    for (std::size_t v = 0; v < 7; ++v) {
        double mean = 0.0;
        for (std::size_t t = 0; t < 96; ++t) mean += z.at(t, v);
        mean /= 96.0;
        CHECK(std::abs(mean) < 1e-12);
    }
}

TEST_CASE("patchify shapes and layout") {
    Tensor s = Tensor::zeros(6, 2);
    for (std::size_t i = 0; i < 12; ++i) s.data[i] = static_cast<double>(i);
    Tensor p = patchify(s, 3);
    CHECK(p.rows() == 2);
    CHECK(p.cols() == 6);
    // token 0 = rows 0..2 flattened row-major
    for (std::size_t i = 0; i < 6; ++i) CHECK(p.at(0, i) == static_cast<double>(i));
    for (std::size_t i = 0; i < 6; ++i) CHECK(p.at(1, i) == static_cast<double>(6 + i));

    Tensor back = unpatchify(p, 3, 2);
    CHECK(max_abs_diff(back, s) == 0.0);

    Tensor big = Tensor::zeros(336, 7);
    CHECK(patchify(big, 16).rows() == 21);
    CHECK(patchify(big, 16).cols() == 112);

    CHECK_THROWS_AS(patchify(Tensor::zeros(7, 2), 3), DomainError);
}

TEST_CASE("config validation lists all violations") {
    ModelConfig c = small_config();
    c.patch_size = 5;   // 32 % 5 != 0
    c.hidden_dim = 6;   // 6 % heads(4) != 0
    try {
        c.validate();
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        CHECK(msg.find("patch") != std::string::npos);
        CHECK(msg.find("head") != std::string::npos);
    }
}

TEST_CASE("forward shape and determinism") {
    ModelConfig c = small_config();
    c.input_length = 336;
    c.patch_size = 16;
    c.horizon = 96;
    c.n_vars = 7;
    FrozenTransformer model(c, 42);
    Tensor w = random_series(336, 7, 9);
    Tensor out = model.forward(w);
    CHECK(out.rows() == 96);
    CHECK(out.cols() == 7);

    FrozenTransformer model2(c, 42);
    Tensor out2 = model2.forward(w);
    CHECK(max_abs_diff(out, out2) == 0.0);
}

TEST_CASE("normalized forward is invariant to affine input shifts") {
    ModelConfig c = small_config();
    FrozenTransformer model(c, 7);
    Tensor w = random_series(c.input_length, c.n_vars, 13);
    Tensor shifted = w;
    for (double& v : shifted.data) v = 3.0 * v + 10.0;
    Tensor a = model.forward_normalized(w);
    Tensor b = model.forward_normalized(shifted);
    CHECK(max_abs_diff(a, b) < 1e-9);
}

TEST_CASE("fresh model matches adapter-free backbone bit-exactly") {
    ModelConfig c = small_config();
    FrozenTransformer model(c, 11);
    FrozenTransformer no_adapter(c, 11);
    // Kill the adapter path entirely: with X zeroed, beta·Y(Xz) contributes
    // exact 0.0 in both; fresh Y=0 must already produce identical bits.
    no_adapter.embed().adapter.down = Tensor::zeros(
        no_adapter.embed().adapter.down.rows(), no_adapter.embed().adapter.down.cols());
    no_adapter.head().adapter.down = Tensor::zeros(
        no_adapter.head().adapter.down.rows(), no_adapter.head().adapter.down.cols());
    Tensor w = random_series(c.input_length, c.n_vars, 17);
    CHECK(max_abs_diff(model.forward(w), no_adapter.forward(w)) == 0.0);
}

TEST_CASE("trainable parameter count is sum of r(d+d')") {
    ModelConfig c = small_config();
    FrozenTransformer model(c, 1);
    const std::size_t embed = c.rank * (c.hidden_dim + c.token_dim());
    const std::size_t head = c.rank * (c.head_out() + c.n_tokens() * c.hidden_dim);
    CHECK(model.trainable_params() == embed + head);
    CHECK(model.total_params() > model.trainable_params());
}

TEST_CASE("training moves only adapters and zero-eta moves nothing") {
    ModelConfig c = small_config();
    FrozenTransformer model(c, 3);
    SeriesTable table = synth(SynthKind::multi_sine, 600, c.n_vars, 5);
    SplitSpec split = SplitSpec::from_ratios(table.n_rows, 0.7, 0.1);
    DatasetWindows data = make_windows(table, c.input_length, c.horizon, split, 4);
    REQUIRE(!data.train.empty());
    REQUIRE(!data.val.empty());

    const std::uint64_t frozen_before = model.frozen_hash();

    TrainOptions zero;
    zero.epochs = 2;
    zero.learning_rate = 0.0;
    auto log0 = model.train(data, zero);
    REQUIRE(log0.size() == 2);
    CHECK(log0[0].val_loss == log0[1].val_loss);

    TrainOptions opts;
    opts.epochs = 3;
    opts.learning_rate = 1e-3;
    auto log = model.train(data, opts);
    REQUIRE(log.size() == 3);
    CHECK(model.frozen_hash() == frozen_before);
    CHECK(model.adapter_steps() > 0);
    for (const auto& e : log) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isfinite(e.val_loss));
    }
}

TEST_CASE("training is deterministic across runs and thread counts") {
    ModelConfig c = small_config();
    SeriesTable table = synth(SynthKind::multi_sine, 600, c.n_vars, 6);
    SplitSpec split = SplitSpec::from_ratios(table.n_rows, 0.7, 0.1);
    DatasetWindows data = make_windows(table, c.input_length, c.horizon, split, 4);

    auto train_once = [&](unsigned threads) {
        FrozenTransformer model(c, 14);
        TrainOptions opts;
        opts.epochs = 2;
        opts.threads = threads;
        model.train(data, opts);
        return model.forward(data.val.windows[0].input);
    };
    Tensor a = train_once(1);
    Tensor b = train_once(1);
    Tensor d = train_once(3);
    CHECK(max_abs_diff(a, b) == 0.0);
    CHECK(max_abs_diff(a, d) == 0.0);
}

TEST_CASE("classify head emits logits and cross-entropy trains") {
    ModelConfig c = small_config();
    c.head_kind = HeadKind::classify;
    c.n_classes = 3;
    c.rank = 2;  // head adapter rank is bounded by n_classes
    FrozenTransformer model(c, 21);
    Tensor w = random_series(c.input_length, c.n_vars, 22);
    Tensor logits = model.forward(w);
    CHECK(logits.rows() == 1);
    CHECK(logits.cols() == 3);
}
