#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fd_check.hpp"
#include "tsadapt/errors.hpp"
#include "tsadapt/tape.hpp"
#include "tsadapt/tensor.hpp"

using namespace tsadapt;

namespace {

Tensor make(std::size_t r, std::size_t c, std::initializer_list<double> v) {
    Tensor t = Tensor::zeros(r, c);
    std::size_t i = 0;
    for (double x : v) t.data[i++] = x;
    return t;
}

Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Tensor t = Tensor::zeros(r, c);
    for (double& x : t.data) x = nd(rng);
    return t;
}

}  // namespace

TEST_CASE("matmul hand examples") {
    Tensor a = make(2, 2, {1, 2, 3, 4});
    Tensor b = make(2, 2, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 19);
    CHECK(c.at(0, 1) == 22);
    CHECK(c.at(1, 0) == 43);
    CHECK(c.at(1, 1) == 50);

    Tensor i = Tensor::identity(2);
    Tensor ai = matmul(a, i);
    CHECK(max_abs_diff(ai, a) == 0.0);

    // matmul_nt(a, b) == a * b^T, matmul_tn(a, b) == a^T * b
    CHECK(max_abs_diff(matmul_nt(a, b), matmul(a, transpose(b))) == 0.0);
    CHECK(max_abs_diff(matmul_tn(a, b), matmul(transpose(a), b)) == 0.0);
}

TEST_CASE("matmul shape error names shapes") {
    Tensor a = Tensor::zeros(2, 3);
    Tensor b = Tensor::zeros(4, 2);
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    try {
        matmul(a, b);
    } catch (const ShapeError& e) {
        std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("4x2") != std::string::npos);
    }
}

TEST_CASE("softmax rows") {
    GradientTape tape;
    NodeId a = tape.constant(make(1, 3, {0, 0, 0}));
    NodeId s = tape.softmax_rows(a, false);
    for (double v : tape.value(s).data) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    std::mt19937_64 rng(7);
    NodeId b = tape.constant(random_tensor(4, 4, rng));
    NodeId sb = tape.softmax_rows(b, true);
    const Tensor& sv = tape.value(sb);
    // causal: strictly-upper entries masked to zero, rows sum to 1
    for (std::size_t i = 0; i < 4; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            if (j > i) CHECK(sv.at(i, j) == 0.0);
            row += sv.at(i, j);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("layer norm rows") {
    GradientTape tape;
    NodeId a = tape.constant(make(1, 3, {5, 5, 5}));
    NodeId y = tape.layer_norm_rows(a, 1e-5);
    for (double v : tape.value(y).data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937_64 rng(11);
    NodeId b = tape.constant(random_tensor(3, 8, rng));
    NodeId yb = tape.layer_norm_rows(b, 1e-12);
    const Tensor& v = tape.value(yb);
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < 8; ++j) mean += v.at(i, j);
        mean /= 8.0;
        for (std::size_t j = 0; j < 8; ++j) var += (v.at(i, j) - mean) * (v.at(i, j) - mean);
        var /= 8.0;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("gelu values") {
    CHECK(gelu_scalar(0.0) == 0.0);
    // gelu(x) = x * Phi(x); at x = 1, Phi(1) = 0.8413447460685429
    CHECK(gelu_scalar(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
    CHECK(gelu_scalar(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
}

TEST_CASE("backward of simple expressions") {
    GradientTape tape;
    Tensor xv = make(2, 2, {1, -2, 3, 0.5});
    NodeId x = tape.leaf(xv);
    NodeId loss = tape.sum(tape.mul(x, x));
    tape.backward(loss);
    const Tensor& g = tape.grad(x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(g.data[i] == doctest::Approx(2.0 * xv.data[i]).epsilon(1e-14));
}

TEST_CASE("non-scalar loss rejected") {
    GradientTape tape;
    NodeId x = tape.leaf(Tensor::zeros(2, 2));
    CHECK_THROWS_AS(tape.backward(x), DomainError);
}

TEST_CASE("finite-difference gradient oracle over composite graphs") {
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 6; ++trial) {
        const std::size_t n = 2 + trial % 4;           // token count <= 5
        const std::size_t d = 3 + trial % 3;           // feature dim <= 5
        Tensor a0 = random_tensor(n, d, rng);
        Tensor w0 = random_tensor(d, d, rng);
        Tensor t0 = random_tensor(n, d, rng);

        auto run = [&](const Tensor& a, const Tensor& w, GradientTape& tape,
                       NodeId* a_id, NodeId* w_id) {
            NodeId an = tape.leaf(a);
            NodeId wn = tape.leaf(w);
            if (a_id) *a_id = an;
            if (w_id) *w_id = wn;
            NodeId h = tape.gelu(tape.matmul(an, wn));
            NodeId ln = tape.layer_norm_rows(h, 1e-5);
            NodeId scores = tape.softmax_rows(tape.scale(tape.matmul_nt(ln, ln), 0.5), true);
            NodeId mixed = tape.matmul(scores, ln);
            return tape.mse_against(mixed, t0);
        };

        GradientTape tape;
        NodeId a_id, w_id;
        NodeId loss = run(a0, w0, tape, &a_id, &w_id);
        tape.backward(loss);

        Tensor fd_a = tsfd::fd_grad(
            [&](const Tensor& a) {
                GradientTape t2;
                return t2.value(run(a, w0, t2, nullptr, nullptr)).data[0];
            },
            a0);
        Tensor fd_w = tsfd::fd_grad(
            [&](const Tensor& w) {
                GradientTape t2;
                return t2.value(run(a0, w, t2, nullptr, nullptr)).data[0];
            },
            w0);

        CHECK(tsfd::rel_err(tape.grad(a_id), fd_a) < 1e-6);
        CHECK(tsfd::rel_err(tape.grad(w_id), fd_w) < 1e-6);
    }
}

TEST_CASE("cross entropy gradient vs finite differences") {
    std::mt19937_64 rng(99);
    Tensor logits = random_tensor(1, 5, rng);
    auto f = [&](const Tensor& l) {
        GradientTape t;
        return t.value(t.cross_entropy(t.leaf(l), 2)).data[0];
    };
    GradientTape tape;
    NodeId l = tape.leaf(logits);
    tape.backward(tape.cross_entropy(l, 2));
    Tensor fd = tsfd::fd_grad(f, logits);
    CHECK(tsfd::rel_err(tape.grad(l), fd) < 1e-6);
}

TEST_CASE("tape evaluation is deterministic") {
    auto run = [] {
        std::mt19937_64 rng(5);
        GradientTape tape;
        NodeId a = tape.leaf(random_tensor(4, 4, rng));
        NodeId loss = tape.sum(tape.gelu(tape.matmul(a, a)));
        tape.backward(loss);
        Tensor out = tape.value(loss);
        Tensor g = tape.grad(a);
        return std::make_pair(out.data[0], g);
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(l1 == l2);
    CHECK(max_abs_diff(g1, g2) == 0.0);
}
