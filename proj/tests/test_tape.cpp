#include <doctest.h>

#include <functional>
#include <vector>

#include "oracles.hpp"
#include "sadm/params.hpp"
#include "sadm/tape.hpp"

using namespace sadm;

namespace {

using Builder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compare the tape gradient of a scalar-valued graph against central finite
// differences for every input tensor.
void check_grads(std::vector<Tensor>& ins, const Builder& f, std::size_t max_probes = 0) {
    auto eval = [&]() {
        Tape t;
        std::vector<Var> vs;
        for (auto& x : ins) vs.push_back(t.leaf(x));
        return t.value(f(t, vs)).item();
    };
    Tape t;
    std::vector<Var> vs;
    for (auto& x : ins) vs.push_back(t.leaf(x, true));
    t.backward(f(t, vs));
    for (std::size_t k = 0; k < ins.size(); ++k) {
        const Tensor g = t.grad(vs[k]);
        CHECK(oracle::max_grad_rel_err(ins[k].data, g.data, eval, max_probes) < oracle::kFdRelTol);
    }
}

}  // namespace

TEST_CASE("unary op identities") {
    Tape t;
    Var e = t.exp(t.leaf(Tensor({1}, {0.0})));
    CHECK(t.value(e)[0] == 1.0);

    Var sm = t.softmax(t.leaf(Tensor({2}, {0.0, 0.0})));
    CHECK(t.value(sm)[0] == 0.5);
    CHECK(t.value(sm)[1] == 0.5);

    Var up = t.upsample_nearest(t.leaf(Tensor({1, 1}, {1.0})), {2, 2});
    CHECK(t.value(up).shape == Shape{2, 2});
    for (double v : t.value(up).data) CHECK(v == 1.0);

    Var ln = t.layer_norm(t.leaf(Tensor({1, 4}, {3.0, 3.0, 3.0, 3.0})));
    for (double v : t.value(ln).data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sum of squares gradient") {
    Tape t;
    Var x = t.leaf(Tensor({2}, {1.0, 2.0}), true);
    t.backward(t.sum(t.mul(x, x)));
    CHECK(t.grad(x).data == std::vector<double>{2.0, 4.0});
}

TEST_CASE("loss constant in a parameter gives exactly zero gradient") {
    ParameterStore store;
    Rng rng(3);
    store.create_normal("w", {4}, 1.0, rng);
    Tape t;
    Var w = t.param(store, "w");
    Var killed = t.scale(w, 0.0);
    Var x = t.leaf(Tensor({4}, {1, 2, 3, 4}), true);
    t.backward(t.sum(t.add(x, killed)));
    for (double g : store.entry("w").grad.data) CHECK(g == 0.0);
}

TEST_CASE("finite differences: elementwise and broadcast ops") {
    Rng rng(17);
    auto R = [&](Shape s) { return oracle::rand_tensor(rng, std::move(s)); };

    std::vector<Tensor> ab = {R({3, 4}), R({3, 4})};
    check_grads(ab, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.add(v[0], v[1])); });
    check_grads(ab, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.sub(v[0], v[1])); });
    check_grads(ab, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.mul(v[0], v[1])); });
    check_grads(ab, [](Tape& t, const std::vector<Var>& v) { return t.mean_sq_diff(v[0], v[1]); });

    std::vector<Tensor> one = {R({3, 4})};
    check_grads(one, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.scale(v[0], -1.7)); });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.add_scalar(v[0], 0.3)); });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.exp(t.scale(v[0], 0.3)));
    });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.mul(t.silu(v[0]), v[0])); });

    std::vector<Tensor> row = {R({3, 4}), R({4})};
    check_grads(row, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.add_rowwise(v[0], v[1]), v[0]));
    });
    check_grads(row, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.mul_rowwise(v[0], v[1]), v[0]));
    });

    std::vector<Tensor> chan = {R({3, 4}), R({3})};
    check_grads(chan, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.add_channelwise(v[0], v[1]), v[0]));
    });
}

TEST_CASE("finite differences: matmul including broadcast weights") {
    Rng rng(19);
    auto R = [&](Shape s) { return oracle::rand_tensor(rng, std::move(s)); };

    std::vector<Tensor> mm = {R({3, 4}), R({4, 2})};
    check_grads(mm, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.matmul(v[0], v[1])); });

    std::vector<Tensor> batched = {R({2, 3, 4}), R({2, 4, 2})};
    check_grads(batched, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.matmul(v[0], v[1]), t.matmul(v[0], v[1])));
    });

    // rank-2 weight shared across the batch
    std::vector<Tensor> shared = {R({2, 3, 4}), R({4, 2})};
    check_grads(shared, [](Tape& t, const std::vector<Var>& v) { return t.sum(t.matmul(v[0], v[1])); });

    // gradient of sum(A*B) w.r.t. A is the broadcast of B's row sums
    Tape t;
    Tensor A = R({2, 3}), B = R({3, 2});
    Var a = t.leaf(A, true), b = t.leaf(B);
    t.backward(t.sum(t.matmul(a, b)));
    const Tensor& g = t.grad(a);
    for (std::int64_t i = 0; i < 2; ++i)
        for (std::int64_t k = 0; k < 3; ++k)
            CHECK(g[i * 3 + k] == doctest::Approx(B[k * 2] + B[k * 2 + 1]).epsilon(1e-12));
}

TEST_CASE("finite differences: conv3d") {
    Rng rng(23);
    auto R = [&](Shape s) { return oracle::rand_tensor(rng, std::move(s)); };

    std::vector<Tensor> cw = {R({2, 4, 4, 2}), R({3, 2, 2, 2, 2})};
    check_grads(cw, [](Tape& t, const std::vector<Var>& v) {
        Var y = t.conv3d(v[0], v[1], {1, 1, 1}, {1, 1, 1});
        return t.sum(t.mul(y, y));
    });
    check_grads(cw, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.conv3d(v[0], v[1], {2, 2, 2}, {0, 0, 0}));
    });
}

TEST_CASE("conv3d all-ones equals receptive-field size") {
    Tape t;
    Var x = t.leaf(Tensor::full({1, 4, 4, 2}, 1.0));
    Var w = t.leaf(Tensor::full({1, 1, 4, 4, 2}, 1.0));
    Var y = t.conv3d(x, w, {4, 4, 2});
    CHECK(t.value(y).shape == Shape{1, 1, 1, 1});
    CHECK(t.value(y)[0] == 32.0);
}

TEST_CASE("finite differences: softmax, layer_norm, data movement, reductions") {
    Rng rng(29);
    auto R = [&](Shape s) { return oracle::rand_tensor(rng, std::move(s)); };

    std::vector<Tensor> one = {R({3, 5})};
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.softmax(v[0]), v[0]));
    });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        return t.sum(t.mul(t.layer_norm(v[0]), v[0]));
    });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        Var r = t.reshape(v[0], {5, 3});
        return t.sum(t.mul(r, r));
    });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        Var p = t.permute(v[0], {1, 0});
        return t.sum(t.mul(p, p));
    });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        Var s = t.slice0(v[0], 1, 2);
        return t.sum(t.mul(s, s));
    });
    check_grads(one, [](Tape& t, const std::vector<Var>& v) {
        Var u = t.upsample_nearest(v[0], {2, 3});
        return t.sum(t.mul(u, u));
    });

    std::vector<Tensor> two = {R({2, 4}), R({3, 4})};
    check_grads(two, [](Tape& t, const std::vector<Var>& v) {
        Var c = t.concat0(v[0], v[1]);
        return t.sum(t.mul(c, c));
    });
}

TEST_CASE("finite differences: random 3-layer composite") {
    Rng rng(31);
    auto R = [&](Shape s) { return oracle::rand_tensor(rng, std::move(s), 0.5); };
    std::vector<Tensor> ins = {R({2, 6}), R({6, 5}), R({5}), R({5, 3})};
    check_grads(ins, [](Tape& t, const std::vector<Var>& v) {
        Var h1 = t.silu(t.add_rowwise(t.matmul(v[0], v[1]), v[2]));
        Var h2 = t.layer_norm(h1);
        Var h3 = t.softmax(t.matmul(h2, v[3]));
        return t.sum(t.mul(h3, h3));
    });
}

TEST_CASE("slice0 and concat0 round trip") {
    Tape t;
    Tensor x({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    Var v = t.leaf(x);
    Var a = t.slice0(v, 0, 2), b = t.slice0(v, 2, 2);
    Var back = t.concat0(a, b);
    CHECK(t.value(back).data == x.data);
}
