#include <doctest.h>

#include "oracles.hpp"
#include "sadm/denoiser.hpp"

using namespace sadm;

namespace {

DenoiserConfig toy_cfg() {
    DenoiserConfig c;
    c.base = 4;
    c.depth = 1;
    c.lambda_embed = 8;
    return c;
}

}  // namespace

TEST_CASE("config validation") {
    DenoiserConfig c;  // base 16, depth 2
    CHECK_NOTHROW(c.validate({16, 16, 8}));
    CHECK_THROWS(c.validate({16, 16, 6}));  // 6 not divisible by 2^2
    DenoiserConfig deep = c;
    deep.depth = 4;
    CHECK_THROWS(deep.validate({16, 16, 8}));
}

TEST_CASE("output extents equal input extents") {
    for (Shape fs : {Shape{16, 16, 8}, Shape{8, 8, 4}}) {
        DenoiserConfig c = toy_cfg();
        ParameterStore store;
        Rng rng(5);
        Denoiser den(c, fs, store, rng);
        Rng data(7);
        Tensor z = data.normal_tensor(fs);
        Tensor cond = data.normal_tensor(fs);
        Tensor eps = den.denoise_infer(z, cond, 1.5);
        CHECK(eps.shape == fs);
    }
}

TEST_CASE("unconditional branch accepts the zero signal") {
    DenoiserConfig c = toy_cfg();
    ParameterStore store;
    Rng rng(5);
    Denoiser den(c, {8, 8, 4}, store, rng);
    Rng data(9);
    Tensor z = data.normal_tensor({8, 8, 4});
    Tensor eps = den.denoise_infer(z, Tensor::zeros({8, 8, 4}), -2.0);
    CHECK(eps.shape == Shape{8, 8, 4});
    for (double v : eps.data) CHECK(std::isfinite(v));
}

TEST_CASE("the log-SNR input matters") {
    DenoiserConfig c = toy_cfg();
    ParameterStore store;
    Rng rng(5);
    Denoiser den(c, {8, 8, 4}, store, rng);
    Rng data(11);
    Tensor z = data.normal_tensor({8, 8, 4});
    Tensor cond = data.normal_tensor({8, 8, 4});
    Tensor a = den.denoise_infer(z, cond, -5.0);
    Tensor b = den.denoise_infer(z, cond, 5.0);
    CHECK(a.data != b.data);
}

TEST_CASE("bounded head: implied clean frame stays in (-0.345, 1.345)") {
    DenoiserConfig c = toy_cfg();
    c.bounded_x_head = true;
    ParameterStore store;
    Rng rng(5);
    Denoiser den(c, {8, 8, 4}, store, rng);
    // blow up the output conv so the raw pre-activation is far outside the
    // squashing's linear region
    for (auto& wv : store.entry("den.out.w").value.data) wv *= 50.0;
    Rng data(17);
    for (double lambda : {-6.0, 0.0, 6.0}) {
        Tensor z = data.normal_tensor({8, 8, 4});
        Tensor cond = data.normal_tensor({8, 8, 4});
        Tensor eps = den.denoise_infer(z, cond, lambda);
        const double a2 = 1.0 / (1.0 + std::exp(-lambda));
        const double alpha = std::sqrt(a2), sigma = std::sqrt(1.0 - a2);
        for (std::size_t i = 0; i < eps.data.size(); ++i) {
            const double x = (z.data[i] - sigma * eps.data[i]) / alpha;
            CHECK(x >= -0.3448);
            CHECK(x <= 1.3448);
        }
    }
}

TEST_CASE("bounded head gradients match finite differences") {
    DenoiserConfig c = toy_cfg();
    c.bounded_x_head = true;
    ParameterStore store;
    Rng rng(5);
    Denoiser den(c, {8, 8, 4}, store, rng);
    Rng data(13);
    Tensor z = data.normal_tensor({8, 8, 4});
    Tensor cond = oracle::rand_tensor(data, {8, 8, 4}, 0.5);
    Tensor eps_true = data.normal_tensor({8, 8, 4});
    const double lambda = -0.9;

    auto eval = [&]() {
        Tape t;
        Var out = den.denoise(t, t.leaf(z), t.leaf(cond), lambda);
        return t.value(t.mean_sq_diff(out, t.leaf(eps_true))).item();
    };

    store.zero_grad();
    Tape t;
    Var zv = t.leaf(z, true);
    t.backward(t.mean_sq_diff(den.denoise(t, zv, t.leaf(cond), lambda), t.leaf(eps_true)));

    for (const auto& name : store.names()) {
        auto& e = store.entry(name);
        const double err = oracle::max_grad_rel_err(e.value.data, e.grad.data, eval, 4);
        INFO("parameter ", name);
        CHECK(err < oracle::kFdRelTol);
    }
    CHECK(oracle::max_grad_rel_err(z.data, t.grad(zv).data, eval, 8) < oracle::kFdRelTol);
}

TEST_CASE("denoiser gradients match finite differences") {
    DenoiserConfig c = toy_cfg();
    ParameterStore store;
    Rng rng(5);
    Denoiser den(c, {8, 8, 4}, store, rng);
    Rng data(13);
    Tensor z = data.normal_tensor({8, 8, 4});
    Tensor cond = oracle::rand_tensor(data, {8, 8, 4}, 0.5);
    Tensor eps_true = data.normal_tensor({8, 8, 4});
    const double lambda = 0.7;

    auto eval = [&]() {
        Tape t;
        Var out = den.denoise(t, t.leaf(z), t.leaf(cond), lambda);
        return t.value(t.mean_sq_diff(out, t.leaf(eps_true))).item();
    };

    store.zero_grad();
    Tape t;
    Var zv = t.leaf(z, true), cv = t.leaf(cond, true);
    t.backward(t.mean_sq_diff(den.denoise(t, zv, cv, lambda), t.leaf(eps_true)));

    for (const auto& name : store.names()) {
        auto& e = store.entry(name);
        const double err = oracle::max_grad_rel_err(e.value.data, e.grad.data, eval, 4);
        INFO("parameter ", name);
        CHECK(err < oracle::kFdRelTol);
    }

    // inputs z and c are differentiable too
    CHECK(oracle::max_grad_rel_err(z.data, t.grad(zv).data, eval, 8) < oracle::kFdRelTol);
    CHECK(oracle::max_grad_rel_err(cond.data, t.grad(cv).data, eval, 8) < oracle::kFdRelTol);
}
