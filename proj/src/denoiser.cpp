#include "sadm/denoiser.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sadm {

namespace {

void init_conv(ParameterStore& store, const std::string& name, Shape shape, Rng& rng) {
    Tensor& w = store.create(name, shape);
    std::int64_t fan_in = 1;
    for (std::size_t i = 1; i < shape.size(); ++i) fan_in *= shape[i];
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (auto& x : w.data) x = stddev * rng.normal();
}

void init_linear(ParameterStore& store, const std::string& name, Shape shape, Rng& rng) {
    Tensor& w = store.create(name, shape);
    const double stddev = 1.0 / std::sqrt(static_cast<double>(shape[0]));
    for (auto& x : w.data) x = stddev * rng.normal();
}

Tensor sinusoidal_features(double lambda, std::int64_t width) {
    Tensor f = Tensor::zeros({1, width});
    const std::int64_t half = width / 2;
    for (std::int64_t i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) /
                                     static_cast<double>(half > 1 ? half - 1 : 1));
        f[2 * i] = std::sin(lambda * freq);
        f[2 * i + 1] = std::cos(lambda * freq);
    }
    return f;
}

}  // namespace

void DenoiserConfig::validate(const Shape& frame_shape) const {
    if (frame_shape.size() != 3)
        throw std::invalid_argument("denoiser: frame shape must be (W,H,D), got " + shape_str(frame_shape));
    if (base < 1 || depth < 1 || lambda_embed < 2 || lambda_embed % 2 != 0)
        throw std::invalid_argument("denoiser: base/depth must be positive, lambda_embed even >= 2");
    const std::int64_t pow2 = std::int64_t(1) << depth;
    for (auto e : frame_shape)
        if (e % pow2 != 0)
            throw std::invalid_argument("denoiser: extents " + shape_str(frame_shape) +
                                        " not divisible by 2^" + std::to_string(depth));
}

Denoiser::Denoiser(DenoiserConfig cfg, Shape frame_shape, ParameterStore& store, Rng& init_rng,
                   std::string prefix)
    : cfg_(cfg), frame_shape_(std::move(frame_shape)), store_(&store), prefix_(std::move(prefix)) {
    cfg_.validate(frame_shape_);
    auto ch = [&](std::int64_t lvl) { return cfg_.base << lvl; };

    init_linear(store, prefix_ + ".lam.w1", {cfg_.lambda_embed, cfg_.lambda_embed}, init_rng);
    store.create(prefix_ + ".lam.b1", {cfg_.lambda_embed});

    init_conv(store, prefix_ + ".in.w", {ch(0), 2, 3, 3, 3}, init_rng);
    store.create(prefix_ + ".in.b", {ch(0)});
    for (std::int64_t l = 0; l < cfg_.depth; ++l) {
        const std::string sl = std::to_string(l);
        init_conv(store, prefix_ + ".enc" + sl + ".w", {ch(l), ch(l), 3, 3, 3}, init_rng);
        store.create(prefix_ + ".enc" + sl + ".b", {ch(l)});
        init_linear(store, prefix_ + ".lam.enc" + sl, {cfg_.lambda_embed, ch(l)}, init_rng);
        init_conv(store, prefix_ + ".down" + sl + ".w", {ch(l + 1), ch(l), 2, 2, 2}, init_rng);
        store.create(prefix_ + ".down" + sl + ".b", {ch(l + 1)});
        init_conv(store, prefix_ + ".up" + sl + ".w", {ch(l), ch(l + 1), 1, 1, 1}, init_rng);
        store.create(prefix_ + ".up" + sl + ".b", {ch(l)});
        init_conv(store, prefix_ + ".dec" + sl + ".w", {ch(l), 2 * ch(l), 3, 3, 3}, init_rng);
        store.create(prefix_ + ".dec" + sl + ".b", {ch(l)});
        init_linear(store, prefix_ + ".lam.dec" + sl, {cfg_.lambda_embed, ch(l)}, init_rng);
    }
    init_conv(store, prefix_ + ".mid.w", {ch(cfg_.depth), ch(cfg_.depth), 3, 3, 3}, init_rng);
    store.create(prefix_ + ".mid.b", {ch(cfg_.depth)});
    init_linear(store, prefix_ + ".lam.mid", {cfg_.lambda_embed, ch(cfg_.depth)}, init_rng);
    init_conv(store, prefix_ + ".out.w", {1, ch(0), 3, 3, 3}, init_rng);
    store.create(prefix_ + ".out.b", {1});
}

Var Denoiser::P(Tape& t, const std::string& name) const { return t.param(*store_, prefix_ + "." + name); }

Var Denoiser::lambda_bias(Tape& t, Var hidden, const std::string& site, std::int64_t channels) const {
    Var b = t.matmul(hidden, P(t, "lam." + site));  // (1, channels)
    (void)channels;
    return t.reshape(b, {t.value(b).shape[1]});
}

Var Denoiser::denoise(Tape& t, Var z, Var c, double lambda) const {
    const Tensor& zv = t.value(z);
    const Tensor& cv = t.value(c);
    if (zv.shape != frame_shape_ || cv.shape != frame_shape_)
        throw std::invalid_argument("denoise: z " + shape_str(zv.shape) + " and c " + shape_str(cv.shape) +
                                    " must both be " + shape_str(frame_shape_));
    if (!std::isfinite(lambda)) throw std::invalid_argument("denoise: non-finite lambda");
    auto ch = [&](std::int64_t lvl) { return cfg_.base << lvl; };
    Shape chan1 = frame_shape_;
    chan1.insert(chan1.begin(), 1);

    Var lam_h = t.silu(t.add_rowwise(
        t.matmul(t.leaf(sinusoidal_features(lambda, cfg_.lambda_embed)), P(t, "lam.w1")),
        P(t, "lam.b1")));

    Var h = t.concat0(t.reshape(z, chan1), t.reshape(c, chan1));  // (2, W, H, D)
    h = t.add_channelwise(t.conv3d(h, P(t, "in.w"), {1, 1, 1}, {1, 1, 1}), P(t, "in.b"));

    std::vector<Var> skips;
    for (std::int64_t l = 0; l < cfg_.depth; ++l) {
        const std::string sl = std::to_string(l);
        h = t.add_channelwise(t.conv3d(h, P(t, "enc" + sl + ".w"), {1, 1, 1}, {1, 1, 1}),
                              P(t, "enc" + sl + ".b"));
        h = t.silu(t.add_channelwise(h, lambda_bias(t, lam_h, "enc" + sl, ch(l))));
        skips.push_back(h);
        h = t.add_channelwise(t.conv3d(h, P(t, "down" + sl + ".w"), {2, 2, 2}), P(t, "down" + sl + ".b"));
    }

    h = t.add_channelwise(t.conv3d(h, P(t, "mid.w"), {1, 1, 1}, {1, 1, 1}), P(t, "mid.b"));
    h = t.silu(t.add_channelwise(h, lambda_bias(t, lam_h, "mid", ch(cfg_.depth))));

    for (std::int64_t l = cfg_.depth - 1; l >= 0; --l) {
        const std::string sl = std::to_string(l);
        h = t.add_channelwise(t.conv3d(h, P(t, "up" + sl + ".w"), {1, 1, 1}), P(t, "up" + sl + ".b"));
        h = t.upsample_nearest(h, {1, 2, 2, 2});
        h = t.concat0(h, skips[static_cast<std::size_t>(l)]);
        h = t.add_channelwise(t.conv3d(h, P(t, "dec" + sl + ".w"), {1, 1, 1}, {1, 1, 1}),
                              P(t, "dec" + sl + ".b"));
        h = t.silu(t.add_channelwise(h, lambda_bias(t, lam_h, "dec" + sl, ch(l))));
    }

    Var out = t.add_channelwise(t.conv3d(h, P(t, "out.w"), {1, 1, 1}, {1, 1, 1}), P(t, "out.b"));
    Var u = t.reshape(out, frame_shape_);
    if (!cfg_.bounded_x_head) return u;

    // x = -0.25 + 0.375 * (silu(u + 2) - silu(u - 2)) is a smooth squashing
    // of the real line into (-0.3448, 1.3448), centred on the data range
    // [0, 1], with slope ~0.44 at u = 0 (mild overshoot at |u| ~ 3.4 because
    // silu is not monotone).
    Var xb = t.add_scalar(
        t.scale(t.sub(t.silu(t.add_scalar(u, 2.0)), t.silu(t.add_scalar(u, -2.0))), 0.375), -0.25);
    const double alpha_sq = 1.0 / (1.0 + std::exp(-lambda));
    const double alpha = std::sqrt(alpha_sq);
    const double sigma = std::sqrt(1.0 - alpha_sq);
    return t.scale(t.sub(z, t.scale(xb, alpha)), 1.0 / sigma);
}

Tensor Denoiser::denoise_infer(const Tensor& z, const Tensor& c, double lambda) const {
    Tape t;
    Var out = denoise(t, t.leaf(z), t.leaf(c), lambda);
    return t.value(out);
}

}  // namespace sadm
