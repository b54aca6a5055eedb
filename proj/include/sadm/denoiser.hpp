#pragma once

#include <string>

#include "sadm/params.hpp"
#include "sadm/tape.hpp"

namespace sadm {

struct DenoiserConfig {
    std::int64_t base = 16;          // channels at full resolution
    std::int64_t depth = 2;          // number of down/up levels
    std::int64_t lambda_embed = 64;  // sinusoidal feature width
    // When true, the backbone output is read as a pre-activation for a bounded
    // estimate of the clean frame (range (-0.345, 1.345)) and the returned value
    // is the noise that estimate implies: eps = (z - alpha * x) / sigma. The
    // network still predicts noise as far as callers are concerned, but the
    // implied clean frame can never leave the data range, which keeps long
    // ancestral chains on-manifold.
    bool bounded_x_head = false;

    void validate(const Shape& frame_shape) const;
};

// Noise-prediction backbone: a small 3D encoder-decoder with skip
// connections. The conditioning volume enters by channel concatenation with
// z_t; the log-SNR enters as a learned per-channel bias at every level.
class Denoiser {
public:
    Denoiser(DenoiserConfig cfg, Shape frame_shape, ParameterStore& store, Rng& init_rng,
             std::string prefix = "den");

    // eps-prediction; differentiable in z, c, and parameters.
    Var denoise(Tape& t, Var z, Var c, double lambda) const;

    // Inference-only convenience: fresh tape, no gradients.
    Tensor denoise_infer(const Tensor& z, const Tensor& c, double lambda) const;

    const DenoiserConfig& config() const { return cfg_; }

private:
    Var P(Tape& t, const std::string& name) const;
    Var lambda_bias(Tape& t, Var hidden, const std::string& site, std::int64_t channels) const;

    DenoiserConfig cfg_;
    Shape frame_shape_;
    ParameterStore* store_;
    std::string prefix_;
};

}  // namespace sadm
