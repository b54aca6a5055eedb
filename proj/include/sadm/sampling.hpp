#pragma once

#include <functional>

#include "sadm/diffusion.hpp"
#include "sadm/model.hpp"
#include "sadm/sequence.hpp"

namespace sadm {

struct SampleConfig {
    int T = 1000;
    double w = 0.1;          // guidance strength
    double v = 0.3;          // sampler stochasticity
    std::uint64_t seed = 42;
    // Eq.-faithful mode: also add noise on the final step to s = 0 instead
    // of returning the posterior mean.
    bool final_step_noise = false;
    bool clamp_output = true;

    void validate() const;
};

// eps_tilde = (1+w) eps(z, c, lambda) - w eps(z, 0, lambda); two denoiser
// evaluations per call.
Tensor guided_eps(const Denoiser& den, const Tensor& z, const Tensor& c, double lambda, double w);

// Noise prediction as a function of (z_t, lambda_t, t); lets tests drop in
// closed-form denoisers.
using EpsFn = std::function<Tensor(const Tensor& z_t, double lambda, double t)>;

// Ancestral sampling from pure noise down the descending (s, t) grid.
Tensor ancestral_sample(const EpsFn& eps_fn, const Shape& shape, const NoiseSchedule& sched,
                        const SampleConfig& cfg, Rng& rng);

// Model-backed single-frame sampler with classifier-free guidance.
Tensor sample_frame(const Model& m, const Tensor& c, const SampleConfig& cfg, Rng& rng);

// The autoregressive loop: walks i = 1..L, consuming conditioning frames in
// queue order and generating every other frame from the accumulated prefix,
// so later frames condition on earlier synthesized ones. Returns the full
// sequence; frames at M and F are the generated ones.
LongitudinalVolume autoregressive_sample(const Model& m, const LongitudinalVolume& observed,
                                         const IndexPartition& p, const SampleConfig& cfg);

}  // namespace sadm
