#pragma once

#include "sadm/attention.hpp"
#include "sadm/denoiser.hpp"
#include "sadm/params.hpp"
#include "sadm/schedule.hpp"

namespace sadm {

struct ModelConfig {
    Shape frame_shape = {16, 16, 8};
    std::int64_t l_max = 6;
    NoiseSchedule schedule;
    AttnConfig attn;
    DenoiserConfig denoiser;
};

// Conditioner + denoiser over one shared parameter store. Initialization is
// deterministic in init_seed; the store's creation order fixes checkpoint
// layout.
class Model {
public:
    Model(ModelConfig c, std::uint64_t init_seed)
        : cfg_(fixup(std::move(c))),
          init_rng_(init_seed),
          attn_(cfg_.attn, cfg_.frame_shape, store_, init_rng_),
          den_(cfg_.denoiser, cfg_.frame_shape, store_, init_rng_) {}

    const ModelConfig& cfg() const { return cfg_; }
    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    const AttentionModule& attn() const { return attn_; }
    const Denoiser& den() const { return den_; }

private:
    static ModelConfig fixup(ModelConfig c) {
        c.attn.l_max = c.l_max;
        return c;
    }

    ModelConfig cfg_;
    ParameterStore store_;
    Rng init_rng_;
    AttentionModule attn_;
    Denoiser den_;
};

}  // namespace sadm
