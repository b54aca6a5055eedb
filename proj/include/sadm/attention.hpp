#pragma once

#include <array>
#include <string>
#include <vector>

#include "sadm/params.hpp"
#include "sadm/sequence.hpp"
#include "sadm/tape.hpp"

namespace sadm {

struct AttnConfig {
    std::int64_t dim = 32;
    std::int64_t heads = 4;
    std::int64_t blocks = 2;                     // N: blocks per stage
    std::array<std::int64_t, 3> window = {4, 4, 2};  // (w, h, d); temporal window is fixed to 1
    std::int64_t l_max = 6;                      // positional table length
    std::int64_t proj_kernel = 1;  // spatial extent of the final projection
                                   // conv (odd). With 1 the signal is constant
                                   // over each upsampled window block; 3 lets
                                   // neighbouring sites smooth the boundary.

    void validate(const Shape& frame_shape) const;
};

// Factorized spatio-temporal conditioner: token embedding, a temporal
// encoder whose blocks attend along the sequence axis at every spatial site
// and then coarsen the site grid 2x per axis, a spatial decoder whose blocks
// attend across sites within one frame and then refine the grid 2x per axis,
// and a final projection back to one WxHxD volume.
//
// Missing frames enter as zero content plus their (nonzero) positional
// encoding; any prefix length 1..l_max runs with the same parameter set.
class AttentionModule {
public:
    AttentionModule(AttnConfig cfg, Shape frame_shape, ParameterStore& store, Rng& init_rng,
                    std::string prefix = "attn");

    // The public conditioner: frames[k] with mask[k]=false contribute zero
    // content regardless of their stored values.
    Var condition(Tape& t, const std::vector<Tensor>& frames, const std::vector<bool>& mask) const;

    // Pipeline stages, exposed for shape and factorization tests.
    Var embed_tokens(Tape& t, const std::vector<Tensor>& frames, const std::vector<bool>& mask) const;
    Var temporal_encoder(Tape& t, Var tokens) const;   // (L', S, dim) -> (S/8^N, L', dim)
    Var spatial_decoder(Tape& t, Var enc) const;       // -> (L', S, dim)
    Var project_signal(Tape& t, Var dec) const;        // -> (W, H, D)

    const AttnConfig& config() const { return cfg_; }
    std::array<std::int64_t, 3> token_grid() const { return grid_; }

private:
    Var P(Tape& t, const std::string& name) const;
    Var attention_mlp_block(Tape& t, Var x, const std::string& scope) const;

    AttnConfig cfg_;
    Shape frame_shape_;
    std::array<std::int64_t, 3> grid_;  // (W/w, H/h, D/d)
    ParameterStore* store_;
    std::string prefix_;
};

}  // namespace sadm
