#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sadm/model.hpp"
#include "sadm/sequence.hpp"

namespace sadm {

struct TrainConfig {
    double p_uncond = 0.1;  // probability of zeroing the conditioning signal
    int steps = 2000;
    int pretrain_steps = 0;      // conditioner-only l2 steps run before `steps`
    double pretrain_lr = 0.0;    // learning rate for that phase; 0 means `lr`
    bool freeze_conditioner = false;  // keep conditioner params fixed during the
                                      // diffusion phase (pretrained-separately mode)
    bool augment = false;          // per-sample random flips, transposition,
                                   // zoom, translation and intensity rescale,
                                   // applied consistently across a subject's
                                   // frames (see augment_subject)
    bool pretrain_augment = false;  // same augmentation, pretrain phase only
    double lr = 1e-4;
    int batch = 1;
    std::uint64_t seed = 42;
    int ckpt_every = 500;     // 0 disables periodic checkpoints
    bool plain_gradient = false;  // SGD instead of Adam (oracle tests)

    void validate() const;
};

struct TrainHooks {
    // Replaces the denoiser output with the true noise; the loss must then
    // be exactly zero.
    bool force_perfect_eps = false;
};

struct LossStepInfo {
    double loss;
    int target;      // selected frame index i
    double t;        // diffusion time
    bool cond_kept;  // I_hat: false means c was zeroed
};

// One pass of the training recipe: pick a target from M u F, build the
// masked prefix, condition, corrupt the target, and take the noise
// prediction loss. Gradients accumulate into the model's store; the caller
// owns the update.
// Random axis flips, x/y transposition (when W == H), a uniform spatial zoom
// in [0.75, 1.15] with translation (trilinear, zero-padded), and an intensity
// rescale in [0.7, 1]; one transform applied to every frame of the subject.
// Preserves the prefix -> target relation (in particular the frame-to-frame
// contraction ratio) while scrambling subject-identity cues such as absolute
// size, position, orientation and brightness.
LongitudinalVolume augment_subject(const LongitudinalVolume& subject, Rng& rng);

LossStepInfo loss_step(Model& m, const LongitudinalVolume& subject, const IndexPartition& p,
                       const TrainConfig& cfg, Rng& rng, const TrainHooks& hooks = {});

struct TraceRow {
    int step;
    double loss;
    double t;
    bool cond_kept;
};

struct TrainResult {
    std::vector<TraceRow> trace;
};

// Full loop: (subject, partition, target) sampled independently per batch
// item. Throws on a non-finite loss with a diagnostic snapshot. When
// ckpt_dir is nonempty, writes ckpt_dir/step_N.ckpt every ckpt_every steps
// and ckpt_dir/final.ckpt at the end.
TrainResult train(Model& m, const std::vector<LongitudinalVolume>& dataset, const TrainConfig& cfg,
                  const std::string& ckpt_dir = "",
                  const std::function<void(const TraceRow&)>& on_step = nullptr);

// Optional conditioner-only mode: l2 between the conditioning signal and
// the target frame, same loop mechanics.
TrainResult pretrain_conditioner(Model& m, const std::vector<LongitudinalVolume>& dataset,
                                 const TrainConfig& cfg);

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path);

}  // namespace sadm
