#include "sadm/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sadm/diffusion.hpp"

namespace sadm {

void TrainConfig::validate() const {
    if (!(p_uncond >= 0.0 && p_uncond <= 1.0))
        throw std::invalid_argument("train: p_uncond outside [0,1]");
    if (steps < 1) throw std::invalid_argument("train: steps must be >= 1");
    if (pretrain_steps < 0) throw std::invalid_argument("train: pretrain_steps must be >= 0");
    if (pretrain_lr < 0.0) throw std::invalid_argument("train: pretrain_lr must be >= 0");
    if (batch < 1) throw std::invalid_argument("train: batch must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
}

namespace {

double trilinear(const Tensor& t, std::int64_t W, std::int64_t H, std::int64_t D, double x, double y,
                 double z) {
    const std::int64_t x0 = static_cast<std::int64_t>(std::floor(x));
    const std::int64_t y0 = static_cast<std::int64_t>(std::floor(y));
    const std::int64_t z0 = static_cast<std::int64_t>(std::floor(z));
    const double fx = x - x0, fy = y - y0, fz = z - z0;
    double acc = 0.0;
    for (int dx = 0; dx <= 1; ++dx)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dz = 0; dz <= 1; ++dz) {
                const std::int64_t xi = x0 + dx, yi = y0 + dy, zi = z0 + dz;
                if (xi < 0 || xi >= W || yi < 0 || yi >= H || zi < 0 || zi >= D) continue;  // zero pad
                const double wgt = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) * (dz ? fz : 1 - fz);
                acc += wgt * t.data[static_cast<std::size_t>((xi * H + yi) * D + zi)];
            }
    return acc;
}

}  // namespace

LongitudinalVolume augment_subject(const LongitudinalVolume& subject, Rng& rng) {
    const Shape fs = subject.frame_shape();
    const std::int64_t W = fs[0], H = fs[1], D = fs[2];
    const bool fx = rng.bernoulli(0.5), fy = rng.bernoulli(0.5), fz = rng.bernoulli(0.5);
    const bool swap_xy = (W == H) && rng.bernoulli(0.5);
    const double scale = rng.uniform(0.7, 1.0);
    // a uniform spatial zoom rescales absolute sizes but leaves the
    // frame-to-frame contraction ratio intact; the translation moves the
    // center; both erase per-subject geometric identity
    const double zoom = rng.uniform(0.75, 1.15);
    const double sh_x = rng.uniform(-2.0, 2.0);
    const double sh_y = rng.uniform(-2.0, 2.0);
    const double sh_z = rng.uniform(-1.0, 1.0);
    const double cx = (W - 1) / 2.0, cy = (H - 1) / 2.0, cz = (D - 1) / 2.0;
    LongitudinalVolume out = subject;
    for (std::size_t f = 0; f < subject.frames.size(); ++f) {
        if (!subject.present[f]) continue;
        const Tensor& src = subject.frames[f];
        Tensor& dst = out.frames[f];
        for (std::int64_t x = 0; x < W; ++x)
            for (std::int64_t y = 0; y < H; ++y)
                for (std::int64_t z = 0; z < D; ++z) {
                    double xx = fx ? W - 1 - x : x;
                    double yy = fy ? H - 1 - y : y;
                    const double zz = fz ? D - 1 - z : z;
                    if (swap_xy) std::swap(xx, yy);
                    const double sx = (xx - cx) / zoom + cx - sh_x;
                    const double sy = (yy - cy) / zoom + cy - sh_y;
                    const double sz = (zz - cz) / zoom + cz - sh_z;
                    dst.data[static_cast<std::size_t>((x * H + y) * D + z)] =
                        scale * trilinear(src, W, H, D, sx, sy, sz);
                }
    }
    return out;
}

LossStepInfo loss_step(Model& m, const LongitudinalVolume& subject, const IndexPartition& p,
                       const TrainConfig& cfg, Rng& rng, const TrainHooks& hooks) {
    const int target = sample_training_target(p, rng);
    MaskedSequence ms = build_masked_sequence(subject, p, target);

    Tape tape;
    Var c = m.attn().condition(tape, ms.frames, ms.mask);
    // a frozen conditioner gets no update, so skip its backward pass entirely
    if (cfg.freeze_conditioner) c = tape.leaf(tape.value(c));

    Tensor eps = rng.normal_tensor(m.cfg().frame_shape);
    const double t = rng.uniform();
    const bool cond_kept = !rng.bernoulli(cfg.p_uncond);
    if (!cond_kept) c = tape.scale(c, 0.0);  // I_hat = 0: unconditional branch

    Tensor z_t = marginal_from_eps(m.cfg().schedule, subject.frames[static_cast<std::size_t>(target - 1)],
                                   t, eps);
    const double lambda = m.cfg().schedule.lambda_of_t(t);

    Var eps_hat = hooks.force_perfect_eps ? tape.leaf(eps)
                                          : m.den().denoise(tape, tape.leaf(std::move(z_t)), c, lambda);
    Var loss = tape.mean_sq_diff(eps_hat, tape.leaf(std::move(eps)));
    tape.backward(loss);
    return {tape.value(loss).item(), target, t, cond_kept};
}

namespace {

using StepFn = std::function<LossStepInfo(Model&, const LongitudinalVolume&, const IndexPartition&, Rng&)>;

TrainResult run_loop(Model& m, const std::vector<LongitudinalVolume>& dataset, const TrainConfig& cfg,
                     const std::string& ckpt_dir, const std::function<void(const TraceRow&)>& on_step,
                     const StepFn& step_fn) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
    Rng rng(cfg.seed);
    if (!ckpt_dir.empty()) std::filesystem::create_directories(ckpt_dir);

    TrainResult result;
    for (int step = 1; step <= cfg.steps; ++step) {
        double loss_sum = 0.0;
        double last_t = 0.0;
        bool last_kept = true;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& subject =
                dataset[static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(dataset.size())))];
            IndexPartition p = random_partition(static_cast<int>(subject.length()), rng);
            LongitudinalVolume augmented;
            const LongitudinalVolume* sample = &subject;
            if (cfg.augment) {
                augmented = augment_subject(subject, rng);
                sample = &augmented;
            }
            LossStepInfo info = step_fn(m, *sample, p, rng);
            if (!std::isfinite(info.loss))
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                         " (target " + std::to_string(info.target) + ", t = " +
                                         std::to_string(info.t) + ", lambda = " +
                                         std::to_string(m.cfg().schedule.lambda_of_t(info.t)) + ")");
            loss_sum += info.loss;
            last_t = info.t;
            last_kept = info.cond_kept;
        }
        if (cfg.freeze_conditioner)
            for (const auto& name : m.store().names())
                if (name.rfind("attn.", 0) == 0) {
                    auto& g = m.store().entry(name).grad;
                    std::fill(g.data.begin(), g.data.end(), 0.0);
                }
        if (cfg.plain_gradient)
            m.store().sgd_step(cfg.lr / cfg.batch);
        else {
            if (cfg.batch > 1)
                for (const auto& name : m.store().names()) {
                    auto& g = m.store().entry(name).grad;
                    for (auto& x : g.data) x /= cfg.batch;
                }
            m.store().adam_step(cfg.lr);
        }
        TraceRow row{step, loss_sum / cfg.batch, last_t, last_kept};
        result.trace.push_back(row);
        if (on_step) on_step(row);
        if (!ckpt_dir.empty() && cfg.ckpt_every > 0 && step % cfg.ckpt_every == 0)
            m.store().save(ckpt_dir + "/step_" + std::to_string(step) + ".ckpt");
    }
    if (!ckpt_dir.empty()) m.store().save(ckpt_dir + "/final.ckpt");
    return result;
}

}  // namespace

TrainResult train(Model& m, const std::vector<LongitudinalVolume>& dataset, const TrainConfig& cfg,
                  const std::string& ckpt_dir, const std::function<void(const TraceRow&)>& on_step) {
    if (cfg.pretrain_steps > 0) {
        TrainConfig pre = cfg;
        pre.steps = cfg.pretrain_steps;
        pre.pretrain_steps = 0;
        pre.p_uncond = 0.0;
        pre.freeze_conditioner = false;
        pre.augment = cfg.pretrain_augment;
        pre.pretrain_augment = false;
        if (cfg.pretrain_lr > 0.0) pre.lr = cfg.pretrain_lr;
        pretrain_conditioner(m, dataset, pre);
        // the l2 phase leaves Adam curvature estimates that are stale for the
        // conditioner and empty for the denoiser; start the diffusion phase
        // with a clean optimizer
        m.store().reset_optimizer();
    }
    return run_loop(m, dataset, cfg, ckpt_dir, on_step,
                    [&cfg](Model& mm, const LongitudinalVolume& s, const IndexPartition& p, Rng& r) {
                        return loss_step(mm, s, p, cfg, r);
                    });
}

TrainResult pretrain_conditioner(Model& m, const std::vector<LongitudinalVolume>& dataset,
                                 const TrainConfig& cfg) {
    return run_loop(m, dataset, cfg, "", nullptr,
                    [](Model& mm, const LongitudinalVolume& s, const IndexPartition& p, Rng& r) {
                        const int target = sample_training_target(p, r);
                        MaskedSequence ms = build_masked_sequence(s, p, target);
                        Tape tape;
                        Var c = mm.attn().condition(tape, ms.frames, ms.mask);
                        Var loss = tape.mean_sq_diff(
                            c, tape.leaf(s.frames[static_cast<std::size_t>(target - 1)]));
                        tape.backward(loss);
                        return LossStepInfo{tape.value(loss).item(), target, 0.0, true};
                    });
}

void write_trace_csv(const std::vector<TraceRow>& trace, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write loss trace: " + path);
    f << "step,loss,t,cond_kept\n";
    for (const auto& r : trace)
        f << r.step << ',' << std::to_string(r.loss) << ',' << std::to_string(r.t) << ','
          << (r.cond_kept ? 1 : 0) << '\n';
}

}  // namespace sadm
