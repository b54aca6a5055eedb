#include "sadm/sampling.hpp"

#include <cmath>
#include <stdexcept>

namespace sadm {

void SampleConfig::validate() const {
    if (T < 1) throw std::invalid_argument("sample: T must be >= 1");
    if (w < 0.0) throw std::invalid_argument("sample: w must be >= 0");
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("sample: v outside [0,1]");
}

Tensor guided_eps(const Denoiser& den, const Tensor& z, const Tensor& c, double lambda, double w) {
    Tensor eps_c = den.denoise_infer(z, c, lambda);
    // c = 0 selects the unconditional model: both branches coincide and the
    // guidance algebra collapses, so skip the second evaluation. This also
    // makes the output exactly independent of w.
    bool unconditional = true;
    for (double v : c.data)
        if (v != 0.0) {
            unconditional = false;
            break;
        }
    if (unconditional || w == 0.0) return eps_c;
    Tensor eps_u = den.denoise_infer(z, Tensor::zeros(c.shape), lambda);
    Tensor out = Tensor::zeros(z.shape);
    for (std::int64_t i = 0; i < out.size(); ++i) out[i] = (1.0 + w) * eps_c[i] - w * eps_u[i];
    return out;
}

Tensor ancestral_sample(const EpsFn& eps_fn, const Shape& shape, const NoiseSchedule& sched,
                        const SampleConfig& cfg, Rng& rng) {
    cfg.validate();
    Tensor z = rng.normal_tensor(shape);
    const auto grid = NoiseSchedule::step_grid(cfg.T);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const auto [s, t] = grid[k];
        const double lambda = sched.lambda_of_t(t);
        Tensor eps_hat = eps_fn(z, lambda, t);
        Tensor x_hat = eps_to_x(sched, z, eps_hat, t);
        const bool last = k + 1 == grid.size();
        if (last && s == 0.0 && !cfg.final_step_noise) {
            // posterior mean only on the final step
            PosteriorCoeffs pc = posterior_coeffs(sched, s, t, cfg.v);
            for (std::int64_t i = 0; i < z.size(); ++i) z[i] = pc.coef_z * z[i] + pc.coef_x * x_hat[i];
        } else {
            PosteriorCoeffs pc = posterior_coeffs(sched, s, t, cfg.v);
            const double sd = std::sqrt(pc.var_interp);
            for (std::int64_t i = 0; i < z.size(); ++i)
                z[i] = pc.coef_z * z[i] + pc.coef_x * x_hat[i] + sd * rng.normal();
        }
        for (double x : z.data)
            if (!std::isfinite(x))
                throw std::runtime_error("ancestral_sample: non-finite state at t = " + std::to_string(t) +
                                         " (step " + std::to_string(k + 1) + "/" + std::to_string(grid.size()) +
                                         ")");
    }
    if (cfg.clamp_output)
        for (auto& x : z.data) x = std::min(1.0, std::max(0.0, x));
    return z;
}

Tensor sample_frame(const Model& m, const Tensor& c, const SampleConfig& cfg, Rng& rng) {
    return ancestral_sample(
        [&](const Tensor& z, double lambda, double) { return guided_eps(m.den(), z, c, lambda, cfg.w); },
        m.cfg().frame_shape, m.cfg().schedule, cfg, rng);
}

LongitudinalVolume autoregressive_sample(const Model& m, const LongitudinalVolume& observed,
                                         const IndexPartition& p, const SampleConfig& cfg) {
    cfg.validate();
    const int L = static_cast<int>(observed.length());
    if (auto why = validate_partition(p, L))
        throw std::invalid_argument("autoregressive_sample: invalid partition: " + *why);
    for (int c : p.cond)
        if (!observed.present[static_cast<std::size_t>(c - 1)])
            throw std::invalid_argument("autoregressive_sample: conditioning frame " + std::to_string(c) +
                                        " is not present in the input");
    Rng rng(cfg.seed);

    LongitudinalVolume out;
    std::vector<Tensor> prefix;
    std::vector<bool> prefix_mask;
    std::size_t next_c = 0;
    for (int i = 1; i <= L; ++i) {
        Tensor frame;
        if (p.is_cond(i)) {
            frame = observed.frames[static_cast<std::size_t>(p.cond[next_c] - 1)];
            ++next_c;
        } else {
            Tape tape;
            Var c_var = m.attn().condition(tape, prefix, prefix_mask);
            Tensor c = tape.value(c_var);
            Rng frame_rng = rng.split(static_cast<std::uint64_t>(i));
            frame = sample_frame(m, c, cfg, frame_rng);
        }
        prefix.push_back(frame);
        prefix_mask.push_back(true);
        out.frames.push_back(std::move(frame));
        out.present.push_back(true);
    }
    return out;
}

}  // namespace sadm
