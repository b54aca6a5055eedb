#include "sadm/diffusion.hpp"

#include <cmath>

namespace sadm {

PosteriorCoeffs posterior_coeffs(const NoiseSchedule& sched, double s, double t, double v) {
    NoiseSchedule::check_pair(s, t);
    if (t - s < kMinStepGap)
        throw std::invalid_argument("posterior_coeffs: step gap " + std::to_string(t - s) +
                                    " below minimum " + std::to_string(kMinStepGap));
    if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("posterior_coeffs: v = " + std::to_string(v) + " outside [0,1]");
    const double lt = sched.lambda_of_t(t), ls = sched.lambda_of_t(s);
    const auto [as, ss] = sched.alpha_sigma(s);
    const auto [at, st] = sched.alpha_sigma(t);
    const double r = std::exp(lt - ls);
    PosteriorCoeffs pc;
    pc.coef_z = r * as / at;
    pc.coef_x = (1.0 - r) * as;
    pc.var_tilde = (1.0 - r) * ss * ss;
    const double var_trans = (1.0 - r) * st * st;
    pc.var_interp = std::pow(pc.var_tilde, 1.0 - v) * std::pow(var_trans, v);
    return pc;
}

Tensor marginal_from_eps(const NoiseSchedule& sched, const Tensor& x, double t, const Tensor& eps) {
    require_same_shape(x, eps, "marginal_from_eps");
    const auto [a, s] = sched.alpha_sigma(t);
    Tensor z = Tensor::zeros(x.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + s * eps[i];
    return z;
}

Tensor marginal_sample(const NoiseSchedule& sched, const Tensor& x, double t, Rng& rng) {
    Tensor eps = rng.normal_tensor(x.shape);
    return marginal_from_eps(sched, x, t, eps);
}

Tensor eps_to_x(const NoiseSchedule& sched, const Tensor& z_t, const Tensor& eps_hat, double t) {
    require_same_shape(z_t, eps_hat, "eps_to_x");
    if (!(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("eps_to_x: t = " + std::to_string(t) + " outside (0,1]");
    const auto [a, s] = sched.alpha_sigma(t);
    Tensor x = Tensor::zeros(z_t.shape);
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = (z_t[i] - s * eps_hat[i]) / a;
    return x;
}

Tensor x_to_eps(const NoiseSchedule& sched, const Tensor& z_t, const Tensor& x_hat, double t) {
    require_same_shape(z_t, x_hat, "x_to_eps");
    if (!(t > 0.0 && t <= 1.0))
        throw std::invalid_argument("x_to_eps: t = " + std::to_string(t) +
                                    " outside (0,1]; sigma_0 is ~0, use x-space at the boundary");
    const auto [a, s] = sched.alpha_sigma(t);
    Tensor e = Tensor::zeros(z_t.shape);
    for (std::int64_t i = 0; i < e.size(); ++i) e[i] = (z_t[i] - a * x_hat[i]) / s;
    return e;
}

}  // namespace sadm
