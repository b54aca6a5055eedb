#pragma once

#include "sadm/rng.hpp"
#include "sadm/schedule.hpp"
#include "sadm/tensor.hpp"

namespace sadm {

// Coefficients of the Gaussian reverse transition q(z_s | z_t, x) at fixed
// (s, t), together with the v-interpolated sampler variance.
struct PosteriorCoeffs {
    double coef_z;      // e^{lambda_t - lambda_s} * alpha_s / alpha_t
    double coef_x;      // (1 - e^{lambda_t - lambda_s}) * alpha_s
    double var_tilde;   // (1 - e^{lambda_t - lambda_s}) * sigma_s^2
    double var_interp;  // var_tilde^{1-v} * transition_var^v
};

// Minimum s..t gap; below this 1 - e^{lambda_t - lambda_s} cancels
// catastrophically.
inline constexpr double kMinStepGap = 1e-9;

PosteriorCoeffs posterior_coeffs(const NoiseSchedule& sched, double s, double t, double v);

// z_t = alpha_t x + sigma_t eps with eps ~ N(0, I).
Tensor marginal_sample(const NoiseSchedule& sched, const Tensor& x, double t, Rng& rng);
// Same, with the noise supplied by the caller (test hook).
Tensor marginal_from_eps(const NoiseSchedule& sched, const Tensor& x, double t, const Tensor& eps);

// x_hat = (z_t - sigma_t eps_hat) / alpha_t
Tensor eps_to_x(const NoiseSchedule& sched, const Tensor& z_t, const Tensor& eps_hat, double t);
// eps_hat = (z_t - alpha_t x_hat) / sigma_t; rejected at t = 0 where sigma
// vanishes (work in x-space there instead).
Tensor x_to_eps(const NoiseSchedule& sched, const Tensor& z_t, const Tensor& x_hat, double t);

}  // namespace sadm
