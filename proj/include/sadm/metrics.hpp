#pragma once

#include <vector>

#include "sadm/sequence.hpp"
#include "sadm/tensor.hpp"

namespace sadm {

// PSNR is capped here when MSE underflows; the cap doubles as the
// "identical volumes" sentinel.
inline constexpr double kPsnrCap = 100.0;

// Mean local SSIM over a sliding 7x7x7 uniform window (valid positions
// only), K1 = 0.01, K2 = 0.03, dynamic range 1.0.
double ssim(const Tensor& a, const Tensor& b);

// 10*log10(1 / MSE) on [0,1] data, capped at kPsnrCap for MSE < 1e-10.
double psnr(const Tensor& a, const Tensor& b);

// RMSE / range(truth); rejects constant ground truth.
double nrmse(const Tensor& truth, const Tensor& pred);

struct FrameMetrics {
    int frame;  // 1-based
    double ssim, psnr, nrmse;
};

struct MetricReport {
    std::vector<FrameMetrics> per_frame;
    double mean_ssim = 0.0, mean_psnr = 0.0, mean_nrmse = 0.0;
};

// Per-frame metrics over the given 1-based frame indices (all frames present
// in both volumes when empty), plus sequence means.
MetricReport evaluate_frames(const LongitudinalVolume& truth, const LongitudinalVolume& pred,
                             std::vector<int> frames = {});

}  // namespace sadm
