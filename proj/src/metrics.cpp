#include "sadm/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace sadm {

namespace {

constexpr int kWin = 7;
constexpr double kC1 = 0.01 * 0.01;  // (K1 * R)^2, R = 1
constexpr double kC2 = 0.03 * 0.03;

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "ssim");
    if (a.rank() != 3) throw std::invalid_argument("ssim: want rank-3 volumes, got " + shape_str(a.shape));
    const std::int64_t W = a.shape[0], H = a.shape[1], D = a.shape[2];
    const std::int64_t ww = std::min<std::int64_t>(kWin, W);
    const std::int64_t wh = std::min<std::int64_t>(kWin, H);
    const std::int64_t wd = std::min<std::int64_t>(kWin, D);
    const double n = static_cast<double>(ww * wh * wd);
    const std::int64_t HD = H * D;

    double total = 0.0;
    std::int64_t count = 0;
    for (std::int64_t x0 = 0; x0 + ww <= W; ++x0) {
        for (std::int64_t y0 = 0; y0 + wh <= H; ++y0) {
            for (std::int64_t z0 = 0; z0 + wd <= D; ++z0) {
                double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
                for (std::int64_t x = x0; x < x0 + ww; ++x)
                    for (std::int64_t y = y0; y < y0 + wh; ++y) {
                        const double* pa = a.data.data() + x * HD + y * D + z0;
                        const double* pb = b.data.data() + x * HD + y * D + z0;
                        for (std::int64_t z = 0; z < wd; ++z) {
                            sa += pa[z];
                            sb += pb[z];
                            saa += pa[z] * pa[z];
                            sbb += pb[z] * pb[z];
                            sab += pa[z] * pb[z];
                        }
                    }
                const double ma = sa / n, mb = sb / n;
                const double va = saa / n - ma * ma;
                const double vb = sbb / n - mb * mb;
                const double cov = sab / n - ma * mb;
                const double num = (2 * ma * mb + kC1) * (2 * cov + kC2);
                const double den = (ma * ma + mb * mb + kC1) * (va + vb + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double psnr(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse < 1e-10) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double nrmse(const Tensor& truth, const Tensor& pred) {
    require_same_shape(truth, pred, "nrmse");
    double lo = truth[0], hi = truth[0], mse = 0.0;
    for (std::int64_t i = 0; i < truth.size(); ++i) {
        lo = std::min(lo, truth[i]);
        hi = std::max(hi, truth[i]);
        const double d = truth[i] - pred[i];
        mse += d * d;
    }
    if (hi <= lo)
        throw std::invalid_argument("nrmse: ground truth has zero range, normalization undefined");
    mse /= static_cast<double>(truth.size());
    return std::sqrt(mse) / (hi - lo);
}

MetricReport evaluate_frames(const LongitudinalVolume& truth, const LongitudinalVolume& pred,
                             std::vector<int> frames) {
    if (truth.length() != pred.length())
        throw std::invalid_argument("evaluate_frames: sequence lengths differ");
    if (frames.empty())
        for (int i = 1; i <= truth.length(); ++i)
            if (truth.present[static_cast<std::size_t>(i - 1)] && pred.present[static_cast<std::size_t>(i - 1)])
                frames.push_back(i);
    MetricReport rep;
    for (int i : frames) {
        const auto& ta = truth.frames.at(static_cast<std::size_t>(i - 1));
        const auto& pa = pred.frames.at(static_cast<std::size_t>(i - 1));
        FrameMetrics fm{i, ssim(ta, pa), psnr(ta, pa), nrmse(ta, pa)};
        rep.mean_ssim += fm.ssim;
        rep.mean_psnr += fm.psnr;
        rep.mean_nrmse += fm.nrmse;
        rep.per_frame.push_back(fm);
    }
    if (!rep.per_frame.empty()) {
        const double n = static_cast<double>(rep.per_frame.size());
        rep.mean_ssim /= n;
        rep.mean_psnr /= n;
        rep.mean_nrmse /= n;
    }
    return rep;
}

}  // namespace sadm
