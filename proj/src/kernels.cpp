#include "sadm/kernels.hpp"

#include <cstring>
#include <stdexcept>

namespace sadm::kernels {

void matmul_acc_serial(const double* a, const double* b, double* c,
                       std::int64_t m, std::int64_t k, std::int64_t n) {
    for (std::int64_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = ar[p];
            const double* br = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) cr[j] += av * br[j];
        }
    }
}

void matmul_acc(const double* a, const double* b, double* c,
                std::int64_t m, std::int64_t k, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
        const double* ar = a + i * k;
        double* cr = c + i * n;
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = ar[p];
            const double* br = b + p * n;
            for (std::int64_t j = 0; j < n; ++j) cr[j] += av * br[j];
        }
    }
}

void add_serial(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void add(const double* a, const double* b, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul_serial(const double* a, const double* b, double* out, std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void mul(const double* a, const double* b, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(double s, const double* a, double* out, std::int64_t n) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) out[i] += s * a[i];
}

ConvDims conv_dims(std::int64_t cin, std::int64_t w, std::int64_t h, std::int64_t d,
                   std::int64_t kw, std::int64_t kh, std::int64_t kd,
                   std::int64_t sw, std::int64_t sh, std::int64_t sd,
                   std::int64_t pw, std::int64_t ph, std::int64_t pd) {
    if (kw > w + 2 * pw || kh > h + 2 * ph || kd > d + 2 * pd)
        throw std::invalid_argument("conv: kernel (" + std::to_string(kw) + "," + std::to_string(kh) +
                                    "," + std::to_string(kd) + ") larger than padded input (" +
                                    std::to_string(w + 2 * pw) + "," + std::to_string(h + 2 * ph) + "," +
                                    std::to_string(d + 2 * pd) + ")");
    ConvDims cd{cin, w, h, d, kw, kh, kd, sw, sh, sd, pw, ph, pd, 0, 0, 0};
    cd.ow = (w + 2 * pw - kw) / sw + 1;
    cd.oh = (h + 2 * ph - kh) / sh + 1;
    cd.od = (d + 2 * pd - kd) / sd + 1;
    return cd;
}

namespace {

template <bool Scatter>
inline void walk_columns(const ConvDims& cd, double* cols, double* x, std::int64_t p0, std::int64_t p1) {
    const std::int64_t hd = cd.h * cd.d;
    const std::int64_t whd = cd.w * hd;
    const std::int64_t krow = cd.cin * cd.kw * cd.kh * cd.kd;
    const std::int64_t np = cd.ow * cd.oh * cd.od;
    for (std::int64_t p = p0; p < p1; ++p) {
        const std::int64_t odi = p % cd.od;
        const std::int64_t ohi = (p / cd.od) % cd.oh;
        const std::int64_t owi = p / (cd.od * cd.oh);
        const std::int64_t bw = owi * cd.sw - cd.pw;
        const std::int64_t bh = ohi * cd.sh - cd.ph;
        const std::int64_t bd = odi * cd.sd - cd.pd;
        std::int64_t r = 0;
        for (std::int64_t c = 0; c < cd.cin; ++c) {
            for (std::int64_t i = 0; i < cd.kw; ++i) {
                const std::int64_t xw = bw + i;
                for (std::int64_t j = 0; j < cd.kh; ++j) {
                    const std::int64_t xh = bh + j;
                    const bool in_wh = xw >= 0 && xw < cd.w && xh >= 0 && xh < cd.h;
                    const std::int64_t base = c * whd + xw * hd + xh * cd.d + bd;
                    for (std::int64_t l = 0; l < cd.kd; ++l, ++r) {
                        const std::int64_t xd = bd + l;
                        const bool in = in_wh && xd >= 0 && xd < cd.d;
                        if constexpr (Scatter) {
                            if (in) x[base + l] += cols[r * np + p];
                        } else {
                            cols[r * np + p] = in ? x[base + l] : 0.0;
                        }
                    }
                }
            }
        }
        (void)krow;
    }
}

}  // namespace

void im2col_serial(const double* x, const ConvDims& cd, double* cols) {
    walk_columns<false>(cd, cols, const_cast<double*>(x), 0, cd.ow * cd.oh * cd.od);
}

void im2col(const double* x, const ConvDims& cd, double* cols) {
    const std::int64_t np = cd.ow * cd.oh * cd.od;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < np; ++p)
        walk_columns<false>(cd, cols, const_cast<double*>(x), p, p + 1);
}

void col2im_serial(const double* cols, const ConvDims& cd, double* x) {
    walk_columns<true>(cd, const_cast<double*>(cols), x, 0, cd.ow * cd.oh * cd.od);
}

void col2im(const double* cols, const ConvDims& cd, double* x) {
    // Scatter targets overlap across columns when stride < kernel, so the
    // parallel split is over channels of the destination instead.
    // Serial fallback keeps it simple and deterministic.
    col2im_serial(cols, cd, x);
}

namespace {

template <bool Parallel>
void conv1out_forward_impl(const double* x, const double* w, const ConvDims& cd, double* out) {
    const std::int64_t np = cd.ow * cd.oh * cd.od;
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::int64_t p = 0; p < np; ++p) {
        const std::int64_t ox = p / (cd.oh * cd.od);
        const std::int64_t oy = (p / cd.od) % cd.oh;
        const std::int64_t oz = p % cd.od;
        double acc = 0.0;
        for (std::int64_t c = 0; c < cd.cin; ++c)
            for (std::int64_t kx = 0; kx < cd.kw; ++kx) {
                const std::int64_t ix = ox * cd.sw - cd.pw + kx;
                if (ix < 0 || ix >= cd.w) continue;
                for (std::int64_t ky = 0; ky < cd.kh; ++ky) {
                    const std::int64_t iy = oy * cd.sh - cd.ph + ky;
                    if (iy < 0 || iy >= cd.h) continue;
                    for (std::int64_t kz = 0; kz < cd.kd; ++kz) {
                        const std::int64_t iz = oz * cd.sd - cd.pd + kz;
                        if (iz < 0 || iz >= cd.d) continue;
                        acc += w[((c * cd.kw + kx) * cd.kh + ky) * cd.kd + kz] *
                               x[((c * cd.w + ix) * cd.h + iy) * cd.d + iz];
                    }
                }
            }
        out[p] += acc;
    }
}

template <bool Parallel>
void conv1out_grad_x_impl(const double* w, const double* g, const ConvDims& cd, double* gx) {
    const std::int64_t ncell = cd.cin * cd.w * cd.h * cd.d;
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::int64_t q = 0; q < ncell; ++q) {
        const std::int64_t c = q / (cd.w * cd.h * cd.d);
        const std::int64_t ix = (q / (cd.h * cd.d)) % cd.w;
        const std::int64_t iy = (q / cd.d) % cd.h;
        const std::int64_t iz = q % cd.d;
        double acc = 0.0;
        for (std::int64_t kx = 0; kx < cd.kw; ++kx) {
            const std::int64_t tx = ix + cd.pw - kx;
            if (tx < 0 || tx % cd.sw != 0) continue;
            const std::int64_t ox = tx / cd.sw;
            if (ox >= cd.ow) continue;
            for (std::int64_t ky = 0; ky < cd.kh; ++ky) {
                const std::int64_t ty = iy + cd.ph - ky;
                if (ty < 0 || ty % cd.sh != 0) continue;
                const std::int64_t oy = ty / cd.sh;
                if (oy >= cd.oh) continue;
                for (std::int64_t kz = 0; kz < cd.kd; ++kz) {
                    const std::int64_t tz = iz + cd.pd - kz;
                    if (tz < 0 || tz % cd.sd != 0) continue;
                    const std::int64_t oz = tz / cd.sd;
                    if (oz >= cd.od) continue;
                    acc += w[((c * cd.kw + kx) * cd.kh + ky) * cd.kd + kz] *
                           g[(ox * cd.oh + oy) * cd.od + oz];
                }
            }
        }
        gx[q] += acc;
    }
}

template <bool Parallel>
void conv1out_grad_w_impl(const double* x, const double* g, const ConvDims& cd, double* gw) {
    const std::int64_t nrow = cd.cin * cd.kw * cd.kh * cd.kd;
#pragma omp parallel for schedule(static) if (Parallel)
    for (std::int64_t r = 0; r < nrow; ++r) {
        const std::int64_t c = r / (cd.kw * cd.kh * cd.kd);
        const std::int64_t kx = (r / (cd.kh * cd.kd)) % cd.kw;
        const std::int64_t ky = (r / cd.kd) % cd.kh;
        const std::int64_t kz = r % cd.kd;
        double acc = 0.0;
        for (std::int64_t ox = 0; ox < cd.ow; ++ox) {
            const std::int64_t ix = ox * cd.sw - cd.pw + kx;
            if (ix < 0 || ix >= cd.w) continue;
            for (std::int64_t oy = 0; oy < cd.oh; ++oy) {
                const std::int64_t iy = oy * cd.sh - cd.ph + ky;
                if (iy < 0 || iy >= cd.h) continue;
                for (std::int64_t oz = 0; oz < cd.od; ++oz) {
                    const std::int64_t iz = oz * cd.sd - cd.pd + kz;
                    if (iz < 0 || iz >= cd.d) continue;
                    acc += x[((c * cd.w + ix) * cd.h + iy) * cd.d + iz] *
                           g[(ox * cd.oh + oy) * cd.od + oz];
                }
            }
        }
        gw[r] += acc;
    }
}

}  // namespace

void conv1out_forward_serial(const double* x, const double* w, const ConvDims& cd, double* out) {
    conv1out_forward_impl<false>(x, w, cd, out);
}
void conv1out_forward(const double* x, const double* w, const ConvDims& cd, double* out) {
    conv1out_forward_impl<true>(x, w, cd, out);
}
void conv1out_grad_x_serial(const double* w, const double* g, const ConvDims& cd, double* gx) {
    conv1out_grad_x_impl<false>(w, g, cd, gx);
}
void conv1out_grad_x(const double* w, const double* g, const ConvDims& cd, double* gx) {
    conv1out_grad_x_impl<true>(w, g, cd, gx);
}
void conv1out_grad_w_serial(const double* x, const double* g, const ConvDims& cd, double* gw) {
    conv1out_grad_w_impl<false>(x, g, cd, gw);
}
void conv1out_grad_w(const double* x, const double* g, const ConvDims& cd, double* gw) {
    conv1out_grad_w_impl<true>(x, g, cd, gw);
}

}  // namespace sadm::kernels
