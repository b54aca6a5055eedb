#pragma once

#include <cstdint>

#include "sadm/tensor.hpp"

// Hot inner loops, kept separate from the tape so they can be benchmarked
// and cross-checked. Each kernel has a serial reference (*_serial) and an
// OpenMP variant; the parallel variants split work over independent output
// elements only, so results are bit-identical to the serial path for any
// thread count.
namespace sadm::kernels {

// C[m x n] += A[m x k] * B[k x n], row-major.
void matmul_acc_serial(const double* a, const double* b, double* c,
                       std::int64_t m, std::int64_t k, std::int64_t n);
void matmul_acc(const double* a, const double* b, double* c,
                std::int64_t m, std::int64_t k, std::int64_t n);

// out[i] = a[i] op b[i]
void add_serial(const double* a, const double* b, double* out, std::int64_t n);
void add(const double* a, const double* b, double* out, std::int64_t n);
void mul_serial(const double* a, const double* b, double* out, std::int64_t n);
void mul(const double* a, const double* b, double* out, std::int64_t n);

// axpy: out[i] += s * a[i]
void axpy(double s, const double* a, double* out, std::int64_t n);

// Unfold a (C, W, H, D) volume into columns of shape (C*kw*kh*kd, P) where
// P is the number of output positions for the given stride/zero-padding.
// Layout: column p holds the receptive field of output position p, channel
// fastest-varying last (c, kw, kh, kd) row order.
struct ConvDims {
    std::int64_t cin, w, h, d;
    std::int64_t kw, kh, kd;
    std::int64_t sw, sh, sd;
    std::int64_t pw, ph, pd;
    std::int64_t ow, oh, od;  // derived
};

ConvDims conv_dims(std::int64_t cin, std::int64_t w, std::int64_t h, std::int64_t d,
                   std::int64_t kw, std::int64_t kh, std::int64_t kd,
                   std::int64_t sw, std::int64_t sh, std::int64_t sd,
                   std::int64_t pw, std::int64_t ph, std::int64_t pd);

void im2col_serial(const double* x, const ConvDims& cd, double* cols);
void im2col(const double* x, const ConvDims& cd, double* cols);

// Scatter-add columns back into a (C, W, H, D) volume (gradient of im2col).
void col2im_serial(const double* cols, const ConvDims& cd, double* x);
void col2im(const double* cols, const ConvDims& cd, double* x);

// Direct single-output-channel convolution (no column buffer). The generic
// im2col path materializes a (cin*kw*kh*kd) x P matrix, which for a wide
// 1-channel projection head dwarfs every other allocation in a step; these
// loops read the input in place. All three accumulate into their output.
void conv1out_forward_serial(const double* x, const double* w, const ConvDims& cd, double* out);
void conv1out_forward(const double* x, const double* w, const ConvDims& cd, double* out);
// gradient w.r.t. the input, gather form (parallel-safe over input cells)
void conv1out_grad_x_serial(const double* w, const double* g, const ConvDims& cd, double* gx);
void conv1out_grad_x(const double* w, const double* g, const ConvDims& cd, double* gx);
// gradient w.r.t. the kernel
void conv1out_grad_w_serial(const double* x, const double* g, const ConvDims& cd, double* gw);
void conv1out_grad_w(const double* x, const double* g, const ConvDims& cd, double* gw);

}  // namespace sadm::kernels
